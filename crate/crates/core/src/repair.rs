//! Repairing tests that do not run: three rule-based fixes applied every
//! round (balance brackets, inject stubs, strip assertions), then a model
//! fix when the rules are not enough.

use std::collections::{HashMap, HashSet};

use minilang::ast::{Block, ExprKind, StmtKind};
use minilang::check::is_builtin;
use minilang::lexer::{is_keyword, lex, Tok};
use minilang::{parse_program, run_test, ExecutionLimits, ExecutionOutcome, Program, Status};
use serde::{Deserialize, Serialize};

use crate::context::ContextBundle;
use crate::extraction::{extract_payload, PayloadKind};
use crate::focal::FocalMethod;
use crate::gateway::Gateway;
use crate::isolate::{CandidateState, TestCandidate};
use crate::prompting::PromptAssets;

pub const DEFAULT_MAX_FIX_ROUNDS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFix {
    BalanceBrackets,
    InjectPreamble,
    StripAssertions,
}

fn closer_for(open: char) -> char {
    match open {
        '(' => ')',
        '[' => ']',
        _ => '}',
    }
}

/// Walks `source` outside string literals and `//` comments, calling
/// `on_bracket(byte offset, char, stack)` for every bracket. Returns whether
/// the text ends inside a string or comment.
fn scan_brackets(source: &str, mut on_bracket: impl FnMut(usize, char)) -> bool {
    let mut chars = source.char_indices().peekable();
    let (mut in_str, mut in_comment, mut escaped) = (false, false, false);
    while let Some((i, c)) = chars.next() {
        if c == '\n' {
            in_str = false;
            in_comment = false;
            escaped = false;
            continue;
        }
        if in_comment {
            continue;
        }
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '/' if chars.peek().map(|&(_, n)| n) == Some('/') => in_comment = true,
            '(' | ')' | '[' | ']' | '{' | '}' => on_bracket(i, c),
            _ => {}
        }
    }
    in_str || in_comment
}

/// Whether every bracket outside strings and comments is matched in order.
pub fn is_balanced(source: &str) -> bool {
    let mut stack = Vec::new();
    let mut ok = true;
    scan_brackets(source, |_, c| match c {
        '(' | '[' | '{' => stack.push(c),
        _ => ok &= stack.pop().map(closer_for) == Some(c),
    });
    ok && stack.is_empty()
}

/// Drops closers that match no opener and appends the closers still
/// missing at the end of the text, innermost first.
pub fn balance_brackets(source: &str) -> String {
    let mut stack: Vec<char> = Vec::new();
    let mut drop: Vec<usize> = Vec::new();
    let open_at_end = scan_brackets(source, |i, c| match c {
        '(' | '[' | '{' => stack.push(c),
        _ => {
            if stack.last().map(|&o| closer_for(o)) == Some(c) {
                stack.pop();
            } else {
                drop.push(i);
            }
        }
    });
    if drop.is_empty() && stack.is_empty() {
        return source.to_string();
    }
    let mut out: String = source
        .char_indices()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, c)| c)
        .collect();
    if !stack.is_empty() && open_at_end {
        out.push('\n');
    }
    out.extend(stack.iter().rev().map(|&o| closer_for(o)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub source: String,
    /// Set when the source did not parse and was returned unchanged.
    pub warning: Option<String>,
}

fn assert_lines(block: &Block, out: &mut HashSet<u32>) {
    block.walk(&mut |s| {
        if let StmtKind::Assert(e) = &s.kind {
            if !matches!(e.kind, ExprKind::Bool(true)) {
                out.insert(s.line);
            }
        }
    });
}

/// Rewrites `assert(e);` to `let __discard_<line>: bool = (e);` so the
/// expression is still evaluated but cannot fail. `assert(true)` is kept.
/// Line structure is unchanged.
pub fn strip_assertions(source: &str) -> Stripped {
    let program = match parse_program(source, "<test>") {
        Ok(p) => p,
        Err(e) => {
            return Stripped {
                source: source.to_string(),
                warning: Some(format!("not stripped, parse error at {e}")),
            }
        }
    };
    let mut lines = HashSet::new();
    for f in &program.functions {
        assert_lines(&f.body, &mut lines);
    }
    let tokens = match lex(source) {
        Ok(l) => l.tokens,
        Err(e) => {
            return Stripped {
                source: source.to_string(),
                warning: Some(format!("not stripped, parse error at {e}")),
            }
        }
    };
    let mut out = String::with_capacity(source.len() + 16 * lines.len());
    let mut copied = 0;
    for pair in tokens.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.tok == Tok::Assert && b.tok == Tok::LParen && lines.contains(&a.pos.line) {
            out.push_str(&source[copied..a.start]);
            out.push_str(&format!("let __discard_{}: bool = (", a.pos.line));
            copied = b.end;
        }
    }
    out.push_str(&source[copied..]);
    Stripped {
        source: out,
        warning: None,
    }
}

fn stub_params(arity: usize) -> String {
    (0..arity)
        .map(|i| {
            let name = if i < 26 {
                ((b'a' + i as u8) as char).to_string()
            } else {
                format!("p{i}")
            };
            format!("{name}:int")
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Calls `name(...)` in `source` with their argument counts, in order.
/// Works on the token stream, so it tolerates files that do not parse.
fn call_sites(tokens: &[Tok]) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let Tok::Ident(name) = t else { continue };
        if tokens.get(i + 1) != Some(&Tok::LParen) || (i > 0 && tokens[i - 1] == Tok::Fn) {
            continue;
        }
        let (mut depth, mut commas, mut empty) = (0i32, 0, true);
        for t in &tokens[i + 2..] {
            match t {
                Tok::LParen | Tok::LBracket | Tok::LBrace => depth += 1,
                Tok::RParen | Tok::RBracket | Tok::RBrace if depth == 0 => break,
                Tok::RParen | Tok::RBracket | Tok::RBrace => depth -= 1,
                Tok::Comma if depth == 0 => commas += 1,
                Tok::Semi | Tok::Eof => break,
                _ => {}
            }
            empty = false;
        }
        out.push((name.clone(), if empty { 0 } else { commas + 1 }));
    }
    out
}

/// Prepends one `int`-returning stub per function called in the test but
/// defined neither in the test, the program nor the builtins. Arity comes
/// from the first call site. Sources without unresolved calls are returned
/// unchanged.
pub fn inject_preamble(source: &str, program: &Program) -> String {
    let Ok(lexed) = lex(source) else {
        return source.to_string();
    };
    let toks: Vec<Tok> = lexed.tokens.into_iter().map(|t| t.tok).collect();
    let defined: HashSet<&str> = toks
        .windows(2)
        .filter_map(|w| match w {
            [Tok::Fn, Tok::Ident(n)] => Some(n.as_str()),
            _ => None,
        })
        .collect();
    let mut seen = HashSet::new();
    let mut stubs = Vec::new();
    for (name, arity) in call_sites(&toks) {
        let known = defined.contains(name.as_str())
            || program.function(&name).is_some()
            || is_builtin(&name)
            || is_keyword(&name);
        if !known && seen.insert(name.clone()) {
            stubs.push(format!("fn {name}({})->int{{return 0;}}", stub_params(arity)));
        }
    }
    if stubs.is_empty() {
        return source.to_string();
    }
    format!("{}\n{source}", stubs.join("\n"))
}

/// Applies the rule fixes in order, reporting which ones changed the text.
pub fn apply_rule_fixes(source: &str, program: &Program) -> (String, Vec<RuleFix>, Option<String>) {
    let mut applied = Vec::new();
    let balanced = balance_brackets(source);
    if balanced != source {
        applied.push(RuleFix::BalanceBrackets);
    }
    let injected = inject_preamble(&balanced, program);
    if injected != balanced {
        applied.push(RuleFix::InjectPreamble);
    }
    let stripped = strip_assertions(&injected);
    if stripped.source != injected {
        applied.push(RuleFix::StripAssertions);
    }
    (stripped.source, applied, stripped.warning)
}

/// Status, message and line of an execution, without coverage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub status: Status,
    pub message: String,
    pub failing_line: Option<u32>,
}

impl From<&ExecutionOutcome> for OutcomeSummary {
    fn from(o: &ExecutionOutcome) -> Self {
        Self {
            status: o.status,
            message: o.message.clone(),
            failing_line: o.failing_line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptResult {
    NowPassing,
    StillFailing,
    Abandoned,
}

/// One repair round of one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixAttempt {
    pub candidate: String,
    pub round: u32,
    /// The failure that started this round.
    pub trigger: OutcomeSummary,
    pub rule_fixes_applied: Vec<RuleFix>,
    /// Outcome of running the rule-fixed source; absent when the source was
    /// a duplicate and was not run.
    pub outcome: Option<OutcomeSummary>,
    pub result: AttemptResult,
    /// Escalation attempts spent on the model fix requested in this round.
    pub llm_attempts: Option<usize>,
    pub prompt_chars: Option<usize>,
    pub note: Option<String>,
}

pub struct FixContext<'a> {
    pub program: &'a Program,
    pub focal: &'a FocalMethod,
    pub context: &'a ContextBundle,
    pub assets: &'a PromptAssets,
    pub gateway: &'a Gateway,
    pub limits: ExecutionLimits,
    pub max_rounds: u32,
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub candidate: TestCandidate,
    pub attempts: Vec<FixAttempt>,
    /// Interpreter runs performed by the loop.
    pub executions: usize,
    /// Gateway completions requested, counting every escalation attempt.
    pub llm_calls: usize,
}

/// Repairs a candidate whose first run gave `initial`. Each round applies
/// the rule fixes and runs the result; on failure it asks the model for a
/// fix, which the next round starts from. Stops at the first pass, after
/// `max_rounds` rounds, when the model returns a source already tried, or
/// when the gateway fails.
pub fn self_debug_loop(mut candidate: TestCandidate, initial: &ExecutionOutcome, fx: &FixContext) -> RepairOutcome {
    let mut known: HashMap<String, ExecutionOutcome> = HashMap::new();
    known.insert(candidate.source.clone(), initial.clone());
    let mut attempts = Vec::new();
    let (mut executions, mut llm_calls) = (0, 0);
    let mut trigger = initial.clone();
    let mut from_model = false;

    for round in 1..=fx.max_rounds.max(1) {
        candidate.fix_round = round;
        let (fixed, rules, warning) = apply_rule_fixes(&candidate.source, fx.program);
        let mut attempt = FixAttempt {
            candidate: candidate.id.clone(),
            round,
            trigger: OutcomeSummary::from(&trigger),
            rule_fixes_applied: rules.clone(),
            outcome: None,
            result: AttemptResult::StillFailing,
            llm_attempts: None,
            prompt_chars: None,
            note: warning,
        };
        if from_model && known.contains_key(&fixed) {
            attempt.note = Some("duplicate source, not re-run".into());
            attempts.push(attempt);
            candidate.abandon_reason = Some("model returned a source that was already tried".into());
            candidate.transition(CandidateState::Abandoned);
            break;
        }
        if !rules.is_empty() && !from_model {
            candidate.transition(CandidateState::RuleFixed);
        }
        candidate.source = fixed.clone();
        let outcome = match known.get(&fixed) {
            Some(o) => o.clone(),
            None => {
                executions += 1;
                let o = run_test(fx.program, &fixed, &fx.limits);
                known.insert(fixed.clone(), o.clone());
                o
            }
        };
        attempt.outcome = Some(OutcomeSummary::from(&outcome));
        if outcome.passed() {
            attempt.result = AttemptResult::NowPassing;
            attempts.push(attempt);
            candidate.transition(CandidateState::Passed);
            break;
        }
        if round >= fx.max_rounds {
            attempt.result = AttemptResult::Abandoned;
            attempts.push(attempt);
            candidate.abandon_reason = Some(format!("still failing after {round} rounds"));
            candidate.transition(CandidateState::Abandoned);
            break;
        }
        let bundle = fx.assets.render_fix(fx.focal, fx.context, &candidate, &outcome);
        attempt.prompt_chars = Some(bundle.rendered_len());
        let reply = fx
            .gateway
            .complete_with_escalation(&bundle.messages, |raw| extract_payload(raw, PayloadKind::FixedTest));
        match reply {
            Ok(r) => {
                llm_calls += r.attempts;
                attempt.llm_attempts = Some(r.attempts);
                attempts.push(attempt);
                candidate.source = r.value.test_source().unwrap_or_default().to_string();
                candidate.transition(CandidateState::LlmFixed);
                from_model = true;
                trigger = outcome;
            }
            Err(e) => {
                if let crate::gateway::GatewayError::FormatExhausted { attempts: raws, .. } = &e {
                    llm_calls += raws.len();
                }
                attempt.result = AttemptResult::Abandoned;
                attempt.note = Some(e.to_string());
                attempts.push(attempt);
                candidate.abandon_reason = Some(e.to_string());
                candidate.transition(CandidateState::Abandoned);
                break;
            }
        }
    }
    RepairOutcome {
        candidate,
        attempts,
        executions,
        llm_calls,
    }
}
