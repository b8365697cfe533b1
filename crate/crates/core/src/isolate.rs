//! Splitting a generated test file into one standalone file per test.
//!
//! The split is lexical so it also works on files that do not parse: the
//! text is cut into top-level declaration chunks by tracking brace depth,
//! skipping string literals and comments. Each chunk carries the blank and
//! comment lines that precede it.

use std::collections::HashSet;

use minilang::Status;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsolationError {
    #[error("the test file defines no `test_*` function")]
    NoTests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateState {
    Fresh,
    RuleFixed,
    LlmFixed,
    Passed,
    Abandoned,
}

/// One isolated test, tracked through execution and repair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCandidate {
    /// `<focal>/slice-<i>/<test>`, with `#<n>` appended on name clashes.
    pub id: String,
    pub slice_index: usize,
    pub test_name: String,
    /// Current source: the generated text, or the latest repaired version.
    pub source: String,
    /// Source as isolated from the generated file, assertions intact.
    pub original_source: String,
    pub state: CandidateState,
    /// Every state the candidate has been in, starting with `fresh`.
    pub history: Vec<CandidateState>,
    pub fix_round: u32,
    /// Status of the first execution, before any repair.
    pub initial_status: Option<Status>,
    pub abandon_reason: Option<String>,
}

impl TestCandidate {
    pub fn new(id: String, slice_index: usize, test_name: String, source: String) -> Self {
        Self {
            id,
            slice_index,
            test_name,
            original_source: source.clone(),
            source,
            state: CandidateState::Fresh,
            history: vec![CandidateState::Fresh],
            fix_round: 0,
            initial_status: None,
            abandon_reason: None,
        }
    }

    pub fn transition(&mut self, state: CandidateState) {
        if self.state != state {
            self.state = state;
            self.history.push(state);
        }
    }

    pub fn passed(&self) -> bool {
        self.state == CandidateState::Passed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Chunk {
    text: String,
    /// Name of the test function this chunk defines, if it is one.
    test: Option<String>,
}

/// Brace depth scanner state carried across lines.
#[derive(Default)]
struct Scan {
    depth: i64,
    in_str: bool,
}

impl Scan {
    /// Advances over one line; returns whether a `{` was seen and whether a
    /// `;` occurred at depth zero.
    fn line(&mut self, line: &str) -> (bool, bool) {
        let (mut opened, mut semi0) = (false, false);
        let mut chars = line.chars().peekable();
        let mut escaped = false;
        while let Some(c) = chars.next() {
            if self.in_str {
                match c {
                    _ if escaped => escaped = false,
                    '\\' => escaped = true,
                    '"' => self.in_str = false,
                    '\n' => self.in_str = false,
                    _ => {}
                }
                continue;
            }
            match c {
                '"' => self.in_str = true,
                '/' if chars.peek() == Some(&'/') => break,
                '{' => {
                    self.depth += 1;
                    opened = true;
                }
                '}' => self.depth = (self.depth - 1).max(0),
                ';' if self.depth == 0 => semi0 = true,
                _ => {}
            }
        }
        // Strings do not span lines.
        self.in_str = false;
        (opened, semi0)
    }
}

/// Name of a test function declared by a header like `fn test_x()`.
fn test_name(header: &str) -> Option<String> {
    let rest = header.trim_start().strip_prefix("fn")?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let rest = rest.trim_start();
    let name: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
    let after = rest[name.len()..].trim_start().strip_prefix('(')?;
    let params = after.split(')').next()?;
    (name.starts_with("test_") && params.trim().is_empty()).then_some(name)
}

fn starts_decl(line: &str) -> bool {
    let t = line.trim_start();
    ["fn", "let"]
        .iter()
        .any(|kw| t.strip_prefix(kw).is_some_and(|r| r.starts_with(char::is_whitespace)))
}

/// A function chunk ends once its body brace closes; a global ends at a
/// top-level `;`.
fn still_open(is_fn: bool, seen_brace: bool, semi0: bool, depth: i64) -> bool {
    if depth > 0 {
        return true;
    }
    if is_fn {
        !seen_brace
    } else {
        !semi0
    }
}

fn chunks(source: &str) -> (Vec<Chunk>, String) {
    let mut out: Vec<Chunk> = Vec::new();
    let mut pending = String::new();
    let mut scan = Scan::default();
    // Whether the chunk being built still expects more lines.
    let mut open = false;
    let mut seen_brace = false;
    let mut is_fn = false;
    for line in source.split_inclusive('\n') {
        let at_top = scan.depth == 0;
        if at_top && starts_decl(line) {
            is_fn = line.trim_start().starts_with("fn");
            out.push(Chunk {
                text: std::mem::take(&mut pending) + line,
                test: if is_fn { test_name(line) } else { None },
            });
            seen_brace = false;
            let (opened, semi0) = scan.line(line);
            seen_brace |= opened;
            open = still_open(is_fn, seen_brace, semi0, scan.depth);
            continue;
        }
        if (!at_top || open) && !out.is_empty() {
            let last = out.last_mut().expect("chunk");
            last.text.push_str(line);
            let (opened, semi0) = scan.line(line);
            seen_brace |= opened;
            open = still_open(is_fn, seen_brace, semi0, scan.depth);
            continue;
        }
        scan.line(line);
        pending.push_str(line);
    }
    (out, pending)
}

/// Splits `source` into one standalone file per `test_*` function, in
/// declaration order. Every non-test declaration is copied into each file
/// and leading blank lines are dropped, so a file with a single test and no
/// leading blank lines is returned unchanged.
pub fn split_tests(source: &str) -> Result<Vec<(String, String)>, IsolationError> {
    let (chunks, trailing) = chunks(source);
    let tests: Vec<&String> = chunks.iter().filter_map(|c| c.test.as_ref()).collect();
    if tests.is_empty() {
        return Err(IsolationError::NoTests);
    }
    Ok(tests
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mut text = String::new();
            let mut seen_tests = 0;
            for c in &chunks {
                if c.test.is_some() {
                    seen_tests += 1;
                    if seen_tests != k + 1 {
                        continue;
                    }
                }
                text.push_str(&c.text);
            }
            text.push_str(&trailing);
            let start = text.len() - text.trim_start_matches(['\n', '\r', ' ', '\t']).len();
            let start = text[..start].rfind('\n').map_or(0, |i| i + 1);
            (name.to_string(), text[start..].to_string())
        })
        .collect())
}

/// Isolates the tests of a generated file into candidates. `taken` holds ids
/// already used in the run; new ids are added to it.
pub fn isolate_tests(
    source: &str,
    focal: &str,
    slice_index: usize,
    taken: &mut HashSet<String>,
) -> Result<Vec<TestCandidate>, IsolationError> {
    Ok(split_tests(source)?
        .into_iter()
        .map(|(name, text)| {
            let base = format!("{focal}/slice-{slice_index}/{name}");
            let mut id = base.clone();
            let mut n = 1;
            while taken.contains(&id) {
                n += 1;
                id = format!("{base}#{n}");
            }
            taken.insert(id.clone());
            TestCandidate::new(id, slice_index, name, text)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = "/// Shared input.\nlet BASE: int = 3;\n\nfn helper(x: int) -> int {\n    return x + BASE;\n}\n\n/// First.\nfn test_a() {\n    assert(helper(1) == 4);\n}\n\nfn test_b() {\n    print(\"}{\"); // }\n}\n\nfn test_c()\n{\n    print(helper(2));\n}\n";

    #[test]
    fn three_tests_share_the_helper() {
        let parts = split_tests(FILE).unwrap();
        let names: Vec<&str> = parts.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["test_a", "test_b", "test_c"]);
        assert_eq!(
            parts[1].1,
            "/// Shared input.\nlet BASE: int = 3;\n\nfn helper(x: int) -> int {\n    return x + BASE;\n}\n\nfn test_b() {\n    print(\"}{\"); // }\n}\n"
        );
        for (_, text) in &parts {
            assert!(text.contains("fn helper(x: int)"));
            minilang::parse_program(text, "t.mini").unwrap();
        }
        assert!(parts[2].1.ends_with("fn test_c()\n{\n    print(helper(2));\n}\n"));
    }

    #[test]
    fn single_test_is_unchanged() {
        let src = "fn test_only() {\n    print(1);\n}";
        assert_eq!(
            split_tests(src).unwrap(),
            vec![("test_only".to_string(), src.to_string())]
        );
    }

    #[test]
    fn unbalanced_last_test_keeps_the_rest_of_the_file() {
        let src = "fn test_a() {\n    print(1);\n}\n\nfn test_b() {\n    print(2);\n";
        let parts = split_tests(src).unwrap();
        assert_eq!(parts[0].1, "fn test_a() {\n    print(1);\n}\n");
        assert_eq!(parts[1].1, "fn test_b() {\n    print(2);\n");
    }

    #[test]
    fn parameterized_functions_are_helpers() {
        assert_eq!(split_tests("fn test_x(a: int) {\n}\n"), Err(IsolationError::NoTests));
    }

    #[test]
    fn ids_are_unique() {
        let mut taken = HashSet::new();
        let src = "fn test_a() {\n}\n";
        let a = isolate_tests(src, "f.mini::g", 1, &mut taken).unwrap();
        let b = isolate_tests(src, "f.mini::g", 1, &mut taken).unwrap();
        assert_eq!(a[0].id, "f.mini::g/slice-1/test_a");
        assert_eq!(b[0].id, "f.mini::g/slice-1/test_a#2");
    }
}
