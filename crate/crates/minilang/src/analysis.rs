//! Static metrics over function bodies: cyclomatic complexity, executable
//! lines and branch sites.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityScore {
    pub decisions: u32,
    pub cyclomatic: u32,
}

impl ComplexityScore {
    pub fn from_decisions(decisions: u32) -> Self {
        Self {
            decisions,
            cyclomatic: decisions + 1,
        }
    }

    /// Complex methods have cyclomatic complexity strictly above the threshold.
    pub fn exceeds(&self, threshold: u32) -> bool {
        self.cyclomatic > threshold
    }
}

/// Default threshold above which a function counts as complex.
pub const COMPLEXITY_THRESHOLD: u32 = 10;

fn short_circuits(e: &Expr) -> u32 {
    let mut n = 0;
    e.walk(&mut |e| {
        if let ExprKind::Binary(op, ..) = e.kind {
            if op.is_short_circuit() {
                n += 1;
            }
        }
    });
    n
}

/// Decision points contributed by the statement itself, excluding nested blocks.
pub fn own_decisions(stmt: &Stmt) -> u32 {
    let branch = u32::from(stmt.is_branching());
    branch + stmt.own_exprs().into_iter().map(short_circuits).sum::<u32>()
}

/// Decision points of a statement including everything nested inside it.
pub fn stmt_decisions(stmt: &Stmt) -> u32 {
    let mut n = 0;
    let block = Block {
        stmts: vec![stmt.clone()],
        open: Default::default(),
        close: Default::default(),
    };
    block.walk(&mut |s| n += own_decisions(s));
    n
}

/// `if`/`while`/`for` statements plus every `&&` and `||`, plus one.
pub fn cyclomatic_complexity(f: &FunctionDecl) -> ComplexityScore {
    let mut decisions = 0;
    f.body.walk(&mut |s| decisions += own_decisions(s));
    ComplexityScore::from_decisions(decisions)
}

/// Decision points keyed by the line of the statement that owns them.
pub fn decisions_by_line(f: &FunctionDecl) -> BTreeMap<u32, u32> {
    let mut out = BTreeMap::new();
    f.body.walk(&mut |s| {
        let d = own_decisions(s);
        if d > 0 {
            *out.entry(s.line).or_insert(0) += d;
        }
    });
    out
}

/// Whether a statement executing counts as covering its line. A `let`
/// without an initializer declares but does nothing.
pub fn is_executable(stmt: &Stmt) -> bool {
    !matches!(stmt.kind, StmtKind::Let { init: None, .. })
}

/// Lines carrying executable statements.
pub fn statement_lines(f: &FunctionDecl) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    f.body.walk(&mut |s| {
        if is_executable(s) {
            out.insert(s.line);
        }
    });
    out
}

/// Lines of `if`/`while`/`for` statements; each contributes a true and a false arm.
pub fn branch_lines(f: &FunctionDecl) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    f.body.walk(&mut |s| {
        if s.is_branching() {
            out.insert(s.line);
        }
    });
    out
}

/// Names of functions called anywhere in the body, in first-occurrence order.
pub fn callees(f: &FunctionDecl) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    f.body.walk(&mut |s| {
        for e in s.own_exprs() {
            e.walk(&mut |e| {
                if let ExprKind::Call(name, _) = &e.kind {
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
            });
        }
    });
    out
}

/// Variable names read or written in the body, in first-occurrence order.
pub fn referenced_names(f: &FunctionDecl) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut add = |n: &str| {
        if !out.iter().any(|o| o == n) {
            out.push(n.to_string());
        }
    };
    f.body.walk(&mut |s| {
        let mut targets = Vec::new();
        if let StmtKind::Assign { target, .. } = &s.kind {
            targets.push(target.name().to_string());
        }
        if let StmtKind::For { init, step, .. } = &s.kind {
            for st in [init, step] {
                if let StmtKind::Assign { target, .. } = &st.kind {
                    targets.push(target.name().to_string());
                }
            }
        }
        // Reads and writes interleave in source order: index/value expressions
        // come after the target name textually.
        for t in &targets {
            add(t);
        }
        for e in s.own_exprs() {
            e.walk(&mut |e| {
                if let ExprKind::Var(n) = &e.kind {
                    add(n);
                }
            });
        }
    });
    out
}
