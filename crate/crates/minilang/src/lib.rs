//! MiniLang: a small imperative language used as the system under test.
//!
//! The crate covers the whole static and dynamic side of the language:
//! lexing and parsing into an AST with 1-based line numbers, a canonical
//! pretty-printer, cyclomatic complexity and executable-line analysis, a
//! name/type checker, and a tree-walking interpreter that runs `test_*`
//! functions against a program while recording line and branch coverage.

pub mod analysis;
pub mod ast;
pub mod check;
pub mod coverage;
mod error;
#[cfg(feature = "gen")]
pub mod gen;
pub mod interp;
pub mod lexer;
pub mod outcome;
mod parser;
pub mod printer;

pub use analysis::{branch_lines, cyclomatic_complexity, statement_lines, ComplexityScore, COMPLEXITY_THRESHOLD};
pub use ast::{FunctionDecl, GlobalDecl, Program, Stmt, StmtKind, Type, Unpositioned};
pub use coverage::{BranchSite, RawCoverage};
pub use error::{CheckError, ParseError};
pub use interp::{run_test, run_test_traced, ExecutionLimits, ExecutionOutcome, Origin, Status, TraceEvent};
pub use outcome::{classify_outcomes, ErrorDistribution};
pub use parser::parse_program;
