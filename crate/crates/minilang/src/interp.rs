//! Tree-walking interpreter that runs a test source against a program and
//! records line and branch coverage of the program's functions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::analysis::is_executable;
use crate::ast::*;
use crate::check::check;
use crate::coverage::RawCoverage;
use crate::parser::parse_program;

/// Stack reserved for the interpreter thread; deep MiniLang recursion maps
/// onto Rust recursion.
const INTERPRETER_STACK: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLimits {
    pub max_steps: u64,
    pub max_call_depth: u32,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            max_call_depth: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    CompileError,
    RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOutcome {
    pub status: Status,
    /// Empty when passed.
    pub message: String,
    /// Line in the test source: where a compile error sits, or the test
    /// statement executing when a runtime fault happened.
    pub failing_line: Option<u32>,
    pub coverage: RawCoverage,
}

impl ExecutionOutcome {
    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }

    fn compile_error(message: String, failing_line: Option<u32>) -> Self {
        Self {
            status: Status::CompileError,
            message,
            failing_line,
            coverage: RawCoverage::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Program,
    Test,
}

/// Step-trace events, emitted in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// A test function is about to run with freshly initialized globals.
    Test {
        name: String,
    },
    Stmt {
        origin: Origin,
        function: String,
        line: u32,
    },
    Cond {
        origin: Origin,
        function: String,
        line: u32,
        value: bool,
    },
    Print {
        text: String,
    },
}

/// Parse and check `test_source` against `program`, then run every `test_*`
/// function in declaration order.
pub fn run_test(program: &Program, test_source: &str, limits: &ExecutionLimits) -> ExecutionOutcome {
    execute(program, test_source, limits, false).0
}

/// Like [`run_test`], also returning the step trace.
pub fn run_test_traced(
    program: &Program,
    test_source: &str,
    limits: &ExecutionLimits,
) -> (ExecutionOutcome, Vec<TraceEvent>) {
    execute(program, test_source, limits, true)
}

fn execute(
    program: &Program,
    test_source: &str,
    limits: &ExecutionLimits,
    traced: bool,
) -> (ExecutionOutcome, Vec<TraceEvent>) {
    let test = match parse_program(test_source, "<test>") {
        Ok(t) => t,
        Err(e) => {
            return (
                ExecutionOutcome::compile_error(
                    format!("parse error at test line {}:{}: {}", e.line, e.column, e.message),
                    Some(e.line),
                ),
                Vec::new(),
            )
        }
    };
    if let Err(e) = check(program, Some(&test)) {
        let line = e.in_test.then_some(e.line);
        return (ExecutionOutcome::compile_error(e.to_string(), line), Vec::new());
    }
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name("minilang-interp".into())
            .stack_size(INTERPRETER_STACK)
            .spawn_scoped(scope, || {
                let mut interp = Interp::new(program, &test, *limits, traced);
                let outcome = interp.run_tests();
                (outcome, interp.trace)
            })
            .expect("spawn interpreter thread")
            .join()
            .expect("interpreter thread panicked")
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    Arr(Vec<i64>),
    Unit,
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => s.clone(),
            Value::Arr(a) => {
                let items: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                format!("[{}]", items.join(", "))
            }
            Value::Unit => String::new(),
        }
    }
}

enum Flow {
    Next,
    Return(Value),
}

#[derive(Debug)]
struct Fault {
    message: String,
    failing_line: Option<u32>,
    /// Step exhaustion stops the whole run, not just the current test.
    fatal: bool,
}

struct Frame<'p> {
    function: &'p str,
    origin: Origin,
    line: u32,
    scopes: Vec<HashMap<&'p str, Value>>,
}

struct Interp<'p> {
    functions: HashMap<&'p str, (&'p FunctionDecl, Origin)>,
    globals_decl: Vec<(&'p GlobalDecl, Origin)>,
    tests: Vec<&'p FunctionDecl>,
    globals: HashMap<&'p str, Value>,
    frames: Vec<Frame<'p>>,
    steps: u64,
    limits: ExecutionLimits,
    coverage: RawCoverage,
    trace: Vec<TraceEvent>,
    traced: bool,
}

type Eval<T> = Result<T, Fault>;

impl<'p> Interp<'p> {
    fn new(program: &'p Program, test: &'p Program, limits: ExecutionLimits, traced: bool) -> Self {
        let mut functions = HashMap::new();
        for f in &program.functions {
            functions.insert(f.name.as_str(), (f, Origin::Program));
        }
        for f in &test.functions {
            functions.insert(f.name.as_str(), (f, Origin::Test));
        }
        let globals_decl = program
            .globals
            .iter()
            .map(|g| (g, Origin::Program))
            .chain(test.globals.iter().map(|g| (g, Origin::Test)))
            .collect();
        Self {
            functions,
            globals_decl,
            tests: test.functions.iter().filter(|f| f.is_test()).collect(),
            globals: HashMap::new(),
            frames: Vec::new(),
            steps: 0,
            limits,
            coverage: RawCoverage::default(),
            trace: Vec::new(),
            traced,
        }
    }

    fn run_tests(&mut self) -> ExecutionOutcome {
        let mut first_fault: Option<Fault> = None;
        for test in self.tests.clone() {
            if self.traced {
                self.trace.push(TraceEvent::Test {
                    name: test.name.clone(),
                });
            }
            let result = self.init_globals().and_then(|_| self.call(test, Vec::new()));
            self.frames.clear();
            if let Err(fault) = result {
                let fatal = fault.fatal;
                first_fault.get_or_insert(fault);
                if fatal {
                    break;
                }
            }
        }
        let coverage = std::mem::take(&mut self.coverage);
        match first_fault {
            None => ExecutionOutcome {
                status: Status::Passed,
                message: String::new(),
                failing_line: None,
                coverage,
            },
            Some(f) => ExecutionOutcome {
                status: Status::RuntimeError,
                message: f.message,
                failing_line: f.failing_line,
                coverage,
            },
        }
    }

    fn init_globals(&mut self) -> Eval<()> {
        self.globals.clear();
        for (g, origin) in self.globals_decl.clone() {
            self.frames.push(Frame {
                function: "<global>",
                origin,
                line: g.line,
                scopes: Vec::new(),
            });
            let v = self.eval(&g.init)?;
            self.frames.pop();
            self.globals.insert(g.name.as_str(), v);
        }
        Ok(())
    }

    fn fault(&self, what: impl Into<String>) -> Fault {
        let what = what.into();
        let (message, failing_line) = match self.frames.last() {
            Some(top) => {
                let origin = match top.origin {
                    Origin::Program => "program",
                    Origin::Test => "test",
                };
                let test_line = self
                    .frames
                    .iter()
                    .rev()
                    .find(|f| f.origin == Origin::Test)
                    .map(|f| f.line);
                (
                    format!("{what} (in `{}` at {origin} line {})", top.function, top.line),
                    test_line,
                )
            }
            None => (what, None),
        };
        Fault {
            message,
            failing_line,
            fatal: false,
        }
    }

    fn step(&mut self) -> Eval<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            let mut f = self.fault(format!("step limit exceeded ({} steps)", self.limits.max_steps));
            f.fatal = true;
            return Err(f);
        }
        Ok(())
    }

    fn frame(&mut self) -> &mut Frame<'p> {
        self.frames.last_mut().expect("active frame")
    }

    fn call(&mut self, f: &'p FunctionDecl, args: Vec<Value>) -> Eval<Value> {
        if self.frames.len() as u32 >= self.limits.max_call_depth {
            return Err(self.fault(format!(
                "call depth limit exceeded ({}) calling `{}`",
                self.limits.max_call_depth, f.name
            )));
        }
        let origin = self.functions.get(f.name.as_str()).map_or(Origin::Test, |x| x.1);
        let mut scope = HashMap::new();
        for (p, v) in f.params.iter().zip(args) {
            scope.insert(p.name.as_str(), v);
        }
        self.frames.push(Frame {
            function: &f.name,
            origin,
            line: f.span.first_line,
            scopes: vec![scope],
        });
        let flow = self.block(&f.body)?;
        let result = match flow {
            Flow::Return(v) => v,
            Flow::Next if f.return_type.is_some() => {
                self.frame().line = f.body.close.line;
                return Err(self.fault(format!("`{}` ended without returning a value", f.name)));
            }
            Flow::Next => Value::Unit,
        };
        self.frames.pop();
        Ok(result)
    }

    fn block(&mut self, b: &'p Block) -> Eval<Flow> {
        self.frame().scopes.push(HashMap::new());
        for s in &b.stmts {
            match self.stmt(s)? {
                Flow::Next => {}
                ret => {
                    self.frame().scopes.pop();
                    return Ok(ret);
                }
            }
        }
        self.frame().scopes.pop();
        Ok(Flow::Next)
    }

    fn lookup(&self, name: &str) -> Option<&Value> {
        let frame = self.frames.last()?;
        frame
            .scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .or_else(|| self.globals.get(name))
    }

    fn lookup_mut(&mut self, name: &str) -> Option<&mut Value> {
        let frame = self.frames.last_mut()?;
        match frame.scopes.iter_mut().rev().find_map(|s| s.get_mut(name)) {
            Some(v) => Some(v),
            None => self.globals.get_mut(name),
        }
    }

    fn record_stmt(&mut self, s: &Stmt) {
        let frame = self.frames.last().expect("frame");
        let (function, origin) = (frame.function, frame.origin);
        if !is_executable(s) {
            return;
        }
        if origin == Origin::Program {
            self.coverage.covered_lines.insert((function.to_string(), s.line));
        }
        if self.traced {
            self.trace.push(TraceEvent::Stmt {
                origin,
                function: function.to_string(),
                line: s.line,
            });
        }
    }

    fn condition(&mut self, s: &Stmt, cond: &'p Expr) -> Eval<bool> {
        let v = match self.eval(cond)? {
            Value::Bool(b) => b,
            other => return Err(self.fault(format!("condition evaluated to non-boolean {other:?}"))),
        };
        let frame = self.frames.last().expect("frame");
        let (function, origin) = (frame.function, frame.origin);
        if origin == Origin::Program {
            self.coverage.record_branch(function, s.line, v);
        }
        if self.traced {
            self.trace.push(TraceEvent::Cond {
                origin,
                function: function.to_string(),
                line: s.line,
                value: v,
            });
        }
        Ok(v)
    }

    fn stmt(&mut self, s: &'p Stmt) -> Eval<Flow> {
        self.step()?;
        self.frame().line = s.line;
        self.record_stmt(s);
        self.stmt_body(s)
    }

    fn stmt_body(&mut self, s: &'p Stmt) -> Eval<Flow> {
        match &s.kind {
            StmtKind::Let { name, ty, init } => {
                let v = match (init, ty) {
                    (Some(e), _) => self.eval(e)?,
                    (None, Some(Type::Int)) => Value::Int(0),
                    (None, Some(Type::Bool)) => Value::Bool(false),
                    (None, Some(Type::Str)) => Value::Str(String::new()),
                    (None, Some(Type::IntArray)) => Value::Arr(Vec::new()),
                    (None, None) => Value::Unit,
                };
                self.frame().scopes.last_mut().expect("scope").insert(name.as_str(), v);
            }
            StmtKind::Assign { target, value } => {
                let v = self.eval(value)?;
                match target {
                    LValue::Var(name) => match self.lookup_mut(name) {
                        Some(slot) => *slot = v,
                        None => return Err(self.fault(format!("unresolved variable `{name}`"))),
                    },
                    LValue::Index(name, idx) => {
                        let i = self.int(idx)?;
                        let Value::Int(v) = v else {
                            return Err(self.fault("array elements must be int"));
                        };
                        let bad = |len: usize| format!("index {i} out of bounds for length {len}");
                        let msg = match self.lookup_mut(name) {
                            Some(Value::Arr(arr)) => match usize::try_from(i).ok().filter(|&i| i < arr.len()) {
                                Some(i) => {
                                    arr[i] = v;
                                    None
                                }
                                None => Some(bad(arr.len())),
                            },
                            _ => Some(format!("`{name}` is not an array")),
                        };
                        if let Some(msg) = msg {
                            return Err(self.fault(msg));
                        }
                    }
                }
            }
            StmtKind::If { cond, then, otherwise } => {
                if self.condition(s, cond)? {
                    return self.block(then);
                }
                match otherwise {
                    Some(Else::Block(b)) => return self.block(b),
                    Some(Else::If(nested)) => return self.stmt(nested),
                    None => {}
                }
            }
            StmtKind::While { cond, body } => loop {
                self.step()?;
                self.frame().line = s.line;
                if !self.condition(s, cond)? {
                    break;
                }
                if let ret @ Flow::Return(_) = self.block(body)? {
                    return Ok(ret);
                }
            },
            StmtKind::For { init, cond, step, body } => {
                self.frame().scopes.push(HashMap::new());
                let result = self.for_loop(s, init, cond, step, body);
                self.frame().scopes.pop();
                return result;
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e)?,
                    None => Value::Unit,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Call(e) => {
                self.eval(e)?;
            }
            StmtKind::Assert(e) => match self.eval(e)? {
                Value::Bool(true) => {}
                _ => return Err(self.fault("assertion failed")),
            },
            StmtKind::Print(e) => {
                let text = self.eval(e)?.render();
                if self.traced {
                    self.trace.push(TraceEvent::Print { text });
                }
            }
        }
        Ok(Flow::Next)
    }

    fn for_loop(&mut self, s: &'p Stmt, init: &'p Stmt, cond: &'p Expr, step: &'p Stmt, body: &'p Block) -> Eval<Flow> {
        self.stmt_body(init)?;
        loop {
            self.step()?;
            self.frame().line = s.line;
            if !self.condition(s, cond)? {
                return Ok(Flow::Next);
            }
            if let ret @ Flow::Return(_) = self.block(body)? {
                return Ok(ret);
            }
            self.frame().line = s.line;
            self.stmt_body(step)?;
        }
    }

    fn int(&mut self, e: &'p Expr) -> Eval<i64> {
        match self.eval(e)? {
            Value::Int(v) => Ok(v),
            other => Err(self.fault(format!("expected int, found {other:?}"))),
        }
    }

    fn arith(&self, op: BinOp, a: i64, b: i64) -> Eval<i64> {
        let r = match op {
            BinOp::Add => a.checked_add(b),
            BinOp::Sub => a.checked_sub(b),
            BinOp::Mul => a.checked_mul(b),
            BinOp::Div | BinOp::Rem if b == 0 => return Err(self.fault("division by zero")),
            BinOp::Div => a.checked_div(b),
            BinOp::Rem => a.checked_rem(b),
            _ => unreachable!("non-arithmetic operator"),
        };
        r.ok_or_else(|| self.fault("integer overflow"))
    }

    fn eval(&mut self, e: &'p Expr) -> Eval<Value> {
        Ok(match &e.kind {
            ExprKind::Int(v) => Value::Int(*v),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Var(n) => match self.lookup(n) {
                Some(v) => v.clone(),
                None => return Err(self.fault(format!("unresolved variable `{n}`"))),
            },
            ExprKind::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    out.push(self.int(it)?);
                }
                Value::Arr(out)
            }
            ExprKind::Index(base, idx) => {
                let b = self.eval(base)?;
                let i = self.int(idx)?;
                let oob = |len: usize| format!("index {i} out of bounds for length {len}");
                match b {
                    Value::Arr(a) => match usize::try_from(i).ok().and_then(|i| a.get(i)) {
                        Some(v) => Value::Int(*v),
                        None => return Err(self.fault(oob(a.len()))),
                    },
                    Value::Str(s) => match usize::try_from(i).ok().and_then(|i| s.chars().nth(i)) {
                        Some(c) => Value::Str(c.to_string()),
                        None => return Err(self.fault(oob(s.chars().count()))),
                    },
                    other => return Err(self.fault(format!("cannot index {other:?}"))),
                }
            }
            ExprKind::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                match self.functions.get(name.as_str()) {
                    Some(&(f, _)) => self.call(f, vals)?,
                    None => self.builtin(name, vals)?,
                }
            }
            ExprKind::Unary(UnOp::Neg, inner) => {
                let v = self.int(inner)?;
                Value::Int(v.checked_neg().ok_or_else(|| self.fault("integer overflow"))?)
            }
            ExprKind::Unary(UnOp::Not, inner) => match self.eval(inner)? {
                Value::Bool(b) => Value::Bool(!b),
                other => return Err(self.fault(format!("cannot negate {other:?}"))),
            },
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lv = match self.eval(l)? {
                    Value::Bool(b) => b,
                    other => return Err(self.fault(format!("expected bool, found {other:?}"))),
                };
                if (*op == BinOp::And && !lv) || (*op == BinOp::Or && lv) {
                    Value::Bool(lv)
                } else {
                    match self.eval(r)? {
                        Value::Bool(b) => Value::Bool(b),
                        other => return Err(self.fault(format!("expected bool, found {other:?}"))),
                    }
                }
            }
            ExprKind::Binary(op, l, r) => {
                let lv = self.eval(l)?;
                let rv = self.eval(r)?;
                match (op, lv, rv) {
                    (BinOp::Eq, a, b) => Value::Bool(a == b),
                    (BinOp::Ne, a, b) => Value::Bool(a != b),
                    (BinOp::Add, Value::Str(a), Value::Str(b)) => Value::Str(a + &b),
                    (BinOp::Lt, Value::Int(a), Value::Int(b)) => Value::Bool(a < b),
                    (BinOp::Le, Value::Int(a), Value::Int(b)) => Value::Bool(a <= b),
                    (BinOp::Gt, Value::Int(a), Value::Int(b)) => Value::Bool(a > b),
                    (BinOp::Ge, Value::Int(a), Value::Int(b)) => Value::Bool(a >= b),
                    (op, Value::Int(a), Value::Int(b)) => Value::Int(self.arith(*op, a, b)?),
                    (op, a, b) => {
                        return Err(self.fault(format!("operator `{}` cannot combine {a:?} and {b:?}", op.symbol())))
                    }
                }
            }
        })
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>) -> Eval<Value> {
        Ok(match (name, args.as_slice()) {
            ("len", [Value::Str(s)]) => Value::Int(s.chars().count() as i64),
            ("len", [Value::Arr(a)]) => Value::Int(a.len() as i64),
            ("push", [Value::Arr(a), Value::Int(v)]) => {
                let mut a = a.clone();
                a.push(*v);
                Value::Arr(a)
            }
            ("to_str", [v]) => Value::Str(v.render()),
            ("substr", [Value::Str(s), Value::Int(start), Value::Int(end)]) => {
                let len = s.chars().count() as i64;
                if *start < 0 || *end < *start || *end > len {
                    return Err(self.fault(format!("substr range {start}..{end} out of bounds for length {len}")));
                }
                Value::Str(s.chars().skip(*start as usize).take((*end - *start) as usize).collect())
            }
            _ => return Err(self.fault(format!("unresolved function `{name}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABS: &str = "fn abs(x: int) -> int {\n  if (x < 0) {\n    return -x;\n  }\n  return x;\n}\n";

    fn program(src: &str) -> Program {
        parse_program(src, "p.mini").unwrap()
    }

    fn run(p: &str, t: &str) -> ExecutionOutcome {
        run_test(&program(p), t, &ExecutionLimits::default())
    }

    #[test]
    fn abs_negative_covers_true_arm() {
        let out = run(ABS, "fn test_abs() {\n  let r: int = abs(-3);\n  assert(r == 3);\n}\n");
        assert_eq!(out.status, Status::Passed);
        assert!(out.message.is_empty());
        assert_eq!(out.coverage.lines_of("abs"), [2, 3].into());
        assert_eq!(out.coverage.hits("abs", 2, true), 1);
        assert_eq!(out.coverage.hits("abs", 2, false), 0);
    }

    #[test]
    fn undeclared_function_is_compile_error() {
        let out = run(ABS, "fn test_abs() {\n  assert(abz(-3) == 3);\n}\n");
        assert_eq!(out.status, Status::CompileError);
        assert_eq!(out.failing_line, Some(2));
        assert!(out.coverage.is_empty());
    }

    #[test]
    fn failing_assert_reports_its_line() {
        let out = run(ABS, "fn test_abs() {\n  let r: int = abs(-3);\n  assert(r == 4);\n}\n");
        assert_eq!(out.status, Status::RuntimeError);
        assert_eq!(out.failing_line, Some(3));
        assert!(out.message.starts_with("assertion failed"), "{}", out.message);
        assert_eq!(out.coverage.lines_of("abs"), [2, 3].into());
    }

    #[test]
    fn parse_failure_is_compile_error() {
        let out = run(ABS, "fn test_abs() {\n  abs(1);\n");
        assert_eq!(out.status, Status::CompileError);
        assert!(out.message.contains("parse error"));
    }

    #[test]
    fn fault_inside_program_points_at_calling_test_line() {
        let out = run(
            "fn div(a: int, b: int) -> int {\n  return a / b;\n}\n",
            "fn test_div() {\n  print(1);\n  div(1, 0);\n}\n",
        );
        assert_eq!(out.status, Status::RuntimeError);
        assert_eq!(out.failing_line, Some(3));
        assert_eq!(out.message, "division by zero (in `div` at program line 2)");
    }

    #[test]
    fn runtime_faults() {
        let arr = "fn at(a: [int], i: int) -> int {\n  return a[i];\n}\n";
        let out = run(arr, "fn test_a() {\n  at([1, 2], 2);\n}\n");
        assert!(out.message.contains("index 2 out of bounds for length 2"));
        let out = run(arr, "fn test_a() {\n  print(substr(\"ab\", 1, 3));\n}\n");
        assert!(out.message.contains("substr range"));
        let out = run(arr, "fn test_a() {\n  print(9223372036854775807 + 1);\n}\n");
        assert!(out.message.contains("overflow"));
    }

    #[test]
    fn step_limit_is_a_runtime_error() {
        let p = program("fn spin() {\n  while (true) {\n    print(1);\n  }\n}\n");
        let limits = ExecutionLimits {
            max_steps: 1000,
            max_call_depth: 16,
        };
        let out = run_test(
            &p,
            "fn test_a() {\n  spin();\n}\nfn test_b() {\n  print(2);\n}\n",
            &limits,
        );
        assert_eq!(out.status, Status::RuntimeError);
        assert!(out.message.contains("step limit exceeded (1000 steps)"));
        assert_eq!(out.failing_line, Some(2));
    }

    #[test]
    fn deep_recursion_hits_call_depth() {
        let out = run(
            "fn down(n: int) -> int {\n  return down(n + 1);\n}\n",
            "fn test_a() {\n  down(0);\n}\n",
        );
        assert!(
            out.message.contains("call depth limit exceeded (256)"),
            "{}",
            out.message
        );
    }

    #[test]
    fn missing_return_value() {
        let out = run(
            "fn f(x: int) -> int {\n  if (x > 0) {\n    return 1;\n  }\n}\n",
            "fn test_a() {\n  f(0);\n}\n",
        );
        assert!(out.message.contains("ended without returning"));
    }

    #[test]
    fn every_test_runs_and_first_failure_is_reported() {
        let out = run(
            ABS,
            "fn test_a() {\n  assert(abs(1) == 2);\n}\nfn test_b() {\n  abs(-1);\n}\n",
        );
        assert_eq!(out.status, Status::RuntimeError);
        assert_eq!(out.failing_line, Some(2));
        // test_b still ran and reached the negative arm.
        assert_eq!(out.coverage.hits("abs", 2, true), 1);
        assert_eq!(out.coverage.hits("abs", 2, false), 1);
    }

    #[test]
    fn globals_are_reset_per_test() {
        let p = "let COUNT: int = 0;\nfn bump() -> int {\n  COUNT = COUNT + 1;\n  return COUNT;\n}\n";
        let out = run(
            p,
            "fn test_a() {\n  assert(bump() == 1);\n}\nfn test_b() {\n  assert(bump() == 1);\n}\n",
        );
        assert!(out.passed(), "{}", out.message);
    }

    #[test]
    fn loop_branch_counts_match_evaluations() {
        let p = "fn sum(n: int) -> int {\n  let acc: int = 0;\n  for (let i: int = 0; i < n; i = i + 1) {\n    acc = acc + i;\n  }\n  return acc;\n}\n";
        let out = run(p, "fn test_a() {\n  assert(sum(3) == 3);\n}\n");
        assert!(out.passed());
        assert_eq!(out.coverage.hits("sum", 3, true), 3);
        assert_eq!(out.coverage.hits("sum", 3, false), 1);
    }

    #[test]
    fn test_helpers_are_not_covered() {
        let out = run(
            ABS,
            "fn helper() -> int {\n  return abs(-2);\n}\nfn test_h() {\n  assert(helper() == 2);\n}\n",
        );
        assert!(out.passed());
        assert!(out.coverage.covered_lines.iter().all(|(f, _)| f == "abs"));
    }

    #[test]
    fn trace_records_prints_and_conditions() {
        let (out, trace) = run_test_traced(
            &program(ABS),
            "fn test_a() {\n  print(abs(-1));\n}\n",
            &ExecutionLimits::default(),
        );
        assert!(out.passed());
        assert!(trace.contains(&TraceEvent::Print { text: "1".into() }));
        assert!(trace.contains(&TraceEvent::Cond {
            origin: Origin::Program,
            function: "abs".into(),
            line: 2,
            value: true
        }));
    }
}
