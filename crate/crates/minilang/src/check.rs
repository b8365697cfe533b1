//! Name resolution and type checking of a program together with an optional
//! test source. Failures here are compile errors.

use std::collections::HashMap;

use crate::ast::*;
use crate::error::CheckError;

/// Built-in functions available everywhere.
pub const BUILTINS: [&str; 4] = ["len", "push", "to_str", "substr"];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Val(Type),
    Void,
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ty::Val(t) => write!(f, "{t}"),
            Ty::Void => f.write_str("nothing"),
        }
    }
}

struct Sig<'a> {
    params: Vec<Type>,
    ret: Option<Type>,
    _decl: &'a FunctionDecl,
}

struct Checker<'a> {
    functions: HashMap<&'a str, Sig<'a>>,
    globals: HashMap<&'a str, Type>,
    scopes: Vec<HashMap<String, Type>>,
    ret: Option<Type>,
    in_test: bool,
}

type CResult<T> = Result<T, CheckError>;

/// Check `program` alone (`test == None`) or a test source against it.
pub fn check(program: &Program, test: Option<&Program>) -> CResult<()> {
    let mut c = Checker {
        functions: HashMap::new(),
        globals: HashMap::new(),
        scopes: Vec::new(),
        ret: None,
        in_test: false,
    };
    let sources: Vec<(&Program, bool)> = std::iter::once((program, false))
        .chain(test.map(|t| (t, true)))
        .collect();

    for &(src, in_test) in &sources {
        c.in_test = in_test;
        for f in &src.functions {
            if is_builtin(&f.name) {
                return Err(c.err(f.span.first_line, format!("`{}` is a built-in function", f.name)));
            }
            let sig = Sig {
                params: f.params.iter().map(|p| p.ty).collect(),
                ret: f.return_type,
                _decl: f,
            };
            if c.functions.insert(&f.name, sig).is_some() {
                return Err(c.err(
                    f.span.first_line,
                    format!("function `{}` is already defined by the program", f.name),
                ));
            }
        }
    }
    for &(src, in_test) in &sources {
        c.in_test = in_test;
        for g in &src.globals {
            if c.globals.contains_key(g.name.as_str()) {
                return Err(c.err(g.line, format!("global `{}` is already defined", g.name)));
            }
            let mut calls_user = None;
            g.init.walk(&mut |e| {
                if let ExprKind::Call(n, _) = &e.kind {
                    if !is_builtin(n) && calls_user.is_none() {
                        calls_user = Some(n.clone());
                    }
                }
            });
            if let Some(n) = calls_user {
                return Err(c.err(g.line, format!("global initializer may not call user function `{n}`")));
            }
            let t = c.expr(&g.init, g.line)?;
            c.expect_ty(t, g.ty, g.line, &format!("initializer of `{}`", g.name))?;
            c.globals.insert(&g.name, g.ty);
        }
    }
    for &(src, in_test) in &sources {
        c.in_test = in_test;
        for f in &src.functions {
            c.function(f)?;
        }
    }
    Ok(())
}

impl<'a> Checker<'a> {
    fn err(&self, line: u32, message: String) -> CheckError {
        CheckError {
            line,
            message,
            in_test: self.in_test,
        }
    }

    fn expect_ty(&self, got: Ty, want: Type, line: u32, what: &str) -> CResult<()> {
        if got == Ty::Val(want) {
            Ok(())
        } else {
            Err(self.err(line, format!("type mismatch in {what}: expected {want}, found {got}")))
        }
    }

    fn value(&self, got: Ty, line: u32, what: &str) -> CResult<Type> {
        match got {
            Ty::Val(t) => Ok(t),
            Ty::Void => Err(self.err(line, format!("{what} does not produce a value"))),
        }
    }

    fn lookup(&self, name: &str) -> Option<Type> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .or_else(|| self.globals.get(name).copied())
    }

    fn declare(&mut self, name: &str, ty: Type, line: u32) -> CResult<()> {
        let scope = self.scopes.last_mut().expect("scope");
        if scope.contains_key(name) {
            return Err(self.err(line, format!("`{name}` is already declared in this scope")));
        }
        scope.insert(name.to_string(), ty);
        Ok(())
    }

    fn function(&mut self, f: &FunctionDecl) -> CResult<()> {
        self.scopes.clear();
        self.scopes.push(HashMap::new());
        for p in &f.params {
            self.declare(&p.name, p.ty, f.span.first_line)?;
        }
        self.ret = f.return_type;
        self.block(&f.body)?;
        self.scopes.clear();
        Ok(())
    }

    fn block(&mut self, b: &Block) -> CResult<()> {
        self.scopes.push(HashMap::new());
        for s in &b.stmts {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> CResult<()> {
        let line = s.line;
        match &s.kind {
            StmtKind::Let { name, ty, init } => {
                let t = match (ty, init) {
                    (Some(t), Some(e)) => {
                        let got = self.expr(e, line)?;
                        self.expect_ty(got, *t, line, &format!("declaration of `{name}`"))?;
                        *t
                    }
                    (Some(t), None) => *t,
                    (None, Some(e)) => {
                        let got = self.expr(e, line)?;
                        self.value(got, line, "initializer")?
                    }
                    (None, None) => return Err(self.err(line, "untyped declaration".into())),
                };
                self.declare(name, t, line)?;
            }
            StmtKind::Assign { target, value } => {
                let name = target.name();
                let Some(var_ty) = self.lookup(name) else {
                    return Err(self.err(line, format!("unresolved variable `{name}`")));
                };
                let got = self.expr(value, line)?;
                match target {
                    LValue::Var(_) => self.expect_ty(got, var_ty, line, &format!("assignment to `{name}`"))?,
                    LValue::Index(_, idx) => {
                        if var_ty != Type::IntArray {
                            return Err(
                                self.err(line, format!("cannot assign into `{name}` of type {var_ty} by index"))
                            );
                        }
                        let it = self.expr(idx, line)?;
                        self.expect_ty(it, Type::Int, line, "index")?;
                        self.expect_ty(got, Type::Int, line, "array element assignment")?;
                    }
                }
            }
            StmtKind::If { cond, then, otherwise } => {
                let c = self.expr(cond, line)?;
                self.expect_ty(c, Type::Bool, line, "`if` condition")?;
                self.block(then)?;
                match otherwise {
                    Some(Else::Block(b)) => self.block(b)?,
                    Some(Else::If(nested)) => self.stmt(nested)?,
                    None => {}
                }
            }
            StmtKind::While { cond, body } => {
                let c = self.expr(cond, line)?;
                self.expect_ty(c, Type::Bool, line, "`while` condition")?;
                self.block(body)?;
            }
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push(HashMap::new());
                self.stmt(init)?;
                let c = self.expr(cond, line)?;
                self.expect_ty(c, Type::Bool, line, "`for` condition")?;
                self.stmt(step)?;
                self.block(body)?;
                self.scopes.pop();
            }
            StmtKind::Return(value) => match (self.ret, value) {
                (None, None) => {}
                (None, Some(_)) => {
                    return Err(self.err(line, "returning a value from a function without a return type".into()))
                }
                (Some(t), None) => return Err(self.err(line, format!("missing return value of type {t}"))),
                (Some(t), Some(e)) => {
                    let got = self.expr(e, line)?;
                    self.expect_ty(got, t, line, "return value")?;
                }
            },
            StmtKind::Call(e) => {
                self.expr(e, line)?;
            }
            StmtKind::Assert(e) => {
                let got = self.expr(e, line)?;
                self.expect_ty(got, Type::Bool, line, "assertion")?;
            }
            StmtKind::Print(e) => {
                let got = self.expr(e, line)?;
                self.value(got, line, "printed expression")?;
            }
        }
        Ok(())
    }

    fn builtin(&mut self, name: &str, args: &[Expr], line: u32) -> CResult<Ty> {
        let tys = args
            .iter()
            .map(|a| {
                let t = self.expr(a, line)?;
                self.value(t, line, "argument")
            })
            .collect::<CResult<Vec<Type>>>()?;
        use Type::*;
        let ret = match (name, tys.as_slice()) {
            ("len", [Str | IntArray]) => Int,
            ("push", [IntArray, Int]) => IntArray,
            ("to_str", [_]) => Str,
            ("substr", [Str, Int, Int]) => Str,
            _ => {
                let shown: Vec<String> = tys.iter().map(|t| t.to_string()).collect();
                return Err(self.err(line, format!("no built-in `{name}` accepting ({})", shown.join(", "))));
            }
        };
        Ok(Ty::Val(ret))
    }

    fn expr(&mut self, e: &Expr, line: u32) -> CResult<Ty> {
        use Type::*;
        let t = match &e.kind {
            ExprKind::Int(_) => Int,
            ExprKind::Bool(_) => Bool,
            ExprKind::Str(_) => Str,
            ExprKind::Var(n) => match self.lookup(n) {
                Some(t) => t,
                None => return Err(self.err(line, format!("unresolved variable `{n}`"))),
            },
            ExprKind::Array(items) => {
                for it in items {
                    let t = self.expr(it, line)?;
                    self.expect_ty(t, Int, line, "array element")?;
                }
                IntArray
            }
            ExprKind::Index(base, idx) => {
                let b = self.expr(base, line)?;
                let i = self.expr(idx, line)?;
                self.expect_ty(i, Int, line, "index")?;
                match self.value(b, line, "indexed expression")? {
                    IntArray => Int,
                    Str => Str,
                    other => return Err(self.err(line, format!("cannot index a value of type {other}"))),
                }
            }
            ExprKind::Call(name, args) => {
                if is_builtin(name) {
                    return self.builtin(name, args, line);
                }
                let Some(sig) = self.functions.get(name.as_str()) else {
                    return Err(self.err(line, format!("unresolved function `{name}`")));
                };
                let params = sig.params.clone();
                let ret = sig.ret;
                if params.len() != args.len() {
                    return Err(self.err(
                        line,
                        format!(
                            "`{name}` takes {} argument(s) but {} were given",
                            params.len(),
                            args.len()
                        ),
                    ));
                }
                for (i, (a, p)) in args.iter().zip(&params).enumerate() {
                    let got = self.expr(a, line)?;
                    self.expect_ty(got, *p, line, &format!("argument {} of `{name}`", i + 1))?;
                }
                return Ok(ret.map_or(Ty::Void, Ty::Val));
            }
            ExprKind::Unary(op, inner) => {
                let t = self.expr(inner, line)?;
                let want = match op {
                    UnOp::Neg => Int,
                    UnOp::Not => Bool,
                };
                self.expect_ty(t, want, line, "unary operand")?;
                want
            }
            ExprKind::Binary(op, l, r) => {
                let lt = self.expr(l, line)?;
                let lt = self.value(lt, line, "operand")?;
                let rt = self.expr(r, line)?;
                let rt = self.value(rt, line, "operand")?;
                let bad = || format!("operator `{}` cannot combine {lt} and {rt}", op.symbol());
                match op {
                    BinOp::Add => match (lt, rt) {
                        (Int, Int) => Int,
                        (Str, Str) => Str,
                        _ => return Err(self.err(line, bad())),
                    },
                    BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        if (lt, rt) != (Int, Int) {
                            return Err(self.err(line, bad()));
                        }
                        Int
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if lt != rt {
                            return Err(self.err(line, bad()));
                        }
                        Bool
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if (lt, rt) != (Int, Int) {
                            return Err(self.err(line, bad()));
                        }
                        Bool
                    }
                    BinOp::And | BinOp::Or => {
                        if (lt, rt) != (Bool, Bool) {
                            return Err(self.err(line, bad()));
                        }
                        Bool
                    }
                }
            }
        };
        Ok(Ty::Val(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_program;

    fn check_src(program: &str, test: &str) -> CResult<()> {
        let p = parse_program(program, "p.mini").unwrap();
        let t = parse_program(test, "t.mini").unwrap();
        check(&p, Some(&t))
    }

    const ABS: &str = "fn abs(x: int) -> int {\n  if (x < 0) {\n    return -x;\n  }\n  return x;\n}\n";

    #[test]
    fn well_typed_test_passes() {
        check_src(ABS, "fn test_a() {\n  let r: int = abs(-3);\n  assert(r == 3);\n}").unwrap();
    }

    #[test]
    fn unresolved_function() {
        let e = check_src(ABS, "fn test_a() {\n  assert(abz(-3) == 3);\n}").unwrap_err();
        assert!(e.message.contains("unresolved function `abz`"));
        assert!(e.in_test);
        assert_eq!(e.line, 2);
    }

    #[test]
    fn arity_and_type_mismatch() {
        let e = check_src(ABS, "fn test_a() {\n  abs(1, 2);\n}").unwrap_err();
        assert!(e.message.contains("takes 1 argument"));
        let e = check_src(ABS, "fn test_a() {\n  abs(\"x\");\n}").unwrap_err();
        assert!(e.message.contains("type mismatch"));
        let e = check_src(ABS, "fn test_a() {\n  let s: string = abs(1);\n}").unwrap_err();
        assert!(e.message.contains("type mismatch"));
    }

    #[test]
    fn redefining_program_function_is_rejected() {
        let e = check_src(ABS, "fn abs(x: int) -> int {\n  return x;\n}").unwrap_err();
        assert!(e.message.contains("already defined"));
    }

    #[test]
    fn scoping_rules() {
        let e = check_src(
            ABS,
            "fn test_a() {\n  if (true) {\n    let x: int = 1;\n  }\n  print(x);\n}",
        )
        .unwrap_err();
        assert!(e.message.contains("unresolved variable `x`"));
        check_src(
            ABS,
            "fn test_a() {\n  for (let i: int = 0; i < 2; i = i + 1) {\n    print(i);\n  }\n  let i: int = 3;\n}",
        )
        .unwrap();
    }

    #[test]
    fn builtins() {
        check_src(
            ABS,
            "fn test_a() {\n  let a: [int] = push([1], 2);\n  let s: string = substr(\"abc\", 0, 1) + to_str(len(a));\n  print(s[0]);\n}",
        )
        .unwrap();
        let e = check_src(ABS, "fn test_a() {\n  print(len(1));\n}").unwrap_err();
        assert!(e.message.contains("no built-in `len`"));
    }

    #[test]
    fn void_call_used_as_value() {
        let e = check_src(
            "fn side() {\n  print(1);\n}\n",
            "fn test_a() {\n  let x: int = side();\n}",
        )
        .unwrap_err();
        assert!(e.message.contains("nothing"), "{}", e.message);
    }

    #[test]
    fn global_initializers() {
        check_src(
            "let LIMIT: int = 3 * 4;\nfn f() -> int {\n  return LIMIT;\n}",
            "fn test_a() {\n  LIMIT = 2;\n}",
        )
        .unwrap();
        let e = check_src("fn f() -> int {\n  return 1;\n}\nlet X: int = f();", "").unwrap_err();
        assert!(e.message.contains("may not call"));
    }
}
