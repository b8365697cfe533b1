//! Seeded generator of random, well-formed MiniLang sources.
//!
//! Programs always terminate: loops run on fresh counters that nothing else
//! assigns, and functions only call functions declared before them. They may
//! still fault at runtime (division by zero, overflow, failing asserts),
//! which property tests want to exercise too.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{Program, Type};

struct Var {
    name: String,
    ty: Type,
    /// Loop counters are never targets of random assignments.
    assignable: bool,
}

struct Ctx {
    rng: ChaCha8Rng,
    out: String,
    scopes: Vec<Vec<Var>>,
    /// (name, arity) of callable functions, all returning int.
    callable: Vec<(String, usize)>,
    fresh: usize,
    budget: usize,
}

impl Ctx {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            out: String::new(),
            scopes: Vec::new(),
            callable: Vec::new(),
            fresh: 0,
            budget: 0,
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn vars(&self, ty: Type, assignable_only: bool) -> Vec<String> {
        self.scopes
            .iter()
            .flatten()
            .filter(|v| v.ty == ty && (!assignable_only || v.assignable))
            .map(|v| v.name.clone())
            .collect()
    }

    fn declare(&mut self, name: &str, ty: Type, assignable: bool) {
        self.scopes.last_mut().expect("scope").push(Var {
            name: name.to_string(),
            ty,
            assignable,
        });
    }

    fn int_expr(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.rng.random_bool(0.35);
        if leaf {
            let vars = self.vars(Type::Int, false);
            if !vars.is_empty() && self.rng.random_bool(0.6) {
                return vars.choose(&mut self.rng).unwrap().clone();
            }
            if self.rng.random_bool(0.08) {
                let s = self.vars(Type::Str, false);
                if let Some(s) = s.choose(&mut self.rng) {
                    return format!("len({s})");
                }
            }
            return self.rng.random_range(-3..10i64).to_string().replace('-', "0 - ");
        }
        match self.rng.random_range(0..10) {
            0..=5 => {
                let op = *["+", "-", "+", "*", "/", "%"].choose(&mut self.rng).unwrap();
                let a = self.int_expr(depth - 1);
                let b = self.int_expr(depth - 1);
                format!("({a} {op} {b})")
            }
            6 => format!("-{}", self.int_expr(depth - 1)),
            _ => {
                if self.callable.is_empty() {
                    return self.int_expr(0);
                }
                let (name, arity) = self.callable.choose(&mut self.rng).unwrap().clone();
                let args: Vec<String> = (0..arity).map(|_| self.int_expr(depth - 1)).collect();
                format!("{name}({})", args.join(", "))
            }
        }
    }

    fn bool_expr(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.rng.random_bool(0.4);
        if leaf {
            let bools = self.vars(Type::Bool, false);
            if !bools.is_empty() && self.rng.random_bool(0.3) {
                return bools.choose(&mut self.rng).unwrap().clone();
            }
            let op = *["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).unwrap();
            let a = self.int_expr(1);
            let b = self.int_expr(1);
            return format!("{a} {op} {b}");
        }
        match self.rng.random_range(0..5) {
            0 | 1 => format!("({} && {})", self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
            2 | 3 => format!("({} || {})", self.bool_expr(depth - 1), self.bool_expr(depth - 1)),
            _ => format!("!({})", self.bool_expr(depth - 1)),
        }
    }

    fn block(&mut self, depth: usize, max_stmts: usize) {
        self.scopes.push(Vec::new());
        let n = self.rng.random_range(1..=max_stmts.max(1));
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.stmt(depth);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, depth: usize) {
        self.budget = self.budget.saturating_sub(1);
        let nested_ok = depth < 4;
        let roll = self.rng.random_range(0..20);
        match roll {
            0..=3 => {
                let name = self.fresh("v");
                let e = self.int_expr(2);
                self.line(depth, &format!("let {name}: int = {e};"));
                self.declare(&name, Type::Int, true);
            }
            4 => {
                let name = self.fresh("b");
                let e = self.bool_expr(2);
                self.line(depth, &format!("let {name}: bool = {e};"));
                self.declare(&name, Type::Bool, true);
            }
            5 => {
                let name = self.fresh("s");
                let e = self.int_expr(1);
                self.line(depth, &format!("let {name}: string = \"s\" + to_str({e});"));
                self.declare(&name, Type::Str, true);
            }
            6 => {
                let name = self.fresh("d");
                self.line(depth, &format!("let {name}: int;"));
                self.declare(&name, Type::Int, true);
            }
            7..=9 => {
                let targets = self.vars(Type::Int, true);
                if let Some(t) = targets.choose(&mut self.rng).cloned() {
                    let e = self.int_expr(2);
                    self.line(depth, &format!("{t} = {e};"));
                } else {
                    let e = self.int_expr(1);
                    self.line(depth, &format!("print({e});"));
                }
            }
            10..=12 if nested_ok => {
                let c = self.bool_expr(2);
                self.line(depth, &format!("if ({c}) {{"));
                self.block(depth + 1, 3);
                let mut tail = self.rng.random_range(0..3);
                while tail == 1 && self.budget > 0 {
                    let c = self.bool_expr(1);
                    self.line(depth, &format!("}} else if ({c}) {{"));
                    self.block(depth + 1, 2);
                    tail = self.rng.random_range(0..3);
                }
                if tail == 2 {
                    self.line(depth, "} else {");
                    self.block(depth + 1, 2);
                }
                self.line(depth, "}");
            }
            13 if nested_ok => {
                let i = self.fresh("i");
                let bound = self.rng.random_range(0..4);
                let extra = if self.rng.random_bool(0.3) {
                    format!(" && {}", self.bool_expr(1))
                } else {
                    String::new()
                };
                self.line(
                    depth,
                    &format!("for (let {i}: int = 0; {i} < {bound}{extra}; {i} = {i} + 1) {{"),
                );
                self.scopes.push(Vec::new());
                self.declare(&i, Type::Int, false);
                self.block(depth + 1, 3);
                self.scopes.pop();
                self.line(depth, "}");
            }
            14 if nested_ok => {
                let w = self.fresh("w");
                let bound = self.rng.random_range(0..4);
                self.line(depth, &format!("let {w}: int = {bound};"));
                self.declare(&w, Type::Int, false);
                let extra = if self.rng.random_bool(0.4) {
                    format!(" || {}", self.bool_expr(1))
                } else {
                    String::new()
                };
                // The counter check guards the whole condition so the loop stays bounded.
                self.line(depth, &format!("while ({w} > 0 && (true{extra})) {{"));
                self.block(depth + 1, 3);
                self.line(depth + 1, &format!("{w} = {w} - 1;"));
                self.line(depth, "}");
            }
            15 => {
                let e = self.int_expr(2);
                self.line(depth, &format!("print({e});"));
            }
            16 if depth > 1 => {
                let e = self.int_expr(1);
                self.line(depth, &format!("return {e};"));
                // Anything after a return in the same block is dead but legal.
            }
            17 if !self.callable.is_empty() => {
                let (name, arity) = self.callable.choose(&mut self.rng).unwrap().clone();
                let args: Vec<String> = (0..arity).map(|_| self.int_expr(1)).collect();
                self.line(depth, &format!("{name}({});", args.join(", ")));
            }
            18 => {
                let b = self.vars(Type::Bool, true);
                if let Some(t) = b.choose(&mut self.rng).cloned() {
                    let e = self.bool_expr(2);
                    self.line(depth, &format!("{t} = {e};"));
                } else {
                    let e = self.bool_expr(1);
                    self.line(depth, &format!("print({e});"));
                }
            }
            _ => {
                let e = self.int_expr(1);
                self.line(depth, &format!("print({e});"));
            }
        }
    }

    fn function(&mut self, name: &str, arity: usize, budget: usize) {
        let params: Vec<String> = (0..arity).map(|i| format!("p{i}")).collect();
        let decl: Vec<String> = params.iter().map(|p| format!("{p}: int")).collect();
        self.line(0, &format!("fn {name}({}) -> int {{", decl.join(", ")));
        self.scopes.push(Vec::new());
        for p in &params {
            self.declare(p, Type::Int, true);
        }
        self.budget = budget;
        self.block(1, budget);
        let e = self.int_expr(2);
        self.line(1, &format!("return {e};"));
        self.scopes.pop();
        self.line(0, "}");
    }
}

/// A single random function named `f` with up to `size` statements.
pub fn random_function(seed: u64, size: usize) -> String {
    let mut ctx = Ctx::new(seed);
    let arity = ctx.rng.random_range(0..4);
    ctx.function("f", arity, size.max(1));
    ctx.out
}

/// A random program: a couple of globals and 1..=4 functions `f0`, `f1`, ...
/// where each may call the ones before it.
pub fn random_program(seed: u64) -> String {
    let mut ctx = Ctx::new(seed);
    ctx.scopes.push(Vec::new());
    let n_globals = ctx.rng.random_range(0..3);
    for g in 0..n_globals {
        let v = ctx.rng.random_range(0..5);
        ctx.line(0, &format!("let G{g}: int = {v};"));
        ctx.declare(&format!("G{g}"), Type::Int, true);
    }
    let n_funcs = ctx.rng.random_range(1..=4);
    for i in 0..n_funcs {
        let arity = ctx.rng.random_range(0..3);
        let budget = ctx.rng.random_range(2..12);
        ctx.out.push('\n');
        ctx.function(&format!("f{i}"), arity, budget);
        ctx.callable.push((format!("f{i}"), arity));
    }
    ctx.out
}

/// A random test file for `program` with `n_tests` test functions, plus
/// helper functions and globals shared between them.
pub fn random_test_file(program: &Program, seed: u64, n_tests: usize) -> String {
    let mut ctx = Ctx::new(seed);
    ctx.scopes.push(Vec::new());
    for g in &program.globals {
        if g.ty == Type::Int {
            ctx.declare(&g.name, Type::Int, true);
        }
    }
    ctx.callable = program
        .functions
        .iter()
        .filter(|f| f.return_type == Some(Type::Int) && f.params.iter().all(|p| p.ty == Type::Int))
        .map(|f| (f.name.clone(), f.params.len()))
        .collect();
    if ctx.rng.random_bool(0.5) {
        let v = ctx.rng.random_range(0..5);
        ctx.line(0, &format!("let T_G: int = {v};"));
        ctx.declare("T_G", Type::Int, true);
    }
    let helpers = ctx.rng.random_range(0..2);
    for h in 0..helpers {
        ctx.out.push('\n');
        let name = format!("helper_{h}");
        ctx.function(&name, 1, 2);
        ctx.callable.push((name, 1));
    }
    for t in 0..n_tests {
        ctx.out.push('\n');
        ctx.line(0, &format!("fn test_{t}() {{"));
        ctx.scopes.push(Vec::new());
        let calls = ctx.rng.random_range(1..4);
        for c in 0..calls {
            if ctx.callable.is_empty() {
                ctx.line(1, "print(1);");
                continue;
            }
            let (name, arity) = ctx.callable.choose(&mut ctx.rng).unwrap().clone();
            let args: Vec<String> = (0..arity)
                .map(|_| ctx.rng.random_range(-5..12i64).to_string())
                .collect();
            let r = format!("r{c}");
            ctx.line(1, &format!("let {r}: int = {name}({});", args.join(", ")));
            ctx.declare(&r, Type::Int, true);
            match ctx.rng.random_range(0..4) {
                0 => {
                    let k = ctx.rng.random_range(-5..20);
                    ctx.line(1, &format!("assert({r} != {k});"));
                }
                1 => {
                    let g = ctx.vars(Type::Int, true);
                    if let Some(g) = g.iter().find(|g| g.starts_with('G') || g.as_str() == "T_G") {
                        ctx.line(1, &format!("{g} = {r};"));
                    }
                }
                _ => {}
            }
        }
        ctx.scopes.pop();
        ctx.line(0, "}");
    }
    ctx.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::check;
    use crate::parse_program;

    #[test]
    fn generated_sources_parse_and_check() {
        for seed in 0..300 {
            let src = random_function(seed, 25);
            let p = parse_program(&src, "g.mini").unwrap_or_else(|e| panic!("{e}\n{src}"));
            check(&p, None).unwrap_or_else(|e| panic!("{e}\n{src}"));

            let src = random_program(seed);
            let p = parse_program(&src, "g.mini").unwrap_or_else(|e| panic!("{e}\n{src}"));
            check(&p, None).unwrap_or_else(|e| panic!("{e}\n{src}"));
            let t = random_test_file(&p, seed, 3);
            let tp = parse_program(&t, "t.mini").unwrap_or_else(|e| panic!("{e}\n{t}"));
            check(&p, Some(&tp)).unwrap_or_else(|e| panic!("{e}\n{src}\n{t}"));
        }
    }
}
