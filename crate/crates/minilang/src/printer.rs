//! Canonical pretty-printer. Output re-parses to a structurally equal tree.

use std::fmt::Write;

use crate::ast::*;

const INDENT: &str = "    ";

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for g in &program.globals {
        print_doc(&mut out, g.doc.as_deref());
        let _ = writeln!(out, "let {}: {} = {};", g.name, g.ty, print_expr(&g.init));
    }
    for (i, f) in program.functions.iter().enumerate() {
        if i > 0 || !program.globals.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_function(f));
    }
    out
}

fn print_doc(out: &mut String, doc: Option<&str>) {
    if let Some(doc) = doc {
        for line in doc.split('\n') {
            let _ = writeln!(out, "/// {line}");
        }
    }
}

pub fn print_function(f: &FunctionDecl) -> String {
    let mut out = String::new();
    print_doc(&mut out, f.doc.as_deref());
    let params: Vec<String> = f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = write!(out, "fn {}({})", f.name, params.join(", "));
    if let Some(ret) = f.return_type {
        let _ = write!(out, " -> {ret}");
    }
    out.push(' ');
    print_block(&mut out, &f.body, 0);
    out.push('\n');
    out
}

fn print_block(out: &mut String, block: &Block, depth: usize) {
    out.push_str("{\n");
    for stmt in &block.stmts {
        print_stmt(out, stmt, depth + 1);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn simple_stmt(stmt: &Stmt) -> String {
    match &stmt.kind {
        StmtKind::Let { name, ty, init } => {
            let mut s = format!("let {name}");
            if let Some(ty) = ty {
                let _ = write!(s, ": {ty}");
            }
            if let Some(init) = init {
                let _ = write!(s, " = {}", print_expr(init));
            }
            s
        }
        StmtKind::Assign { target, value } => match target {
            LValue::Var(n) => format!("{n} = {}", print_expr(value)),
            LValue::Index(n, idx) => format!("{n}[{}] = {}", print_expr(idx), print_expr(value)),
        },
        _ => unreachable!("only let/assign appear in `for` headers"),
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    out.push_str(&INDENT.repeat(depth));
    print_stmt_body(out, stmt, depth);
    out.push('\n');
}

fn print_stmt_body(out: &mut String, stmt: &Stmt, depth: usize) {
    match &stmt.kind {
        StmtKind::Let { .. } | StmtKind::Assign { .. } => {
            out.push_str(&simple_stmt(stmt));
            out.push(';');
        }
        StmtKind::If { cond, then, otherwise } => {
            let _ = write!(out, "if ({}) ", print_expr(cond));
            print_block(out, then, depth);
            match otherwise {
                None => {}
                Some(Else::Block(b)) => {
                    out.push_str(" else ");
                    print_block(out, b, depth);
                }
                Some(Else::If(nested)) => {
                    out.push_str(" else ");
                    print_stmt_body(out, nested, depth);
                }
            }
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", print_expr(cond));
            print_block(out, body, depth);
        }
        StmtKind::For { init, cond, step, body } => {
            let _ = write!(
                out,
                "for ({}; {}; {}) ",
                simple_stmt(init),
                print_expr(cond),
                simple_stmt(step)
            );
            print_block(out, body, depth);
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", print_expr(e));
        }
        StmtKind::Call(e) => {
            let _ = write!(out, "{};", print_expr(e));
        }
        StmtKind::Assert(e) => {
            let _ = write!(out, "assert({});", print_expr(e));
        }
        StmtKind::Print(e) => {
            let _ = write!(out, "print({});", print_expr(e));
        }
    }
}

pub fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) if *v < 0 => format!("({v})"),
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Str(s) => quote_str(s),
        ExprKind::Var(n) => n.clone(),
        ExprKind::Array(items) => {
            let items: Vec<String> = items.iter().map(print_expr).collect();
            format!("[{}]", items.join(", "))
        }
        ExprKind::Call(n, args) => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            format!("{n}({})", args.join(", "))
        }
        ExprKind::Index(base, idx) => {
            let b = print_expr(base);
            let b = if matches!(base.kind, ExprKind::Binary(..) | ExprKind::Unary(..)) {
                format!("({b})")
            } else {
                b
            };
            format!("{b}[{}]", print_expr(idx))
        }
        ExprKind::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            let s = print_expr(inner);
            if matches!(inner.kind, ExprKind::Binary(..)) {
                format!("{sym}({s})")
            } else {
                format!("{sym}{s}")
            }
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            let wrap = |child: &Expr, strict: bool| {
                let s = print_expr(child);
                match &child.kind {
                    ExprKind::Binary(cop, ..) if cop.precedence() < p || (strict && cop.precedence() == p) => {
                        format!("({s})")
                    }
                    _ => s,
                }
            };
            format!("{} {} {}", wrap(lhs, false), op.symbol(), wrap(rhs, true))
        }
    }
}
