//! Syntax tree for MiniLang.
//!
//! Every statement records the line its first token sits on; the grammar
//! forbids two statements starting on the same line, so a line number
//! identifies a statement within a function.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::lexer::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    Str,
    IntArray,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Bool => "bool",
            Type::Str => "string",
            Type::IntArray => "[int]",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub functions: Vec<FunctionDecl>,
    pub globals: Vec<GlobalDecl>,
    pub source_path: PathBuf,
    /// Normalized (LF) source text the program was parsed from.
    pub source: String,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Verbatim text of the inclusive 1-based line range.
    pub fn lines_text(&self, first: u32, last: u32) -> String {
        self.source
            .split('\n')
            .skip(first.saturating_sub(1) as usize)
            .take((last + 1).saturating_sub(first) as usize)
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Verbatim source text of a function, from its `fn` line to its closing brace line.
    pub fn function_text(&self, f: &FunctionDecl) -> String {
        self.lines_text(f.span.first_line, f.span.last_line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub first_line: u32,
    pub last_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    /// `None` means the function returns nothing.
    pub return_type: Option<Type>,
    pub body: Block,
    pub doc: Option<String>,
    pub span: Span,
}

impl FunctionDecl {
    pub fn is_test(&self) -> bool {
        self.name.starts_with("test_") && self.params.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: Type,
    pub init: Expr,
    pub doc: Option<String>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Position of `{`.
    pub open: Pos,
    /// Position of `}`.
    pub close: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Else {
    Block(Block),
    If(Box<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Let {
        name: String,
        ty: Option<Type>,
        init: Option<Expr>,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    If {
        cond: Expr,
        then: Block,
        otherwise: Option<Else>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    For {
        /// A `Let` or `Assign` statement sharing the header line.
        init: Box<Stmt>,
        cond: Expr,
        /// An `Assign` statement sharing the header line.
        step: Box<Stmt>,
        body: Block,
    },
    Return(Option<Expr>),
    /// A call evaluated for its side effects.
    Call(Expr),
    Assert(Expr),
    Print(Expr),
}

impl Stmt {
    pub fn is_branching(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::For { .. }
        )
    }

    /// Condition of an `if`, `while` or `for`.
    pub fn condition(&self) -> Option<&Expr> {
        match &self.kind {
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::For { cond, .. } => Some(cond),
            _ => None,
        }
    }

    /// Nested blocks in source order.
    pub fn blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If { then, otherwise, .. } => {
                let mut out = vec![then];
                match otherwise {
                    Some(Else::Block(b)) => out.push(b),
                    Some(Else::If(nested)) => out.extend(nested.blocks()),
                    None => {}
                }
                out
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }

    /// Last source line the statement occupies (closing brace for compound statements).
    pub fn last_line(&self) -> u32 {
        match &self.kind {
            StmtKind::If { then, otherwise, .. } => match otherwise {
                None => then.close.line,
                Some(Else::Block(b)) => b.close.line,
                Some(Else::If(nested)) => nested.last_line(),
            },
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => body.close.line,
            _ => self.line,
        }
    }

    /// Expressions owned directly by this statement (not by nested blocks).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Let { init, .. } => init.iter().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => vec![value],
                LValue::Index(_, idx) => vec![idx, value],
            },
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For { init, cond, step, .. } => {
                let mut out = init.own_exprs();
                out.push(cond);
                out.extend(step.own_exprs());
                out
            }
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Call(e) | StmtKind::Assert(e) | StmtKind::Print(e) => vec![e],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_short_circuit(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Str(String),
    Var(String),
    Array(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a Expr)) {
        visit(self);
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Str(_) | ExprKind::Var(_) => {}
            ExprKind::Array(items) | ExprKind::Call(_, items) => items.iter().for_each(|e| e.walk(visit)),
            ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            ExprKind::Unary(_, e) => e.walk(visit),
        }
    }
}

impl Block {
    /// Pre-order traversal of every statement, including `for` headers'
    /// init/step statements and `else if` chains.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a Stmt)) {
        for stmt in &self.stmts {
            walk_stmt(stmt, visit);
        }
    }
}

fn walk_stmt<'a>(stmt: &'a Stmt, visit: &mut dyn FnMut(&'a Stmt)) {
    visit(stmt);
    match &stmt.kind {
        StmtKind::If { then, otherwise, .. } => {
            then.walk(visit);
            match otherwise {
                Some(Else::Block(b)) => b.walk(visit),
                Some(Else::If(nested)) => walk_stmt(nested, visit),
                None => {}
            }
        }
        StmtKind::While { body, .. } => body.walk(visit),
        StmtKind::For { body, .. } => body.walk(visit),
        _ => {}
    }
}

/// Positions stripped, for structural comparison of trees parsed from
/// differently laid out text.
pub trait Unpositioned {
    fn unpositioned(&self) -> Self;
}

impl Unpositioned for Expr {
    fn unpositioned(&self) -> Self {
        let kind = match &self.kind {
            ExprKind::Array(items) => ExprKind::Array(items.iter().map(|e| e.unpositioned()).collect()),
            ExprKind::Call(n, args) => ExprKind::Call(n.clone(), args.iter().map(|e| e.unpositioned()).collect()),
            ExprKind::Index(a, b) => ExprKind::Index(Box::new(a.unpositioned()), Box::new(b.unpositioned())),
            ExprKind::Binary(op, a, b) => ExprKind::Binary(*op, Box::new(a.unpositioned()), Box::new(b.unpositioned())),
            ExprKind::Unary(op, e) => ExprKind::Unary(*op, Box::new(e.unpositioned())),
            other => other.clone(),
        };
        Expr {
            kind,
            pos: Pos::default(),
        }
    }
}

impl Unpositioned for Block {
    fn unpositioned(&self) -> Self {
        Block {
            stmts: self.stmts.iter().map(|s| s.unpositioned()).collect(),
            open: Pos::default(),
            close: Pos::default(),
        }
    }
}

impl Unpositioned for Stmt {
    fn unpositioned(&self) -> Self {
        let kind = match &self.kind {
            StmtKind::Let { name, ty, init } => StmtKind::Let {
                name: name.clone(),
                ty: *ty,
                init: init.as_ref().map(|e| e.unpositioned()),
            },
            StmtKind::Assign { target, value } => StmtKind::Assign {
                target: match target {
                    LValue::Var(n) => LValue::Var(n.clone()),
                    LValue::Index(n, e) => LValue::Index(n.clone(), e.unpositioned()),
                },
                value: value.unpositioned(),
            },
            StmtKind::If { cond, then, otherwise } => StmtKind::If {
                cond: cond.unpositioned(),
                then: then.unpositioned(),
                otherwise: otherwise.as_ref().map(|o| match o {
                    Else::Block(b) => Else::Block(b.unpositioned()),
                    Else::If(s) => Else::If(Box::new(s.unpositioned())),
                }),
            },
            StmtKind::While { cond, body } => StmtKind::While {
                cond: cond.unpositioned(),
                body: body.unpositioned(),
            },
            StmtKind::For { init, cond, step, body } => StmtKind::For {
                init: Box::new(init.unpositioned()),
                cond: cond.unpositioned(),
                step: Box::new(step.unpositioned()),
                body: body.unpositioned(),
            },
            StmtKind::Return(e) => StmtKind::Return(e.as_ref().map(|e| e.unpositioned())),
            StmtKind::Call(e) => StmtKind::Call(e.unpositioned()),
            StmtKind::Assert(e) => StmtKind::Assert(e.unpositioned()),
            StmtKind::Print(e) => StmtKind::Print(e.unpositioned()),
        };
        Stmt { kind, line: 0 }
    }
}

impl Unpositioned for FunctionDecl {
    fn unpositioned(&self) -> Self {
        FunctionDecl {
            name: self.name.clone(),
            params: self.params.clone(),
            return_type: self.return_type,
            body: self.body.unpositioned(),
            doc: self.doc.clone(),
            span: Span {
                first_line: 0,
                last_line: 0,
            },
        }
    }
}

impl Unpositioned for GlobalDecl {
    fn unpositioned(&self) -> Self {
        GlobalDecl {
            name: self.name.clone(),
            ty: self.ty,
            init: self.init.unpositioned(),
            doc: self.doc.clone(),
            line: 0,
        }
    }
}

impl Unpositioned for Program {
    fn unpositioned(&self) -> Self {
        Program {
            functions: self.functions.iter().map(|f| f.unpositioned()).collect(),
            globals: self.globals.iter().map(|g| g.unpositioned()).collect(),
            source_path: self.source_path.clone(),
            source: String::new(),
        }
    }
}
