//! Recursive-descent parser. The grammar is documented in `docs/minilang.md`.

use std::collections::HashSet;
use std::path::Path;

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{lex, normalize_newlines, DocLine, Lexed, Pos, Tok, Token};

/// Expressions and blocks nested deeper than this are rejected rather than
/// risking the parser's stack.
const MAX_NESTING: usize = 200;

/// Parse a whole source file.
pub fn parse_program(source_text: &str, source_path: impl AsRef<Path>) -> Result<Program, ParseError> {
    let source = normalize_newlines(source_text).into_owned();
    let Lexed { tokens, docs } = lex(&source)?;
    let mut parser = Parser {
        tokens,
        docs,
        idx: 0,
        depth: 0,
        stmt_lines: HashSet::new(),
    };
    let (functions, globals) = parser.items()?;
    Ok(Program {
        functions,
        globals,
        source_path: source_path.as_ref().to_path_buf(),
        source,
    })
}

struct Parser {
    tokens: Vec<Token>,
    docs: Vec<DocLine>,
    idx: usize,
    depth: usize,
    stmt_lines: HashSet<u32>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.idx + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].pos
    }

    fn advance(&mut self) -> &Token {
        let t = &self.tokens[self.idx];
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, context: &str) -> PResult<Pos> {
        if self.peek() == tok {
            Ok(self.advance().pos)
        } else {
            Err(self.unexpected(&format!("expected {tok} {context}")))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = self.peek();
        if *found == Tok::Eof {
            ParseError::new(self.pos(), format!("{what}, found end of input (unbalanced braces?)"))
        } else {
            ParseError::new(self.pos(), format!("{what}, found {found}"))
        }
    }

    fn ident(&mut self, context: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(&format!("expected identifier {context}"))),
        }
    }

    fn nest(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            Err(ParseError::new(self.pos(), "nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn unnest(&mut self) {
        self.depth -= 1;
    }

    /// Doc lines on the consecutive lines directly above `line`.
    fn doc_for(&self, line: u32) -> Option<String> {
        let mut collected = Vec::new();
        let mut want = line.checked_sub(1)?;
        for doc in self.docs.iter().rev() {
            if doc.line > want {
                continue;
            }
            if doc.line == want {
                collected.push(doc.text.as_str());
                match want.checked_sub(1) {
                    Some(w) => want = w,
                    None => break,
                }
            } else {
                break;
            }
        }
        if collected.is_empty() {
            None
        } else {
            collected.reverse();
            Some(collected.join("\n"))
        }
    }

    fn items(&mut self) -> PResult<(Vec<FunctionDecl>, Vec<GlobalDecl>)> {
        let mut functions: Vec<FunctionDecl> = Vec::new();
        let mut globals: Vec<GlobalDecl> = Vec::new();
        loop {
            let pos = self.pos();
            match self.peek() {
                Tok::Eof => break,
                Tok::Fn => {
                    let f = self.function()?;
                    if functions.iter().any(|g| g.name == f.name) {
                        return Err(ParseError::new(
                            pos,
                            format!("malformed declaration: duplicate function `{}`", f.name),
                        ));
                    }
                    functions.push(f);
                }
                Tok::Let => {
                    let g = self.global()?;
                    if globals.iter().any(|o| o.name == g.name) {
                        return Err(ParseError::new(
                            pos,
                            format!("malformed declaration: duplicate global `{}`", g.name),
                        ));
                    }
                    globals.push(g);
                }
                Tok::RBrace => return Err(ParseError::new(pos, "unbalanced braces: unexpected `}`")),
                _ => return Err(self.unexpected("malformed declaration: expected `fn` or `let`")),
            }
        }
        Ok((functions, globals))
    }

    fn ty(&mut self) -> PResult<Type> {
        let t = match self.peek() {
            Tok::TyInt => Type::Int,
            Tok::TyBool => Type::Bool,
            Tok::TyString => Type::Str,
            Tok::LBracket => {
                self.advance();
                self.expect(&Tok::TyInt, "in array type (only `[int]` is supported)")?;
                if *self.peek() != Tok::RBracket {
                    return Err(self.unexpected("expected `]` closing array type"));
                }
                Type::IntArray
            }
            _ => return Err(self.unexpected("expected a type")),
        };
        self.advance();
        Ok(t)
    }

    fn global(&mut self) -> PResult<GlobalDecl> {
        let start = self.expect(&Tok::Let, "")?;
        let name = self.ident("after `let`")?;
        self.expect(&Tok::Colon, "(globals need a type annotation)")?;
        let ty = self.ty()?;
        self.expect(&Tok::Assign, "(globals need an initializer)")?;
        let init = self.expr()?;
        self.expect(&Tok::Semi, "after global declaration")?;
        Ok(GlobalDecl {
            name,
            ty,
            init,
            doc: self.doc_for(start.line),
            line: start.line,
        })
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let start = self.expect(&Tok::Fn, "")?;
        let name = self.ident("after `fn`")?;
        self.expect(&Tok::LParen, "after function name")?;
        let mut params: Vec<Param> = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let ppos = self.pos();
                let pname = self.ident("for parameter")?;
                self.expect(&Tok::Colon, "after parameter name")?;
                let ty = self.ty()?;
                if params.iter().any(|p| p.name == pname) {
                    return Err(ParseError::new(
                        ppos,
                        format!("malformed declaration: duplicate parameter `{pname}`"),
                    ));
                }
                params.push(Param { name: pname, ty });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "closing parameter list")?;
        let return_type = if self.eat(&Tok::Arrow) { Some(self.ty()?) } else { None };
        let body = self.block()?;
        Ok(FunctionDecl {
            name,
            params,
            return_type,
            span: Span {
                first_line: start.line,
                last_line: body.close.line,
            },
            body,
            doc: self.doc_for(start.line),
        })
    }

    fn block(&mut self) -> PResult<Block> {
        self.nest()?;
        let open = self.expect(&Tok::LBrace, "to open a block")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("expected `}`"));
            }
            stmts.push(self.stmt()?);
        }
        let close = self.advance().pos;
        self.unnest();
        Ok(Block { stmts, open, close })
    }

    fn claim_line(&mut self, line: u32) -> PResult<()> {
        if !self.stmt_lines.insert(line) {
            return Err(ParseError::new(
                self.pos(),
                "two statements on one line (each statement needs its own line)",
            ));
        }
        Ok(())
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        self.claim_line(pos.line)?;
        let kind = match self.peek() {
            Tok::Let => {
                let s = self.let_stmt()?;
                self.expect(&Tok::Semi, "after `let` statement")?;
                s
            }
            Tok::If => return self.if_stmt(),
            Tok::While => {
                self.advance();
                let cond = self.paren_cond("`while`")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Tok::For => {
                self.advance();
                self.expect(&Tok::LParen, "after `for`")?;
                let init_pos = self.pos();
                let init = if *self.peek() == Tok::Let {
                    self.let_stmt()?
                } else {
                    self.assign_stmt()?
                };
                if let StmtKind::Let { init: None, .. } = init {
                    return Err(ParseError::new(init_pos, "`for` initializer needs a value"));
                }
                self.expect(&Tok::Semi, "after `for` initializer")?;
                let cond = self.expr()?;
                self.expect(&Tok::Semi, "after `for` condition")?;
                let step = self.assign_stmt()?;
                self.expect(&Tok::RParen, "closing `for` header")?;
                let body = self.block()?;
                StmtKind::For {
                    init: Box::new(Stmt {
                        kind: init,
                        line: pos.line,
                    }),
                    cond,
                    step: Box::new(Stmt {
                        kind: step,
                        line: pos.line,
                    }),
                    body,
                }
            }
            Tok::Return => {
                self.advance();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(&Tok::Semi, "after `return`")?;
                StmtKind::Return(value)
            }
            Tok::Assert | Tok::Print => {
                let is_assert = *self.peek() == Tok::Assert;
                self.advance();
                self.expect(&Tok::LParen, "")?;
                let e = self.expr()?;
                self.expect(&Tok::RParen, "")?;
                self.expect(&Tok::Semi, "")?;
                if is_assert {
                    StmtKind::Assert(e)
                } else {
                    StmtKind::Print(e)
                }
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => {
                let e = self.expr()?;
                if !matches!(e.kind, ExprKind::Call(..)) {
                    return Err(ParseError::new(pos, "expected a statement"));
                }
                self.expect(&Tok::Semi, "after call")?;
                StmtKind::Call(e)
            }
            Tok::Ident(_) => {
                let s = self.assign_stmt()?;
                self.expect(&Tok::Semi, "after assignment")?;
                s
            }
            Tok::Else => return Err(self.unexpected("`else` without `if`")),
            _ => return Err(self.unexpected("expected a statement")),
        };
        Ok(Stmt { kind, line: pos.line })
    }

    fn let_stmt(&mut self) -> PResult<StmtKind> {
        let pos = self.expect(&Tok::Let, "")?;
        let name = self.ident("after `let`")?;
        let ty = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
        let init = if self.eat(&Tok::Assign) {
            Some(self.expr()?)
        } else {
            None
        };
        if ty.is_none() && init.is_none() {
            return Err(ParseError::new(pos, "`let` needs a type annotation or an initializer"));
        }
        Ok(StmtKind::Let { name, ty, init })
    }

    fn assign_stmt(&mut self) -> PResult<StmtKind> {
        let name = self.ident("at start of assignment")?;
        let target = if self.eat(&Tok::LBracket) {
            let idx = self.expr()?;
            self.expect(&Tok::RBracket, "after index")?;
            LValue::Index(name, idx)
        } else {
            LValue::Var(name)
        };
        self.expect(&Tok::Assign, "in assignment")?;
        let value = self.expr()?;
        Ok(StmtKind::Assign { target, value })
    }

    fn paren_cond(&mut self, what: &str) -> PResult<Expr> {
        self.expect(&Tok::LParen, &format!("after {what}"))?;
        let cond = self.expr()?;
        self.expect(&Tok::RParen, &format!("closing {what} condition"))?;
        Ok(cond)
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let pos = self.expect(&Tok::If, "")?;
        let cond = self.paren_cond("`if`")?;
        let then = self.block()?;
        let otherwise = if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                let line = self.pos().line;
                self.claim_line(line)?;
                self.nest()?;
                let nested = self.if_stmt()?;
                self.unnest();
                Some(Else::If(Box::new(nested)))
            } else {
                Some(Else::Block(self.block()?))
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If { cond, then, otherwise },
            line: pos.line,
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        self.nest()?;
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            let pos = self.advance().pos;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        self.unnest();
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Bang => UnOp::Not,
            _ => return self.postfix(),
        };
        self.advance();
        self.nest()?;
        let inner = self.unary()?;
        self.unnest();
        Ok(Expr {
            kind: ExprKind::Unary(op, Box::new(inner)),
            pos,
        })
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while *self.peek() == Tok::LBracket {
            let pos = self.advance().pos;
            let idx = self.expr()?;
            self.expect(&Tok::RBracket, "after index")?;
            e = Expr {
                kind: ExprKind::Index(Box::new(e), Box::new(idx)),
                pos,
            };
        }
        Ok(e)
    }

    fn args(&mut self, close: &Tok) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        if self.peek() != close {
            loop {
                out.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(close, "closing list")?;
        Ok(out)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::True => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat(&Tok::LParen) {
                    ExprKind::Call(name, self.args(&Tok::RParen)?)
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "closing parenthesis")?;
                return Ok(inner);
            }
            Tok::LBracket => {
                self.advance();
                self.nest()?;
                let items = self.args(&Tok::RBracket)?;
                self.unnest();
                ExprKind::Array(items)
            }
            _ => return Err(self.unexpected("expected an expression")),
        };
        Ok(Expr { kind, pos })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Program {
        parse_program(src, "t.mini").unwrap()
    }

    #[test]
    fn one_line_function() {
        let p = parse("fn add(a: int, b: int) -> int { return a + b; }");
        assert_eq!(p.functions.len(), 1);
        let f = &p.functions[0];
        assert_eq!(
            f.span,
            Span {
                first_line: 1,
                last_line: 1
            }
        );
        assert_eq!(f.params.len(), 2);
        assert_eq!(f.return_type, Some(Type::Int));
    }

    #[test]
    fn unbalanced_brace_reports_end_of_input() {
        let err = parse_program("fn f() -> int { return 1; ", "t.mini").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("end of input"), "{}", err.message);
    }

    #[test]
    fn stray_closing_brace() {
        let err = parse_program("fn f() {\n}\n}\n", "t.mini").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("unbalanced"));
    }

    #[test]
    fn malformed_declaration() {
        let err = parse_program("fn (x: int) {}", "t.mini").unwrap_err();
        assert!(err.message.contains("identifier"));
        let err = parse_program("x = 1;", "t.mini").unwrap_err();
        assert!(err.message.contains("malformed declaration"));
        let err = parse_program("fn f() {}\nfn f() {}", "t.mini").unwrap_err();
        assert!(err.message.contains("duplicate function"));
        let err = parse_program("fn f(a: int, a: int) {}", "t.mini").unwrap_err();
        assert!(err.message.contains("duplicate parameter"));
    }

    #[test]
    fn two_statements_on_one_line_are_rejected() {
        let err = parse_program("fn f() {\n  let a: int = 1; let b: int = 2;\n}", "t.mini").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_program(
            "fn f(x: int) -> int {\n  if (x < 0) { return 0; }\n  return x;\n}",
            "t.mini",
        )
        .unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn doc_comments_attach_to_following_declaration() {
        let p = parse("/// First line.\n/// Second.\nfn f() {\n}\n\n/// Orphan.\n\nfn g() {\n}\n/// Limit.\nlet LIMIT: int = 3;\n");
        assert_eq!(p.functions[0].doc.as_deref(), Some("First line.\nSecond."));
        assert_eq!(p.functions[1].doc, None);
        assert_eq!(p.globals[0].doc.as_deref(), Some("Limit."));
    }

    #[test]
    fn else_if_chain_and_for() {
        let src = "fn f(x: int) -> int {
  let acc: int = 0;
  for (let i: int = 0; i < x; i = i + 1) {
    acc = acc + i;
  }
  if (x < 0) {
    return 0;
  } else if (x == 0) {
    return 1;
  } else {
    return acc;
  }
}";
        let p = parse(src);
        let f = &p.functions[0];
        assert_eq!(
            f.span,
            Span {
                first_line: 1,
                last_line: 13
            }
        );
        assert_eq!(f.body.stmts.len(), 3);
        let if_stmt = &f.body.stmts[2];
        assert_eq!(if_stmt.line, 6);
        assert_eq!(if_stmt.last_line(), 12);
        match &if_stmt.kind {
            StmtKind::If {
                otherwise: Some(Else::If(nested)),
                ..
            } => assert_eq!(nested.line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence() {
        let p = parse("fn f() -> bool {\n  return 1 + 2 * 3 == 7 && !false || 1 < 2;\n}");
        let StmtKind::Return(Some(e)) = &p.functions[0].body.stmts[0].kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Or, lhs, _) = &e.kind else {
            panic!("{e:?}")
        };
        let ExprKind::Binary(BinOp::And, eq, _) = &lhs.kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::Eq, sum, _) = &eq.kind else {
            panic!()
        };
        assert!(matches!(sum.kind, ExprKind::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!(
            "fn f() -> int {{\n return {}1{};\n}}",
            "(".repeat(5000),
            ")".repeat(5000)
        );
        let err = parse_program(&src, "t.mini").unwrap_err();
        assert!(err.message.contains("nesting"));
    }

    #[test]
    fn crlf_is_normalized() {
        let p = parse("fn f() {\r\n  print(1);\r\n}\r\n");
        assert_eq!(p.functions[0].body.stmts[0].line, 2);
        assert!(!p.source.contains('\r'));
    }
}
