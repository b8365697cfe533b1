//! Tokenizer for MiniLang source text.
//!
//! Positions are 1-based `(line, column)` pairs; columns count characters,
//! not bytes. `///` doc comments are not emitted as tokens but collected on
//! the side so the parser can attach them to the declaration that follows.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    // keywords
    Fn,
    Let,
    If,
    Else,
    While,
    For,
    Return,
    Assert,
    Print,
    True,
    False,
    TyInt,
    TyBool,
    TyString,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Arrow,
    Assign,
    // operators
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Int(v) => return write!(f, "integer `{v}`"),
            Tok::Str(_) => "string literal",
            Tok::Fn => "`fn`",
            Tok::Let => "`let`",
            Tok::If => "`if`",
            Tok::Else => "`else`",
            Tok::While => "`while`",
            Tok::For => "`for`",
            Tok::Return => "`return`",
            Tok::Assert => "`assert`",
            Tok::Print => "`print`",
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::TyInt => "`int`",
            Tok::TyBool => "`bool`",
            Tok::TyString => "`string`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Semi => "`;`",
            Tok::Colon => "`:`",
            Tok::Arrow => "`->`",
            Tok::Assign => "`=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::AndAnd => "`&&`",
            Tok::OrOr => "`||`",
            Tok::Bang => "`!`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Byte range of the token in the source.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocLine {
    pub line: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub docs: Vec<DocLine>,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "fn" => Tok::Fn,
        "let" => Tok::Let,
        "if" => Tok::If,
        "else" => Tok::Else,
        "while" => Tok::While,
        "for" => Tok::For,
        "return" => Tok::Return,
        "assert" => Tok::Assert,
        "print" => Tok::Print,
        "true" => Tok::True,
        "false" => Tok::False,
        "int" => Tok::TyInt,
        "bool" => Tok::TyBool,
        "string" => Tok::TyString,
        _ => return None,
    })
}

pub fn is_keyword(word: &str) -> bool {
    keyword(word).is_some()
}

struct Cursor<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    idx: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).map(|&(_, c)| c)
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.idx + n).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.idx).map_or(self.src.len(), |&(o, _)| o)
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

/// Tokenize `src`. CRLF line endings must already be normalized; a stray
/// `\r` is treated as whitespace.
pub fn lex(src: &str) -> Result<Lexed, ParseError> {
    let mut cur = Cursor {
        src,
        chars: src.char_indices().collect(),
        idx: 0,
        line: 1,
        col: 1,
    };
    let mut out = Lexed::default();

    while let Some(c) = cur.peek() {
        let start_pos = cur.pos();
        let start = cur.offset();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('/') {
            let is_doc = cur.peek_at(2) == Some('/') && cur.peek_at(3) != Some('/');
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            if is_doc {
                let raw = &src[start + 3..cur.offset()];
                let text = raw.strip_prefix(' ').unwrap_or(raw);
                out.docs.push(DocLine {
                    line: start_pos.line,
                    text: text.trim_end().to_string(),
                });
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            let word = &src[start..cur.offset()];
            keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()))
        } else if c.is_ascii_digit() {
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
            if matches!(cur.peek(), Some(c) if c.is_ascii_alphabetic() || c == '_') {
                return Err(ParseError::new(
                    start_pos,
                    "malformed number: identifier characters directly after digits",
                ));
            }
            let text = &src[start..cur.offset()];
            let value = text
                .parse::<i64>()
                .map_err(|_| ParseError::new(start_pos, format!("integer literal `{text}` out of range")))?;
            Tok::Int(value)
        } else if c == '"' {
            cur.bump();
            let mut value = String::new();
            loop {
                match cur.bump() {
                    None | Some('\n') => return Err(ParseError::new(start_pos, "unterminated string literal")),
                    Some('"') => break,
                    Some('\\') => {
                        let esc_pos = cur.pos();
                        match cur.bump() {
                            Some('n') => value.push('\n'),
                            Some('t') => value.push('\t'),
                            Some('"') => value.push('"'),
                            Some('\\') => value.push('\\'),
                            None | Some('\n') => return Err(ParseError::new(start_pos, "unterminated string literal")),
                            Some(other) => {
                                return Err(ParseError::new(esc_pos, format!("unknown escape sequence `\\{other}`")))
                            }
                        }
                    }
                    Some(other) => value.push(other),
                }
            }
            Tok::Str(value)
        } else {
            cur.bump();
            let next = cur.peek();
            let two = |cur: &mut Cursor<'_>, t: Tok| {
                cur.bump();
                t
            };
            match (c, next) {
                ('(', _) => Tok::LParen,
                (')', _) => Tok::RParen,
                ('{', _) => Tok::LBrace,
                ('}', _) => Tok::RBrace,
                ('[', _) => Tok::LBracket,
                (']', _) => Tok::RBracket,
                (',', _) => Tok::Comma,
                (';', _) => Tok::Semi,
                (':', _) => Tok::Colon,
                ('-', Some('>')) => two(&mut cur, Tok::Arrow),
                ('=', Some('=')) => two(&mut cur, Tok::EqEq),
                ('!', Some('=')) => two(&mut cur, Tok::NotEq),
                ('<', Some('=')) => two(&mut cur, Tok::Le),
                ('>', Some('=')) => two(&mut cur, Tok::Ge),
                ('&', Some('&')) => two(&mut cur, Tok::AndAnd),
                ('|', Some('|')) => two(&mut cur, Tok::OrOr),
                ('=', _) => Tok::Assign,
                ('+', _) => Tok::Plus,
                ('-', _) => Tok::Minus,
                ('*', _) => Tok::Star,
                ('/', _) => Tok::Slash,
                ('%', _) => Tok::Percent,
                ('<', _) => Tok::Lt,
                ('>', _) => Tok::Gt,
                ('!', _) => Tok::Bang,
                _ => {
                    return Err(ParseError::new(
                        start_pos,
                        format!("unknown token `{}`", c.escape_default()),
                    ))
                }
            }
        };
        out.tokens.push(Token {
            tok,
            pos: start_pos,
            start,
            end: cur.offset(),
        });
    }
    out.tokens.push(Token {
        tok: Tok::Eof,
        pos: cur.pos(),
        start: src.len(),
        end: src.len(),
    });
    Ok(out)
}

/// Normalize CRLF (and lone CR) line endings to LF.
pub fn normalize_newlines(src: &str) -> std::borrow::Cow<'_, str> {
    if src.contains('\r') {
        std::borrow::Cow::Owned(src.replace("\r\n", "\n").replace('\r', "\n"))
    } else {
        std::borrow::Cow::Borrowed(src)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        lex(src).unwrap().tokens.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_keywords() {
        assert_eq!(
            kinds("fn f() -> int { return a && !b || c <= 2; }"),
            vec![
                Tok::Fn,
                Tok::Ident("f".into()),
                Tok::LParen,
                Tok::RParen,
                Tok::Arrow,
                Tok::TyInt,
                Tok::LBrace,
                Tok::Return,
                Tok::Ident("a".into()),
                Tok::AndAnd,
                Tok::Bang,
                Tok::Ident("b".into()),
                Tok::OrOr,
                Tok::Ident("c".into()),
                Tok::Le,
                Tok::Int(2),
                Tok::Semi,
                Tok::RBrace,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let lexed = lex("let x = 1;\n  y").unwrap();
        assert_eq!(lexed.tokens[0].pos, Pos::new(1, 1));
        assert_eq!(lexed.tokens[5].pos, Pos::new(2, 3));
    }

    #[test]
    fn doc_comments_are_collected() {
        let lexed = lex("/// Adds.\n// plain\n//// not doc\nfn f() {}").unwrap();
        assert_eq!(
            lexed.docs,
            vec![DocLine {
                line: 1,
                text: "Adds.".into()
            }]
        );
        assert_eq!(lexed.tokens[0].tok, Tok::Fn);
    }

    #[test]
    fn string_escapes() {
        assert_eq!(kinds(r#""a\n\"b""#)[0], Tok::Str("a\n\"b".into()));
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let err = lex("let s = \"abc\nx").unwrap_err();
        assert_eq!((err.line, err.column), (1, 9));
        assert!(err.message.contains("unterminated string"));
    }

    #[test]
    fn unknown_token_is_an_error() {
        let err = lex("a @ b").unwrap_err();
        assert_eq!((err.line, err.column), (1, 3));
        assert!(err.message.contains("unknown token"));
        assert!(lex("a & b").is_err());
    }

    #[test]
    fn huge_integer_is_rejected() {
        assert!(lex("99999999999999999999").is_err());
    }

    #[test]
    fn crlf_normalization() {
        assert_eq!(normalize_newlines("a\r\nb\rc"), "a\nb\nc");
    }
}
