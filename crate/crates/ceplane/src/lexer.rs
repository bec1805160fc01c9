//! Hand-rolled tokenizer for rule files.
//!
//! Dotted references (`ipv4.totalLen`) and hyphenated words
//! (`skip-till-next-match`) lex as single identifier tokens. `#` starts a
//! comment running to end of line. Positions are 1-based.

use crate::ast::Span;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    KwWindow,
    KwSize,
    KwValue,
    KwComplexEvent,
    KwReturnValue,
    KwStrategy,
    KwPattern,
    Ident(String),
    Int(u32),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Semi,
    AndAnd,
    OrOr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl TokenKind {
    /// Human-readable name for diagnostics.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::KwWindow => "`window`".into(),
            TokenKind::KwSize => "`size`".into(),
            TokenKind::KwValue => "`value`".into(),
            TokenKind::KwComplexEvent => "`complex_event`".into(),
            TokenKind::KwReturnValue => "`return_value`".into(),
            TokenKind::KwStrategy => "`strategy`".into(),
            TokenKind::KwPattern => "`pattern`".into(),
            TokenKind::Ident(s) => format!("identifier `{}`", s),
            TokenKind::Int(n) => format!("integer `{}`", n),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::AndAnd => "`&&`".into(),
            TokenKind::OrOr => "`||`".into(),
            TokenKind::Eq => "`==`".into(),
            TokenKind::Ne => "`!=`".into(),
            TokenKind::Lt => "`<`".into(),
            TokenKind::Le => "`<=`".into(),
            TokenKind::Gt => "`>`".into(),
            TokenKind::Ge => "`>=`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexError {
    #[error("{span}: unrecognized character `{ch}`")]
    Unrecognized { ch: char, span: Span },
    #[error("{span}: integer literal out of range (max {max})", max = u32::MAX)]
    IntOutOfRange { span: Span },
}

impl LexError {
    pub fn span(&self) -> Span {
        match self {
            LexError::Unrecognized { span, .. } | LexError::IntOutOfRange { span } => *span,
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "window" => TokenKind::KwWindow,
        "size" => TokenKind::KwSize,
        "value" => TokenKind::KwValue,
        "complex_event" => TokenKind::KwComplexEvent,
        "return_value" => TokenKind::KwReturnValue,
        "strategy" => TokenKind::KwStrategy,
        "pattern" => TokenKind::KwPattern,
        _ => return None,
    })
}

/// Split rule-file source into tokens, or report the first offending position.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer::new(src);
    let mut tokens = Vec::new();

    while let Some(c) = lx.peek() {
        let span = lx.span();
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                lx.bump();
            }
            '#' => {
                while let Some(c) = lx.peek() {
                    if c == '\n' {
                        break;
                    }
                    lx.bump();
                }
            }
            '{' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::LBrace, span });
            }
            '}' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::RBrace, span });
            }
            '[' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::LBracket, span });
            }
            ']' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::RBracket, span });
            }
            '(' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::LParen, span });
            }
            ')' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::RParen, span });
            }
            ';' => {
                lx.bump();
                tokens.push(Token { kind: TokenKind::Semi, span });
            }
            '&' => {
                lx.bump();
                if lx.peek() == Some('&') {
                    lx.bump();
                    tokens.push(Token { kind: TokenKind::AndAnd, span });
                } else {
                    return Err(LexError::Unrecognized { ch: '&', span });
                }
            }
            '|' => {
                lx.bump();
                if lx.peek() == Some('|') {
                    lx.bump();
                    tokens.push(Token { kind: TokenKind::OrOr, span });
                } else {
                    return Err(LexError::Unrecognized { ch: '|', span });
                }
            }
            '=' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    tokens.push(Token { kind: TokenKind::Eq, span });
                } else {
                    return Err(LexError::Unrecognized { ch: '=', span });
                }
            }
            '!' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    tokens.push(Token { kind: TokenKind::Ne, span });
                } else {
                    return Err(LexError::Unrecognized { ch: '!', span });
                }
            }
            '<' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    tokens.push(Token { kind: TokenKind::Le, span });
                } else {
                    tokens.push(Token { kind: TokenKind::Lt, span });
                }
            }
            '>' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    tokens.push(Token { kind: TokenKind::Ge, span });
                } else {
                    tokens.push(Token { kind: TokenKind::Gt, span });
                }
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(c) = lx.peek() {
                    if c.is_ascii_digit() {
                        text.push(c);
                        lx.bump();
                    } else {
                        break;
                    }
                }
                let value: u32 = text
                    .parse()
                    .map_err(|_| LexError::IntOutOfRange { span })?;
                tokens.push(Token { kind: TokenKind::Int(value), span });
            }
            c if is_ident_start(c) => {
                let mut text = String::new();
                text.push(c);
                lx.bump();
                loop {
                    match lx.peek() {
                        Some(c) if is_ident_continue(c) => {
                            text.push(c);
                            lx.bump();
                        }
                        // A dot continues the identifier only when another
                        // segment follows; a trailing dot is an error there.
                        Some('.') => {
                            let mut ahead = lx.chars.clone();
                            ahead.next();
                            match ahead.peek() {
                                Some(&c2) if is_ident_start(c2) => {
                                    text.push('.');
                                    lx.bump();
                                }
                                _ => break,
                            }
                        }
                        _ => break,
                    }
                }
                let kind = keyword(&text).unwrap_or(TokenKind::Ident(text));
                tokens.push(Token { kind, span });
            }
            other => {
                return Err(LexError::Unrecognized { ch: other, span });
            }
        }
    }
    Ok(tokens)
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.kind.describe(), self.span)
    }
}
