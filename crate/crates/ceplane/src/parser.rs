//! Recursive-descent parser for rule files.
//!
//! Pattern operator precedence, tightest first: bracketed predicates,
//! `&&`, `||`, `;`. All operators are left-associative and parentheses
//! override. Declaration names share one namespace so generated
//! identifiers stay collision-free downstream.

use crate::ast::*;
use crate::lexer::{tokenize, LexError, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{span}: expected {expected}, found {found}")]
    Unexpected {
        expected: String,
        found: String,
        span: Span,
    },
    #[error("{span}: unexpected end of input, expected {expected}")]
    Eof { expected: String, span: Span },
    #[error("{span}: duplicate declaration name `{name}`")]
    DuplicateName { name: String, span: Span },
    #[error("{span}: window size must be at least 1")]
    ZeroWindowSize { span: Span },
    #[error("{span}: declaration name `{name}` must be a plain identifier")]
    InvalidDeclName { name: String, span: Span },
    #[error("{span}: malformed field reference `{name}`, expected `header.field`")]
    BadFieldRef { name: String, span: Span },
    #[error("{span}: unknown strategy `{name}`")]
    UnknownStrategy { name: String, span: Span },
    #[error("{span}: unknown aggregate function `{name}`")]
    UnknownAggFunc { name: String, span: Span },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Lex(e) => e.span(),
            ParseError::Unexpected { span, .. }
            | ParseError::Eof { span, .. }
            | ParseError::DuplicateName { span, .. }
            | ParseError::ZeroWindowSize { span }
            | ParseError::InvalidDeclName { span, .. }
            | ParseError::BadFieldRef { span, .. }
            | ParseError::UnknownStrategy { span, .. }
            | ParseError::UnknownAggFunc { span, .. } => *span,
        }
    }
}

/// Parse rule-file source into an unvalidated AST.
pub fn parse_rules(src: &str) -> Result<RuleAst, ParseError> {
    let tokens = tokenize(src)?;
    Parser { tokens, pos: 0 }.file()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    /// Span just past the final token, for end-of-input diagnostics.
    fn end_span(&self) -> Span {
        self.tokens
            .last()
            .map(|t| t.span)
            .unwrap_or(Span::new(1, 1))
    }

    fn eof(&self, expected: &str) -> ParseError {
        ParseError::Eof {
            expected: expected.into(),
            span: self.end_span(),
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<Token, ParseError> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(t),
            Some(t) => Err(self.unexpected_at(expected, &t)),
            None => Err(self.eof(expected)),
        }
    }

    fn unexpected_at(&self, expected: &str, tok: &Token) -> ParseError {
        ParseError::Unexpected {
            expected: expected.into(),
            found: tok.kind.describe(),
            span: tok.span,
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Span), ParseError> {
        match self.next() {
            Some(Token { kind: TokenKind::Ident(s), span }) => Ok((s, span)),
            Some(t) => Err(self.unexpected_at(expected, &t)),
            None => Err(self.eof(expected)),
        }
    }

    fn int(&mut self, expected: &str) -> Result<(u32, Span), ParseError> {
        match self.next() {
            Some(Token { kind: TokenKind::Int(n), span }) => Ok((n, span)),
            Some(t) => Err(self.unexpected_at(expected, &t)),
            None => Err(self.eof(expected)),
        }
    }

    fn decl_name(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let (name, span) = self.ident(what)?;
        if name.contains('.') || name.contains('-') {
            return Err(ParseError::InvalidDeclName { name, span });
        }
        Ok((name, span))
    }

    fn file(&mut self) -> Result<RuleAst, ParseError> {
        let mut ast = RuleAst::default();
        let mut seen: std::collections::HashMap<String, Span> = std::collections::HashMap::new();
        while let Some(tok) = self.peek() {
            let decl_span;
            let name;
            match tok.kind {
                TokenKind::KwWindow => {
                    let w = self.window_decl()?;
                    decl_span = w.span;
                    name = w.name.clone();
                    ast.windows.push(w);
                }
                TokenKind::KwComplexEvent => {
                    let e = self.event_decl()?;
                    decl_span = e.span;
                    name = e.name.clone();
                    ast.events.push(e);
                }
                _ => {
                    let t = tok.clone();
                    return Err(self.unexpected_at("`window` or `complex_event`", &t));
                }
            }
            if seen.insert(name.clone(), decl_span).is_some() {
                return Err(ParseError::DuplicateName { name, span: decl_span });
            }
        }
        Ok(ast)
    }

    fn window_decl(&mut self) -> Result<WindowDecl, ParseError> {
        self.expect(TokenKind::KwWindow, "`window`")?;
        let (name, span) = self.decl_name("window name")?;
        self.expect(TokenKind::LBrace, "`{`")?;
        self.expect(TokenKind::KwSize, "`size`")?;
        let (size, size_span) = self.int("window size")?;
        if size == 0 {
            return Err(ParseError::ZeroWindowSize { span: size_span });
        }
        self.expect(TokenKind::KwValue, "`value`")?;
        let source = match self.peek() {
            Some(Token { kind: TokenKind::LBracket, .. }) => {
                self.next();
                let p = self.predicate()?;
                self.expect(TokenKind::RBracket, "`]`")?;
                WindowSource::Predicate(p)
            }
            _ => WindowSource::Field(self.field_ref()?),
        };
        self.expect(TokenKind::RBrace, "`}`")?;
        Ok(WindowDecl { name, size, source, span })
    }

    fn event_decl(&mut self) -> Result<ComplexEventDecl, ParseError> {
        self.expect(TokenKind::KwComplexEvent, "`complex_event`")?;
        let (name, span) = self.decl_name("event name")?;
        self.expect(TokenKind::LBrace, "`{`")?;
        // Both spellings of the return-value keyword are accepted.
        match self.next() {
            Some(Token { kind: TokenKind::KwValue, .. })
            | Some(Token { kind: TokenKind::KwReturnValue, .. }) => {}
            Some(t) => return Err(self.unexpected_at("`value` or `return_value`", &t)),
            None => return Err(self.eof("`value` or `return_value`")),
        }
        let return_value = self.return_spec()?;
        let strategy = match self.peek() {
            Some(Token { kind: TokenKind::KwStrategy, .. }) => {
                self.next();
                let (word, sspan) = self.ident("strategy name")?;
                match word.as_str() {
                    "skip-till-next-match" => Strategy::SkipTillNextMatch,
                    "strict" => Strategy::Strict,
                    _ => {
                        return Err(ParseError::UnknownStrategy { name: word, span: sspan })
                    }
                }
            }
            _ => Strategy::SkipTillNextMatch,
        };
        self.expect(TokenKind::KwPattern, "`pattern`")?;
        let pattern = self.pattern()?;
        self.expect(TokenKind::RBrace, "`}`")?;
        Ok(ComplexEventDecl { name, return_value, strategy, pattern, span })
    }

    fn return_spec(&mut self) -> Result<ReturnSpec, ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Int(_), .. }) => {
                let (n, _) = self.int("return value")?;
                Ok(ReturnSpec::Const(n))
            }
            Some(Token { kind: TokenKind::Ident(_), .. }) => {
                let (word, span) = self.ident("return value")?;
                if self.peek().map(|t| &t.kind) == Some(&TokenKind::LParen) {
                    Ok(ReturnSpec::Agg(self.agg_ref(word, span)?))
                } else {
                    Ok(ReturnSpec::Field(self.field_from_ident(word, span)?))
                }
            }
            Some(t) => {
                let t = t.clone();
                Err(self.unexpected_at("constant, field, or aggregate", &t))
            }
            None => Err(self.eof("constant, field, or aggregate")),
        }
    }

    /// `word` has already been consumed and is followed by `(`.
    fn agg_ref(&mut self, word: String, span: Span) -> Result<AggRef, ParseError> {
        let func = AggFunc::from_str(&word)
            .ok_or(ParseError::UnknownAggFunc { name: word, span })?;
        self.expect(TokenKind::LParen, "`(`")?;
        let (target_word, target_span) = self.ident("window or field")?;
        let target = if target_word.contains('.') {
            AggTarget::Field(self.field_from_ident(target_word, target_span)?)
        } else {
            AggTarget::Window(target_word)
        };
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(AggRef { func, target, span })
    }

    fn field_ref(&mut self) -> Result<FieldRef, ParseError> {
        let (word, span) = self.ident("field reference")?;
        self.field_from_ident(word, span)
    }

    fn field_from_ident(&self, word: String, span: Span) -> Result<FieldRef, ParseError> {
        let mut parts = word.split('.');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(h), Some(f), None) if !h.is_empty() && !f.is_empty() => Ok(FieldRef {
                header: h.to_string(),
                field: f.to_string(),
                width: None,
                span,
            }),
            _ => Err(ParseError::BadFieldRef { name: word, span }),
        }
    }

    fn pattern(&mut self) -> Result<PatternNode, ParseError> {
        self.seq_expr()
    }

    fn seq_expr(&mut self) -> Result<PatternNode, ParseError> {
        let mut node = self.or_expr()?;
        while self.peek().map(|t| &t.kind) == Some(&TokenKind::Semi) {
            self.next();
            let rhs = self.or_expr()?;
            node = PatternNode::Seq(Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn or_expr(&mut self) -> Result<PatternNode, ParseError> {
        let mut node = self.and_expr()?;
        while self.peek().map(|t| &t.kind) == Some(&TokenKind::OrOr) {
            self.next();
            let rhs = self.and_expr()?;
            node = PatternNode::Or(Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn and_expr(&mut self) -> Result<PatternNode, ParseError> {
        let mut node = self.primary()?;
        while self.peek().map(|t| &t.kind) == Some(&TokenKind::AndAnd) {
            self.next();
            let rhs = self.primary()?;
            node = PatternNode::And(Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn primary(&mut self) -> Result<PatternNode, ParseError> {
        match self.next() {
            Some(Token { kind: TokenKind::LBracket, .. }) => {
                let p = self.predicate()?;
                self.expect(TokenKind::RBracket, "`]`")?;
                Ok(PatternNode::Predicate(p))
            }
            Some(Token { kind: TokenKind::LParen, .. }) => {
                let inner = self.seq_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            Some(t) => Err(self.unexpected_at("`[` or `(`", &t)),
            None => Err(self.eof("`[` or `(`")),
        }
    }

    fn predicate(&mut self) -> Result<PredicateExpr, ParseError> {
        let (word, span) = self.ident("field or aggregate")?;
        let lhs = if self.peek().map(|t| &t.kind) == Some(&TokenKind::LParen) {
            PredicateLhs::Agg(self.agg_ref(word, span)?)
        } else {
            PredicateLhs::Field(self.field_from_ident(word, span)?)
        };
        let cmp = match self.next() {
            Some(Token { kind: TokenKind::Eq, .. }) => CmpOp::Eq,
            Some(Token { kind: TokenKind::Ne, .. }) => CmpOp::Ne,
            Some(Token { kind: TokenKind::Lt, .. }) => CmpOp::Lt,
            Some(Token { kind: TokenKind::Le, .. }) => CmpOp::Le,
            Some(Token { kind: TokenKind::Gt, .. }) => CmpOp::Gt,
            Some(Token { kind: TokenKind::Ge, .. }) => CmpOp::Ge,
            Some(t) => return Err(self.unexpected_at("comparison operator", &t)),
            None => return Err(self.eof("comparison operator")),
        };
        let rhs = match self.next() {
            Some(Token { kind: TokenKind::Int(n), .. }) => PredicateRhs::Const(n),
            Some(Token { kind: TokenKind::Ident(w), span }) => {
                PredicateRhs::Field(self.field_from_ident(w, span)?)
            }
            Some(t) => return Err(self.unexpected_at("constant or field", &t)),
            None => return Err(self.eof("constant or field")),
        };
        Ok(PredicateExpr { lhs, cmp, rhs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::print_rules;

    const SAMPLE: &str = "\
window sample_wnd {
  size 8
  value ipv4.totalLen
}

complex_event sample_evt {
  value sum(ipv4.totalLen)
  strategy skip-till-next-match
  pattern ([ipv4.totalLen > 500] && [tcp.dstPort == 80]) ;
          ([sum(sample_wnd) > 6000] || [ipv4.protocol == 17])
}
";

    fn pred(h: &str, f: &str, cmp: CmpOp, c: u32) -> PatternNode {
        PatternNode::Predicate(PredicateExpr {
            lhs: PredicateLhs::Field(FieldRef::new(h, f)),
            cmp,
            rhs: PredicateRhs::Const(c),
        })
    }

    #[test]
    fn sample_rules_parse() {
        let ast = parse_rules(SAMPLE).unwrap();
        assert_eq!(ast.windows.len(), 1);
        assert_eq!(ast.windows[0].name, "sample_wnd");
        assert_eq!(ast.windows[0].size, 8);
        assert_eq!(
            ast.windows[0].source,
            WindowSource::Field(FieldRef::new("ipv4", "totalLen"))
        );
        assert_eq!(ast.events.len(), 1);
        let evt = &ast.events[0];
        assert_eq!(evt.name, "sample_evt");
        assert_eq!(evt.strategy, Strategy::SkipTillNextMatch);
        assert_eq!(
            evt.return_value,
            ReturnSpec::Agg(AggRef {
                func: AggFunc::Sum,
                target: AggTarget::Field(FieldRef::new("ipv4", "totalLen")),
                span: Span::default(),
            })
        );
        let wnd_sum = PatternNode::Predicate(PredicateExpr {
            lhs: PredicateLhs::Agg(AggRef {
                func: AggFunc::Sum,
                target: AggTarget::Window("sample_wnd".into()),
                span: Span::default(),
            }),
            cmp: CmpOp::Gt,
            rhs: PredicateRhs::Const(6000),
        });
        let expected = PatternNode::Seq(
            Box::new(PatternNode::And(
                Box::new(pred("ipv4", "totalLen", CmpOp::Gt, 500)),
                Box::new(pred("tcp", "dstPort", CmpOp::Eq, 80)),
            )),
            Box::new(PatternNode::Or(
                Box::new(wnd_sum),
                Box::new(pred("ipv4", "protocol", CmpOp::Eq, 17)),
            )),
        );
        assert_eq!(evt.pattern, expected);
    }

    #[test]
    fn precedence_and_over_or_over_seq() {
        let src = "complex_event e { value 1 pattern \
                   [a.w == 1] ; [a.x == 2] || [a.y == 3] && [a.z == 4] }";
        let ast = parse_rules(src).unwrap();
        let expected = PatternNode::Seq(
            Box::new(pred("a", "w", CmpOp::Eq, 1)),
            Box::new(PatternNode::Or(
                Box::new(pred("a", "x", CmpOp::Eq, 2)),
                Box::new(PatternNode::And(
                    Box::new(pred("a", "y", CmpOp::Eq, 3)),
                    Box::new(pred("a", "z", CmpOp::Eq, 4)),
                )),
            )),
        );
        assert_eq!(ast.events[0].pattern, expected);
    }

    #[test]
    fn parens_override_precedence() {
        let src = "complex_event e { value 1 pattern \
                   ([a.w == 1] ; [a.x == 2]) && [a.y == 3] }";
        let ast = parse_rules(src).unwrap();
        let expected = PatternNode::And(
            Box::new(PatternNode::Seq(
                Box::new(pred("a", "w", CmpOp::Eq, 1)),
                Box::new(pred("a", "x", CmpOp::Eq, 2)),
            )),
            Box::new(pred("a", "y", CmpOp::Eq, 3)),
        );
        assert_eq!(ast.events[0].pattern, expected);
    }

    #[test]
    fn operators_left_associative() {
        let src = "complex_event e { value 1 pattern [a.x == 1] ; [a.y == 2] ; [a.z == 3] }";
        let ast = parse_rules(src).unwrap();
        let expected = PatternNode::Seq(
            Box::new(PatternNode::Seq(
                Box::new(pred("a", "x", CmpOp::Eq, 1)),
                Box::new(pred("a", "y", CmpOp::Eq, 2)),
            )),
            Box::new(pred("a", "z", CmpOp::Eq, 3)),
        );
        assert_eq!(ast.events[0].pattern, expected);
    }

    #[test]
    fn strategy_defaults_to_skip() {
        let src = "complex_event e { value 1 pattern [a.x == 1] }";
        let ast = parse_rules(src).unwrap();
        assert_eq!(ast.events[0].strategy, Strategy::SkipTillNextMatch);
    }

    #[test]
    fn strict_strategy_parses() {
        let src = "complex_event e { value 1 strategy strict pattern [a.x == 1] }";
        let ast = parse_rules(src).unwrap();
        assert_eq!(ast.events[0].strategy, Strategy::Strict);
    }

    #[test]
    fn return_value_keyword_accepted() {
        let src = "complex_event e { return_value pkt.len pattern [a.x == 1] }";
        let ast = parse_rules(src).unwrap();
        assert_eq!(
            ast.events[0].return_value,
            ReturnSpec::Field(FieldRef::new("pkt", "len"))
        );
    }

    #[test]
    fn outcome_window_parses() {
        let src = "window w { size 4 value [tcp.flags == 2] }";
        let ast = parse_rules(src).unwrap();
        assert!(matches!(ast.windows[0].source, WindowSource::Predicate(_)));
    }

    #[test]
    fn duplicate_names_rejected() {
        let src = "window w { size 4 value a.b } window w { size 2 value a.b }";
        let err = parse_rules(src).unwrap_err();
        assert!(matches!(err, ParseError::DuplicateName { ref name, .. } if name == "w"));
    }

    #[test]
    fn duplicate_across_kinds_rejected() {
        let src = "window w { size 4 value a.b } complex_event w { value 1 pattern [a.b == 1] }";
        assert!(matches!(
            parse_rules(src).unwrap_err(),
            ParseError::DuplicateName { .. }
        ));
    }

    #[test]
    fn zero_window_size_rejected() {
        let src = "window w { size 0 value a.b }";
        let err = parse_rules(src).unwrap_err();
        assert!(matches!(err, ParseError::ZeroWindowSize { .. }));
        assert_eq!(err.span(), Span::new(1, 17));
    }

    #[test]
    fn unknown_strategy_rejected() {
        let src = "complex_event e { value 1 strategy eager pattern [a.x == 1] }";
        assert!(matches!(
            parse_rules(src).unwrap_err(),
            ParseError::UnknownStrategy { ref name, .. } if name == "eager"
        ));
    }

    #[test]
    fn unknown_agg_func_rejected() {
        let src = "complex_event e { value median(w) pattern [a.x == 1] }";
        assert!(matches!(
            parse_rules(src).unwrap_err(),
            ParseError::UnknownAggFunc { ref name, .. } if name == "median"
        ));
    }

    #[test]
    fn missing_close_bracket_located() {
        let src = "complex_event e { value 1 pattern [a.x == 1 }";
        let err = parse_rules(src).unwrap_err();
        assert!(matches!(err, ParseError::Unexpected { .. }));
        assert_eq!(err.span(), Span::new(1, 45));
    }

    #[test]
    fn print_then_reparse_is_identity() {
        let ast = parse_rules(SAMPLE).unwrap();
        let printed = print_rules(&ast);
        let reparsed = parse_rules(&printed).unwrap();
        assert_eq!(ast, reparsed);
    }

    #[test]
    fn eof_reported_with_position() {
        let err = parse_rules("window w {").unwrap_err();
        assert!(matches!(err, ParseError::Eof { .. }));
    }
}
