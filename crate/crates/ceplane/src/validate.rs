//! Semantic checks between parsing and compilation.
//!
//! Resolves every field reference against the header sidecar (filling in
//! bit widths), resolves aggregate targets against declared windows, and
//! enforces which aggregate functions apply to which targets:
//!
//! * `count` needs a predicate-outcome window
//! * `sum` / `min` / `max` need a value window or a header field
//! * `avg` needs a value window whose size is a power of two, so the
//!   division compiles to a shift

use crate::ast::*;
use crate::headers::HeaderSet;
use std::collections::HashMap;

/// A [`RuleAst`] that passed [`validate`]: all field widths filled in,
/// all aggregate targets resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedRuleAst {
    ast: RuleAst,
}

impl CheckedRuleAst {
    pub fn ast(&self) -> &RuleAst {
        &self.ast
    }

    pub fn into_ast(self) -> RuleAst {
        self.ast
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidateError {
    #[error("{span}: unknown field `{name}`, not defined in the header sidecar")]
    UnresolvedField { name: String, span: Span },
    #[error("{span}: unknown window `{name}`")]
    UnresolvedWindow { name: String, span: Span },
    #[error("{span}: `count` requires a predicate-outcome window, `{target}` is not one")]
    CountNeedsOutcomeWindow { target: String, span: Span },
    #[error("{span}: `{func}` cannot aggregate outcome window `{window}`, it stores 0/1 predicate outcomes")]
    ValueAggOnOutcomeWindow {
        func: AggFunc,
        window: String,
        span: Span,
    },
    #[error("{span}: `avg` requires a window target")]
    AvgNeedsWindow { span: Span },
    #[error("{span}: `avg` over `{window}` requires a power-of-two size, got {size}")]
    AvgSizeNotPowerOfTwo {
        window: String,
        size: u32,
        span: Span,
    },
}

impl ValidateError {
    pub fn span(&self) -> Span {
        match self {
            ValidateError::UnresolvedField { span, .. }
            | ValidateError::UnresolvedWindow { span, .. }
            | ValidateError::CountNeedsOutcomeWindow { span, .. }
            | ValidateError::ValueAggOnOutcomeWindow { span, .. }
            | ValidateError::AvgNeedsWindow { span }
            | ValidateError::AvgSizeNotPowerOfTwo { span, .. } => *span,
        }
    }
}

#[derive(Clone, Copy)]
struct WindowInfo {
    size: u32,
    outcome: bool,
}

struct Checker<'a> {
    headers: &'a HeaderSet,
    windows: HashMap<String, WindowInfo>,
}

impl Checker<'_> {
    fn field(&self, fr: &mut FieldRef) -> Result<(), ValidateError> {
        match self.headers.width_of(&fr.dotted()) {
            Some(w) => {
                fr.width = Some(w);
                Ok(())
            }
            None => Err(ValidateError::UnresolvedField {
                name: fr.dotted(),
                span: fr.span,
            }),
        }
    }

    fn agg(&self, agg: &mut AggRef) -> Result<(), ValidateError> {
        match &mut agg.target {
            AggTarget::Field(fr) => {
                self.field(fr)?;
                match agg.func {
                    AggFunc::Sum | AggFunc::Min | AggFunc::Max => Ok(()),
                    AggFunc::Count => Err(ValidateError::CountNeedsOutcomeWindow {
                        target: fr.dotted(),
                        span: agg.span,
                    }),
                    AggFunc::Avg => Err(ValidateError::AvgNeedsWindow { span: agg.span }),
                }
            }
            AggTarget::Window(name) => {
                let info = self.windows.get(name.as_str()).copied().ok_or_else(|| {
                    ValidateError::UnresolvedWindow {
                        name: name.clone(),
                        span: agg.span,
                    }
                })?;
                match (agg.func, info.outcome) {
                    (AggFunc::Count, true) => Ok(()),
                    (AggFunc::Count, false) => Err(ValidateError::CountNeedsOutcomeWindow {
                        target: name.clone(),
                        span: agg.span,
                    }),
                    (_, true) => Err(ValidateError::ValueAggOnOutcomeWindow {
                        func: agg.func,
                        window: name.clone(),
                        span: agg.span,
                    }),
                    (AggFunc::Avg, false) => {
                        if info.size.is_power_of_two() {
                            Ok(())
                        } else {
                            Err(ValidateError::AvgSizeNotPowerOfTwo {
                                window: name.clone(),
                                size: info.size,
                                span: agg.span,
                            })
                        }
                    }
                    (_, false) => Ok(()),
                }
            }
        }
    }

    fn predicate(&self, p: &mut PredicateExpr) -> Result<(), ValidateError> {
        match &mut p.lhs {
            PredicateLhs::Field(fr) => self.field(fr)?,
            PredicateLhs::Agg(a) => self.agg(a)?,
        }
        match &mut p.rhs {
            PredicateRhs::Const(_) => {}
            PredicateRhs::Field(fr) => self.field(fr)?,
        }
        Ok(())
    }

    fn pattern(&self, node: &mut PatternNode) -> Result<(), ValidateError> {
        match node {
            PatternNode::Predicate(p) => self.predicate(p),
            PatternNode::Seq(l, r) | PatternNode::And(l, r) | PatternNode::Or(l, r) => {
                self.pattern(l)?;
                self.pattern(r)
            }
        }
    }
}

/// Check a parsed AST against a header sidecar. On success the returned
/// AST has every [`FieldRef::width`] populated.
pub fn validate(mut ast: RuleAst, headers: &HeaderSet) -> Result<CheckedRuleAst, ValidateError> {
    let windows = ast
        .windows
        .iter()
        .map(|w| {
            let info = WindowInfo {
                size: w.size,
                outcome: matches!(w.source, WindowSource::Predicate(_)),
            };
            (w.name.clone(), info)
        })
        .collect();
    let checker = Checker { headers, windows };

    for w in &mut ast.windows {
        match &mut w.source {
            WindowSource::Field(fr) => checker.field(fr)?,
            WindowSource::Predicate(p) => checker.predicate(p)?,
        }
    }
    for e in &mut ast.events {
        match &mut e.return_value {
            ReturnSpec::Const(_) => {}
            ReturnSpec::Field(fr) => checker.field(fr)?,
            ReturnSpec::Agg(a) => checker.agg(a)?,
        }
        checker.pattern(&mut e.pattern)?;
    }
    Ok(CheckedRuleAst { ast })
}
