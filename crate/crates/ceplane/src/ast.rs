//! Typed syntax tree for the rule language.
//!
//! A rule file declares sliding windows over packet header fields and
//! complex events described by predicate patterns. [`RuleAst`] is the
//! parser's output; [`crate::validate::validate`] resolves field widths
//! and aggregate targets against a header sidecar before compilation.

use std::fmt;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A parsed rule file: window declarations plus complex-event declarations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleAst {
    pub windows: Vec<WindowDecl>,
    pub events: Vec<ComplexEventDecl>,
}

/// `window <name> { size <n> value <source> }`
#[derive(Debug, Clone)]
pub struct WindowDecl {
    pub name: String,
    pub size: u32,
    pub source: WindowSource,
    pub span: Span,
}

impl PartialEq for WindowDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.size == other.size && self.source == other.source
    }
}

/// What a window stores each packet: a header field value, or the 0/1
/// outcome of a predicate (the form `count` aggregates over).
#[derive(Debug, Clone, PartialEq)]
pub enum WindowSource {
    Field(FieldRef),
    Predicate(PredicateExpr),
}

/// `complex_event <name> { value <ret> [strategy <s>] pattern <p> }`
#[derive(Debug, Clone)]
pub struct ComplexEventDecl {
    pub name: String,
    pub return_value: ReturnSpec,
    pub strategy: Strategy,
    pub pattern: PatternNode,
    pub span: Span,
}

impl PartialEq for ComplexEventDecl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.return_value == other.return_value
            && self.strategy == other.strategy
            && self.pattern == other.pattern
    }
}

/// Behavior when a packet matches no transition of the event's machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Ignore the packet, stay in the current state.
    SkipTillNextMatch,
    /// Reset the machine to its initial state.
    Strict,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::SkipTillNextMatch => f.write_str("skip-till-next-match"),
            Strategy::Strict => f.write_str("strict"),
        }
    }
}

/// Value carried by an emitted complex event.
#[derive(Debug, Clone, PartialEq)]
pub enum ReturnSpec {
    Const(u32),
    Field(FieldRef),
    Agg(AggRef),
}

/// Pattern operators over bracketed predicates.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternNode {
    Predicate(PredicateExpr),
    /// Left must complete before the right starts.
    Seq(Box<PatternNode>, Box<PatternNode>),
    /// Both operands complete, their events interleaved in any order.
    And(Box<PatternNode>, Box<PatternNode>),
    /// Either operand completes.
    Or(Box<PatternNode>, Box<PatternNode>),
}

impl PatternNode {
    /// Number of predicate leaves, counting repeats.
    pub fn leaf_count(&self) -> usize {
        match self {
            PatternNode::Predicate(_) => 1,
            PatternNode::Seq(l, r) | PatternNode::And(l, r) | PatternNode::Or(l, r) => {
                l.leaf_count() + r.leaf_count()
            }
        }
    }

    /// Visit predicate leaves left to right.
    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a PredicateExpr)) {
        match self {
            PatternNode::Predicate(p) => f(p),
            PatternNode::Seq(l, r) | PatternNode::And(l, r) | PatternNode::Or(l, r) => {
                l.for_each_leaf(f);
                r.for_each_leaf(f);
            }
        }
    }
}

/// `<lhs> <cmp> <rhs>` — a boolean condition on one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateExpr {
    pub lhs: PredicateLhs,
    pub cmp: CmpOp,
    pub rhs: PredicateRhs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredicateLhs {
    Field(FieldRef),
    Agg(AggRef),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredicateRhs {
    Const(u32),
    Field(FieldRef),
}

/// Unsigned comparison operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn eval(self, lhs: u32, rhs: u32) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `<header>.<field>` reference; `width` is filled in by validation.
#[derive(Debug, Clone)]
pub struct FieldRef {
    pub header: String,
    pub field: String,
    pub width: Option<u8>,
    pub span: Span,
}

impl FieldRef {
    pub fn new(header: impl Into<String>, field: impl Into<String>) -> Self {
        FieldRef {
            header: header.into(),
            field: field.into(),
            width: None,
            span: Span::default(),
        }
    }

    /// Dotted name as written in source.
    pub fn dotted(&self) -> String {
        format!("{}.{}", self.header, self.field)
    }
}

impl PartialEq for FieldRef {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.field == other.field
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.header, self.field)
    }
}

/// Aggregation functions over windows or header fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggFunc {
    Sum,
    Min,
    Max,
    Count,
    Avg,
}

impl AggFunc {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFunc::Sum => "sum",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Count => "count",
            AggFunc::Avg => "avg",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "sum" => AggFunc::Sum,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            "count" => AggFunc::Count,
            "avg" => AggFunc::Avg,
            _ => return None,
        })
    }
}

impl fmt::Display for AggFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `<func>(<window>)` or `<func>(<header>.<field>)`.
#[derive(Debug, Clone)]
pub struct AggRef {
    pub func: AggFunc,
    pub target: AggTarget,
    pub span: Span,
}

impl PartialEq for AggRef {
    fn eq(&self, other: &Self) -> bool {
        self.func == other.func && self.target == other.target
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggTarget {
    Window(String),
    Field(FieldRef),
}

impl fmt::Display for AggRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            AggTarget::Window(w) => write!(f, "{}({})", self.func, w),
            AggTarget::Field(fr) => write!(f, "{}({})", self.func, fr),
        }
    }
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lhs {
            PredicateLhs::Field(fr) => write!(f, "{}", fr)?,
            PredicateLhs::Agg(a) => write!(f, "{}", a)?,
        }
        write!(f, " {} ", self.cmp)?;
        match &self.rhs {
            PredicateRhs::Const(c) => write!(f, "{}", c),
            PredicateRhs::Field(fr) => write!(f, "{}", fr),
        }
    }
}

impl fmt::Display for PatternNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn operand(n: &PatternNode, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match n {
                PatternNode::Predicate(_) => write!(f, "{}", n),
                _ => write!(f, "({})", n),
            }
        }
        match self {
            PatternNode::Predicate(p) => write!(f, "[{}]", p),
            PatternNode::Seq(l, r) => {
                operand(l, f)?;
                f.write_str(" ; ")?;
                operand(r, f)
            }
            PatternNode::And(l, r) => {
                operand(l, f)?;
                f.write_str(" && ")?;
                operand(r, f)
            }
            PatternNode::Or(l, r) => {
                operand(l, f)?;
                f.write_str(" || ")?;
                operand(r, f)
            }
        }
    }
}

/// Render an AST back to rule-file syntax. Re-parsing the output yields a
/// structurally equal AST; compound pattern operands are parenthesized.
pub fn print_rules(ast: &RuleAst) -> String {
    let mut out = String::new();
    for w in &ast.windows {
        out.push_str(&format!("window {} {{\n  size {}\n", w.name, w.size));
        match &w.source {
            WindowSource::Field(fr) => out.push_str(&format!("  value {}\n", fr)),
            WindowSource::Predicate(p) => out.push_str(&format!("  value [{}]\n", p)),
        }
        out.push_str("}\n");
    }
    for e in &ast.events {
        out.push_str(&format!("complex_event {} {{\n", e.name));
        match &e.return_value {
            ReturnSpec::Const(c) => out.push_str(&format!("  value {}\n", c)),
            ReturnSpec::Field(fr) => out.push_str(&format!("  value {}\n", fr)),
            ReturnSpec::Agg(a) => out.push_str(&format!("  value {}\n", a)),
        }
        out.push_str(&format!("  strategy {}\n", e.strategy));
        out.push_str(&format!("  pattern {}\n", e.pattern));
        out.push_str("}\n");
    }
    out
}
