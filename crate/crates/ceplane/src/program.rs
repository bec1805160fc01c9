//! Compiled programs: the bridge between checked rules and execution.
//!
//! [`compile`] lowers a checked AST into flat tables: a packet field
//! layout, aggregation plans, a deduplicated predicate pool, and one
//! transition table per complex event. Predicates `0..symbol_count` are
//! the pattern symbols; a packet's symbol is the lowest-numbered true
//! one, independent of any machine state. Structurally equal predicates
//! share one id across all machines.
//!
//! Aggregates compile to plans:
//!
//! * declared windows become ring plans, in declaration order
//! * `func(header.field)` inside a predicate is a running aggregate over
//!   every packet since deploy, keeping symbol resolution stateless
//! * `func(header.field)` in a return value is a running aggregate over
//!   the packets a machine has been away from its initial state,
//!   counted from the packet that moved it off
//!
//! The whole program round-trips through a versioned line-oriented text
//! form, so compiled artifacts can be stored and re-deployed without
//! the original rules.

use crate::ast::*;
use crate::dfa::{determinize, Dfa, TransitionRow};
use crate::nfa::{build_nfa, SymPattern};
use crate::validate::CheckedRuleAst;
use std::collections::HashMap;
use std::fmt::Write as _;

/// One packet field the program reads: dotted name plus bit width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSlot {
    pub name: String,
    pub width: u8,
}

/// A value read while evaluating a predicate or return value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    /// Packet field by index into [`CompiledProgram::fields`].
    Field(u32),
    Const(u32),
    /// Aggregate of a plan. For ring plans `func` selects the fold; for
    /// running plans it must match the plan's own function.
    Agg { func: AggFunc, plan: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompiledPredicate {
    pub lhs: Operand,
    pub cmp: CmpOp,
    pub rhs: Operand,
}

/// Per-packet aggregation state the engine maintains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggPlan {
    /// Declared window over a field: ring of the last `capacity` values.
    Ring {
        name: String,
        capacity: u32,
        source: u32,
    },
    /// Declared window over a predicate: ring of 0/1 outcomes. The
    /// predicate evaluates against counts from before this packet's
    /// outcome is inserted.
    RingOutcome {
        name: String,
        capacity: u32,
        predicate: u32,
    },
    /// Running fold over every packet since deploy.
    RunningGlobal { func: AggFunc, source: u32 },
    /// Running fold over the current run of `machine`: reset while the
    /// machine sits in its initial state, accumulated from the packet
    /// that moves it off until the one that accepts.
    RunningMachine {
        func: AggFunc,
        source: u32,
        machine: u32,
    },
}

impl AggPlan {
    pub fn capacity(&self) -> Option<u32> {
        match self {
            AggPlan::Ring { capacity, .. } | AggPlan::RingOutcome { capacity, .. } => {
                Some(*capacity)
            }
            _ => None,
        }
    }
}

/// One complex event: its strategy, return value, and transition table.
/// State 0 is initial; `accept` is terminal with no outgoing rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledMachine {
    pub name: String,
    pub strategy: Strategy,
    pub return_value: Operand,
    pub state_count: u32,
    pub accept: u32,
    pub rows: Vec<TransitionRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledProgram {
    pub fields: Vec<FieldSlot>,
    pub plans: Vec<AggPlan>,
    pub predicates: Vec<CompiledPredicate>,
    /// Predicates below this index are pattern symbols.
    pub symbol_count: u32,
    pub machines: Vec<CompiledMachine>,
}

impl CompiledProgram {
    pub fn field_index(&self, dotted: &str) -> Option<u32> {
        self.fields
            .iter()
            .position(|f| f.name == dotted)
            .map(|i| i as u32)
    }

    pub fn machine_index(&self, name: &str) -> Option<u32> {
        self.machines
            .iter()
            .position(|m| m.name == name)
            .map(|i| i as u32)
    }
}

struct Builder {
    fields: Vec<FieldSlot>,
    field_ids: HashMap<String, u32>,
    plans: Vec<AggPlan>,
    window_plans: HashMap<String, u32>,
    running_global: HashMap<(AggFunc, u32), u32>,
    running_machine: HashMap<(u32, AggFunc, u32), u32>,
    predicates: Vec<CompiledPredicate>,
}

impl Builder {
    fn field(&mut self, fr: &FieldRef) -> u32 {
        let dotted = fr.dotted();
        if let Some(&id) = self.field_ids.get(&dotted) {
            return id;
        }
        let id = self.fields.len() as u32;
        self.fields.push(FieldSlot {
            name: dotted.clone(),
            width: fr.width.expect("validated AST has widths"),
        });
        self.field_ids.insert(dotted, id);
        id
    }

    /// Aggregate operand in predicate position: window aggregates read
    /// the window's ring, field aggregates a global running fold.
    fn agg_in_predicate(&mut self, agg: &AggRef) -> Operand {
        match &agg.target {
            AggTarget::Window(name) => Operand::Agg {
                func: agg.func,
                plan: self.window_plans[name.as_str()],
            },
            AggTarget::Field(fr) => {
                let source = self.field(fr);
                let key = (agg.func, source);
                let plan = *self.running_global.entry(key).or_insert_with(|| {
                    let id = self.plans.len() as u32;
                    self.plans.push(AggPlan::RunningGlobal { func: agg.func, source });
                    id
                });
                Operand::Agg { func: agg.func, plan }
            }
        }
    }

    /// Aggregate operand in return position for `machine`: field
    /// aggregates fold over the machine's current run instead.
    fn agg_in_return(&mut self, agg: &AggRef, machine: u32) -> Operand {
        match &agg.target {
            AggTarget::Window(name) => Operand::Agg {
                func: agg.func,
                plan: self.window_plans[name.as_str()],
            },
            AggTarget::Field(fr) => {
                let source = self.field(fr);
                let key = (machine, agg.func, source);
                let plan = *self.running_machine.entry(key).or_insert_with(|| {
                    let id = self.plans.len() as u32;
                    self.plans.push(AggPlan::RunningMachine {
                        func: agg.func,
                        source,
                        machine,
                    });
                    id
                });
                Operand::Agg { func: agg.func, plan }
            }
        }
    }

    /// Compile and deduplicate on the resolved form.
    fn predicate(&mut self, p: &PredicateExpr) -> u32 {
        let lhs = match &p.lhs {
            PredicateLhs::Field(fr) => Operand::Field(self.field(fr)),
            PredicateLhs::Agg(a) => self.agg_in_predicate(a),
        };
        let rhs = match &p.rhs {
            PredicateRhs::Const(c) => Operand::Const(*c),
            PredicateRhs::Field(fr) => Operand::Field(self.field(fr)),
        };
        let compiled = CompiledPredicate { lhs, cmp: p.cmp, rhs };
        if let Some(i) = self.predicates.iter().position(|q| *q == compiled) {
            return i as u32;
        }
        self.predicates.push(compiled);
        (self.predicates.len() - 1) as u32
    }
}

fn to_sym_pattern(node: &PatternNode, ids: &mut std::vec::IntoIter<u32>) -> SymPattern {
    match node {
        PatternNode::Predicate(_) => SymPattern::Sym(ids.next().expect("one id per leaf")),
        PatternNode::Seq(l, r) => SymPattern::Seq(
            Box::new(to_sym_pattern(l, ids)),
            Box::new(to_sym_pattern(r, ids)),
        ),
        PatternNode::And(l, r) => SymPattern::And(
            Box::new(to_sym_pattern(l, ids)),
            Box::new(to_sym_pattern(r, ids)),
        ),
        PatternNode::Or(l, r) => SymPattern::Or(
            Box::new(to_sym_pattern(l, ids)),
            Box::new(to_sym_pattern(r, ids)),
        ),
    }
}

/// Lower a checked AST. Deterministic: equal inputs give equal programs.
pub fn compile(checked: &CheckedRuleAst) -> CompiledProgram {
    let ast = checked.ast();
    let mut b = Builder {
        fields: Vec::new(),
        field_ids: HashMap::new(),
        plans: Vec::new(),
        window_plans: HashMap::new(),
        running_global: HashMap::new(),
        running_machine: HashMap::new(),
        predicates: Vec::new(),
    };

    // Declared windows claim the leading plan slots in declaration
    // order; outcome predicates are filled in after the symbol pass so
    // pattern predicates keep the low ids.
    for w in &ast.windows {
        let plan = b.plans.len() as u32;
        b.window_plans.insert(w.name.clone(), plan);
        match &w.source {
            WindowSource::Field(fr) => {
                let source = b.field(fr);
                b.plans.push(AggPlan::Ring {
                    name: w.name.clone(),
                    capacity: w.size,
                    source,
                });
            }
            WindowSource::Predicate(_) => {
                b.plans.push(AggPlan::RingOutcome {
                    name: w.name.clone(),
                    capacity: w.size,
                    predicate: u32::MAX,
                });
            }
        }
    }

    // Pattern symbols: events in order, leaves left to right.
    let mut leaf_ids: Vec<Vec<u32>> = Vec::with_capacity(ast.events.len());
    for e in &ast.events {
        let mut ids = Vec::new();
        let mut leaves = Vec::new();
        e.pattern.for_each_leaf(&mut |p| leaves.push(p.clone()));
        for leaf in &leaves {
            ids.push(b.predicate(leaf));
        }
        leaf_ids.push(ids);
    }
    let symbol_count = b.predicates.len() as u32;

    for (i, w) in ast.windows.iter().enumerate() {
        if let WindowSource::Predicate(p) = &w.source {
            let pred = b.predicate(p);
            match &mut b.plans[i] {
                AggPlan::RingOutcome { predicate, .. } => *predicate = pred,
                _ => unreachable!("window plan slots follow declaration order"),
            }
        }
    }

    let returns: Vec<Operand> = ast
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| match &e.return_value {
            ReturnSpec::Const(c) => Operand::Const(*c),
            ReturnSpec::Field(fr) => Operand::Field(b.field(fr)),
            ReturnSpec::Agg(a) => b.agg_in_return(a, i as u32),
        })
        .collect();

    let machines = ast
        .events
        .iter()
        .zip(leaf_ids)
        .zip(returns)
        .map(|((e, ids), return_value)| {
            let mut iter = ids.into_iter();
            let sym = to_sym_pattern(&e.pattern, &mut iter);
            let Dfa { state_count, accept, rows } =
                determinize(&build_nfa(&sym), symbol_count);
            CompiledMachine {
                name: e.name.clone(),
                strategy: e.strategy,
                return_value,
                state_count,
                accept,
                rows,
            }
        })
        .collect();

    CompiledProgram {
        fields: b.fields,
        plans: b.plans,
        predicates: b.predicates,
        symbol_count,
        machines,
    }
}

const FORMAT_HEADER: &str = "ceplane-program v1";

/// Cap on window capacity accepted by [`CompiledProgram::from_text`];
/// also bounds every other count in the file.
pub const MAX_TEXT_CAPACITY: u32 = 1 << 24;
const MAX_TEXT_COUNT: u32 = 1 << 20;

fn cmp_token(c: CmpOp) -> &'static str {
    match c {
        CmpOp::Eq => "eq",
        CmpOp::Ne => "ne",
        CmpOp::Lt => "lt",
        CmpOp::Le => "le",
        CmpOp::Gt => "gt",
        CmpOp::Ge => "ge",
    }
}

fn cmp_from_token(t: &str) -> Option<CmpOp> {
    Some(match t {
        "eq" => CmpOp::Eq,
        "ne" => CmpOp::Ne,
        "lt" => CmpOp::Lt,
        "le" => CmpOp::Le,
        "gt" => CmpOp::Gt,
        "ge" => CmpOp::Ge,
        _ => return None,
    })
}

fn strategy_token(s: Strategy) -> &'static str {
    match s {
        Strategy::SkipTillNextMatch => "skip-till-next-match",
        Strategy::Strict => "strict",
    }
}

fn operand_text(op: &Operand) -> String {
    match op {
        Operand::Field(i) => format!("field {}", i),
        Operand::Const(c) => format!("const {}", c),
        Operand::Agg { func, plan } => format!("agg {} plan {}", func, plan),
    }
}

impl CompiledProgram {
    /// Serialize to the versioned line-oriented text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", FORMAT_HEADER);
        let _ = writeln!(out, "fields {}", self.fields.len());
        for f in &self.fields {
            let _ = writeln!(out, "field {} {}", f.name, f.width);
        }
        let _ = writeln!(out, "plans {}", self.plans.len());
        for (i, p) in self.plans.iter().enumerate() {
            match p {
                AggPlan::Ring { name, capacity, source } => {
                    let _ = writeln!(out, "plan {} ring {} cap {} field {}", i, name, capacity, source);
                }
                AggPlan::RingOutcome { name, capacity, predicate } => {
                    let _ = writeln!(
                        out,
                        "plan {} ring-outcome {} cap {} pred {}",
                        i, name, capacity, predicate
                    );
                }
                AggPlan::RunningGlobal { func, source } => {
                    let _ = writeln!(out, "plan {} running-global {} field {}", i, func, source);
                }
                AggPlan::RunningMachine { func, source, machine } => {
                    let _ = writeln!(
                        out,
                        "plan {} running-machine {} field {} machine {}",
                        i, func, source, machine
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            "predicates {} symbols {}",
            self.predicates.len(),
            self.symbol_count
        );
        for (i, p) in self.predicates.iter().enumerate() {
            let _ = writeln!(
                out,
                "pred {} {} {} {}",
                i,
                operand_text(&p.lhs),
                cmp_token(p.cmp),
                operand_text(&p.rhs)
            );
        }
        let _ = writeln!(out, "machines {}", self.machines.len());
        for m in &self.machines {
            let _ = writeln!(out, "machine {}", m.name);
            let _ = writeln!(out, "strategy {}", strategy_token(m.strategy));
            let _ = writeln!(out, "return {}", operand_text(&m.return_value));
            let _ = writeln!(
                out,
                "states {} initial 0 accepting {}",
                m.state_count, m.accept
            );
            let _ = writeln!(out, "rows {}", m.rows.len());
            for r in &m.rows {
                let _ = writeln!(
                    out,
                    "row {} {} {} {}",
                    r.state,
                    r.symbol,
                    r.next,
                    if r.accepting { 1 } else { 0 }
                );
            }
            let _ = writeln!(out, "end");
        }
        let _ = writeln!(out, "end");
        out
    }

    /// Parse and validate the text form. Every cross-reference is range
    /// checked, so a loaded program is safe to execute.
    pub fn from_text(src: &str) -> Result<CompiledProgram, ProgramTextError> {
        Reader::new(src).program()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ProgramTextError {
    pub line: usize,
    pub msg: String,
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    current_line: usize,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader {
            lines: src.lines().enumerate(),
            current_line: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ProgramTextError {
        ProgramTextError {
            line: self.current_line,
            msg: msg.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str, ProgramTextError> {
        for (idx, raw) in self.lines.by_ref() {
            self.current_line = idx + 1;
            let line = raw.trim();
            if !line.is_empty() {
                return Ok(line);
            }
        }
        self.current_line += 1;
        Err(ProgramTextError {
            line: self.current_line,
            msg: "unexpected end of input".into(),
        })
    }

    fn count(&self, text: &str, what: &str) -> Result<u32, ProgramTextError> {
        let n: u32 = text
            .parse()
            .map_err(|_| self.err(format!("invalid {} count `{}`", what, text)))?;
        if n > MAX_TEXT_COUNT {
            return Err(self.err(format!("{} count {} exceeds limit {}", what, n, MAX_TEXT_COUNT)));
        }
        Ok(n)
    }

    fn operand(
        &self,
        toks: &mut std::slice::Iter<'_, &str>,
    ) -> Result<Operand, ProgramTextError> {
        match toks.next() {
            Some(&"field") => {
                let i = self.num(toks.next(), "field index")?;
                Ok(Operand::Field(i))
            }
            Some(&"const") => {
                let c = self.num(toks.next(), "constant")?;
                Ok(Operand::Const(c))
            }
            Some(&"agg") => {
                let func = toks
                    .next()
                    .and_then(|t| AggFunc::from_str(t))
                    .ok_or_else(|| self.err("expected aggregate function"))?;
                if toks.next() != Some(&"plan") {
                    return Err(self.err("expected `plan`"));
                }
                let plan = self.num(toks.next(), "plan index")?;
                Ok(Operand::Agg { func, plan })
            }
            other => Err(self.err(format!("expected operand, got `{:?}`", other))),
        }
    }

    fn num(&self, tok: Option<&&str>, what: &str) -> Result<u32, ProgramTextError> {
        tok.ok_or_else(|| self.err(format!("missing {}", what)))?
            .parse()
            .map_err(|_| self.err(format!("invalid {}", what)))
    }

    fn program(&mut self) -> Result<CompiledProgram, ProgramTextError> {
        if self.next_line()? != FORMAT_HEADER {
            return Err(self.err(format!("expected `{}` header", FORMAT_HEADER)));
        }

        let line = self.next_line()?;
        let field_count = match line.strip_prefix("fields ") {
            Some(rest) => self.count(rest, "field")?,
            None => return Err(self.err("expected `fields <n>`")),
        };
        let mut fields = Vec::new();
        for i in 0..field_count {
            let line = self.next_line()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["field", name, width] => {
                    let width: u8 = width
                        .parse()
                        .map_err(|_| self.err("invalid field width"))?;
                    if width == 0 || width > 32 {
                        return Err(self.err(format!("field width {} out of range 1..=32", width)));
                    }
                    if fields.iter().any(|f: &FieldSlot| f.name == *name) {
                        return Err(self.err(format!("duplicate field `{}`", name)));
                    }
                    fields.push(FieldSlot { name: name.to_string(), width });
                }
                _ => return Err(self.err(format!("expected `field <name> <width>` ({}-th)", i))),
            }
        }

        let line = self.next_line()?;
        let plan_count = match line.strip_prefix("plans ") {
            Some(rest) => self.count(rest, "plan")?,
            None => return Err(self.err("expected `plans <n>`")),
        };
        let mut plans = Vec::new();
        for i in 0..plan_count {
            let line = self.next_line()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let check_field = |r: &Self, idx: u32| -> Result<u32, ProgramTextError> {
                if idx as usize >= fields.len() {
                    Err(r.err(format!("field index {} out of range", idx)))
                } else {
                    Ok(idx)
                }
            };
            let check_cap = |r: &Self, cap: u32| -> Result<u32, ProgramTextError> {
                if cap == 0 || cap > MAX_TEXT_CAPACITY {
                    Err(r.err(format!("capacity {} out of range 1..={}", cap, MAX_TEXT_CAPACITY)))
                } else {
                    Ok(cap)
                }
            };
            let plan = match toks.as_slice() {
                ["plan", idx, "ring", name, "cap", cap, "field", source] => {
                    self.expect_index(idx, i)?;
                    AggPlan::Ring {
                        name: name.to_string(),
                        capacity: check_cap(self, self.num(Some(&cap), "capacity")?)?,
                        source: check_field(self, self.num(Some(&source), "field index")?)?,
                    }
                }
                ["plan", idx, "ring-outcome", name, "cap", cap, "pred", pred] => {
                    self.expect_index(idx, i)?;
                    AggPlan::RingOutcome {
                        name: name.to_string(),
                        capacity: check_cap(self, self.num(Some(&cap), "capacity")?)?,
                        // Range checked once predicates are read.
                        predicate: self.num(Some(&pred), "predicate index")?,
                    }
                }
                ["plan", idx, "running-global", func, "field", source] => {
                    self.expect_index(idx, i)?;
                    AggPlan::RunningGlobal {
                        func: self.running_func(func)?,
                        source: check_field(self, self.num(Some(&source), "field index")?)?,
                    }
                }
                ["plan", idx, "running-machine", func, "field", source, "machine", machine] => {
                    self.expect_index(idx, i)?;
                    AggPlan::RunningMachine {
                        func: self.running_func(func)?,
                        source: check_field(self, self.num(Some(&source), "field index")?)?,
                        machine: self.num(Some(&machine), "machine index")?,
                    }
                }
                _ => return Err(self.err("malformed plan line")),
            };
            if let AggPlan::Ring { name, .. } | AggPlan::RingOutcome { name, .. } = &plan {
                let dup = plans.iter().any(|p| match p {
                    AggPlan::Ring { name: n, .. } | AggPlan::RingOutcome { name: n, .. } => n == name,
                    _ => false,
                });
                if dup {
                    return Err(self.err(format!("duplicate window name `{}`", name)));
                }
            }
            plans.push(plan);
        }

        let line = self.next_line()?;
        let (pred_count, symbol_count) = {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["predicates", n, "symbols", s] => {
                    (self.count(n, "predicate")?, self.count(s, "symbol")?)
                }
                _ => return Err(self.err("expected `predicates <n> symbols <s>`")),
            }
        };
        if symbol_count > pred_count {
            return Err(self.err("symbol count exceeds predicate count"));
        }
        let mut predicates = Vec::new();
        for i in 0..pred_count {
            let line = self.next_line()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut it = toks.iter();
            if it.next() != Some(&"pred") {
                return Err(self.err("expected `pred`"));
            }
            self.expect_index(it.next().copied().unwrap_or(""), i)?;
            let lhs = self.operand(&mut it)?;
            let cmp = it
                .next()
                .and_then(|t| cmp_from_token(t))
                .ok_or_else(|| self.err("expected comparison"))?;
            let rhs = self.operand(&mut it)?;
            if it.next().is_some() {
                return Err(self.err("trailing tokens on predicate line"));
            }
            predicates.push(CompiledPredicate { lhs, cmp, rhs });
        }

        let line = self.next_line()?;
        let machine_count = match line.strip_prefix("machines ") {
            Some(rest) => self.count(rest, "machine")?,
            None => return Err(self.err("expected `machines <n>`")),
        };
        let mut machines = Vec::new();
        for _ in 0..machine_count {
            machines.push(self.machine(symbol_count)?);
        }
        if self.next_line()? != "end" {
            return Err(self.err("expected final `end`"));
        }

        let program = CompiledProgram {
            fields,
            plans,
            predicates,
            symbol_count,
            machines,
        };
        self.check_references(&program)?;
        Ok(program)
    }

    /// Running folds are maintained incrementally, so only the
    /// incremental functions are allowed.
    fn running_func(&self, tok: &str) -> Result<AggFunc, ProgramTextError> {
        match AggFunc::from_str(tok) {
            Some(f @ (AggFunc::Sum | AggFunc::Min | AggFunc::Max)) => Ok(f),
            Some(f) => Err(self.err(format!("running aggregates do not support `{}`", f))),
            None => Err(self.err("unknown aggregate function")),
        }
    }

    fn expect_index(&self, tok: &str, want: u32) -> Result<(), ProgramTextError> {
        let got: u32 = tok
            .parse()
            .map_err(|_| self.err(format!("invalid index `{}`", tok)))?;
        if got != want {
            return Err(self.err(format!("index {} out of order, expected {}", got, want)));
        }
        Ok(())
    }

    fn machine(&mut self, symbol_count: u32) -> Result<CompiledMachine, ProgramTextError> {
        let line = self.next_line()?;
        let name = line
            .strip_prefix("machine ")
            .ok_or_else(|| self.err("expected `machine <name>`"))?
            .trim()
            .to_string();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(self.err("machine name must be a single word"));
        }

        let line = self.next_line()?;
        let strategy = match line.strip_prefix("strategy ") {
            Some("skip-till-next-match") => Strategy::SkipTillNextMatch,
            Some("strict") => Strategy::Strict,
            _ => return Err(self.err("expected `strategy skip-till-next-match|strict`")),
        };

        let line = self.next_line()?;
        let return_value = match line.strip_prefix("return ") {
            Some(rest) => {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                let mut it = toks.iter();
                let op = self.operand(&mut it)?;
                if it.next().is_some() {
                    return Err(self.err("trailing tokens on return line"));
                }
                op
            }
            None => return Err(self.err("expected `return <operand>`")),
        };

        let line = self.next_line()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (state_count, accept) = match toks.as_slice() {
            ["states", n, "initial", "0", "accepting", a] => {
                (self.count(n, "state")?, self.num(Some(a), "accepting state")?)
            }
            _ => return Err(self.err("expected `states <n> initial 0 accepting <a>`")),
        };
        if state_count == 0 {
            return Err(self.err("machine needs at least one state"));
        }
        if accept >= state_count {
            return Err(self.err("accepting state out of range"));
        }

        let line = self.next_line()?;
        let row_count = match line.strip_prefix("rows ") {
            Some(rest) => self.count(rest, "row")?,
            None => return Err(self.err("expected `rows <n>`")),
        };
        let mut rows: Vec<TransitionRow> = Vec::new();
        for _ in 0..row_count {
            let line = self.next_line()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let row = match toks.as_slice() {
                ["row", q, x, qn, acc] => TransitionRow {
                    state: self.num(Some(q), "state")?,
                    symbol: self.num(Some(x), "symbol")?,
                    next: self.num(Some(qn), "next state")?,
                    accepting: match *acc {
                        "0" => false,
                        "1" => true,
                        _ => return Err(self.err("accepting flag must be 0 or 1")),
                    },
                },
                _ => return Err(self.err("expected `row <q> <x> <q_n> <acc>`")),
            };
            if row.state >= state_count || row.next >= state_count {
                return Err(self.err("row state out of range"));
            }
            if row.state == accept {
                return Err(self.err("row leaves the accepting state"));
            }
            if row.symbol >= symbol_count {
                return Err(self.err("row symbol out of range"));
            }
            if row.accepting != (row.next == accept) {
                return Err(self.err("accepting flag must match accepting target"));
            }
            if rows.iter().any(|r| r.state == row.state && r.symbol == row.symbol) {
                return Err(self.err("duplicate (state, symbol) row"));
            }
            rows.push(row);
        }
        if self.next_line()? != "end" {
            return Err(self.err("expected machine `end`"));
        }
        Ok(CompiledMachine {
            name,
            strategy,
            return_value,
            state_count,
            accept,
            rows,
        })
    }

    /// Cross-reference checks that need the whole program.
    fn check_references(&self, p: &CompiledProgram) -> Result<(), ProgramTextError> {
        let plan_ref = |op: &Operand| -> Option<(AggFunc, u32)> {
            match op {
                Operand::Agg { func, plan } => Some((*func, *plan)),
                _ => None,
            }
        };
        let field_ref = |op: &Operand| -> Option<u32> {
            match op {
                Operand::Field(i) => Some(*i),
                _ => None,
            }
        };
        let check_op = |op: &Operand| -> Result<(), ProgramTextError> {
            if let Some(i) = field_ref(op) {
                if i as usize >= p.fields.len() {
                    return Err(self.err(format!("field index {} out of range", i)));
                }
            }
            if let Some((func, plan)) = plan_ref(op) {
                let target = p.plans.get(plan as usize).ok_or_else(|| {
                    self.err(format!("plan index {} out of range", plan))
                })?;
                let ok = match target {
                    AggPlan::Ring { capacity, .. } => match func {
                        AggFunc::Sum | AggFunc::Min | AggFunc::Max => true,
                        AggFunc::Avg => capacity.is_power_of_two(),
                        AggFunc::Count => false,
                    },
                    AggPlan::RingOutcome { .. } => func == AggFunc::Count,
                    AggPlan::RunningGlobal { func: f, .. }
                    | AggPlan::RunningMachine { func: f, .. } => func == *f,
                };
                if !ok {
                    return Err(self.err(format!(
                        "aggregate `{}` does not apply to plan {}",
                        func, plan
                    )));
                }
            }
            Ok(())
        };

        for plan in &p.plans {
            match plan {
                AggPlan::RingOutcome { predicate, .. } => {
                    if *predicate as usize >= p.predicates.len() {
                        return Err(self.err(format!(
                            "outcome predicate index {} out of range",
                            predicate
                        )));
                    }
                }
                AggPlan::RunningMachine { machine, .. } => {
                    if *machine as usize >= p.machines.len() {
                        return Err(self.err(format!("machine index {} out of range", machine)));
                    }
                }
                _ => {}
            }
        }
        for pred in &p.predicates {
            check_op(&pred.lhs)?;
            check_op(&pred.rhs)?;
        }
        for m in &p.machines {
            check_op(&m.return_value)?;
        }
        Ok(())
    }
}
