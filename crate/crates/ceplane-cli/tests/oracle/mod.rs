//! Independent oracles for the acceptance gate. Everything here is
//! written against the declarative meaning of rules: set-valued
//! pattern semantics by structural recursion, and a brute-force
//! interpreter that keeps plain deques and clones itself for
//! atomicity. None of it touches the compiler's automata, tables, or
//! engine internals.

use ceplane::ast::{
    AggFunc, AggRef, AggTarget, CmpOp, PatternNode, PredicateExpr, PredicateLhs, PredicateRhs,
    ReturnSpec, RuleAst, Strategy, WindowSource,
};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Pattern tree over bare symbol ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OPat {
    Sym(u32),
    Seq(Box<OPat>, Box<OPat>),
    And(Box<OPat>, Box<OPat>),
    Or(Box<OPat>, Box<OPat>),
}

/// Every interleaving of two fixed sequences.
fn shuffles(a: &[u32], b: &[u32]) -> BTreeSet<Vec<u32>> {
    if a.is_empty() {
        return BTreeSet::from([b.to_vec()]);
    }
    if b.is_empty() {
        return BTreeSet::from([a.to_vec()]);
    }
    let mut out = BTreeSet::new();
    for mut w in shuffles(&a[1..], b) {
        w.insert(0, a[0]);
        out.insert(w);
    }
    for mut w in shuffles(a, &b[1..]) {
        w.insert(0, b[0]);
        out.insert(w);
    }
    out
}

/// The full (finite) language of a pattern.
pub fn lang(p: &OPat) -> BTreeSet<Vec<u32>> {
    match p {
        OPat::Sym(s) => BTreeSet::from([vec![*s]]),
        OPat::Seq(l, r) => {
            let mut out = BTreeSet::new();
            for a in lang(l) {
                for b in lang(r) {
                    let mut w = a.clone();
                    w.extend(&b);
                    out.insert(w);
                }
            }
            out
        }
        OPat::Or(l, r) => lang(l).union(&lang(r)).cloned().collect(),
        OPat::And(l, r) => {
            let mut out = BTreeSet::new();
            for a in lang(l) {
                for b in lang(r) {
                    out.extend(shuffles(&a, &b));
                }
            }
            out
        }
    }
}

/// Membership by recursion, without enumerating the language. And
/// splits the word into two subsequences every possible way.
pub fn contains(p: &OPat, w: &[u32]) -> bool {
    match p {
        OPat::Sym(s) => w == [*s],
        OPat::Or(l, r) => contains(l, w) || contains(r, w),
        OPat::Seq(l, r) => (0..=w.len()).any(|i| contains(l, &w[..i]) && contains(r, &w[i..])),
        OPat::And(l, r) => {
            let n = w.len();
            (0u32..1 << n).any(|mask| {
                let mut left = Vec::new();
                let mut right = Vec::new();
                for (i, &s) in w.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        left.push(s);
                    } else {
                        right.push(s);
                    }
                }
                contains(l, &left) && contains(r, &right)
            })
        }
    }
}

/// Is `s` a proper or improper prefix of some word of the language?
pub fn viable(p: &OPat, s: &[u32]) -> bool {
    lang(p).iter().any(|w| w.len() >= s.len() && w[..s.len()] == *s)
}

/// How a symbol string fares against a pattern when fed one symbol at
/// a time: the index that completes a match, the index that kills the
/// run, or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunClass {
    Accept(usize),
    Dead(usize),
    Alive,
}

/// Classify by pattern semantics alone: grow a consumed prefix while
/// it stays viable; completion accepts, a non-viable extension kills.
pub fn classify(p: &OPat, word: &[u32]) -> RunClass {
    let mut hist: Vec<u32> = Vec::new();
    for (i, &s) in word.iter().enumerate() {
        let mut cand = hist.clone();
        cand.push(s);
        if contains(p, &cand) {
            return RunClass::Accept(i);
        }
        if viable(p, &cand) {
            hist = cand;
        } else {
            return RunClass::Dead(i);
        }
    }
    RunClass::Alive
}

fn cmp_eval(cmp: CmpOp, l: u32, r: u32) -> bool {
    match cmp {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        CmpOp::Lt => l < r,
        CmpOp::Le => l <= r,
        CmpOp::Gt => l > r,
        CmpOp::Ge => l >= r,
    }
}

/// A packet for the reference interpreter: dotted field name to value.
pub type RefPacket = BTreeMap<String, u32>;

#[derive(Debug, Clone)]
struct RefWindow {
    name: String,
    capacity: usize,
    source: WindowSource,
    items: VecDeque<u32>,
    inserts: u64,
}

#[derive(Debug, Clone)]
struct RefMachine {
    name: String,
    strategy: Strategy,
    ret: ReturnSpec,
    pattern: OPat,
    history: Vec<u32>,
    /// (func, field) -> running value over the current run.
    running: BTreeMap<(AggFunc, String), u32>,
}

/// Brute-force engine: same declarative semantics, none of the same
/// machinery. Atomic drops come from cloning the whole state up front.
#[derive(Debug, Clone)]
pub struct RefInterp {
    windows: Vec<RefWindow>,
    predicates: Vec<PredicateExpr>,
    machines: Vec<RefMachine>,
    /// (func, field) -> running value since start, for aggregates on
    /// fields inside predicates.
    running_global: BTreeMap<(AggFunc, String), u32>,
    pub packets_in: u64,
    pub packets_dropped: u64,
    pub emission_counts: BTreeMap<String, u64>,
}

enum EvalErr {
    Missing,
    Warmup,
}

fn running_start(func: AggFunc) -> u32 {
    match func {
        AggFunc::Min => u32::MAX,
        _ => 0,
    }
}

fn running_step(func: AggFunc, acc: u32, v: u32) -> u32 {
    match func {
        AggFunc::Sum => acc.wrapping_add(v),
        AggFunc::Min => acc.min(v),
        AggFunc::Max => acc.max(v),
        _ => unreachable!("running aggregates are sum, min, max"),
    }
}

impl RefInterp {
    pub fn new(ast: &RuleAst) -> Self {
        let windows: Vec<RefWindow> = ast
            .windows
            .iter()
            .map(|w| RefWindow {
                name: w.name.clone(),
                capacity: w.size as usize,
                source: w.source.clone(),
                items: VecDeque::new(),
                inserts: 0,
            })
            .collect();

        // Distinct pattern leaves in declaration order become the
        // symbol ids; the lowest true one is the packet's symbol.
        let mut predicates: Vec<PredicateExpr> = Vec::new();
        for ev in &ast.events {
            ev.pattern.for_each_leaf(&mut |leaf: &PredicateExpr| {
                if !predicates.contains(leaf) {
                    predicates.push(leaf.clone());
                }
            });
        }

        // Field aggregates inside any predicate, including outcome
        // window sources, accumulate since the start.
        let mut running_global = BTreeMap::new();
        let outcome_preds = ast.windows.iter().filter_map(|w| match &w.source {
            WindowSource::Predicate(p) => Some(p),
            WindowSource::Field(_) => None,
        });
        for pred in predicates.iter().chain(outcome_preds) {
            if let PredicateLhs::Agg(agg) = &pred.lhs {
                if let AggTarget::Field(f) = &agg.target {
                    running_global
                        .entry((agg.func, f.dotted()))
                        .or_insert_with(|| running_start(agg.func));
                }
            }
        }

        let machines = ast
            .events
            .iter()
            .map(|ev| {
                let pattern = to_opat(&ev.pattern, &predicates);
                let mut running = BTreeMap::new();
                if let ReturnSpec::Agg(agg) = &ev.return_value {
                    if let AggTarget::Field(f) = &agg.target {
                        running.insert((agg.func, f.dotted()), running_start(agg.func));
                    }
                }
                RefMachine {
                    name: ev.name.clone(),
                    strategy: ev.strategy,
                    ret: ev.return_value.clone(),
                    pattern,
                    history: Vec::new(),
                    running,
                }
            })
            .collect();

        RefInterp {
            windows,
            predicates,
            machines,
            running_global,
            packets_in: 0,
            packets_dropped: 0,
            emission_counts: BTreeMap::new(),
        }
    }

    fn window(&self, name: &str) -> &RefWindow {
        self.windows.iter().find(|w| w.name == name).expect("window exists")
    }

    /// Aggregate read over a window's current items. Outcome counts
    /// are only ever read before this packet's outcome lands, value
    /// windows only after their insert; the caller sequences that.
    fn window_agg(&self, func: AggFunc, name: &str) -> Result<u32, EvalErr> {
        let w = self.window(name);
        let items = &w.items;
        Ok(match func {
            AggFunc::Sum | AggFunc::Count => items
                .iter()
                .fold(0u32, |acc, &v| acc.wrapping_add(v)),
            AggFunc::Min => items.iter().copied().min().unwrap_or(u32::MAX),
            AggFunc::Max => items.iter().copied().max().unwrap_or(0),
            AggFunc::Avg => {
                if items.len() < w.capacity {
                    return Err(EvalErr::Warmup);
                }
                let sum = items.iter().fold(0u32, |acc, &v| acc.wrapping_add(v));
                sum >> w.capacity.trailing_zeros()
            }
        })
    }

    fn field_value(pkt: &RefPacket, dotted: &str) -> Result<u32, EvalErr> {
        pkt.get(dotted).copied().ok_or(EvalErr::Missing)
    }

    fn agg_value(&self, machine: Option<usize>, agg: &AggRef) -> Result<u32, EvalErr> {
        match &agg.target {
            AggTarget::Window(name) => self.window_agg(agg.func, name),
            AggTarget::Field(f) => {
                let key = (agg.func, f.dotted());
                Ok(match machine {
                    Some(mi) => self.machines[mi].running[&key],
                    None => self.running_global[&key],
                })
            }
        }
    }

    fn predicate_value(&self, pred: &PredicateExpr, pkt: &RefPacket) -> Result<bool, EvalErr> {
        let lhs = match &pred.lhs {
            PredicateLhs::Field(f) => Self::field_value(pkt, &f.dotted())?,
            PredicateLhs::Agg(agg) => self.agg_value(None, agg)?,
        };
        let rhs = match &pred.rhs {
            PredicateRhs::Const(c) => *c,
            PredicateRhs::Field(f) => Self::field_value(pkt, &f.dotted())?,
        };
        Ok(cmp_eval(pred.cmp, lhs, rhs))
    }

    /// A predicate whose aggregate is still warming up is false; a
    /// missing field poisons the packet.
    fn predicate_holds(&self, pred: &PredicateExpr, pkt: &RefPacket) -> Result<bool, EvalErr> {
        match self.predicate_value(pred, pkt) {
            Ok(b) => Ok(b),
            Err(EvalErr::Warmup) => Ok(false),
            Err(e) => Err(e),
        }
    }

    fn return_value(&self, mi: usize, pkt: &RefPacket) -> Result<u32, EvalErr> {
        match &self.machines[mi].ret.clone() {
            ReturnSpec::Const(c) => Ok(*c),
            ReturnSpec::Field(f) => Self::field_value(pkt, &f.dotted()),
            ReturnSpec::Agg(agg) => self.agg_value(Some(mi), agg),
        }
    }

    fn apply(&mut self, pkt: &RefPacket) -> Result<Vec<(String, u32)>, EvalErr> {
        // Value windows and running field aggregates absorb the packet
        // first, so aggregates in predicates see it.
        for wi in 0..self.windows.len() {
            if let WindowSource::Field(f) = self.windows[wi].source.clone() {
                let v = Self::field_value(pkt, &f.dotted())?;
                let w = &mut self.windows[wi];
                w.items.push_back(v);
                if w.items.len() > w.capacity {
                    w.items.pop_front();
                }
                w.inserts += 1;
            }
        }
        let keys: Vec<(AggFunc, String)> = self.running_global.keys().cloned().collect();
        for (func, field) in keys {
            let v = Self::field_value(pkt, &field)?;
            let acc = self.running_global.get_mut(&(func, field)).expect("key exists");
            *acc = running_step(func, *acc, v);
        }

        // One evaluation of every predicate; outcome windows still
        // hold only previous packets.
        let mut truth = Vec::with_capacity(self.predicates.len());
        for pred in &self.predicates {
            truth.push(self.predicate_holds(pred, pkt)?);
        }
        let symbol: Option<u32> = truth.iter().position(|&b| b).map(|i| i as u32);
        let mut outcomes = Vec::new();
        for w in &self.windows {
            if let WindowSource::Predicate(pred) = &w.source {
                outcomes.push(Some(self.predicate_holds(pred, pkt)? as u32));
            } else {
                outcomes.push(None);
            }
        }

        // Now this packet's outcomes land.
        for (w, outcome) in self.windows.iter_mut().zip(outcomes) {
            if let Some(bit) = outcome {
                w.items.push_back(bit);
                if w.items.len() > w.capacity {
                    w.items.pop_front();
                }
                w.inserts += 1;
            }
        }

        // Machines consume the symbol in declaration order.
        let mut emissions = Vec::new();
        for mi in 0..self.machines.len() {
            let (accepted, in_run) = {
                let m = &mut self.machines[mi];
                match symbol {
                    Some(s) => {
                        let mut cand = m.history.clone();
                        cand.push(s);
                        if contains(&m.pattern, &cand) {
                            m.history = cand;
                            (true, true)
                        } else if viable(&m.pattern, &cand) {
                            m.history = cand;
                            (false, true)
                        } else {
                            match m.strategy {
                                Strategy::SkipTillNextMatch => (false, !m.history.is_empty()),
                                Strategy::Strict => {
                                    m.history.clear();
                                    (false, false)
                                }
                            }
                        }
                    }
                    None => match m.strategy {
                        Strategy::SkipTillNextMatch => (false, !self.machines[mi].history.is_empty()),
                        Strategy::Strict => {
                            self.machines[mi].history.clear();
                            (false, false)
                        }
                    },
                }
            };

            // A packet inside a run folds into the run's field
            // aggregates; leaving the run resets them.
            let keys: Vec<(AggFunc, String)> =
                self.machines[mi].running.keys().cloned().collect();
            if in_run {
                for (func, field) in keys {
                    let v = Self::field_value(pkt, &field)?;
                    let m = &mut self.machines[mi];
                    let acc = m.running.get_mut(&(func, field.clone())).expect("key exists");
                    *acc = running_step(func, *acc, v);
                }
            } else {
                for (func, field) in keys {
                    self.machines[mi]
                        .running
                        .insert((func, field), running_start(func));
                }
            }

            if accepted {
                let value = self.return_value(mi, pkt)?;
                let name = self.machines[mi].name.clone();
                *self.emission_counts.entry(name.clone()).or_insert(0) += 1;
                emissions.push((name, value));
                let m = &mut self.machines[mi];
                m.history.clear();
                let keys: Vec<(AggFunc, String)> = m.running.keys().cloned().collect();
                for (func, field) in keys {
                    m.running.insert((func, field), running_start(func));
                }
            }
        }
        Ok(emissions)
    }

    /// Feed one packet. A missing field or a warm-up average in a
    /// return value drops it with no other effect.
    pub fn ingest(&mut self, pkt: &RefPacket) -> Option<Vec<(String, u32)>> {
        let before = self.clone();
        match self.apply(pkt) {
            Ok(emissions) => {
                self.packets_in += 1;
                Some(emissions)
            }
            Err(_) => {
                *self = before;
                self.packets_in += 1;
                self.packets_dropped += 1;
                None
            }
        }
    }

    /// Tallies a snapshot can be checked against, as key=value lines.
    pub fn tallies(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        out.insert("packets_in".into(), self.packets_in);
        out.insert("packets_dropped".into(), self.packets_dropped);
        for m in &self.machines {
            let count = self.emission_counts.get(&m.name).copied().unwrap_or(0);
            out.insert(format!("emission.{}", m.name), count);
        }
        for w in &self.windows {
            out.insert(
                format!("window.{}.head", w.name),
                w.inserts % w.capacity as u64,
            );
            out.insert(format!("window.{}.fill", w.name), w.items.len() as u64);
        }
        for ((func, field), value) in &self.running_global {
            out.insert(format!("running_global.{}.{}", func, field), *value as u64);
        }
        for m in &self.machines {
            for ((func, field), value) in &m.running {
                out.insert(
                    format!("running_run.{}.{}.{}", m.name, func, field),
                    *value as u64,
                );
            }
        }
        out
    }

    pub fn machine_idle(&self, name: &str) -> bool {
        self.machines
            .iter()
            .find(|m| m.name == name)
            .expect("machine exists")
            .history
            .is_empty()
    }
}

/// Map a rule pattern onto bare symbols via the predicate list's
/// positions.
fn to_opat(p: &PatternNode, predicates: &[PredicateExpr]) -> OPat {
    match p {
        PatternNode::Predicate(pred) => {
            let id = predicates
                .iter()
                .position(|q| q == pred)
                .expect("leaf was collected");
            OPat::Sym(id as u32)
        }
        PatternNode::Seq(l, r) => OPat::Seq(
            Box::new(to_opat(l, predicates)),
            Box::new(to_opat(r, predicates)),
        ),
        PatternNode::And(l, r) => OPat::And(
            Box::new(to_opat(l, predicates)),
            Box::new(to_opat(r, predicates)),
        ),
        PatternNode::Or(l, r) => OPat::Or(
            Box::new(to_opat(l, predicates)),
            Box::new(to_opat(r, predicates)),
        ),
    }
}
