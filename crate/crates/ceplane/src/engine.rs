//! Software execution of compiled programs, one packet at a time.
//!
//! Each ingested packet runs the same fixed pipeline the generated
//! pipeline would apply:
//!
//! 1. insert into every value window and fold the global running
//!    aggregates
//! 2. evaluate every predicate once against the updated windows; the
//!    packet's symbol is the lowest-numbered true pattern predicate.
//!    Outcome-window counts read here are from before this packet's
//!    outcomes land, which breaks the circularity of a window counting
//!    the predicate that reads it.
//! 3. insert the fresh outcomes into the outcome windows
//! 4. step every machine in declaration order: a missing (state,
//!    symbol) row and the no-match case both fall back to the
//!    machine's strategy. An accepting row computes the return value
//!    against current state, emits, and resets the machine.
//!
//! A packet either applies completely or not at all: any mid-pipeline
//! error (a field the packet lacks, a return value reading a window
//! average during warm-up) rolls back every insert, fold, and machine
//! step, counts the packet as dropped, and leaves the engine as if the
//! packet never arrived.
//!
//! The `ops` counter prices the work a match-action target would do:
//! one unit per ring insert, running fold, predicate evaluation, and
//! machine step, plus `capacity` units per ring aggregate read, since
//! the unrolled pipeline walks every slot regardless of fill.

use crate::ast::{AggFunc, Strategy};
use crate::program::{AggPlan, CompiledProgram, Operand};
use crate::window::WindowState;
use std::collections::HashMap;

/// Field values for one packet, parallel to the program's field table.
/// `None` marks a field this packet does not carry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Packet {
    pub values: Vec<Option<u32>>,
}

impl Packet {
    pub fn new(values: Vec<Option<u32>>) -> Self {
        Packet { values }
    }

    fn get(&self, idx: u32) -> Option<u32> {
        self.values.get(idx as usize).copied().flatten()
    }
}

/// One fired complex event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emission {
    pub machine: u32,
    pub value: u32,
}

/// Why a packet was dropped instead of applied.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DropReason {
    #[error("packet lacks field `{field}`")]
    MissingField { field: String },
    #[error("return value of `{machine}` reads a window average during warm-up")]
    ReturnAvgWarmup { machine: String },
}

/// Counter totals since deploy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EngineStats {
    pub packets_in: u64,
    pub packets_dropped: u64,
    pub emissions: Vec<u64>,
    pub ops: u64,
}

enum EvalStop {
    Missing(u32),
    Warmup,
}

#[derive(Debug)]
pub struct Engine {
    program: CompiledProgram,
    rings: Vec<Option<WindowState>>,
    running: Vec<u32>,
    machine_states: Vec<u32>,
    lookup: Vec<HashMap<(u32, u32), (u32, bool)>>,
    stats: EngineStats,
}

fn running_init(func: AggFunc) -> u32 {
    match func {
        AggFunc::Min => u32::MAX,
        _ => 0,
    }
}

fn running_fold(func: AggFunc, acc: u32, v: u32) -> u32 {
    match func {
        AggFunc::Sum => acc.wrapping_add(v),
        AggFunc::Min => acc.min(v),
        AggFunc::Max => acc.max(v),
        AggFunc::Count | AggFunc::Avg => {
            unreachable!("running plans carry only sum, min, max")
        }
    }
}

impl Engine {
    /// Bring up a program with empty windows, zeroed running aggregates,
    /// and every machine in its initial state.
    pub fn new(program: CompiledProgram) -> Self {
        let rings = program
            .plans
            .iter()
            .map(|p| p.capacity().map(WindowState::new))
            .collect();
        let running = program
            .plans
            .iter()
            .map(|p| match p {
                AggPlan::RunningGlobal { func, .. } | AggPlan::RunningMachine { func, .. } => {
                    running_init(*func)
                }
                _ => 0,
            })
            .collect();
        let machine_states = vec![0; program.machines.len()];
        let lookup = program
            .machines
            .iter()
            .map(|m| {
                m.rows
                    .iter()
                    .map(|r| ((r.state, r.symbol), (r.next, r.accepting)))
                    .collect()
            })
            .collect();
        let stats = EngineStats {
            emissions: vec![0; program.machines.len()],
            ..EngineStats::default()
        };
        Engine { program, rings, running, machine_states, lookup, stats }
    }

    pub fn program(&self) -> &CompiledProgram {
        &self.program
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn machine_state(&self, machine: u32) -> u32 {
        self.machine_states[machine as usize]
    }

    pub fn ring(&self, plan: u32) -> Option<&WindowState> {
        self.rings[plan as usize].as_ref()
    }

    pub fn running_value(&self, plan: u32) -> u32 {
        self.running[plan as usize]
    }

    /// Swap one machine's rows. The caller has validated them; the
    /// machine keeps its current state.
    pub(crate) fn set_rows(&mut self, machine: u32, rows: Vec<crate::dfa::TransitionRow>) {
        let m = machine as usize;
        self.lookup[m] = rows
            .iter()
            .map(|r| ((r.state, r.symbol), (r.next, r.accepting)))
            .collect();
        self.program.machines[m].rows = rows;
    }

    /// Put a machine into an arbitrary non-accepting state. Entering the
    /// initial state clears the machine's running aggregates, like any
    /// other return to idle.
    pub(crate) fn set_machine_state(&mut self, machine: u32, state: u32) {
        self.machine_states[machine as usize] = state;
        if state == 0 {
            self.reset_machine_plans(machine);
        }
    }

    fn reset_machine_plans(&mut self, machine: u32) {
        for (i, plan) in self.program.plans.iter().enumerate() {
            if let AggPlan::RunningMachine { func, machine: m, .. } = plan {
                if *m == machine {
                    self.running[i] = running_init(*func);
                }
            }
        }
    }

    fn field(&self, pkt: &Packet, idx: u32) -> Result<u32, EvalStop> {
        pkt.get(idx).ok_or(EvalStop::Missing(idx))
    }

    /// Evaluate an operand against the current engine state; `ops` is
    /// charged for ring walks here.
    fn eval_operand(&self, pkt: &Packet, op: &Operand, ops: &mut u64) -> Result<u32, EvalStop> {
        match op {
            Operand::Const(c) => Ok(*c),
            Operand::Field(i) => self.field(pkt, *i),
            Operand::Agg { func, plan } => {
                let p = &self.program.plans[*plan as usize];
                match p {
                    AggPlan::Ring { capacity, .. } => {
                        let ring = self.rings[*plan as usize].as_ref().expect("ring plan");
                        *ops += *capacity as u64;
                        match func {
                            AggFunc::Sum => Ok(ring.sum()),
                            AggFunc::Min => Ok(ring.min()),
                            AggFunc::Max => Ok(ring.max()),
                            AggFunc::Avg => ring.avg().map_err(|_| EvalStop::Warmup),
                            AggFunc::Count => Ok(ring.count()),
                        }
                    }
                    AggPlan::RingOutcome { capacity, .. } => {
                        let ring = self.rings[*plan as usize].as_ref().expect("ring plan");
                        *ops += *capacity as u64;
                        Ok(ring.count())
                    }
                    AggPlan::RunningGlobal { .. } | AggPlan::RunningMachine { .. } => {
                        Ok(self.running[*plan as usize])
                    }
                }
            }
        }
    }

    /// Predicate outcome for this packet. A warming window average makes
    /// the predicate false; a missing field is a packet error.
    fn eval_predicate(&self, pkt: &Packet, idx: usize, ops: &mut u64) -> Result<bool, u32> {
        *ops += 1;
        let p = &self.program.predicates[idx];
        let lhs = match self.eval_operand(pkt, &p.lhs, ops) {
            Ok(v) => v,
            Err(EvalStop::Warmup) => return Ok(false),
            Err(EvalStop::Missing(f)) => return Err(f),
        };
        let rhs = match self.eval_operand(pkt, &p.rhs, ops) {
            Ok(v) => v,
            Err(EvalStop::Warmup) => return Ok(false),
            Err(EvalStop::Missing(f)) => return Err(f),
        };
        Ok(p.cmp.eval(lhs, rhs))
    }

    fn drop_reason_field(&self, idx: u32) -> DropReason {
        DropReason::MissingField {
            field: self.program.fields[idx as usize].name.clone(),
        }
    }

    /// Apply one packet. `Ok` carries the emissions it fired, in machine
    /// declaration order. `Err` means the packet was dropped and the
    /// engine state is untouched apart from the drop counters.
    pub fn ingest(&mut self, pkt: &Packet) -> Result<Vec<Emission>, DropReason> {
        let running_snapshot = self.running.clone();
        let states_snapshot = self.machine_states.clone();
        let ops_snapshot = self.stats.ops;
        let mut ring_undo = Vec::new();
        let mut ops = 0u64;

        let result = self.apply(pkt, &mut ring_undo, &mut ops);
        self.stats.packets_in += 1;
        match result {
            Ok(emissions) => {
                self.stats.ops = ops_snapshot + ops;
                for e in &emissions {
                    self.stats.emissions[e.machine as usize] += 1;
                }
                Ok(emissions)
            }
            Err(reason) => {
                for (plan, undo) in ring_undo.into_iter().rev() {
                    self.rings[plan].as_mut().expect("ring plan").undo_insert(undo);
                }
                self.running = running_snapshot;
                self.machine_states = states_snapshot;
                self.stats.ops = ops_snapshot;
                self.stats.packets_dropped += 1;
                Err(reason)
            }
        }
    }

    fn apply(
        &mut self,
        pkt: &Packet,
        ring_undo: &mut Vec<(usize, crate::window::InsertUndo)>,
        ops: &mut u64,
    ) -> Result<Vec<Emission>, DropReason> {
        // 1: value windows and global running folds.
        for i in 0..self.program.plans.len() {
            match self.program.plans[i].clone() {
                AggPlan::Ring { source, .. } => {
                    let v = self
                        .field(pkt, source)
                        .map_err(|_| self.drop_reason_field(source))?;
                    let undo = self.rings[i].as_mut().expect("ring plan").insert(v);
                    ring_undo.push((i, undo));
                    *ops += 1;
                }
                AggPlan::RunningGlobal { func, source } => {
                    let v = self
                        .field(pkt, source)
                        .map_err(|_| self.drop_reason_field(source))?;
                    self.running[i] = running_fold(func, self.running[i], v);
                    *ops += 1;
                }
                _ => {}
            }
        }

        // 2: all predicates, once.
        let mut outcomes = vec![false; self.program.predicates.len()];
        for i in 0..self.program.predicates.len() {
            outcomes[i] = self
                .eval_predicate(pkt, i, ops)
                .map_err(|f| self.drop_reason_field(f))?;
        }
        let symbol = outcomes[..self.program.symbol_count as usize]
            .iter()
            .position(|&b| b)
            .map(|i| i as u32);

        // 3: outcome windows record this packet's outcomes.
        for i in 0..self.program.plans.len() {
            if let AggPlan::RingOutcome { predicate, .. } = self.program.plans[i] {
                let bit = outcomes[predicate as usize] as u32;
                let undo = self.rings[i].as_mut().expect("ring plan").insert(bit);
                ring_undo.push((i, undo));
                *ops += 1;
            }
        }

        // 4: machines, in declaration order.
        let mut emissions = Vec::new();
        for m in 0..self.program.machines.len() {
            *ops += 1;
            let state = self.machine_states[m];
            let strategy = self.program.machines[m].strategy;
            let hit = symbol.and_then(|x| self.lookup[m].get(&(state, x)).copied());
            match hit {
                Some((_, true)) => {
                    // Accept: the triggering packet belongs to the run,
                    // so fold before computing the return value.
                    self.fold_machine_plans(pkt, m as u32, ops)?;
                    let ret = self.program.machines[m].return_value;
                    let value = match self.eval_operand(pkt, &ret, ops) {
                        Ok(v) => v,
                        Err(EvalStop::Warmup) => {
                            return Err(DropReason::ReturnAvgWarmup {
                                machine: self.program.machines[m].name.clone(),
                            })
                        }
                        Err(EvalStop::Missing(f)) => return Err(self.drop_reason_field(f)),
                    };
                    emissions.push(Emission { machine: m as u32, value });
                    self.machine_states[m] = 0;
                    self.reset_machine_plans(m as u32);
                }
                Some((next, false)) => {
                    self.machine_states[m] = next;
                    self.after_step(pkt, m, ops)?;
                }
                None => {
                    // No row or no symbol: the strategy decides.
                    self.machine_states[m] = match strategy {
                        Strategy::SkipTillNextMatch => state,
                        Strategy::Strict => 0,
                    };
                    self.after_step(pkt, m, ops)?;
                }
            }
        }
        Ok(emissions)
    }

    /// Post-step bookkeeping for a non-accepting outcome: machines away
    /// from their initial state accumulate, machines at it stay clear.
    fn after_step(&mut self, pkt: &Packet, m: usize, ops: &mut u64) -> Result<(), DropReason> {
        if self.machine_states[m] != 0 {
            self.fold_machine_plans(pkt, m as u32, ops)
        } else {
            self.reset_machine_plans(m as u32);
            Ok(())
        }
    }

    fn fold_machine_plans(
        &mut self,
        pkt: &Packet,
        machine: u32,
        ops: &mut u64,
    ) -> Result<(), DropReason> {
        for i in 0..self.program.plans.len() {
            if let AggPlan::RunningMachine { func, source, machine: m } = self.program.plans[i] {
                if m == machine {
                    let v = self
                        .field(pkt, source)
                        .map_err(|_| self.drop_reason_field(source))?;
                    self.running[i] = running_fold(func, self.running[i], v);
                    *ops += 1;
                }
            }
        }
        Ok(())
    }
}
