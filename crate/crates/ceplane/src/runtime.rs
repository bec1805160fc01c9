//! Runtime control over a deployed program: the operations a control
//! plane performs against a running pipeline without recompiling.
//!
//! Table updates are validated as a whole against the machine's shape
//! and applied atomically; a rejected update changes nothing. Replacing
//! a machine's row set is also how rows are removed. The same
//! `table_add` text format the code generator emits can be replayed
//! here, so a program deployed with empty tables and fed the generated
//! entries behaves exactly like the compiled original.

use crate::codegen::{default_action_name, table_name};
use crate::dfa::TransitionRow;
use crate::engine::{DropReason, Emission, Engine, Packet};
use crate::program::{AggPlan, CompiledProgram};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Install exactly this row set, discarding the current one.
    Replace,
    /// Insert new rows; colliding with an existing (state, symbol) key
    /// is an error.
    Add,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ControlError {
    #[error("no machine at index {index}")]
    UnknownMachine { index: u32 },
    #[error("no table named `{table}`")]
    UnknownTable { table: String },
    #[error("state {state} out of range, machine has {limit} states")]
    BadState { state: u32, limit: u32 },
    #[error("row leaves the terminal accepting state {state}")]
    RowFromAccept { state: u32 },
    #[error("symbol {symbol} out of range, program has {limit} predicates")]
    BadSymbol { symbol: u32, limit: u32 },
    #[error("row ({state}, {symbol}) accepting flag contradicts its target")]
    AcceptFlagMismatch { state: u32, symbol: u32 },
    #[error("duplicate row for (state {state}, symbol {symbol})")]
    DuplicateRow { state: u32, symbol: u32 },
    #[error("cannot force machine into the terminal accepting state {state}")]
    ForcedAcceptingState { state: u32 },
    #[error("line {line}: {msg}")]
    EntryParse { line: usize, msg: String },
    #[error("line {line}: default action `{action}` does not match the machine's strategy")]
    DefaultMismatch { line: usize, action: String },
}

/// A deployed program plus the control operations over it.
#[derive(Debug)]
pub struct Controller {
    engine: Engine,
}

impl Controller {
    /// Deploy with the compiled tables installed.
    pub fn deploy(program: CompiledProgram) -> Self {
        Controller { engine: Engine::new(program) }
    }

    /// Deploy with every transition table empty, as a fresh pipeline
    /// comes up before its entries are pushed. Rows arrive via
    /// [`apply_entries`](Self::apply_entries) or
    /// [`update_table`](Self::update_table).
    pub fn deploy_unpopulated(mut program: CompiledProgram) -> Self {
        for m in &mut program.machines {
            m.rows.clear();
        }
        Controller { engine: Engine::new(program) }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn program(&self) -> &CompiledProgram {
        self.engine.program()
    }

    pub fn ingest(&mut self, pkt: &Packet) -> Result<Vec<Emission>, DropReason> {
        self.engine.ingest(pkt)
    }

    /// Validate and install a row-set change for one machine. Nothing
    /// is applied unless every row checks out.
    pub fn update_table(
        &mut self,
        machine: u32,
        mode: UpdateMode,
        rows: Vec<TransitionRow>,
    ) -> Result<(), ControlError> {
        let program = self.engine.program();
        let m = program
            .machines
            .get(machine as usize)
            .ok_or(ControlError::UnknownMachine { index: machine })?;
        let mut candidate = match mode {
            UpdateMode::Replace => Vec::with_capacity(rows.len()),
            UpdateMode::Add => m.rows.clone(),
        };
        let state_count = m.state_count;
        let accept = m.accept;
        let symbols = program.symbol_count;
        for row in rows {
            if row.state >= state_count || row.next >= state_count {
                let state = row.state.max(row.next);
                return Err(ControlError::BadState { state, limit: state_count });
            }
            if row.state == accept {
                return Err(ControlError::RowFromAccept { state: row.state });
            }
            if row.symbol >= symbols {
                return Err(ControlError::BadSymbol { symbol: row.symbol, limit: symbols });
            }
            if row.accepting != (row.next == accept) {
                return Err(ControlError::AcceptFlagMismatch {
                    state: row.state,
                    symbol: row.symbol,
                });
            }
            if candidate
                .iter()
                .any(|r: &TransitionRow| r.state == row.state && r.symbol == row.symbol)
            {
                return Err(ControlError::DuplicateRow {
                    state: row.state,
                    symbol: row.symbol,
                });
            }
            candidate.push(row);
        }
        self.engine.set_rows(machine, candidate);
        Ok(())
    }

    /// Put a machine into a specific non-accepting state.
    pub fn force_state(&mut self, machine: u32, state: u32) -> Result<(), ControlError> {
        let program = self.engine.program();
        let m = program
            .machines
            .get(machine as usize)
            .ok_or(ControlError::UnknownMachine { index: machine })?;
        if state >= m.state_count {
            return Err(ControlError::BadState { state, limit: m.state_count });
        }
        if state == m.accept {
            return Err(ControlError::ForcedAcceptingState { state });
        }
        self.engine.set_machine_state(machine, state);
        Ok(())
    }

    /// Apply one line of the runtime entry format.
    pub fn apply_entry_line(&mut self, line: &str) -> Result<(), ControlError> {
        self.apply_entry(line, 1)
    }

    /// Apply a whole entry file: `table_add` rows and `table_set_default`
    /// lines, blank lines and `#` comments skipped. Returns how many
    /// lines took effect.
    pub fn apply_entries(&mut self, text: &str) -> Result<usize, ControlError> {
        let mut applied = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.apply_entry(line, idx + 1)?;
            applied += 1;
        }
        Ok(applied)
    }

    fn machine_by_table(&self, table: &str, line: usize) -> Result<u32, ControlError> {
        self.engine
            .program()
            .machines
            .iter()
            .position(|m| table_name(&m.name) == table)
            .map(|i| i as u32)
            .ok_or_else(|| {
                let _ = line;
                ControlError::UnknownTable { table: table.to_string() }
            })
    }

    fn apply_entry(&mut self, line: &str, line_no: usize) -> Result<(), ControlError> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |msg: &str| ControlError::EntryParse {
            line: line_no,
            msg: msg.to_string(),
        };
        match toks.as_slice() {
            ["table_add", table, "do_transition", q, x, "=>", qn, acc] => {
                let machine = self.machine_by_table(table, line_no)?;
                let row = TransitionRow {
                    state: q.parse().map_err(|_| parse_err("invalid state"))?,
                    symbol: x.parse().map_err(|_| parse_err("invalid symbol"))?,
                    next: qn.parse().map_err(|_| parse_err("invalid next state"))?,
                    accepting: match *acc {
                        "0" => false,
                        "1" => true,
                        _ => return Err(parse_err("accepting flag must be 0 or 1")),
                    },
                };
                self.update_table(machine, UpdateMode::Add, vec![row])
            }
            ["table_set_default", table, action] => {
                let machine = self.machine_by_table(table, line_no)?;
                let strategy = self.engine.program().machines[machine as usize].strategy;
                if *action != default_action_name(strategy) {
                    return Err(ControlError::DefaultMismatch {
                        line: line_no,
                        action: action.to_string(),
                    });
                }
                // The strategy is machine metadata; the line just has to
                // agree with it.
                Ok(())
            }
            _ => Err(parse_err("expected `table_add ... => ...` or `table_set_default ...`")),
        }
    }

    /// Counters and state as a key=value block: totals first, then
    /// per-machine emissions and states, window cursors, and running
    /// aggregate values, each in declaration order.
    pub fn snapshot(&self) -> String {
        let program = self.engine.program();
        let stats = self.engine.stats();
        let mut out = String::new();
        let _ = writeln!(out, "packets_in={}", stats.packets_in);
        let _ = writeln!(out, "packets_dropped={}", stats.packets_dropped);
        let _ = writeln!(out, "ops={}", stats.ops);
        for (i, m) in program.machines.iter().enumerate() {
            let _ = writeln!(out, "emission.{}={}", m.name, stats.emissions[i]);
        }
        for (i, m) in program.machines.iter().enumerate() {
            let _ = writeln!(
                out,
                "machine.{}.state={}",
                m.name,
                self.engine.machine_state(i as u32)
            );
        }
        for (i, plan) in program.plans.iter().enumerate() {
            match plan {
                AggPlan::Ring { name, .. } | AggPlan::RingOutcome { name, .. } => {
                    let ring = self.engine.ring(i as u32).expect("ring plan");
                    let _ = writeln!(out, "window.{}.head={}", name, ring.head());
                    let _ = writeln!(out, "window.{}.fill={}", name, ring.fill());
                }
                AggPlan::RunningGlobal { func, source } => {
                    let _ = writeln!(
                        out,
                        "running_global.{}.{}={}",
                        func,
                        program.fields[*source as usize].name,
                        self.engine.running_value(i as u32)
                    );
                }
                AggPlan::RunningMachine { func, source, machine } => {
                    let _ = writeln!(
                        out,
                        "running_run.{}.{}.{}={}",
                        program.machines[*machine as usize].name,
                        func,
                        program.fields[*source as usize].name,
                        self.engine.running_value(i as u32)
                    );
                }
            }
        }
        out
    }
}
