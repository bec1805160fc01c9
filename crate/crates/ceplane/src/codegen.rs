//! P4_16 emission: a compiled program as an includable control block,
//! plus the runtime table entries and a name manifest.
//!
//! The generated control mirrors the software pipeline stage for stage:
//! window inserts and folds, outcome pre-counts, the predicate chain,
//! outcome inserts, then one match-action table per machine. Loops do
//! not exist in the target, so each window's aggregation is unrolled
//! into `capacity` guarded blocks; windows nothing aggregates get no
//! blocks at all. Register values are never used in arithmetic
//! directly, they are copied through metadata first, and register
//! read-modify-write sections sit in `@atomic` blocks.
//!
//! The predicate chain assigns `matched_pred` in descending id order so
//! the lowest-numbered true predicate wins, matching the engine's
//! symbol resolution.
//!
//! One deliberate divergence from the software engine: a return value
//! reading a window average during warm-up drops the packet in
//! software, while the generated pipeline has already committed its
//! register writes and just emits the shifted partial sum.

use crate::ast::{AggFunc, CmpOp, Strategy};
use crate::program::{AggPlan, CompiledProgram, Operand};
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Transition table name for a machine.
pub fn table_name(machine: &str) -> String {
    format!("{}_transitions", machine)
}

/// Default (miss) action installed for a strategy.
pub fn default_action_name(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::SkipTillNextMatch => "do_default_skip",
        Strategy::Strict => "do_default_strict",
    }
}

/// Sentinel for "no predicate matched".
pub const NO_SYMBOL: &str = "32w0xffffffff";

#[derive(Debug, Clone)]
pub struct CodegenOptions {
    /// Warn when the summed capacity of all aggregated windows exceeds
    /// this; unrolled blocks are pipeline stages on real targets.
    pub unroll_budget: u32,
}

impl Default for CodegenOptions {
    fn default() -> Self {
        CodegenOptions { unroll_budget: 4096 }
    }
}

#[derive(Debug, Clone)]
pub struct P4Output {
    pub source: String,
    pub warnings: Vec<String>,
}

fn cmp_p4(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        CmpOp::Ne => "!=",
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

/// Per ring plan: which folds the program reads anywhere.
struct RingUse {
    folds: BTreeSet<AggFunc>,
    /// Some return value reads this outcome window's count, which is
    /// pre-insert at fold time; the post-insert value is reconstructed
    /// from the evicted slot.
    post_count: bool,
}

struct Gen<'a> {
    program: &'a CompiledProgram,
    ring_use: Vec<RingUse>,
}

impl<'a> Gen<'a> {
    fn new(program: &'a CompiledProgram) -> Self {
        let mut ring_use: Vec<RingUse> = program
            .plans
            .iter()
            .map(|_| RingUse { folds: BTreeSet::new(), post_count: false })
            .collect();
        let mut record = |op: &Operand, in_return: bool| {
            if let Operand::Agg { func, plan } = op {
                let idx = *plan as usize;
                match &program.plans[idx] {
                    AggPlan::Ring { .. } => {
                        // avg reads the sum fold.
                        let fold = match func {
                            AggFunc::Avg => AggFunc::Sum,
                            f => *f,
                        };
                        ring_use[idx].folds.insert(fold);
                    }
                    AggPlan::RingOutcome { .. } => {
                        ring_use[idx].folds.insert(AggFunc::Count);
                        if in_return {
                            ring_use[idx].post_count = true;
                        }
                    }
                    _ => {}
                }
            }
        };
        for p in &program.predicates {
            record(&p.lhs, false);
            record(&p.rhs, false);
        }
        for m in &program.machines {
            record(&m.return_value, true);
        }
        Gen { program, ring_use }
    }

    fn field_expr(&self, idx: u32) -> String {
        let f = &self.program.fields[idx as usize];
        format!("(bit<32>)hdr.{}", f.name)
    }

    fn window_name(&self, plan: usize) -> &str {
        match &self.program.plans[plan] {
            AggPlan::Ring { name, .. } | AggPlan::RingOutcome { name, .. } => name,
            _ => unreachable!("not a ring plan"),
        }
    }

    /// Expression for an operand at its read point, plus any validity
    /// guard (a window average is only meaningful once full).
    fn operand_expr(&self, op: &Operand, in_return: bool) -> (Vec<String>, String) {
        match op {
            Operand::Const(c) => (vec![], format!("32w{}", c)),
            Operand::Field(i) => (vec![], self.field_expr(*i)),
            Operand::Agg { func, plan } => {
                let idx = *plan as usize;
                match &self.program.plans[idx] {
                    AggPlan::Ring { name, capacity, .. } => match func {
                        AggFunc::Sum => (vec![], format!("cmeta.{}_sum", name)),
                        AggFunc::Min => (vec![], format!("cmeta.{}_min", name)),
                        AggFunc::Max => (vec![], format!("cmeta.{}_max", name)),
                        AggFunc::Avg => {
                            let shift = capacity.trailing_zeros();
                            let expr = format!("(cmeta.{}_sum >> {})", name, shift);
                            if in_return {
                                // Warm-up handling diverges here; see
                                // the module comment.
                                (vec![], expr)
                            } else {
                                (
                                    vec![format!("cmeta.{}_fill == 32w{}", name, capacity)],
                                    expr,
                                )
                            }
                        }
                        AggFunc::Count => (vec![], format!("cmeta.{}_count", name)),
                    },
                    AggPlan::RingOutcome { name, .. } => {
                        if in_return {
                            (vec![], format!("cmeta.{}_post_count", name))
                        } else {
                            (vec![], format!("cmeta.{}_count", name))
                        }
                    }
                    AggPlan::RunningGlobal { .. } | AggPlan::RunningMachine { .. } => {
                        (vec![], format!("cmeta.run_{}", idx))
                    }
                }
            }
        }
    }

    fn predicate_condition(&self, idx: usize) -> String {
        let p = &self.program.predicates[idx];
        let (mut guards, lhs) = self.operand_expr(&p.lhs, false);
        let (rhs_guards, rhs) = self.operand_expr(&p.rhs, false);
        guards.extend(rhs_guards);
        let core = format!("{} {} {}", lhs, cmp_p4(p.cmp), rhs);
        if guards.is_empty() {
            core
        } else {
            format!("{} && ({})", guards.join(" && "), core)
        }
    }

    fn meta_fields(&self) -> Vec<String> {
        let mut fields = vec![
            "matched_pred".to_string(),
            "cur_state".to_string(),
            "next_state".to_string(),
            "is_accepting".to_string(),
            "resubmit_needed".to_string(),
            "slot_value".to_string(),
        ];
        for (i, plan) in self.program.plans.iter().enumerate() {
            match plan {
                AggPlan::Ring { name, .. } => {
                    fields.push(format!("{}_head", name));
                    fields.push(format!("{}_fill", name));
                    if !self.ring_use[i].folds.is_empty() {
                        fields.push(format!("{}_iter", name));
                    }
                    for fold in &self.ring_use[i].folds {
                        fields.push(format!("{}_{}", name, fold));
                    }
                }
                AggPlan::RingOutcome { name, .. } => {
                    fields.push(format!("{}_head", name));
                    fields.push(format!("{}_fill", name));
                    fields.push(format!("{}_outcome", name));
                    if !self.ring_use[i].folds.is_empty() {
                        fields.push(format!("{}_iter", name));
                        fields.push(format!("{}_count", name));
                    }
                    if self.ring_use[i].post_count {
                        fields.push(format!("{}_evicted", name));
                        fields.push(format!("{}_post_count", name));
                    }
                }
                AggPlan::RunningGlobal { .. } | AggPlan::RunningMachine { .. } => {
                    fields.push(format!("run_{}", i));
                }
            }
        }
        for m in &self.program.machines {
            fields.push(format!("{}_accepted", m.name));
            fields.push(format!("{}_return", m.name));
        }
        fields
    }

    fn unrolled_fold(&self, out: &mut String, plan: usize, capacity: u32) {
        let name = self.window_name(plan);
        let folds = &self.ring_use[plan].folds;
        if folds.is_empty() {
            return;
        }
        let _ = writeln!(out, "        cmeta.{}_iter = 32w0;", name);
        for fold in folds {
            let init = match fold {
                AggFunc::Min => NO_SYMBOL.to_string(),
                _ => "32w0".to_string(),
            };
            let _ = writeln!(out, "        cmeta.{}_{} = {};", name, fold, init);
        }
        for slot in 0..capacity {
            let _ = writeln!(
                out,
                "        if (cmeta.{}_iter < cmeta.{}_fill) {{",
                name, name
            );
            let _ = writeln!(
                out,
                "            {}_slots.read(cmeta.slot_value, 32w{});",
                name, slot
            );
            for fold in folds {
                match fold {
                    AggFunc::Sum | AggFunc::Count => {
                        let _ = writeln!(
                            out,
                            "            cmeta.{}_{} = cmeta.{}_{} + cmeta.slot_value;",
                            name, fold, name, fold
                        );
                    }
                    AggFunc::Min => {
                        let _ = writeln!(
                            out,
                            "            if (cmeta.slot_value < cmeta.{}_min) {{ cmeta.{}_min = cmeta.slot_value; }}",
                            name, name
                        );
                    }
                    AggFunc::Max => {
                        let _ = writeln!(
                            out,
                            "            if (cmeta.slot_value > cmeta.{}_max) {{ cmeta.{}_max = cmeta.slot_value; }}",
                            name, name
                        );
                    }
                    AggFunc::Avg => unreachable!("avg folds as sum"),
                }
            }
            let _ = writeln!(out, "        }}");
            let _ = writeln!(out, "        cmeta.{}_iter = cmeta.{}_iter + 32w1;", name, name);
        }
    }

    fn cursor_advance(&self, out: &mut String, name: &str, capacity: u32) {
        let _ = writeln!(out, "        cmeta.{}_head = cmeta.{}_head + 32w1;", name, name);
        let _ = writeln!(
            out,
            "        if (cmeta.{}_head >= 32w{}) {{ cmeta.{}_head = 32w0; }}",
            name, capacity, name
        );
        let _ = writeln!(
            out,
            "        if (cmeta.{}_fill < 32w{}) {{ cmeta.{}_fill = cmeta.{}_fill + 32w1; }}",
            name, capacity, name, name
        );
        let _ = writeln!(out, "        {}_head.write(0, cmeta.{}_head);", name, name);
        let _ = writeln!(out, "        {}_fill.write(0, cmeta.{}_fill);", name, name);
    }

    fn running_fold_stmt(&self, func: AggFunc, target: &str, value: &str) -> String {
        match func {
            AggFunc::Sum => format!("{} = {} + {};", target, target, value),
            AggFunc::Min => format!("if ({} < {}) {{ {} = {}; }}", value, target, target, value),
            AggFunc::Max => format!("if ({} > {}) {{ {} = {}; }}", value, target, target, value),
            _ => unreachable!("running plans carry only sum, min, max"),
        }
    }

    fn running_init(&self, func: AggFunc) -> &'static str {
        match func {
            AggFunc::Min => NO_SYMBOL,
            _ => "32w0",
        }
    }

    fn generate(&self, options: &CodegenOptions) -> P4Output {
        let p = self.program;
        let mut warnings = Vec::new();
        let unrolled: u64 = p
            .plans
            .iter()
            .enumerate()
            .filter_map(|(i, plan)| {
                plan.capacity()
                    .filter(|_| !self.ring_use[i].folds.is_empty())
                    .map(|c| c as u64)
            })
            .sum();
        if unrolled > options.unroll_budget as u64 {
            warnings.push(format!(
                "unrolled aggregation covers {} slots, over the budget of {}; \
                 expect pipeline stage pressure on hardware targets",
                unrolled, options.unroll_budget
            ));
        }

        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "// Generated complex-event pipeline. Include into a P4_16");
        let _ = writeln!(w, "// program that defines headers_t with the referenced fields,");
        let _ = writeln!(w, "// carries cep_meta_t in its user metadata, and applies");
        let _ = writeln!(w, "// CepPipeline from ingress. cmeta.resubmit_needed signals that");
        let _ = writeln!(w, "// an accept fired and the packet should re-traverse matching.");
        let _ = writeln!(w, "#ifndef CEP_PIPELINE_P4");
        let _ = writeln!(w, "#define CEP_PIPELINE_P4");
        let _ = writeln!(w);
        let _ = writeln!(w, "#define CEP_NO_SYMBOL {}", NO_SYMBOL);
        let _ = writeln!(w);

        let _ = writeln!(w, "struct cep_meta_t {{");
        for f in self.meta_fields() {
            let _ = writeln!(w, "    bit<32> {};", f);
        }
        let _ = writeln!(w, "}}");
        let _ = writeln!(w);

        let _ = writeln!(
            w,
            "control CepPipeline(inout headers_t hdr, inout cep_meta_t cmeta) {{"
        );

        for (i, plan) in p.plans.iter().enumerate() {
            match plan {
                AggPlan::Ring { name, capacity, .. }
                | AggPlan::RingOutcome { name, capacity, .. } => {
                    let _ = writeln!(w, "    register<bit<32>>({}) {}_slots;", capacity, name);
                    let _ = writeln!(w, "    register<bit<32>>(1) {}_head;", name);
                    let _ = writeln!(w, "    register<bit<32>>(1) {}_fill;", name);
                }
                AggPlan::RunningGlobal { .. } | AggPlan::RunningMachine { .. } => {
                    let _ = writeln!(w, "    register<bit<32>>(1) running_{};", i);
                }
            }
        }
        for m in &p.machines {
            let _ = writeln!(w, "    register<bit<32>>(1) {}_state;", m.name);
        }
        let _ = writeln!(w);

        let _ = writeln!(
            w,
            "    action do_transition(bit<32> next_state, bit<32> is_accepting) {{"
        );
        let _ = writeln!(w, "        cmeta.next_state = next_state;");
        let _ = writeln!(w, "        cmeta.is_accepting = is_accepting;");
        let _ = writeln!(w, "    }}");
        let strategies: BTreeSet<&'static str> = p
            .machines
            .iter()
            .map(|m| default_action_name(m.strategy))
            .collect();
        if strategies.contains("do_default_skip") {
            let _ = writeln!(w, "    action do_default_skip() {{");
            let _ = writeln!(w, "        cmeta.next_state = cmeta.cur_state;");
            let _ = writeln!(w, "        cmeta.is_accepting = 32w0;");
            let _ = writeln!(w, "    }}");
        }
        if strategies.contains("do_default_strict") {
            let _ = writeln!(w, "    action do_default_strict() {{");
            let _ = writeln!(w, "        cmeta.next_state = 32w0;");
            let _ = writeln!(w, "        cmeta.is_accepting = 32w0;");
            let _ = writeln!(w, "    }}");
        }
        let _ = writeln!(w);

        for m in &p.machines {
            let action = default_action_name(m.strategy);
            let size = (m.rows.len() * 2).next_power_of_two().max(16);
            let _ = writeln!(w, "    table {} {{", table_name(&m.name));
            let _ = writeln!(w, "        key = {{");
            let _ = writeln!(w, "            cmeta.cur_state: exact;");
            let _ = writeln!(w, "            cmeta.matched_pred: exact;");
            let _ = writeln!(w, "        }}");
            let _ = writeln!(w, "        actions = {{ do_transition; {}; }}", action);
            let _ = writeln!(w, "        default_action = {}();", action);
            let _ = writeln!(w, "        size = {};", size);
            let _ = writeln!(w, "    }}");
        }
        let _ = writeln!(w);

        let _ = writeln!(w, "    apply {{");
        let _ = writeln!(w, "        cmeta.resubmit_needed = 32w0;");
        for m in &p.machines {
            let _ = writeln!(w, "        cmeta.{}_accepted = 32w0;", m.name);
            let _ = writeln!(w, "        cmeta.{}_return = 32w0;", m.name);
        }
        let _ = writeln!(w);

        // 1: value window inserts with their folds, running globals.
        for (i, plan) in p.plans.iter().enumerate() {
            match plan {
                AggPlan::Ring { name, capacity, source } => {
                    let _ = writeln!(w, "        // window {}: insert then fold", name);
                    let _ = writeln!(w, "        @atomic {{");
                    let _ = writeln!(w, "        {}_head.read(cmeta.{}_head, 0);", name, name);
                    let _ = writeln!(w, "        {}_fill.read(cmeta.{}_fill, 0);", name, name);
                    let _ = writeln!(
                        w,
                        "        {}_slots.write(cmeta.{}_head, {});",
                        name,
                        name,
                        self.field_expr(*source)
                    );
                    self.cursor_advance(w, name, *capacity);
                    self.unrolled_fold(w, i, *capacity);
                    let _ = writeln!(w, "        }}");
                }
                AggPlan::RunningGlobal { func, source } => {
                    let _ = writeln!(w, "        // running {} over {}", func, p.fields[*source as usize].name);
                    let _ = writeln!(w, "        @atomic {{");
                    let _ = writeln!(w, "        running_{}.read(cmeta.run_{}, 0);", i, i);
                    let _ = writeln!(
                        w,
                        "        {}",
                        self.running_fold_stmt(
                            *func,
                            &format!("cmeta.run_{}", i),
                            &self.field_expr(*source)
                        )
                    );
                    let _ = writeln!(w, "        running_{}.write(0, cmeta.run_{});", i, i);
                    let _ = writeln!(w, "        }}");
                }
                _ => {}
            }
        }

        // 2a: outcome windows fold their pre-insert counts.
        for (i, plan) in p.plans.iter().enumerate() {
            if let AggPlan::RingOutcome { name, capacity, .. } = plan {
                let _ = writeln!(w, "        // window {}: count before this packet lands", name);
                let _ = writeln!(w, "        @atomic {{");
                let _ = writeln!(w, "        {}_head.read(cmeta.{}_head, 0);", name, name);
                let _ = writeln!(w, "        {}_fill.read(cmeta.{}_fill, 0);", name, name);
                if self.ring_use[i].post_count {
                    let _ = writeln!(
                        w,
                        "        {}_slots.read(cmeta.{}_evicted, cmeta.{}_head);",
                        name, name, name
                    );
                }
                self.unrolled_fold(w, i, *capacity);
                let _ = writeln!(w, "        }}");
            }
        }

        // 2b: predicate chain, lowest true id wins.
        let _ = writeln!(w, "        // predicate resolution");
        let _ = writeln!(w, "        cmeta.matched_pred = CEP_NO_SYMBOL;");
        for i in (0..p.symbol_count as usize).rev() {
            let _ = writeln!(
                w,
                "        if ({}) {{ cmeta.matched_pred = 32w{}; }}",
                self.predicate_condition(i),
                i
            );
        }

        // 2c + 3: outcome bits and their inserts.
        for (i, plan) in p.plans.iter().enumerate() {
            if let AggPlan::RingOutcome { name, capacity, predicate } = plan {
                let _ = writeln!(w, "        // window {}: record this packet's outcome", name);
                let _ = writeln!(w, "        cmeta.{}_outcome = 32w0;", name);
                let _ = writeln!(
                    w,
                    "        if ({}) {{ cmeta.{}_outcome = 32w1; }}",
                    self.predicate_condition(*predicate as usize),
                    name
                );
                if self.ring_use[i].post_count {
                    let _ = writeln!(
                        w,
                        "        cmeta.{}_post_count = cmeta.{}_count + cmeta.{}_outcome;",
                        name, name, name
                    );
                    let _ = writeln!(
                        w,
                        "        if (cmeta.{}_fill == 32w{}) {{ cmeta.{}_post_count = cmeta.{}_post_count - cmeta.{}_evicted; }}",
                        name, capacity, name, name, name
                    );
                }
                let _ = writeln!(w, "        @atomic {{");
                let _ = writeln!(
                    w,
                    "        {}_slots.write(cmeta.{}_head, cmeta.{}_outcome);",
                    name, name, name
                );
                self.cursor_advance(w, name, *capacity);
                let _ = writeln!(w, "        }}");
            }
        }

        // 4: machines.
        for (mi, m) in p.machines.iter().enumerate() {
            let machine_plans: Vec<(usize, AggFunc, u32)> = p
                .plans
                .iter()
                .enumerate()
                .filter_map(|(i, plan)| match plan {
                    AggPlan::RunningMachine { func, source, machine } if *machine == mi as u32 => {
                        Some((i, *func, *source))
                    }
                    _ => None,
                })
                .collect();
            let _ = writeln!(w, "        // machine {}", m.name);
            let _ = writeln!(w, "        {}_state.read(cmeta.cur_state, 0);", m.name);
            let _ = writeln!(w, "        {}.apply();", table_name(&m.name));
            let _ = writeln!(w, "        @atomic {{");
            let _ = writeln!(w, "        if (cmeta.is_accepting == 32w1) {{");
            // The accepting packet belongs to the run: fold first, then
            // read the return value, then reset.
            for &(i, func, source) in &machine_plans {
                let _ = writeln!(w, "            running_{}.read(cmeta.run_{}, 0);", i, i);
                let _ = writeln!(
                    w,
                    "            {}",
                    self.running_fold_stmt(
                        func,
                        &format!("cmeta.run_{}", i),
                        &self.field_expr(source)
                    )
                );
            }
            let (guards, ret) = self.operand_expr(&m.return_value, true);
            debug_assert!(guards.is_empty(), "return reads carry no guards");
            let _ = writeln!(w, "            cmeta.{}_return = {};", m.name, ret);
            let _ = writeln!(w, "            cmeta.{}_accepted = 32w1;", m.name);
            let _ = writeln!(w, "            cmeta.resubmit_needed = 32w1;");
            let _ = writeln!(w, "            {}_state.write(0, 32w0);", m.name);
            for &(i, func, _) in &machine_plans {
                let _ = writeln!(w, "            running_{}.write(0, {});", i, self.running_init(func));
            }
            let _ = writeln!(w, "        }} else {{");
            let _ = writeln!(w, "            {}_state.write(0, cmeta.next_state);", m.name);
            if !machine_plans.is_empty() {
                let _ = writeln!(w, "            if (cmeta.next_state != 32w0) {{");
                for &(i, func, source) in &machine_plans {
                    let _ = writeln!(w, "                running_{}.read(cmeta.run_{}, 0);", i, i);
                    let _ = writeln!(
                        w,
                        "                {}",
                        self.running_fold_stmt(
                            func,
                            &format!("cmeta.run_{}", i),
                            &self.field_expr(source)
                        )
                    );
                    let _ = writeln!(w, "                running_{}.write(0, cmeta.run_{});", i, i);
                }
                let _ = writeln!(w, "            }} else {{");
                for &(i, func, _) in &machine_plans {
                    let _ = writeln!(w, "                running_{}.write(0, {});", i, self.running_init(func));
                }
                let _ = writeln!(w, "            }}");
            }
            let _ = writeln!(w, "        }}");
            let _ = writeln!(w, "        }}");
        }

        let _ = writeln!(w, "    }}");
        let _ = writeln!(w, "}}");
        let _ = writeln!(w);
        let _ = writeln!(w, "#endif");

        P4Output { source: out, warnings }
    }
}

/// Emit the P4_16 control block for a program.
pub fn generate_p4(program: &CompiledProgram, options: &CodegenOptions) -> P4Output {
    Gen::new(program).generate(options)
}

/// Runtime entries: one default line per table, then its rows in table
/// order. This is the text [`crate::runtime::Controller::apply_entries`]
/// replays.
pub fn generate_table_entries(program: &CompiledProgram) -> String {
    let mut out = String::new();
    for m in &program.machines {
        let table = table_name(&m.name);
        let _ = writeln!(
            out,
            "table_set_default {} {}",
            table,
            default_action_name(m.strategy)
        );
        for r in &m.rows {
            let _ = writeln!(
                out,
                "table_add {} do_transition {} {} => {} {}",
                table,
                r.state,
                r.symbol,
                r.next,
                if r.accepting { 1 } else { 0 }
            );
        }
    }
    out
}

/// Map from logical names to generated identifiers, one mapping per
/// line: `<logical> <generated>`.
pub fn generate_manifest(program: &CompiledProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "symbol.register cmeta.matched_pred");
    let _ = writeln!(out, "symbol.no_match {}", NO_SYMBOL);
    for f in &program.fields {
        let _ = writeln!(out, "field.{} hdr.{}", f.name, f.name);
    }
    for (i, plan) in program.plans.iter().enumerate() {
        match plan {
            AggPlan::Ring { name, .. } | AggPlan::RingOutcome { name, .. } => {
                let _ = writeln!(out, "window.{}.slots {}_slots", name, name);
                let _ = writeln!(out, "window.{}.head {}_head", name, name);
                let _ = writeln!(out, "window.{}.fill {}_fill", name, name);
            }
            AggPlan::RunningGlobal { func, source } => {
                let _ = writeln!(
                    out,
                    "running.{}.{} running_{}",
                    func, program.fields[*source as usize].name, i
                );
            }
            AggPlan::RunningMachine { func, source, machine } => {
                let _ = writeln!(
                    out,
                    "running.{}.{}.{} running_{}",
                    program.machines[*machine as usize].name,
                    func,
                    program.fields[*source as usize].name,
                    i
                );
            }
        }
    }
    for m in &program.machines {
        let _ = writeln!(out, "machine.{}.state {}_state", m.name, m.name);
        let _ = writeln!(out, "machine.{}.table {}", m.name, table_name(&m.name));
        let _ = writeln!(out, "machine.{}.hit_action do_transition", m.name);
        let _ = writeln!(
            out,
            "machine.{}.miss_action {}",
            m.name,
            default_action_name(m.strategy)
        );
        let _ = writeln!(out, "machine.{}.accept_flag cmeta.{}_accepted", m.name, m.name);
        let _ = writeln!(out, "machine.{}.return cmeta.{}_return", m.name, m.name);
    }
    out
}
