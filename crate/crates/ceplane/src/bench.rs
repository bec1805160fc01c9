//! Synthetic workload for measuring how per-event cost scales with
//! window capacity. The shape of the rule is fixed; only the window
//! size varies, so the measured work per event should be affine in the
//! capacity (each aggregate read walks every slot).

use crate::engine::{Engine, Packet};
use crate::headers::parse_headers;
use crate::parser::parse_rules;
use crate::program::{compile, CompiledProgram};
use crate::validate::validate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::time::Instant;

pub const SYNTHETIC_HEADERS: &str = "pkt.kind 8\npkt.value 32\n";

/// Rule text for one bench point. A zero size drops the window and its
/// aggregate branch entirely, leaving the bare two-step sequence.
pub fn synthetic_rules(window_size: u32) -> String {
    if window_size == 0 {
        "\
complex_event bench_evt {
  value 1
  pattern [pkt.kind == 1] ; [pkt.kind == 2]
}
"
        .to_string()
    } else {
        format!(
            "\
window bench_wnd {{ size {} value pkt.value }}
complex_event bench_evt {{
  value 1
  pattern ([pkt.kind == 1] ; [pkt.kind == 2]) || [sum(bench_wnd) > 4000000000]
}}
",
            window_size
        )
    }
}

/// Compile the bench rule for one window size.
pub fn synthetic_program(window_size: u32) -> CompiledProgram {
    let headers = parse_headers(SYNTHETIC_HEADERS).expect("bench headers are well formed");
    let ast = parse_rules(&synthetic_rules(window_size)).expect("bench rules parse");
    let checked = validate(ast, &headers).expect("bench rules validate");
    compile(&checked)
}

/// Seeded packet stream: kinds cycle through 0..4 uniformly, values
/// stay small so the window-sum branch never fires and every event
/// walks the whole pipeline.
pub fn synthetic_packets(program: &CompiledProgram, events: u64, seed: u64) -> Vec<Packet> {
    let kind = program.field_index("pkt.kind").map(|i| i as usize);
    let value = program.field_index("pkt.value").map(|i| i as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..events)
        .map(|_| {
            let mut values = vec![None; program.fields.len()];
            let k = rng.gen_range(0u32..4);
            let v = rng.gen_range(0u32..100);
            if let Some(i) = kind {
                values[i] = Some(k);
            }
            if let Some(i) = value {
                values[i] = Some(v);
            }
            Packet::new(values)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<u32>,
    pub events: u64,
    pub seed: u64,
    pub repetitions: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![0, 8, 16, 32, 64, 128],
            events: 100_000,
            seed: 7,
            repetitions: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub window_size: u32,
    pub events: u64,
    pub wall_ns_mean: f64,
    pub ops_per_event: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// One row per size: `n,events,wall_ns_mean,ops_per_event`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,events,wall_ns_mean,ops_per_event\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.1},{:.4}",
                r.window_size, r.events, r.wall_ns_mean, r.ops_per_event
            );
        }
        out
    }

    /// Fit of abstract work per event against window size.
    pub fn ops_fit(&self) -> FitLine {
        let points: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.window_size as f64, r.ops_per_event))
            .collect();
        fit_line(&points)
    }
}

/// Least-squares line through a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(points: &[(f64, f64)]) -> FitLine {
    assert!(points.len() >= 2, "a fit needs at least two points");
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    assert!(sxx > 0.0, "x values must not be constant");
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    FitLine { slope, intercept, r2 }
}

/// Run the sweep: for each size, replay the same seeded stream through
/// a fresh engine `repetitions` times and keep the mean wall time. The
/// ops figure is deterministic, so one pass pins it.
pub fn run_bench(config: &BenchConfig) -> BenchReport {
    assert!(config.repetitions >= 1);
    assert!(config.events >= 1);
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &size in &config.sizes {
        let program = synthetic_program(size);
        let packets = synthetic_packets(&program, config.events, config.seed);
        let mut wall_total = 0u128;
        let mut ops = 0u64;
        for _ in 0..config.repetitions {
            let mut engine = Engine::new(program.clone());
            let start = Instant::now();
            for pkt in &packets {
                let _ = engine.ingest(pkt);
            }
            wall_total += start.elapsed().as_nanos();
            ops = engine.stats().ops;
        }
        rows.push(BenchRow {
            window_size: size,
            events: config.events,
            wall_ns_mean: wall_total as f64 / config.repetitions as f64,
            ops_per_event: ops as f64 / config.events as f64,
        });
    }
    BenchReport { rows }
}
