//! Command line front end: compile rule files to deployable artifacts,
//! replay traces through the software engine, and sweep the synthetic
//! benchmark.

use ceplane::bench::{run_bench, BenchConfig};
use ceplane::codegen::{generate_manifest, generate_p4, generate_table_entries, CodegenOptions};
use ceplane::program::{compile, CompiledProgram};
use ceplane::{parse_headers, parse_rules, validate, Controller};
use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_PARSE: u8 = 10;
const EXIT_VALIDATION: u8 = 11;
const EXIT_IO: u8 = 12;
const EXIT_TRACE: u8 = 13;

#[derive(Parser)]
#[command(name = "ceplane", version, about = "Complex-event rule compiler and data-plane engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile rules into program text, P4 source, table entries, and a
    /// name manifest.
    Compile {
        #[command(flatten)]
        rules: RuleInputs,
        /// Directory the artifacts land in.
        #[arg(long)]
        out: PathBuf,
        /// Unrolled-slot budget before the generator warns.
        #[arg(long, default_value_t = 4096)]
        unroll_budget: u32,
    },
    /// Replay a packet trace and log emissions.
    Run {
        #[command(flatten)]
        program: ProgramInput,
        /// Trace CSV to replay.
        #[arg(long)]
        trace: PathBuf,
        /// Write the emission log here instead of stdout.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Print the final engine snapshot to stdout.
        #[arg(long)]
        snapshot: bool,
    },
    /// Sweep the synthetic workload over window sizes.
    Bench {
        /// Window sizes to measure; 0 means no window at all.
        #[arg(long, value_delimiter = ',', default_value = "0,8,16,32,64,128")]
        sizes: Vec<u32>,
        /// Events per measurement.
        #[arg(long, default_value_t = 100_000)]
        events: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Timed repetitions per size.
        #[arg(long, default_value_t = 3)]
        reps: u32,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RuleInputs {
    /// Rule file.
    #[arg(long)]
    rules: PathBuf,
    /// Header field widths, one `header.field width` per line.
    #[arg(long)]
    headers: PathBuf,
}

#[derive(Args)]
#[group(required = true)]
struct ProgramInput {
    /// Rule file; requires --headers.
    #[arg(long, requires = "headers")]
    rules: Option<PathBuf>,
    /// Header sidecar for --rules.
    #[arg(long)]
    headers: Option<PathBuf>,
    /// Previously compiled program text, instead of --rules/--headers.
    #[arg(long, conflicts_with_all = ["rules", "headers"])]
    program: Option<PathBuf>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl fmt::Display) -> Self {
        CliError { code, message: message.to_string() }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", path.display(), e)))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", path.display(), e)))
}

fn compile_inputs(rules_path: &Path, headers_path: &Path) -> Result<CompiledProgram, CliError> {
    let headers_src = read_file(headers_path)?;
    let headers = parse_headers(&headers_src).map_err(|e| {
        CliError::new(EXIT_PARSE, format!("{}: {}", headers_path.display(), e))
    })?;
    let rules_src = read_file(rules_path)?;
    let ast = parse_rules(&rules_src).map_err(|e| {
        CliError::new(
            EXIT_PARSE,
            format!("{}:{}: {}", rules_path.display(), e.span(), e),
        )
    })?;
    let checked = validate(ast, &headers).map_err(|e| {
        CliError::new(
            EXIT_VALIDATION,
            format!("{}:{}: {}", rules_path.display(), e.span(), e),
        )
    })?;
    Ok(compile(&checked))
}

fn load_program(input: &ProgramInput) -> Result<CompiledProgram, CliError> {
    match (&input.program, &input.rules, &input.headers) {
        (Some(path), _, _) => {
            let text = read_file(path)?;
            CompiledProgram::from_text(&text)
                .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {}", path.display(), e)))
        }
        (None, Some(rules), Some(headers)) => compile_inputs(rules, headers),
        _ => unreachable!("argument group enforces one input form"),
    }
}

fn cmd_compile(rules: &RuleInputs, out: &Path, unroll_budget: u32) -> Result<(), CliError> {
    let program = compile_inputs(&rules.rules, &rules.headers)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {}", out.display(), e)))?;
    let stem = rules
        .rules
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".to_string());

    let p4 = generate_p4(&program, &CodegenOptions { unroll_budget });
    for warning in &p4.warnings {
        eprintln!("warning: {}", warning);
    }

    let artifacts = [
        (format!("{}.prog", stem), program.to_text()),
        (format!("{}_cep.p4", stem), p4.source),
        (format!("{}_entries.txt", stem), generate_table_entries(&program)),
        (format!("{}_manifest.txt", stem), generate_manifest(&program)),
    ];
    for (name, content) in &artifacts {
        let path = out.join(name);
        write_file(&path, content)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run(
    input: &ProgramInput,
    trace_path: &Path,
    emit: Option<&Path>,
    snapshot: bool,
) -> Result<(), CliError> {
    let program = load_program(input)?;
    let headers_for_trace = match (&input.headers, &input.program) {
        (Some(h), _) => {
            let src = read_file(h)?;
            parse_headers(&src)
                .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {}", h.display(), e)))?
        }
        _ => {
            // Loaded program text carries its own widths.
            let mut set = ceplane::HeaderSet::default();
            for f in &program.fields {
                set.insert(f.name.clone(), f.width);
            }
            set
        }
    };
    let trace_src = read_file(trace_path)?;
    let trace = ceplane::trace::parse_trace(&trace_src, &headers_for_trace).map_err(|e| {
        CliError::new(EXIT_TRACE, format!("{}: {}", trace_path.display(), e))
    })?;
    let packets = trace.packets(&program);

    let mut controller = Controller::deploy(program);
    let mut log = String::new();
    for (i, pkt) in packets.iter().enumerate() {
        let seq = i + 1;
        match controller.ingest(pkt) {
            Ok(emissions) => {
                for e in emissions {
                    let name = &controller.program().machines[e.machine as usize].name;
                    log.push_str(&format!("{},{},{}\n", seq, name, e.value));
                }
            }
            Err(reason) => {
                eprintln!("packet {} dropped: {}", seq, reason);
            }
        }
    }
    match emit {
        Some(path) => write_file(path, &log)?,
        None => print!("{}", log),
    }
    if snapshot {
        print!("{}", controller.snapshot());
    }
    Ok(())
}

fn cmd_bench(
    sizes: &[u32],
    events: u64,
    seed: u64,
    reps: u32,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if sizes.is_empty() {
        return Err(CliError::new(EXIT_VALIDATION, "at least one size is required"));
    }
    let config = BenchConfig {
        sizes: sizes.to_vec(),
        events,
        seed,
        repetitions: reps.max(1),
    };
    let report = run_bench(&config);
    let csv = report.to_csv();
    match out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{}", csv),
    }
    if report.rows.len() >= 2 {
        let fit = report.ops_fit();
        eprintln!(
            "ops/event fit: slope {:.4} intercept {:.4} r2 {:.6}",
            fit.slope, fit.intercept, fit.r2
        );
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Compile { rules, out, unroll_budget } => cmd_compile(rules, out, *unroll_budget),
        Command::Run { program, trace, emit, snapshot } => {
            cmd_run(program, trace, emit.as_deref(), *snapshot)
        }
        Command::Bench { sizes, events, seed, reps, out } => {
            cmd_bench(sizes, *events, *seed, *reps, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
