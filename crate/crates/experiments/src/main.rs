use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use phasor_core::{from_phases, Circuit, CircuitJson, PhaseVector, PhasorState};
use phasor_experiments::report::{write_result, write_summary_csv};
use phasor_experiments::runners::gate_registry;
use phasor_experiments::{ExperimentResult, Format, Registry, RunContext};

#[derive(Parser, Debug)]
#[command(name = "phasor", version, about = "Phasor circuit simulator and experiments")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for result files; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    context: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[command(rename_all = "kebab-case")]
enum Command {
    /// Execute a circuit JSON file and print the execution result.
    Run {
        file: PathBuf,
        /// Initial state: an array of [re, im] pairs or an array of phases.
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    Classify,
    Forecast,
    Volatility,
    PeriodFind,
    Fibonacci,
    Memory,
    Binding,
    Kuramoto,
    VerifyAppendix,
    /// Every experiment in turn.
    All,
}

impl Command {
    fn experiment(&self) -> Option<&'static str> {
        Some(match self {
            Command::Classify => "classify",
            Command::Forecast => "forecast",
            Command::Volatility => "volatility",
            Command::PeriodFind => "period-find",
            Command::Fibonacci => "fibonacci",
            Command::Memory => "memory",
            Command::Binding => "binding",
            Command::Kuramoto => "kuramoto",
            Command::VerifyAppendix => "verify-appendix",
            Command::Run { .. } | Command::All => return None,
        })
    }
}

fn read_initial(path: &Path) -> Result<PhasorState> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(state) = serde_json::from_str::<PhasorState>(&text) {
        return Ok(state);
    }
    let phases: Vec<f64> = serde_json::from_str(&text)
        .with_context(|| format!("{}: expected [[re, im], ...] or [phase, ...]", path.display()))?;
    Ok(from_phases(&PhaseVector(phases))?)
}

fn run_circuit(file: &Path, initial: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let spec: CircuitJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    let circuit = Circuit::from_json_with(&gate_registry(), &spec)?;
    let init = initial.map(read_initial).transpose()?;
    let result = circuit.run(init.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn emit(result: &ExperimentResult, cli: &Cli) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            for p in write_result(result, dir, cli.format)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => match cli.format {
            Format::Json => println!("{}", result.to_json_string()),
            Format::Csv => write_summary_csv(result, std::io::stdout())?,
        },
    }
    for c in &result.checks {
        eprintln!("{}/{c}", result.experiment);
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Command::Run { file, initial } = &cli.command {
        run_circuit(file, initial.as_deref())?;
        return Ok(true);
    }
    let ctx = RunContext {
        seed: cli.seed,
        epochs: cli.epochs,
        lr: cli.lr,
        threads: cli.threads,
        depth: cli.depth,
        context: cli.context,
    };
    let registry = Registry::builtin();
    let names: Vec<&str> = match cli.command.experiment() {
        Some(n) => vec![n],
        None => registry.names().to_vec(),
    };
    let mut passed = true;
    for name in names {
        let result = registry.run(name, &ctx)?;
        emit(&result, cli)?;
        passed &= result.passed();
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
