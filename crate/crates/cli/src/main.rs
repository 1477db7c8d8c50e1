use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use procdisc_cli::{emit_report, parse_problem, run, Command, Format, SolverSettings};

#[derive(Parser)]
#[command(name = "procdisc", version, about = "Discriminate quantum processes under restricted strategy classes")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Best tester found by the primal solvers.
    SolvePrimal(Flags),
    /// Dual certificate and duality bracket.
    SolveDual(Flags),
    /// Dual certificate plus the global-optimality test.
    Certify(Flags),
    /// Robustness of the ensemble against the class.
    Robustness(Flags),
    /// Canned two-use phase-channel example.
    #[command(name = "paper-example")]
    Example(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Args)]
struct Flags {
    /// Problem file (JSON).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    #[arg(long)]
    restarts: Option<usize>,
    /// Intermediate outcomes of adaptive testers.
    #[arg(long = "J")]
    outcomes: Option<usize>,
    #[arg(long)]
    max_cuts: Option<usize>,
}

impl Flags {
    fn apply(&self, mut s: SolverSettings) -> SolverSettings {
        if let Some(v) = self.tol {
            s.tol = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.restarts {
            s.restarts = v;
        }
        if let Some(v) = self.outcomes {
            s.outcomes = v;
        }
        if let Some(v) = self.max_cuts {
            s.max_cuts = v;
        }
        s
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROCDISC_LOG", "warn")).init();
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::SolvePrimal(f) => (Command::SolvePrimal, f),
        Sub::SolveDual(f) => (Command::SolveDual, f),
        Sub::Certify(f) => (Command::Certify, f),
        Sub::Robustness(f) => (Command::Robustness, f),
        Sub::Example(f) => (Command::Example, f),
    };
    let problem = match &flags.input {
        Some(path) => match parse_problem(path) {
            Ok(mut p) => {
                p.settings = flags.apply(p.settings);
                Some(p)
            }
            Err(e) => {
                eprintln!("procdisc: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None if command != Command::Example => {
            eprintln!("procdisc: {} needs --input", command.name());
            return ExitCode::from(2);
        }
        None => None,
    };
    let settings = problem.as_ref().map_or_else(|| flags.apply(SolverSettings::default()), |p| p.settings);
    if !(settings.tol > 0.0 && settings.tol < 1.0) || settings.restarts == 0 || settings.outcomes == 0 || settings.max_cuts == 0 {
        eprintln!("procdisc: --tol must lie in (0, 1) and --restarts, --J, --max-cuts must be positive");
        return ExitCode::from(2);
    }
    let report = run(command, problem.as_ref(), &settings);
    let format = match flags.format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Text => Format::Text,
    };
    let mut out = std::io::stdout().lock();
    if out.write_all(&emit_report(&report, format)).and_then(|_| out.flush()).is_err() {
        return ExitCode::from(1);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
