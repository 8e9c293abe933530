use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmimo::config::NetworkConfig;
use mmimo::experiment::{run_detequiv, run_experiment, ResultTable};
use mmimo::results::{write_table, Format};
use mmimo::validate::run_checks;
use mmimo::Error;

#[derive(Parser)]
#[command(version, about = "Uplink massive MIMO spectral efficiency simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep plus deterministic equivalents for M-MMSE.
    Run(RunArgs),
    /// Deterministic equivalents only.
    Detequiv(RunArgs),
    /// Run the built-in consistency checks.
    Validate {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set M=[64,128] --set trials=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; the table goes to stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Output format; guessed from the file extension when absent.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load(args: &RunArgs) -> Result<NetworkConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => NetworkConfig::from_file(p)?,
        None => NetworkConfig::default(),
    };
    for o in &args.overrides {
        cfg.set(o)?;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(table: &ResultTable, args: &RunArgs) -> Result<(), Error> {
    let format = match (args.format, &args.out) {
        (Some(FormatArg::Csv), _) => Format::Csv,
        (Some(FormatArg::Json), _) => Format::Json,
        (None, Some(p)) => Format::from_path(p),
        (None, None) => Format::Csv,
    };
    match &args.out {
        Some(p) => write_table(table, p, format)?,
        None => print!("{}", format.render(table)),
    }
    Ok(())
}

fn report(table: &ResultTable) {
    for s in table.summary() {
        let mc = match (s.sum_se, s.sum_se_stderr) {
            (Some(v), Some(e)) => format!("{v:.4} ± {e:.4}"),
            _ => "-".into(),
        };
        let de = s.detequiv_sum_se.map_or("-".into(), |v| format!("{v:.4}"));
        eprintln!(
            "{:<6} M={:<4} K={:<3} beta={} drops={}  sum SE {mc}  detequiv {de}",
            s.scheme.name(),
            s.antennas,
            s.users_per_cell,
            s.beta,
            s.drops
        );
    }
    for r in table.failures() {
        eprintln!(
            "failed: {} M={} K={} beta={} drop={}: {}",
            r.scheme.name(),
            r.antennas,
            r.users_per_cell,
            r.beta,
            r.drop,
            r.error.as_deref().unwrap_or_default()
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => load(&args).and_then(|cfg| {
            let table = run_experiment(&cfg)?;
            report(&table);
            emit(&table, &args)
        }),
        Command::Detequiv(args) => load(&args).and_then(|cfg| {
            let table = run_detequiv(&cfg)?;
            report(&table);
            emit(&table, &args)
        }),
        Command::Validate { instances, seed } => {
            let checks = run_checks(instances, seed);
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                match &c.error {
                    Some(e) => println!("{status} {:<26} {e}", c.name),
                    None => println!("{status} {:<26} worst {:.3e} (tol {:.0e})", c.name, c.worst, c.tolerance),
                }
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Error::InvalidParameter("validation failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
