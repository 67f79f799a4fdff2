//! `reshom` command line: single jobs, references, studies, Krylov checks and
//! rate fits. Exit codes: 0 success, 1 output I/O, 2 configuration, 3 solver,
//! 4 theorem-hypothesis violation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reshom::study::{
    fit_rate, parse_config, read_rate_csv, run_expmv_check, run_job, run_reference, run_study, write_study_csv,
    ConfigError, StudyConfig, XColumn,
};
use reshom::Error;

#[derive(Parser)]
#[command(name = "reshom", version, about = "Resonance-free numerical homogenization")]
struct Cli {
    /// Write results here instead of stdout (overrides the config's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective tensor for one box size, with error against the periodic reference.
    Homogenize { config: PathBuf },
    /// Periodic unit-cell reference tensor.
    Reference { config: PathBuf },
    /// Sweep the configured R list and write a CSV.
    Study {
        config: PathBuf,
        /// Leave runtime_ms empty so reruns are byte-identical.
        #[arg(long)]
        no_timings: bool,
    },
    /// Compare Lanczos e^{-TA}g with the full spectral sum.
    ExpmvCheck { config: PathBuf },
    /// Least-squares rate of a study CSV column.
    Rate {
        csv: PathBuf,
        #[arg(long, default_value = "logR")]
        x: XColumn,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long, default_value = "error_frob")]
        column: String,
    },
}

fn load(path: &Path) -> Result<(StudyConfig, serde_json::Value), Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("(file)", format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    let raw = serde_json::from_str(&text).map_err(|e| ConfigError::new("(root)", e.to_string()))?;
    Ok((cfg, raw))
}

fn destination(cli_out: &Option<PathBuf>, cfg: Option<&StudyConfig>) -> Option<PathBuf> {
    cli_out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.as_ref().map(PathBuf::from)))
}

fn emit(dest: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Error> {
    match dest {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::io(p.display().to_string(), e)),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::io("stdout", e)),
    }
}

fn json(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable report");
    s.push(b'\n');
    s
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("RESHOM_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ConfigError::new("RESHOM_THREADS", format!("expected a positive integer, got `{v}`")))?;
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match &cli.command {
        Command::Homogenize { config } => {
            let (cfg, raw) = load(config)?;
            let (_, report) = run_job(&cfg, &raw)?;
            emit(&destination(&cli.out, Some(&cfg)), &json(&report))
        }
        Command::Reference { config } => {
            let (cfg, _) = load(config)?;
            let t = run_reference(&cfg)?;
            emit(&destination(&cli.out, Some(&cfg)), &json(&t.to_json()))
        }
        Command::Study { config, no_timings } => {
            let (cfg, _) = load(config)?;
            let outcome = run_study(&cfg)?;
            let mut buf = Vec::new();
            write_study_csv(&outcome, &mut buf, !no_timings)?;
            emit(&destination(&cli.out, Some(&cfg)), &buf)?;
            match outcome.failure {
                Some((_, e)) => Err(e),
                None => Ok(()),
            }
        }
        Command::ExpmvCheck { config } => {
            let (cfg, _) = load(config)?;
            let rows = run_expmv_check(&cfg)?;
            emit(&destination(&cli.out, Some(&cfg)), &json(&rows))
        }
        Command::Rate { csv, x, floor, column } => {
            let file = fs::File::open(csv).map_err(|e| ConfigError::new("csv", format!("{}: {e}", csv.display())))?;
            let pts = read_rate_csv(file, column)?;
            let fit = fit_rate(&pts, *x, *floor)?;
            let report = serde_json::json!({
                "column": column,
                "x": match x { XColumn::R => "R", XColumn::LogR => "logR" },
                "floor": floor,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "used": fit.used,
            });
            emit(&cli.out, &json(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
