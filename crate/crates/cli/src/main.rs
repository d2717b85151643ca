//! `sieve`: run experiments, replay oracle checks and emit plot data.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use sieve_core::harness::{connection_oracle, run_experiment, ExperimentReport, ExperimentSpec};
use sieve_core::occupancy::{build_environment, SieveEnvironment, DEFAULT_MIN_MASS};
use sieve_core::sampling::StickLaw;
use sieve_core::selftest::run_selftest;
use sieve_core::{RngStream, SieveError};

#[derive(Parser)]
#[command(name = "sieve", version, about = "Monte Carlo experiments for the Bernoulli sieve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the seed given in the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment in a spec file; write CSV and a JSON report.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Omit the timestamp comment line from the CSV.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Check rho*(x) = N(log x) on a stored or freshly drawn environment.
    Oracle {
        /// Environment JSON to replay; without it one is drawn and written to the output directory.
        #[arg(long)]
        env: Option<PathBuf>,
        /// Stick law parameter theta of Beta(theta, 1) for a fresh environment.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in boundary-case checks of every module.
    Selftest {
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: Option<u16>,
    },
    /// Run the experiment and write only the per-replicate CSV.
    EmitPlotData {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_timestamp: bool,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn from_spec(path: &Path, e: SieveError) -> Failure {
        match e {
            SieveError::Parse { line, message } => Failure::Config(format!("{}:{line}: {message}", path.display())),
            SieveError::Io(e) => Failure::Config(format!("{}: {e}", path.display())),
            other => Failure::Config(format!("{}: {other}", path.display())),
        }
    }
}

impl From<SieveError> for Failure {
    fn from(e: SieveError) -> Failure {
        match e {
            SieveError::Configuration(_) | SieveError::Parameter(_) | SieveError::Parse { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

fn set_jobs(jobs: Option<u16>) -> Result<(), Failure> {
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j as usize)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::from_path(path).map_err(|e| Failure::from_spec(path, e))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into())
}

fn write_csv(report: &ExperimentReport, path: &Path, no_timestamp: bool) -> Result<(), Failure> {
    let header = if no_timestamp {
        None
    } else {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Some(format!("generated unix-time {secs}"))
    };
    report.write_csv(BufWriter::new(File::create(path)?), header.as_deref())?;
    Ok(())
}

fn run(spec_path: &Path, common: &Common, no_timestamp: bool, report_json: bool) -> Result<bool, Failure> {
    let spec = load_spec(spec_path, common.seed)?;
    set_jobs(common.jobs)?;
    std::fs::create_dir_all(&common.out)?;
    let report = run_experiment(&spec)?;
    let base = stem(spec_path);
    let csv = common.out.join(format!("{base}.csv"));
    write_csv(&report, &csv, no_timestamp)?;
    println!("wrote {}", csv.display());
    if !report_json {
        return Ok(true);
    }
    let json = common.out.join(format!("{base}.report.json"));
    std::fs::write(&json, report.to_json()?)?;
    println!("wrote {}", json.display());
    let failures = report.failures();
    for f in &failures {
        println!("FAIL {f}");
    }
    println!(
        "{} {}: {} rows, {} checks, {:.1}s",
        if failures.is_empty() { "PASS" } else { "FAIL" },
        report.target,
        report.rows.len(),
        report.checks.len(),
        report.runtime_seconds
    );
    Ok(failures.is_empty())
}

fn oracle(env_path: Option<&Path>, theta: f64, points: usize, common: &Common) -> Result<bool, Failure> {
    set_jobs(common.jobs)?;
    let seed = common.seed.unwrap_or(0);
    let env = match env_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            SieveEnvironment::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => {
            let law = StickLaw::beta(theta)?;
            let env = build_environment(&law, DEFAULT_MIN_MASS, &mut RngStream::new(seed, 0))?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("environment.json");
            std::fs::write(&path, env.to_json()?)?;
            println!("wrote {}", path.display());
            env
        }
    };
    let report = connection_oracle(&env, points, seed)?;
    println!(
        "{} rho*(x) = N(log x) at {} points, {} mismatches",
        if report.passed() { "PASS" } else { "FAIL" },
        report.points.len(),
        report.mismatches
    );
    Ok(report.passed())
}

fn selftest(jobs: Option<u16>) -> Result<bool, Failure> {
    set_jobs(jobs)?;
    let results = run_selftest();
    for r in &results {
        let status = if r.passed { "ok  " } else { "FAIL" };
        match &r.error {
            Some(e) => println!("{status} {}: {} ({e})", r.module, r.name),
            None => println!("{status} {}: {}", r.module, r.name),
        }
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("selftest: {} passed, {failed} failed", results.len() - failed);
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            spec,
            common,
            no_timestamp,
        } => run(spec, common, *no_timestamp, true),
        Command::EmitPlotData {
            spec,
            common,
            no_timestamp,
        } => run(spec, common, *no_timestamp, false),
        Command::Oracle {
            env,
            theta,
            points,
            common,
        } => oracle(env.as_deref(), *theta, *points, common),
        Command::Selftest { jobs } => selftest(*jobs),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
