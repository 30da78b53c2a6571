use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covert_relay_core::config::{parse_config, ExperimentConfig, Figure};
use covert_relay_core::experiments::{self, Table};
use covert_relay_core::Error;

/// Covert-rate analysis of two-hop relay networks with cooperative jamming.
#[derive(Debug, Parser)]
#[command(name = "covert-relay-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the closed forms at one operating point.
    Metrics(Common),
    /// Run the Monte Carlo estimators over the configured sweep.
    Simulate(Common),
    /// Maximize the covert rate under the covertness requirement.
    Optimize(Common),
    /// Regenerate the data behind one figure (fig2..fig7).
    Reproduce {
        /// Figure name; falls back to `figure` in the config.
        figure: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (a directory for `reproduce`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Omit the timestamp comment line.
    #[arg(long)]
    no_timestamp: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Parse { .. } => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: io::Error, path: &Path) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Validation(format!("{}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.sim.trials = trials;
    }
    cfg.sim.validate()?;
    Ok(cfg)
}

fn stamp(common: &Common) -> Option<String> {
    (!common.no_timestamp).then(|| format!("generated {}", chrono::Utc::now().to_rfc3339()))
}

fn emit(table: &Table, path: Option<&Path>, stamp: Option<&str>) -> Result<(), Failure> {
    let bytes = table.to_csv(stamp)?;
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| runtime(e, p)),
        None => io::stdout()
            .write_all(&bytes)
            .map_err(|e| runtime(e, Path::new("<stdout>"))),
    }
}

fn out_path(common: &Common, cfg: &ExperimentConfig) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.output_path.as_ref().map(PathBuf::from))
}

fn trace_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.trace.csv"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Metrics(c) | Command::Simulate(c) | Command::Optimize(c) => c,
        Command::Reproduce { common, .. } => common,
    };
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Failure::Validation(
                "invalid parameter `workers`: must be >= 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let cfg = load(common)?;
    let stamp = stamp(common);
    let stamp = stamp.as_deref();
    match &cli.command {
        Command::Metrics(_) => {
            let t = experiments::metrics(&cfg)?;
            if let Some(p) = out_path(common, &cfg) {
                emit(&t, Some(&p), stamp)?;
            }
            emit(&t, None, stamp)
        }
        Command::Simulate(_) => {
            let t = experiments::simulate(&cfg)?;
            emit(&t, out_path(common, &cfg).as_deref(), stamp)
        }
        Command::Optimize(_) => {
            let (result, trace) = experiments::optimize(&cfg)?;
            match out_path(common, &cfg) {
                Some(p) => {
                    emit(&result, Some(&p), stamp)?;
                    emit(&trace, Some(&trace_path(&p)), stamp)
                }
                None => emit(&result, None, stamp),
            }
        }
        Command::Reproduce { figure, .. } => {
            let fig: Figure = match (figure, cfg.figure) {
                (Some(name), _) => name.parse()?,
                (None, Some(f)) => f,
                (None, None) => {
                    return Err(Failure::Validation(
                        "invalid parameter `figure`: name one of fig2..fig7".into(),
                    ))
                }
            };
            let dir = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("reproduce_{fig}")));
            fs::create_dir_all(&dir).map_err(|e| runtime(e, &dir))?;
            for t in experiments::reproduce(fig, &cfg)? {
                let path = dir.join(format!("{}.csv", t.name));
                emit(&t, Some(&path), stamp)?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
