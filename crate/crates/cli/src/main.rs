//! `corrtwirl`: run correlated-error characterization experiments from a
//! config file.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical
//! invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use corrtwirl::experiment::{run_experiment, ExperimentConfig};
use corrtwirl::pauli::{chi_diagonal, collective_coefficients};
use corrtwirl::protocol::{experiment_count, sample_size};
use corrtwirl::Error;

#[derive(Parser)]
#[command(name = "corrtwirl", version, about = "Clifford-twirl characterization of correlated Pauli errors")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Config overrides shared by `run` and `chi`.
#[derive(clap::Args)]
struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// identity | ie-sequence | c12:β | cnot | cnot2 | matrix:path | ensemble:path | sequence:path
    #[arg(long)]
    gate: Option<String>,
    /// exact | sampled
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    n_realizations: Option<String>,
    /// full-24 | half-12[:S1|S2] | S1:I:X style 6-element pool
    #[arg(long)]
    pool: Option<String>,
    /// Semicolon-separated subsets, e.g. "1-2;2-3".
    #[arg(long)]
    targets: Option<String>,
    /// Output prefix; writes <prefix>.report and <prefix>.csv.
    #[arg(long)]
    out: Option<String>,
    /// Any other config key, as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("gate", &self.gate),
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("n_realizations", &self.n_realizations),
            ("pool", &self.pool),
            ("targets", &self.targets),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write or print its report.
    Run(Overrides),
    /// Print the collective coefficients of the configured gate.
    Chi(Overrides),
    /// Number of realizations for precision δ and failure probability ε.
    SampleSize {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Also report experiment counts for n qubits up to weight w.
        #[arg(long, requires = "weight")]
        qubits: Option<usize>,
        #[arg(long, requires = "qubits")]
        weight: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {t} threads: {e}")))?;
    }
    match cli.command {
        Command::Run(o) => {
            let cfg = o.load()?;
            let start = Instant::now();
            let report = run_experiment(&cfg)?;
            match &cfg.out {
                Some(prefix) => {
                    let (a, b) = report.write(prefix)?;
                    println!("{}\n{}", a.display(), b.display());
                }
                None => print!("{}", report.to_text()),
            }
            eprintln!("runtime: {:.3} s", start.elapsed().as_secs_f64());
        }
        Command::Chi(o) => {
            let ch = o.load()?.build_channel()?;
            let chi = chi_diagonal(&ch)?;
            println!("identity = {:.12e}", chi.identity_value());
            print!("{}", collective_coefficients(&chi).to_text());
        }
        Command::SampleSize { delta, epsilon, qubits, weight } => {
            let plan = sample_size(delta, epsilon)?;
            let b = plan.bounds.expect("derived plans carry their bounds");
            println!("n_realizations = {}", plan.realizations);
            println!("chernoff_bound = {}", b.chernoff);
            println!("clt_bound = {}", b.clt);
            println!("dominant_bound = {}", b.dominant);
            if let (Some(n), Some(w)) = (qubits, weight) {
                let count = experiment_count(n, w, plan.realizations)?;
                println!("protocol_experiments = {}", count.protocol);
                println!("tomography_experiments = {}", count.tomography);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
