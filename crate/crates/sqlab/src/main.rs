use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sqlab::commands::{self, Command, RunManifest};
use sqlab::config::ExperimentConfig;
use sqlab::{verify, HarnessError, EXIT_FAILURE};

#[derive(Parser)]
#[command(name = "sqlab", version, about = "Experiments on the random square-product process")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Predictor table over a z grid.
    Predict(Common),
    /// Peeling trajectories against the predicted bands.
    Trajectory(Common),
    /// First GF(2) dependency T against J.
    Threshold(Common),
    /// Exploration process on the independent hypergraph model.
    Avalanche(Common),
    /// Run the oracle and identity suite.
    Verify,
}

#[derive(Args, Default)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reload the configuration recorded in a run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    eps0: Option<String>,
    #[arg(long)]
    eps1: Option<String>,
    #[arg(long)]
    z_stop: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    n_max_factor: Option<String>,
    #[arg(long)]
    rows: Option<String>,
    /// Enforce the full constant chain on delta.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    /// Avalanche vertex count.
    #[arg(long)]
    m: Option<String>,
    /// Avalanche edge counts, e.g. 2:1500,3:500.
    #[arg(long)]
    s: Option<String>,
    /// Avalanche spec from trial 0's peeling state at this z.
    #[arg(long)]
    from_z: Option<String>,
}

fn read(path: &PathBuf) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn resolve(command: Command, c: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &c.manifest {
        let m = RunManifest::parse(&read(path)?)?;
        if m.command != command {
            return Err(HarnessError::Config(format!("manifest records a {:?} run", m.command)));
        }
        cfg = m.config;
    }
    if let Some(path) = &c.config {
        cfg.apply_file_text(&read(path)?)?;
    }
    let flags = [
        ("x", &c.x),
        ("eta", &c.eta),
        ("trials", &c.trials),
        ("seed", &c.seed),
        ("delta", &c.delta),
        ("eps0", &c.eps0),
        ("eps1", &c.eps1),
        ("z-stop", &c.z_stop),
        ("out", &c.out),
        ("format", &c.format),
        ("n-max-factor", &c.n_max_factor),
        ("rows", &c.rows),
        ("grid", &c.grid),
        ("k-max", &c.k_max),
        ("m", &c.m),
        ("s", &c.s),
        ("from-z", &c.from_z),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.apply(key, v)?;
        }
    }
    if c.strict {
        cfg.strict = true;
    }
    Ok(cfg)
}

fn run_experiment(command: Command, c: &Common) -> Result<(), HarnessError> {
    let cfg = resolve(command, c)?;
    let out = commands::run(command, &cfg, c.workers)?;
    let files = out.write(&cfg.output_dir, cfg.format)?;
    for f in files {
        println!("{}", cfg.output_dir.join(f).display());
    }
    Ok(())
}

fn run_verify() -> ExitCode {
    let checks = verify::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE as u8)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Cmd::Predict(c) => (Command::Predict, c),
        Cmd::Trajectory(c) => (Command::Trajectory, c),
        Cmd::Threshold(c) => (Command::Threshold, c),
        Cmd::Avalanche(c) => (Command::Avalanche, c),
        Cmd::Verify => return run_verify(),
    };
    match run_experiment(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
