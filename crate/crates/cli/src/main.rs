//! `rigidflow` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rigidflow::cli::{self, RunConfig};
use rigidflow::Error;

#[derive(Parser)]
#[command(name = "rigidflow", version, about = "Rigid body in an incompressible fluid: solvers and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write its artifacts.
    Run(Common),
    /// Run the configured ν or inertia study.
    Sweep(Common),
    /// Emit the virtual inertia tensor of the body.
    AddedMass(Common),
    /// Run the randomized identity and inequality suite.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set viscous.nu=0.01` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; takes precedence over the RIGIDFLOW_OUT variable.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// viscous, euler or fixed-body.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// A constant or `nu_pow:p`.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{k}={v}"));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("solver", self.solver.as_ref().map(|v| format!("{v:?}")));
        push("t_end", self.t_end.map(|v| format!("{v:?}")));
        push("dt", self.dt.map(|v| format!("{v:?}")));
        push("viscous.nu", self.nu.map(|v| format!("{v:?}")));
        push("viscous.alpha", self.alpha.as_ref().map(|v| if v.parse::<f64>().is_ok() { v.clone() } else { format!("{v:?}") }));
        push("viscous.basis_size", self.basis_size.map(|v| v.to_string()));
        push("sweep.workers", self.workers.map(|v| v.to_string()));
        push("verify.pairs", self.pairs.map(|v| v.to_string()));
        o.extend(self.set.iter().cloned());
        o
    }

    fn load(&self, needs_horizon: bool) -> rigidflow::Result<RunConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None if needs_horizon => String::new(),
            // Horizon keys are irrelevant to these commands.
            None => "t_end = 1.0\ndt = 1.0\n".to_string(),
        };
        let mut cfg = RunConfig::parse(&text, &self.overrides())?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
            std::env::remove_var(cli::OUTPUT_ENV);
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match &args.command {
        Command::Run(c) => c.load(true).and_then(|cfg| cli::run(&cfg)),
        Command::Sweep(c) => c.load(true).and_then(|cfg| cli::sweep(&cfg)),
        Command::AddedMass(c) => c.load(false).and_then(|cfg| cli::added_mass(&cfg)),
        Command::Verify(c) => c.load(false).and_then(|cfg| cli::verify(&cfg)),
    };
    let code = cli::exit_code(&result);
    match result {
        Ok(summary) => print!("{}", cli::to_json(&summary).unwrap_or_default()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(code as u8)
}
