//! `honrep`: solve, simulate, verify and bound repeated announcement games
//! described by a JSON spec.

mod commands;
mod output;
mod spec;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Overrides;
use crate::spec::{input_error, InputError};

#[derive(Parser)]
#[command(
    name = "honrep",
    version,
    about = "Repeated games with an honest player-1 type"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Static values, the low-payoff construction and assumption checks.
    Solve(Common),
    /// Monte Carlo estimate of player 1's payoff.
    Simulate(Common),
    /// Every applicable check; exits 1 if any fails.
    Verify(Common),
    /// Bound constants.
    Bound(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Game specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Directory for the report and, when simulating, trajectory CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// baseline, bounded_memory_z, quality_announcement or preannounce_feasibility.
    #[arg(long)]
    variant: Option<String>,
    /// Spaces per indentation level; 0 prints compact JSON.
    #[arg(long, default_value_t = 2)]
    json_indent: usize,
    /// Replace the computed bad-period bound.
    #[arg(long)]
    override_t_bar: Option<u64>,
    /// Episodes written to trajectories.csv (default from the spec).
    #[arg(long)]
    trajectories: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            seeds: self.seeds,
            delta: self.delta,
            variant: self.variant.clone(),
            t_bar: self.override_t_bar,
        }
    }
}

fn out_file(dir: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
    match dir {
        None => Ok(None),
        Some(d) => {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            Ok(Some(d.join(name)))
        }
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var("HONREP_WORKERS") {
        let n: usize = v.trim().parse().map_err(|_| {
            input_error(format!(
                "HONREP_WORKERS must be a positive integer, got `{v}`"
            ))
        })?;
        if n == 0 {
            return Err(input_error("HONREP_WORKERS must be a positive integer"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_workers()?;
    let (Cmd::Solve(c) | Cmd::Simulate(c) | Cmd::Verify(c) | Cmd::Bound(c)) = &cli.cmd;
    let mut model = spec::load(&c.spec)?;
    let ov = c.overrides();
    let out = c.out.as_deref();
    match &cli.cmd {
        Cmd::Solve(_) => {
            let v = commands::solve(&model)?;
            output::emit(&v, c.json_indent, out_file(out, "solve.json")?.as_deref())?;
        }
        Cmd::Bound(_) => {
            let v = output::to_value(&commands::bounds(&model, &ov)?)?;
            output::emit(&v, c.json_indent, out_file(out, "bound.json")?.as_deref())?;
        }
        Cmd::Simulate(_) => {
            if let Some(n) = c.trajectories {
                model.doc.sim.trajectories = n;
            }
            let cfg = commands::sim_config(&model, &ov)?;
            let keep = if out.is_some() {
                model.doc.sim.trajectories
            } else {
                0
            };
            let res = commands::simulate(&model, &cfg, keep)?;
            if let Some(path) = out_file(out, "trajectories.csv")? {
                let quality = cfg.variant == honrep::simulator::Variant::QualityAnnouncement;
                commands::write_trajectories(&model, &res, quality, &path)?;
            }
            let v = output::to_value(&res.result)?;
            output::emit(
                &v,
                c.json_indent,
                out_file(out, "sim_result.json")?.as_deref(),
            )?;
        }
        Cmd::Verify(_) => {
            let v = commands::verify(&model, &ov)?;
            output::emit(&v, c.json_indent, out_file(out, "verify.json")?.as_deref())?;
            if v["passed"] != serde_json::Value::Bool(true) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// 2 for bad input, 3 for inputs beyond what the solvers support.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<InputError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<honrep::Error>() {
            return match e {
                honrep::Error::SizeLimit(_)
                | honrep::Error::UnsupportedProfile(_)
                | honrep::Error::Internal(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
