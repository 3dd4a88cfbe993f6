//! `pdc`: reproducible experiment drivers.
//!
//! One subcommand per experiment; every run needs an explicit `--seed` and
//! writes a CSV plus a JSON sidecar echoing the configuration and version.
//! Flags override values from `--config <file.json>`, which overrides
//! defaults. The process exits non-zero iff a hard per-sample assertion
//! failed; statistical outcomes are reported, not gated.

use clap::{Args, Parser, Subcommand};
use pdc_core::experiments::{self, Experiment, PartialConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pdc", version, about = "Coupling and factorization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file; flags take precedence over its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated x values (ascending).
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<u64>>,
    /// Replicates per grid point.
    #[arg(long)]
    samples: Option<u64>,
    /// Override the per-x sample count for the empirical M-law
    /// (default max(10^6, 100x)).
    #[arg(long)]
    mu_samples: Option<u64>,
    /// Master seed (required here or in the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Outputs do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path; the JSON sidecar lands next to it.
    /// Defaults to $PDC_OUT_DIR/<experiment>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mean l1 distance between prime logs and scaled sticks, per x.
    CouplingL1(Common),
    /// Empirical law of M: cache file plus total-variation distance
    /// against uniform (plug-in and split-debiased).
    MuDist(Common),
    /// Monte Carlo frequency of J* = j against the quadrature oracle.
    JstarCheck {
        #[command(flatten)]
        common: Common,
        /// Comma-separated j values.
        #[arg(long, value_delimiter = ',')]
        j: Option<Vec<u64>>,
    },
    /// Frequency of J != J* from shared window realizations.
    JVsJstar(Common),
    /// Exact factorization law against the Dirichlet CDF on a u grid.
    DirichletLaw {
        #[command(flatten)]
        common: Common,
        /// Number of parts k.
        #[arg(long)]
        k: Option<usize>,
        /// Kernel family: uniform | recursive | multinomial.
        #[arg(long)]
        family: Option<String>,
        /// Slot probabilities for the multinomial family.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// u grid as start:end:step.
        #[arg(long)]
        grid: Option<String>,
    },
    /// KS of colored-partition marginals against their Beta laws.
    DtMarginals {
        #[command(flatten)]
        common: Common,
        /// Color probabilities.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
    },
    /// Exact sum of log rho(n) and the stick subset-sum Monte Carlo.
    RhoConstant {
        #[command(flatten)]
        common: Common,
        /// Replicates for the subset-sum Monte Carlo.
        #[arg(long)]
        psi_samples: Option<u64>,
    },
    /// Theta statistic moments against the quadrature oracle.
    ThetaMoments(Common),
}

fn to_partial(common: &Common) -> PartialConfig {
    PartialConfig {
        x: common.x.clone(),
        samples: common.samples,
        mu_samples: common.mu_samples,
        seed: common.seed,
        workers: common.workers,
        out: common.out.as_ref().map(|p| p.display().to_string()),
        ..Default::default()
    }
}

fn dispatch(cmd: &Cmd) -> (Experiment, Common, PartialConfig) {
    match cmd {
        Cmd::CouplingL1(c) => (Experiment::CouplingL1, c.clone(), to_partial(c)),
        Cmd::MuDist(c) => (Experiment::MuDist, c.clone(), to_partial(c)),
        Cmd::JstarCheck { common, j } => {
            let mut p = to_partial(common);
            p.j = j.clone();
            (Experiment::JstarCheck, common.clone(), p)
        }
        Cmd::JVsJstar(c) => (Experiment::JVsJstar, c.clone(), to_partial(c)),
        Cmd::DirichletLaw {
            common,
            k,
            family,
            alpha,
            grid,
        } => {
            let mut p = to_partial(common);
            p.k = *k;
            p.family = family.clone();
            p.alpha = alpha.clone();
            p.grid = grid.clone();
            (Experiment::DirichletLaw, common.clone(), p)
        }
        Cmd::DtMarginals { common, alpha } => {
            let mut p = to_partial(common);
            p.alpha = alpha.clone();
            (Experiment::DtMarginals, common.clone(), p)
        }
        Cmd::RhoConstant {
            common,
            psi_samples,
        } => {
            let mut p = to_partial(common);
            p.psi_samples = *psi_samples;
            (Experiment::RhoConstant, common.clone(), p)
        }
        Cmd::ThetaMoments(c) => (Experiment::ThetaMoments, c.clone(), to_partial(c)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, common, flags) = dispatch(&cli.cmd);
    let merged = match &common.config {
        Some(path) => match PartialConfig::from_json_file(path) {
            Ok(file_cfg) => flags.overlay(file_cfg),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => flags,
    };
    let cfg = match experiments::resolve(exp, merged) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match experiments::run(&cfg) {
        Ok(out) => {
            println!("wrote {}", out.csv_path.display());
            println!("wrote {}", out.sidecar_path.display());
            if out.hard_failures > 0 {
                eprintln!(
                    "FAILED: {} hard per-sample assertion(s) violated",
                    out.hard_failures
                );
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
