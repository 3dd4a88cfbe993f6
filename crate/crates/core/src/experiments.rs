//! Reproducible experiment drivers behind the `pdc` CLI: one function per
//! subcommand, deterministic seeding, CSV reports with a JSON sidecar.
//!
//! Hard per-sample assertions (the l1 inequality, the factorization
//! transition bounds, conservation checks) are counted and fail the run;
//! soft statistical outcomes are reported, never gated.

use crate::coupling::{
    self, estimate_mu, jstar_pmf_numeric, l1_bound_check, sample_coupled, sample_jstar,
    tv_distance, EmpiricalDist, TvTransport,
};
use crate::dirichlet::{beta_cdf, dirichlet_cdf, draw_colors, dt_partition, DirichletParams};
use crate::kfact::{rho_half, rho_psi, FactorSpec};
use crate::pd::{
    sample_gem, sample_r_window, sort_to_pd, theta_mgf_numeric, theta_stat, theta_window,
};
use crate::primes::{PrimeLadder, PrimeTable};
use crate::rng::StreamFamily;
use crate::stats::{ks_pvalue, ks_stat, MeanAcc};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// The version string recorded in every sidecar.
pub fn version() -> String {
    format!(
        "{} ({})",
        env!("CARGO_PKG_VERSION"),
        option_env!("PDC_GIT_DESCRIBE").unwrap_or("unversioned")
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    CouplingL1,
    MuDist,
    JstarCheck,
    JVsJstar,
    DirichletLaw,
    DtMarginals,
    RhoConstant,
    ThetaMoments,
}

impl Experiment {
    pub fn from_name(name: &str) -> Result<Experiment> {
        Ok(match name {
            "coupling-l1" => Experiment::CouplingL1,
            "mu-dist" => Experiment::MuDist,
            "jstar-check" => Experiment::JstarCheck,
            "j-vs-jstar" => Experiment::JVsJstar,
            "dirichlet-law" => Experiment::DirichletLaw,
            "dt-marginals" => Experiment::DtMarginals,
            "rho-constant" => Experiment::RhoConstant,
            "theta-moments" => Experiment::ThetaMoments,
            _ => return Err(Error::Config(format!("unknown experiment {name}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::CouplingL1 => "coupling-l1",
            Experiment::MuDist => "mu-dist",
            Experiment::JstarCheck => "jstar-check",
            Experiment::JVsJstar => "j-vs-jstar",
            Experiment::DirichletLaw => "dirichlet-law",
            Experiment::DtMarginals => "dt-marginals",
            Experiment::RhoConstant => "rho-constant",
            Experiment::ThetaMoments => "theta-moments",
        }
    }
}

/// Partially specified configuration; sources overlay as flags > config
/// file > defaults. Unknown fields in a config file are rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub x: Option<Vec<u64>>,
    pub samples: Option<u64>,
    pub mu_samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
    pub k: Option<usize>,
    pub family: Option<String>,
    pub alpha: Option<Vec<f64>>,
    pub grid: Option<String>,
    pub j: Option<Vec<u64>>,
    pub psi_samples: Option<u64>,
}

impl PartialConfig {
    pub fn from_json_file(path: &Path) -> Result<PartialConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("bad config file {}: {e}", path.display())))
    }

    /// `self` wins over `base` field by field.
    pub fn overlay(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            x: self.x.or(base.x),
            samples: self.samples.or(base.samples),
            mu_samples: self.mu_samples.or(base.mu_samples),
            seed: self.seed.or(base.seed),
            workers: self.workers.or(base.workers),
            out: self.out.or(base.out),
            k: self.k.or(base.k),
            family: self.family.or(base.family),
            alpha: self.alpha.or(base.alpha),
            grid: self.grid.or(base.grid),
            j: self.j.or(base.j),
            psi_samples: self.psi_samples.or(base.psi_samples),
        }
    }
}

/// Fully resolved configuration for one run.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub x_grid: Vec<u64>,
    pub samples: u64,
    /// Explicit override; otherwise max(10^6, 100 x) per x.
    pub mu_samples: Option<u64>,
    pub k: usize,
    pub family: String,
    pub alpha: Option<Vec<f64>>,
    pub u_grid: Vec<f64>,
    pub j_values: Vec<u64>,
    pub psi_samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

fn parse_grid(spec_str: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec_str.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid {spec_str} is not start:end:step")));
    }
    let p = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad grid number {s}")))
    };
    let (start, end, step) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
    if step <= 0.0 || end < start {
        return Err(Error::Config(format!("degenerate grid {spec_str}")));
    }
    let mut grid = Vec::new();
    let mut i = 0u32;
    loop {
        let v = start + step * i as f64;
        if v > end + 1e-12 {
            break;
        }
        grid.push(v);
        i += 1;
    }
    Ok(grid)
}

/// Resolve a partial configuration against per-experiment defaults. The
/// seed is mandatory: there is no wall-clock fallback.
pub fn resolve(exp: Experiment, merged: PartialConfig) -> Result<ExperimentConfig> {
    let seed = merged
        .seed
        .ok_or_else(|| Error::Config("a --seed is required (no wall-clock default)".into()))?;
    let default_x: Vec<u64> = match exp {
        Experiment::JstarCheck => vec![100, 1000],
        Experiment::DirichletLaw => vec![10_000],
        Experiment::DtMarginals => vec![],
        Experiment::RhoConstant => vec![1_000_000],
        _ => vec![100, 1000, 10_000],
    };
    let default_samples: u64 = match exp {
        Experiment::CouplingL1 => 100_000,
        Experiment::DtMarginals => 100_000,
        Experiment::JstarCheck | Experiment::JVsJstar => 1_000_000,
        Experiment::ThetaMoments => 1_000_000,
        Experiment::DirichletLaw => 1_000_000, // MC budget for k >= 3 reference
        _ => 1_000_000,
    };
    let x_grid = merged.x.unwrap_or(default_x);
    if x_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("x grid must be strictly ascending".into()));
    }
    if exp != Experiment::DtMarginals {
        if x_grid.is_empty() {
            return Err(Error::Config("x grid must be nonempty".into()));
        }
        if x_grid.iter().any(|&x| x < 2) {
            return Err(Error::Config("x must be at least 2".into()));
        }
    }
    let samples = merged.samples.unwrap_or(default_samples);
    if samples < 1 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let k = merged.k.unwrap_or(2);
    let family = merged.family.unwrap_or_else(|| "uniform".into());
    let u_grid = match merged.grid {
        Some(g) => parse_grid(&g)?,
        None => (1..10).map(|i| i as f64 / 10.0).collect(),
    };
    let out = merged.out.map(PathBuf::from).unwrap_or_else(|| {
        let dir = std::env::var("PDC_OUT_DIR").unwrap_or_else(|_| ".".into());
        PathBuf::from(dir).join(format!("{}.csv", exp.name()))
    });
    Ok(ExperimentConfig {
        experiment: exp,
        x_grid,
        samples,
        mu_samples: merged.mu_samples,
        k,
        family,
        alpha: merged.alpha,
        u_grid,
        j_values: merged.j.unwrap_or_else(|| vec![1, 2, 5, 10]),
        psi_samples: merged.psi_samples.unwrap_or(1_000_000),
        seed,
        workers: merged.workers.unwrap_or(0),
        out,
    })
}

impl ExperimentConfig {
    pub fn mu_samples_for(&self, x: u64) -> u64 {
        self.mu_samples.unwrap_or_else(|| 1_000_000u64.max(100 * x))
    }

    pub fn factor_spec(&self) -> Result<FactorSpec> {
        match self.family.as_str() {
            "uniform" => FactorSpec::uniform(self.k),
            "recursive" => FactorSpec::recursive(self.k),
            "multinomial" => {
                let alpha = self.alpha.as_ref().ok_or_else(|| {
                    Error::Config("multinomial family needs --alpha".into())
                })?;
                FactorSpec::multinomial(alpha)
            }
            other => Err(Error::Config(format!(
                "unknown family {other} (expected uniform|recursive|multinomial)"
            ))),
        }
    }

    fn sidecar_json(&self, extra: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment.name(),
            "version": version(),
            "config": {
                "x": self.x_grid,
                "samples": self.samples,
                "mu_samples": self.mu_samples,
                "k": self.k,
                "family": self.family,
                "alpha": self.alpha,
                "u_grid": self.u_grid,
                "j": self.j_values,
                "psi_samples": self.psi_samples,
                "seed": self.seed,
                "workers": self.workers,
            },
            "results": extra,
        })
    }
}

/// Outcome of one run: outputs written, plus the count of hard per-sample
/// assertion failures (nonzero fails the process).
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub hard_failures: u64,
}

fn write_outputs(
    cfg: &ExperimentConfig,
    csv: &str,
    extra: serde_json::Value,
    hard_failures: u64,
) -> Result<RunOutcome> {
    if let Some(parent) = cfg.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&cfg.out, csv)?;
    let sidecar_path = cfg.out.with_extension("json");
    let mut doc = cfg.sidecar_json(extra);
    doc["hard_failures"] = serde_json::json!(hard_failures);
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    Ok(RunOutcome {
        csv_path: cfg.out.clone(),
        sidecar_path,
        hard_failures,
    })
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Error {
        Error::Format(format!("json: {e}"))
    }
}

/// Run parallel replicate chunks with fixed boundaries and merge results in
/// chunk order, so float reductions are worker-count independent.
pub fn par_chunks<A, F>(n: u64, chunk: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(std::ops::Range<u64>) -> A + Sync,
{
    let n_chunks = n.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * chunk..((c + 1) * chunk).min(n)))
        .collect()
}

const CHUNK: u64 = 4096;

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let body = || match cfg.experiment {
        Experiment::CouplingL1 => run_coupling_l1(cfg),
        Experiment::MuDist => run_mu_dist(cfg),
        Experiment::JstarCheck => run_jstar_check(cfg),
        Experiment::JVsJstar => run_j_vs_jstar(cfg),
        Experiment::DirichletLaw => run_dirichlet_law(cfg),
        Experiment::DtMarginals => run_dt_marginals(cfg),
        Experiment::RhoConstant => run_rho_constant(cfg),
        Experiment::ThetaMoments => run_theta_moments(cfg),
    };
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    }
}

/// Per-x summary of the coupled l1 statistic.
#[derive(Clone, Copy, Debug)]
pub struct L1Summary {
    pub x: u64,
    pub mean_l1: f64,
    pub stderr: f64,
    pub frac_mismatch: f64,
    pub l1_bound_failures: u64,
    /// E[exp(l1/5) | M = N] with its standard error.
    pub exp_l1: f64,
    pub exp_l1_stderr: f64,
    pub mean_log_ratio: f64,
    pub n: u64,
}

/// Shared worker for the coupled-sample experiments.
pub fn l1_summary(
    x: u64,
    n_samples: u64,
    mu_samples: u64,
    seed: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> Result<L1Summary> {
    let mu = estimate_mu(x, mu_samples, seed, table, ladder)?;
    let transport = TvTransport::to_uniform(&mu)?;
    let family = StreamFamily::new(seed, &[("coupling-l1", x)]);
    struct Acc {
        l1: MeanAcc,
        exp_l1: MeanAcc,
        log_ratio: MeanAcc,
        mismatch: u64,
        l1_bound_fail: u64,
    }
    let parts = par_chunks(n_samples, CHUNK, |range| {
        let mut acc = Acc {
            l1: MeanAcc::default(),
            exp_l1: MeanAcc::default(),
            log_ratio: MeanAcc::default(),
            mismatch: 0,
            l1_bound_fail: 0,
        };
        for i in range {
            let mut stream = family.stream(i);
            let cs = sample_coupled(&mut stream, x, &transport, table, ladder)
                .expect("validated capacity");
            acc.l1.push(cs.l1);
            acc.log_ratio.push((x as f64 / cs.n as f64).ln());
            if cs.m_equals_n {
                acc.exp_l1.push((0.2 * cs.l1).exp());
                if !l1_bound_check(&cs).expect("checked M = N") {
                    acc.l1_bound_fail += 1;
                }
            } else {
                acc.mismatch += 1;
            }
        }
        acc
    });
    let mut l1 = MeanAcc::default();
    let mut exp_l1 = MeanAcc::default();
    let mut log_ratio = MeanAcc::default();
    let mut mismatch = 0u64;
    let mut l1_bound_fail = 0u64;
    for p in &parts {
        l1.merge(&p.l1);
        exp_l1.merge(&p.exp_l1);
        log_ratio.merge(&p.log_ratio);
        mismatch += p.mismatch;
        l1_bound_fail += p.l1_bound_fail;
    }
    Ok(L1Summary {
        x,
        mean_l1: l1.mean,
        stderr: l1.stderr(),
        frac_mismatch: mismatch as f64 / n_samples as f64,
        l1_bound_failures: l1_bound_fail,
        exp_l1: exp_l1.mean,
        exp_l1_stderr: exp_l1.stderr(),
        mean_log_ratio: log_ratio.mean,
        n: n_samples,
    })
}

fn run_coupling_l1(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut csv = String::from("x,mean_l1,stderr,frac_mismatch\n");
    let mut hard = 0u64;
    let mut details = Vec::new();
    for &x in &cfg.x_grid {
        let table = PrimeTable::build(x)?;
        let ladder = PrimeLadder::build((x as f64).ln() + 1.0)?;
        let s = l1_summary(x, cfg.samples, cfg.mu_samples_for(x), cfg.seed, &table, &ladder)?;
        hard += s.l1_bound_failures;
        writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.12e}",
            x, s.mean_l1, s.stderr, s.frac_mismatch
        )
        .unwrap();
        details.push(serde_json::json!({
            "x": x,
            "mean_l1": s.mean_l1,
            "stderr": s.stderr,
            "frac_mismatch": s.frac_mismatch,
            "l1_bound_failures": s.l1_bound_failures,
            "exp_l1_given_match": s.exp_l1,
            "mean_log_x_over_n": s.mean_log_ratio,
        }));
    }
    write_outputs(cfg, &csv, serde_json::json!({ "per_x": details }), hard)
}

/// Plug-in and split-debiased total variation distance of an empirical law
/// against uniform, with jackknife-over-chunks standard errors.
#[derive(Clone, Copy, Debug)]
pub struct MuDistSummary {
    pub x: u64,
    pub dtv_plugin: f64,
    pub dtv_plugin_se: f64,
    pub dtv_split: f64,
    pub dtv_split_se: f64,
    pub overflow_mass: f64,
    pub n: u64,
}

/// The plug-in estimator `dtv(mu_hat, uniform)` carries an upward noise bias
/// of order sqrt(x/n); the cross-split estimator uses one half to pick the
/// sign pattern and the other to evaluate it, cancelling that first-order
/// rectification.
pub fn mu_dist_summary(
    x: u64,
    n_samples: u64,
    seed: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> Result<(MuDistSummary, EmpiricalDist)> {
    let family = StreamFamily::new(seed, &[("mu-hat", x)]);
    // Per-chunk histograms, merged in fixed halves as well as in total.
    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunk_hists: Vec<EmpiricalDist> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n_samples);
            let mut acc = EmpiricalDist::new_empty(x);
            for i in lo..hi {
                let mut stream = family.stream(i);
                let ms = coupling::sample_m(&mut stream, x, table, ladder)
                    .expect("validated capacity");
                acc.record(ms.m);
            }
            acc
        })
        .collect();
    let mut total = EmpiricalDist::new_empty(x);
    let mut half_a = EmpiricalDist::new_empty(x);
    let mut half_b = EmpiricalDist::new_empty(x);
    for (c, h) in chunk_hists.iter().enumerate() {
        total.merge(h);
        if c % 2 == 0 {
            half_a.merge(h);
        } else {
            half_b.merge(h);
        }
    }
    let nu = EmpiricalDist::uniform(x);
    let split_est = |a: &EmpiricalDist, b: &EmpiricalDist| -> f64 {
        let mut acc = 0.0;
        for v in 1..=x {
            let da = a.mass(v) - 1.0 / x as f64;
            let db = b.mass(v) - 1.0 / x as f64;
            if db > 0.0 {
                acc += da;
            }
        }
        // Overflow atom: uniform has no mass there, so the sign is known.
        acc + a.overflow_mass()
    };
    let dtv_plugin = tv_distance(&total, &nu)?;
    let dtv_split = 0.5 * (split_est(&half_a, &half_b) + split_est(&half_b, &half_a));
    // Jackknife over chunks for both estimators.
    let theta_all = dtv_plugin;
    let mut jack_plugin = Vec::with_capacity(chunk_hists.len());
    let mut jack_split = Vec::with_capacity(chunk_hists.len());
    if chunk_hists.len() >= 8 {
        for (c, h) in chunk_hists.iter().enumerate() {
            let mut rest = total.clone();
            rest.unmerge(h);
            jack_plugin.push(tv_distance(&rest, &nu)?);
            let (mut ja, mut jb) = (half_a.clone(), half_b.clone());
            if c % 2 == 0 {
                ja.unmerge(h);
            } else {
                jb.unmerge(h);
            }
            jack_split.push(0.5 * (split_est(&ja, &jb) + split_est(&jb, &ja)));
        }
    }
    let jack_se = |vals: &[f64]| -> f64 {
        if vals.is_empty() {
            return 0.0;
        }
        let c = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / c;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        ((c - 1.0) / c * var).sqrt()
    };
    let _ = theta_all;
    Ok((
        MuDistSummary {
            x,
            dtv_plugin,
            dtv_plugin_se: jack_se(&jack_plugin),
            dtv_split,
            dtv_split_se: jack_se(&jack_split),
            overflow_mass: total.overflow_mass(),
            n: n_samples,
        },
        total,
    ))
}

fn run_mu_dist(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut csv = String::from("x,stat,estimate,stderr,n\n");
    let mut details = Vec::new();
    for &x in &cfg.x_grid {
        let table = PrimeTable::build(x)?;
        let ladder = PrimeLadder::build((x as f64).ln() + 1.0)?;
        let n = cfg.mu_samples_for(x);
        let (s, dist) = mu_dist_summary(x, n, cfg.seed, &table, &ladder)?;
        // Emit the mu cache next to the main output.
        let cache_path = cfg
            .out
            .with_file_name(format!("mu_x{}_seed{}.csv", x, cfg.seed));
        let mut buf = Vec::new();
        dist.write_cache(&mut buf, cfg.seed)?;
        std::fs::write(&cache_path, buf)?;
        for (name, est, se) in [
            ("dtv_uniform_plugin", s.dtv_plugin, s.dtv_plugin_se),
            ("dtv_uniform_split", s.dtv_split, s.dtv_split_se),
            ("overflow_mass", s.overflow_mass, 0.0),
        ] {
            writeln!(csv, "{},{},{:.12e},{:.12e},{}", x, name, est, se, n).unwrap();
        }
        details.push(serde_json::json!({
            "x": x,
            "dtv_plugin": s.dtv_plugin,
            "dtv_plugin_se": s.dtv_plugin_se,
            "dtv_split": s.dtv_split,
            "dtv_split_se": s.dtv_split_se,
            "overflow_mass": s.overflow_mass,
            "cache": cache_path.display().to_string(),
        }));
    }
    write_outputs(cfg, &csv, serde_json::json!({ "per_x": details }), 0)
}

/// One Monte Carlo frequency vs quadrature row.
#[derive(Clone, Copy, Debug)]
pub struct JstarRow {
    pub x: u64,
    pub j: u64,
    pub mc_freq: f64,
    pub mc_stderr: f64,
    pub pmf: f64,
    pub pmf_err: f64,
}

pub fn jstar_check_rows(
    x: u64,
    j_values: &[u64],
    n_samples: u64,
    seed: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> Result<Vec<JstarRow>> {
    let family = StreamFamily::new(seed, &[("jstar-check", x)]);
    let counts = par_chunks(n_samples, CHUNK, |range| {
        let mut counts = vec![0u64; j_values.len()];
        for i in range {
            let mut stream = family.stream(i);
            let (jstar, _) = sample_jstar(&mut stream, ladder, x).expect("widening converges");
            if let Some(slot) = j_values.iter().position(|&j| j == jstar) {
                counts[slot] += 1;
            }
        }
        counts
    })
    .into_iter()
    .fold(vec![0u64; j_values.len()], |mut acc, c| {
        for (a, b) in acc.iter_mut().zip(c) {
            *a += b;
        }
        acc
    });
    let mut rows = Vec::new();
    for (slot, &j) in j_values.iter().enumerate() {
        let freq = counts[slot] as f64 / n_samples as f64;
        let stderr = (freq * (1.0 - freq) / n_samples as f64).sqrt();
        let pmf = jstar_pmf_numeric(j, x, table)?;
        rows.push(JstarRow {
            x,
            j,
            mc_freq: freq,
            mc_stderr: stderr,
            pmf: pmf.value,
            pmf_err: pmf.err,
        });
    }
    Ok(rows)
}

fn run_jstar_check(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut csv = String::from("x,j,mc_freq,mc_stderr,pmf,pmf_err\n");
    let mut details = Vec::new();
    for &x in &cfg.x_grid {
        let table = PrimeTable::build(x.max(1000))?;
        let ladder = PrimeLadder::build((x as f64).ln() + 1.0)?;
        for row in jstar_check_rows(x, &cfg.j_values, cfg.samples, cfg.seed, &table, &ladder)? {
            writeln!(
                csv,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                row.x, row.j, row.mc_freq, row.mc_stderr, row.pmf, row.pmf_err
            )
            .unwrap();
            details.push(serde_json::json!({
                "x": row.x, "j": row.j,
                "mc_freq": row.mc_freq, "mc_stderr": row.mc_stderr,
                "pmf": row.pmf, "pmf_err": row.pmf_err,
                "sigma_gap": (row.mc_freq - row.pmf).abs()
                    / row.mc_stderr.max(1e-300),
            }));
        }
    }
    write_outputs(cfg, &csv, serde_json::json!({ "rows": details }), 0)
}

fn run_j_vs_jstar(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut csv = String::from("x,rate,wilson_lo,wilson_hi,n,widenings\n");
    let mut details = Vec::new();
    for &x in &cfg.x_grid {
        let ladder = PrimeLadder::build((x as f64).ln() + 1.0)?;
        let r = coupling::j_vs_jstar_rate(x, cfg.samples, cfg.seed, &ladder)?;
        writeln!(
            csv,
            "{},{:.12e},{:.12e},{:.12e},{},{}",
            x, r.rate, r.ci.lo, r.ci.hi, r.n, r.total_widenings
        )
        .unwrap();
        details.push(serde_json::json!({
            "x": x, "rate": r.rate, "rate_times_log_x": r.rate * (x as f64).ln(),
            "wilson_lo": r.ci.lo, "wilson_hi": r.ci.hi,
            "widenings": r.total_widenings,
        }));
    }
    write_outputs(cfg, &csv, serde_json::json!({ "per_x": details }), 0)
}

fn run_dirichlet_law(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let spec = cfg.factor_spec()?;
    let params = DirichletParams::new(&spec.alpha)?;
    let mut csv = String::from("x,u,exact,asymptotic,error,error_ratio,exact_arithmetic\n");
    let mut details = Vec::new();
    for &x in &cfg.x_grid {
        let table = PrimeTable::build(x)?;
        let log_x = (x as f64).ln();
        for &u in &cfg.u_grid {
            let uvec = vec![u; spec.k - 1];
            let law = crate::kfact::exact_joint_law(&spec, x, &uvec, &table)?;
            let mut stream = StreamFamily::new(cfg.seed, &[("dirichlet-law", x)]).stream(0);
            let refv = dirichlet_cdf(&mut stream, &params, &uvec, cfg.samples)?;
            let error = law.value - refv.estimate;
            // Band shape of the error term, product across constrained axes.
            let mut band = 1.0;
            for (i, &ui) in uvec.iter().enumerate() {
                let a = spec.alpha[i];
                band *= (1.0 + ui * log_x).powf(1.0 - a) * (1.0 + (1.0 - ui) * log_x).powf(a);
            }
            let ratio = error.abs() * band;
            writeln!(
                csv,
                "{},{:.4},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                x, u, law.value, refv.estimate, error, ratio, law.exact
            )
            .unwrap();
            details.push(serde_json::json!({
                "x": x, "u": u, "exact": law.value, "reference": refv.estimate,
                "reference_stderr": refv.stderr, "error": error, "error_ratio": ratio,
                "exact_arithmetic": law.exact, "work": law.work,
            }));
        }
    }
    write_outputs(cfg, &csv, serde_json::json!({ "rows": details }), 0)
}

fn run_dt_marginals(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let alpha = cfg
        .alpha
        .clone()
        .unwrap_or_else(|| vec![0.5, 0.5]);
    DirichletParams::new(&alpha)?;
    let family = StreamFamily::new(cfg.seed, &[("dt-marginals", 0)]);
    let k = alpha.len();
    // One pass of draws, testing every component marginal.
    let mut per_component: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.samples as usize); k];
    let chunks = par_chunks(cfg.samples, CHUNK, |range| {
        let mut local: Vec<Vec<f64>> = vec![Vec::new(); k];
        for i in range {
            let mut stream = family.stream(i);
            let gem = sample_gem(&mut stream, 1.0, crate::dirichlet::DT_TAIL_TOL);
            let (v, rem) = sort_to_pd(&gem);
            let colors = draw_colors(&mut stream, v.len(), &alpha);
            let z = dt_partition(&v, rem, &colors, k).expect("lengths match");
            for (c, zi) in z.into_iter().enumerate() {
                local[c].push(zi);
            }
        }
        local
    });
    for chunk in chunks {
        for (c, vals) in chunk.into_iter().enumerate() {
            per_component[c].extend(vals);
        }
    }
    let mut csv = String::from("component,alpha_i,ks_stat,p_value,n\n");
    let mut details = Vec::new();
    for (c, vals) in per_component.iter_mut().enumerate() {
        let a = alpha[c];
        let d = ks_stat(vals, |x| beta_cdf(a, 1.0 - a, x.clamp(0.0, 1.0)).unwrap())?;
        let p = ks_pvalue(d, cfg.samples);
        writeln!(csv, "{},{:.6},{:.12e},{:.12e},{}", c + 1, a, d, p, cfg.samples).unwrap();
        details.push(serde_json::json!({
            "component": c + 1, "alpha": a, "ks": d, "p_value": p,
        }));
    }
    write_outputs(cfg, &csv, serde_json::json!({ "rows": details }), 0)
}

/// Exact running sums of `log rho(n)` with snapshots at the grid points.
pub fn rho_exact_snapshots(x_grid: &[u64], table: &PrimeTable) -> Result<Vec<(u64, f64, f64)>> {
    let x_max = *x_grid.last().unwrap();
    let mut snapshots = Vec::new();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut next = 0usize;
    for n in 1..=x_max {
        let prof = table.arith_profile(n)?;
        let y = (rho_half(&prof) as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        while next < x_grid.len() && x_grid[next] == n {
            let xf = n as f64;
            snapshots.push((n, sum, sum / (xf * xf.ln())));
            next += 1;
        }
    }
    Ok(snapshots)
}

/// Monte Carlo mean of the minimal stick subset-sum in `[1/2, 1]`.
pub fn rho_psi_mc(n_samples: u64, seed: u64) -> (MeanAcc, f64) {
    let family = StreamFamily::new(seed, &[("rho-psi", 0)]);
    let parts = par_chunks(n_samples, CHUNK, |range| {
        let mut acc = MeanAcc::default();
        let mut width = 0.0f64;
        for i in range {
            let mut stream = family.stream(i);
            let gem = sample_gem(&mut stream, 1.0, 1e-7);
            let (v, rem) = sort_to_pd(&gem);
            let psi = rho_psi(&v, rem);
            acc.push(psi.mid());
            width = width.max(psi.width());
        }
        (acc, width)
    });
    let mut acc = MeanAcc::default();
    let mut width = 0.0f64;
    for (a, w) in parts {
        acc.merge(&a);
        width = width.max(w);
    }
    (acc, width)
}

fn run_rho_constant(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let x_max = *cfg.x_grid.last().unwrap();
    let table = PrimeTable::build(x_max)?;
    let mut csv = String::from("x,sum_log_rho,c_estimate\n");
    let snaps = rho_exact_snapshots(&cfg.x_grid, &table)?;
    for &(x, sum, c) in &snaps {
        writeln!(csv, "{},{:.12e},{:.12e}", x, sum, c).unwrap();
    }
    let (psi, psi_width) = rho_psi_mc(cfg.psi_samples, cfg.seed);
    let psi_csv_path = cfg.out.with_file_name(format!(
        "{}_psi.csv",
        cfg.out.file_stem().unwrap_or_default().to_string_lossy()
    ));
    let mut psi_csv = String::from("samples,psi_mean,psi_stderr,max_interval_width\n");
    writeln!(
        psi_csv,
        "{},{:.12e},{:.12e},{:.12e}",
        psi.n,
        psi.mean,
        psi.stderr(),
        psi_width
    )
    .unwrap();
    std::fs::write(&psi_csv_path, psi_csv)?;
    let extra = serde_json::json!({
        "exact": snaps.iter().map(|&(x, sum, c)| serde_json::json!({
            "x": x, "sum_log_rho": sum, "c_estimate": c,
        })).collect::<Vec<_>>(),
        "psi_mc": {
            "mean": psi.mean, "stderr": psi.stderr(), "n": psi.n,
            "max_interval_width": psi_width,
            "csv": psi_csv_path.display().to_string(),
        },
    });
    write_outputs(cfg, &csv, extra, 0)
}

fn run_theta_moments(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let ladder = PrimeLadder::build(16.0)?;
    let mut csv = String::from("scope,parameter,estimate,stderr,oracle,oracle_err\n");
    let mut details = Vec::new();
    // Total-deviation MGF over full windows vs quadrature, exact on the
    // coverage-truncated functional.
    for (ai, &alpha) in [0.5f64, 1.0].iter().enumerate() {
        let oracle = theta_mgf_numeric(&ladder, alpha)?;
        let family = StreamFamily::new(cfg.seed, &[("theta-infty", ai as u64)]);
        let parts = par_chunks(cfg.samples, CHUNK, |range| {
            let mut acc = MeanAcc::default();
            for i in range {
                let mut stream = family.stream(i);
                let win = sample_r_window(&mut stream, 1e-4, 2000.0);
                let (theta, _) = theta_window(&ladder, &win).expect("within coverage");
                acc.push((alpha * theta).exp());
            }
            acc
        });
        let mut acc = MeanAcc::default();
        for p in &parts {
            acc.merge(p);
        }
        writeln!(
            csv,
            "infty,{:.2},{:.12e},{:.12e},{:.12e},{:.12e}",
            alpha,
            acc.mean,
            acc.stderr(),
            oracle.value,
            oracle.quad_err + oracle.tail_bound
        )
        .unwrap();
        details.push(serde_json::json!({
            "scope": "infty", "alpha": alpha,
            "mc": acc.mean, "mc_stderr": acc.stderr(),
            "oracle": oracle.value,
            "oracle_err": oracle.quad_err + oracle.tail_bound,
        }));
    }
    // E[exp(theta_x)] over the x grid (boundedness report).
    for &x in &cfg.x_grid {
        let log_x = (x as f64).ln();
        let family = StreamFamily::new(cfg.seed, &[("theta-x", x)]);
        let parts = par_chunks(cfg.samples, CHUNK, |range| {
            let mut acc = MeanAcc::default();
            for i in range {
                let mut stream = family.stream(i);
                let gem = sample_gem(&mut stream, log_x, crate::pd::DEFAULT_TAIL_TOL);
                let theta = theta_stat(&ladder, &gem, log_x).expect("coverage");
                acc.push(theta.value.exp());
            }
            acc
        });
        let mut acc = MeanAcc::default();
        for p in &parts {
            acc.merge(p);
        }
        writeln!(
            csv,
            "x,{},{:.12e},{:.12e},,",
            x,
            acc.mean,
            acc.stderr()
        )
        .unwrap();
        details.push(serde_json::json!({
            "scope": "x", "x": x, "mc": acc.mean, "mc_stderr": acc.stderr(),
        }));
    }
    write_outputs(cfg, &csv, serde_json::json!({ "rows": details }), 0)
}
