//! Dirichlet and Beta distribution machinery: CDFs, samplers, and the
//! colored-partition construction that turns sorted stick weights into a
//! Dirichlet vector.

use crate::rng::UnitRand;
use crate::special::reg_inc_beta;
use crate::stats::StatReport;
use crate::{Error, Result};

/// Parameters of a Dirichlet distribution. Positivity is enforced; the
/// components need not sum to one (general shapes are allowed for the
/// sampler, the simplex case is the default use).
#[derive(Clone, Debug)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: &[f64]) -> Result<DirichletParams> {
        if alpha.len() < 2 {
            return Err(Error::Domain("Dirichlet needs dimension >= 2".into()));
        }
        if alpha.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(Error::Domain("Dirichlet parameters must be positive".into()));
        }
        Ok(DirichletParams {
            alpha: alpha.to_vec(),
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Regularized incomplete beta `I_u(a, b)`, the Beta(a, b) CDF.
pub fn beta_cdf(a: f64, b: f64, u: f64) -> Result<f64> {
    reg_inc_beta(a, b, u)
}

/// Independent Gamma(alpha_i, 1) draws normalized by their sum.
pub fn sample_dirichlet<R: UnitRand>(rng: &mut R, params: &DirichletParams) -> Vec<f64> {
    let gammas: Vec<f64> = params.alpha.iter().map(|&a| rng.next_gamma(a)).collect();
    let total: f64 = gammas.iter().sum();
    gammas.into_iter().map(|g| g / total).collect()
}

/// `P[Z_i <= u_i for all i < k]` for `Z ~ Dir(alpha)`.
///
/// With `k = 2` this is the closed-form Beta CDF (zero standard error); in
/// higher dimensions it is estimated by Monte Carlo over `budget` draws.
pub fn dirichlet_cdf<R: UnitRand>(
    rng: &mut R,
    params: &DirichletParams,
    u: &[f64],
    budget: u64,
) -> Result<StatReport> {
    if u.len() != params.k() - 1 {
        return Err(Error::Precondition(format!(
            "u has {} entries, expected k-1 = {}",
            u.len(),
            params.k() - 1
        )));
    }
    if u.iter().any(|&ui| !(0.0..=1.0).contains(&ui)) {
        return Err(Error::Domain("u components must lie in [0, 1]".into()));
    }
    if params.k() == 2 {
        // Z_1 ~ Beta(alpha_1, alpha_2).
        let value = beta_cdf(params.alpha[0], params.alpha[1], u[0])?;
        return Ok(StatReport::new("dirichlet_cdf", value, 0.0, 1, "beta-closed-form"));
    }
    assert!(budget >= 1);
    let mut hits = 0u64;
    for _ in 0..budget {
        let z = sample_dirichlet(rng, params);
        if z.iter().take(params.k() - 1).zip(u).all(|(&zi, &ui)| zi <= ui) {
            hits += 1;
        }
    }
    let p = hits as f64 / budget as f64;
    let stderr = (p * (1.0 - p) / budget as f64).sqrt();
    Ok(StatReport::new("dirichlet_cdf", p, stderr, budget, "monte-carlo"))
}

/// GEM tail tolerance for colored-partition experiments. The pooled
/// remainder puts an atom of mass about `I_tol(min alpha, ...)` at exact
/// zero in each color margin; at `1e-16` that atom (~6e-4 for alpha = 0.2)
/// sits far below the KS resolution of a 1e5-draw test.
pub const DT_TAIL_TOL: f64 = 1e-16;

/// Per-color sums of stick weights. `colors` must have one entry per stick
/// plus a final entry for the pooled remainder mass; the result is a point
/// in the k-simplex up to the remainder certificate.
pub fn dt_partition(
    sticks: &[f64],
    remainder: f64,
    colors: &[usize],
    k: usize,
) -> Result<Vec<f64>> {
    if colors.len() != sticks.len() + 1 {
        return Err(Error::Precondition(format!(
            "colors has {} entries, expected sticks + remainder = {}",
            colors.len(),
            sticks.len() + 1
        )));
    }
    if colors.iter().any(|&c| c >= k) {
        return Err(Error::Precondition("color index out of range".into()));
    }
    let mut z = vec![0.0f64; k];
    for (&stick, &color) in sticks.iter().zip(colors) {
        z[color] += stick;
    }
    z[*colors.last().unwrap()] += remainder;
    Ok(z)
}

/// Draw i.i.d. colors for `count` sticks plus the remainder slot.
pub fn draw_colors<R: UnitRand>(rng: &mut R, count: usize, alpha: &[f64]) -> Vec<usize> {
    (0..=count).map(|_| rng.next_categorical(alpha)).collect()
}
