//! Statistics toolbox: estimate reports, Kolmogorov-Smirnov and chi-square
//! statistics with p-values, mean confidence intervals, Wilson intervals.

use crate::special::{kolmogorov_q, reg_inc_gamma_q};
use crate::{Error, Result};

/// One reported estimate, optionally paired with an analytic oracle.
#[derive(Clone, Debug)]
pub struct StatReport {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
    pub method: String,
    pub oracle: Option<f64>,
    pub oracle_err: Option<f64>,
}

impl StatReport {
    pub fn new(name: &str, estimate: f64, stderr: f64, n: u64, method: &str) -> StatReport {
        assert!(stderr >= 0.0 && n >= 1);
        StatReport {
            name: name.to_string(),
            estimate,
            stderr,
            n,
            method: method.to_string(),
            oracle: None,
            oracle_err: None,
        }
    }

    pub fn with_oracle(mut self, oracle: f64, oracle_err: f64) -> StatReport {
        self.oracle = Some(oracle);
        self.oracle_err = Some(oracle_err);
        self
    }

    pub fn csv_header() -> &'static str {
        "name,estimate,stderr,n,oracle,oracle_err"
    }

    pub fn csv_row(&self) -> String {
        let fmt = |o: Option<f64>| o.map_or(String::new(), |v| format!("{v:.12e}"));
        format!(
            "{},{:.12e},{:.12e},{},{},{}",
            self.name,
            self.estimate,
            self.stderr,
            self.n,
            fmt(self.oracle),
            fmt(self.oracle_err)
        )
    }

    /// Whether the estimate agrees with the oracle within `z` standard errors
    /// plus the oracle's own certified error.
    pub fn agrees_with_oracle(&self, z: f64) -> bool {
        match self.oracle {
            None => true,
            Some(o) => {
                (self.estimate - o).abs() <= z * self.stderr + self.oracle_err.unwrap_or(0.0)
            }
        }
    }
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF. Sorts in place.
pub fn ks_stat<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("ks_stat on empty sample".into()));
    }
    samples.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Two-sided asymptotic KS p-value (Stephens' small-sample correction).
pub fn ks_pvalue(d: f64, n: u64) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_q(d * (rn + 0.12 + 0.11 / rn))
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi2_stat(counts: &[u64], expected: &[f64]) -> Result<f64> {
    if counts.is_empty() || counts.len() != expected.len() {
        return Err(Error::Precondition(
            "chi2_stat needs matching nonempty inputs".into(),
        ));
    }
    let mut stat = 0.0;
    for (&c, &e) in counts.iter().zip(expected) {
        if e <= 0.0 {
            return Err(Error::Precondition("chi2 expected count <= 0".into()));
        }
        let diff = c as f64 - e;
        stat += diff * diff / e;
    }
    Ok(stat)
}

/// Upper-tail chi-square p-value with `dof` degrees of freedom.
pub fn chi2_pvalue(stat: f64, dof: u64) -> f64 {
    reg_inc_gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Sample mean with standard error.
pub fn mean_ci(samples: &[f64], name: &str) -> Result<StatReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("mean_ci on empty sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() < 2 {
        0.0
    } else {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    };
    Ok(StatReport::new(
        name,
        mean,
        (var / n).sqrt(),
        samples.len() as u64,
        "mean",
    ))
}

/// Streaming mean/variance accumulator with a deterministic merge, so
/// parallel reductions are independent of worker count when merged in a
/// fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAcc {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &MeanAcc) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n1 = self.n as f64;
        let n2 = o.n as f64;
        let d = o.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += o.m2 + d * d * n1 * n2 / n;
        self.n += o.n;
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt()
    }

    pub fn report(&self, name: &str) -> StatReport {
        StatReport::new(name, self.mean, self.stderr(), self.n.max(1), "mean")
    }
}

/// Wilson score interval for a binomial proportion.
#[derive(Clone, Copy, Debug)]
pub struct WilsonCi {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson(successes: u64, n: u64, z: f64) -> Result<WilsonCi> {
    if n == 0 {
        return Err(Error::Precondition("wilson with n = 0".into()));
    }
    assert!(successes <= n);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(WilsonCi {
        estimate: p,
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    })
}

impl WilsonCi {
    pub fn report(&self, name: &str, n: u64) -> StatReport {
        StatReport::new(
            name,
            self.estimate,
            (self.hi - self.lo) / 2.0,
            n,
            "wilson",
        )
    }
}
