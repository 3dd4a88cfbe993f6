//! The coupling between a uniform random integer on `[1, x]` and the sorted
//! stick-breaking process.
//!
//! One sample proceeds in four steps: draw a GEM sequence; map each stick
//! through the prime-power step function to get `Q_i` and the exact integer
//! product `J = prod_{i>=2} Q_i`; draw the extra prime with mass proportional
//! to `log p` below `x/J`; and transport `M = J * p_extra` onto the uniform
//! law with the total-variation-optimal pairing, yielding `N`. The l1
//! statistic compares the prime sequence of `N` with the sorted sticks.
//!
//! The integer-friendly variant `J*` is built from a window of the planar
//! Poisson process and has a quadrature oracle for its probability mass.

use crate::pd::{
    self, default_w_min, extend_r_window, index_crossing, sample_gem, sample_r_window,
    theta_stat, GemSample, RWindow, ThetaStat, DEFAULT_TAIL_TOL, DEFAULT_W_MAX,
};
use crate::primes::{ArithProfile, PrimeLadder, PrimeTable};
use crate::quad;
use crate::rng::{StreamFamily, UnitRand};
use crate::special::{mangoldt_series, zeta};
use crate::stats::{wilson, WilsonCi};
use crate::{Error, Result};
use rayon::prelude::*;

/// An exact integer that may have exceeded the tracking cap (2x). Anything
/// `Over` is strictly larger than `x`, which is all downstream code needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capped {
    Exact(u64),
    Over,
}

impl Capped {
    pub fn exact(self) -> Option<u64> {
        match self {
            Capped::Exact(v) => Some(v),
            Capped::Over => None,
        }
    }

    pub fn exceeds(self, x: u64) -> bool {
        match self {
            Capped::Exact(v) => v > x,
            Capped::Over => true,
        }
    }
}

/// One realization of the construction through `M` and the theta statistic.
#[derive(Clone, Debug)]
pub struct MSample {
    pub x: u64,
    pub log_x: f64,
    pub gem: GemSample,
    /// Sorted sticks, non-increasing.
    pub v: Vec<f64>,
    /// Prime powers per stick in generation order (`q_seq[0]` belongs to the
    /// first stick and is excluded from `J`).
    pub q_seq: Vec<u64>,
    pub j: Capped,
    /// 1 or a prime; forced to 1 whenever `theta(x/J) = 0`.
    pub p_extra: u64,
    pub m: Capped,
    pub theta: ThetaStat,
}

/// Stream layout per sample: GEM sticks, then one uniform for the extra
/// prime (always consumed), then - in [`sample_coupled`] - two uniforms for
/// the transport.
pub fn sample_m<R: UnitRand>(
    rng: &mut R,
    x: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> Result<MSample> {
    if x < 2 {
        return Err(Error::Domain(format!("x = {x} < 2")));
    }
    if x > table.limit() {
        return Err(Error::Capacity(format!(
            "x = {x} exceeds theta table limit {}",
            table.limit()
        )));
    }
    let log_x = (x as f64).ln();
    if ladder.coverage() < log_x {
        return Err(Error::Capacity(format!(
            "ladder coverage {} below log x = {log_x}",
            ladder.coverage()
        )));
    }
    let gem = sample_gem(rng, log_x, DEFAULT_TAIL_TOL);
    let mut q_seq = Vec::with_capacity(gem.sticks.len());
    for &l in &gem.sticks {
        q_seq.push(ladder.q_at(l * log_x)?);
    }
    let cap = 2 * x;
    let mut j = Capped::Exact(1);
    for &q in q_seq.iter().skip(1) {
        if let Capped::Exact(cur) = j {
            let next = cur.saturating_mul(q);
            j = if next > cap {
                Capped::Over
            } else {
                Capped::Exact(next)
            };
        }
    }
    let theta = theta_stat(ladder, &gem, log_x)?;
    let (v, _) = pd::sort_to_pd(&gem);
    let u1 = rng.next_unit();
    let p_extra = match j {
        Capped::Over => 1,
        Capped::Exact(jv) => {
            let y = x as f64 / jv as f64;
            if y < 2.0 {
                1
            } else {
                table.extra_prime(u1, y)?
            }
        }
    };
    let m = match j {
        Capped::Over => Capped::Over,
        Capped::Exact(jv) => Capped::Exact(jv * p_extra),
    };
    Ok(MSample {
        x,
        log_x,
        gem,
        v,
        q_seq,
        j,
        p_extra,
        m,
        theta,
    })
}

/// Integer-supported empirical law on `[1, x]` with one pooled overflow atom
/// for values above `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalDist {
    x: u64,
    /// counts[i] is the count of value i+1.
    counts: Vec<u64>,
    overflow: u64,
    n_samples: u64,
}

impl EmpiricalDist {
    pub fn new_empty(x: u64) -> EmpiricalDist {
        EmpiricalDist {
            x,
            counts: vec![0; x as usize],
            overflow: 0,
            n_samples: 0,
        }
    }

    /// The exact uniform law on `[1, x]` represented as counts.
    pub fn uniform(x: u64) -> EmpiricalDist {
        EmpiricalDist {
            x,
            counts: vec![1; x as usize],
            overflow: 0,
            n_samples: x,
        }
    }

    pub fn record(&mut self, value: Capped) {
        self.n_samples += 1;
        match value {
            Capped::Exact(v) if (1..=self.x).contains(&v) => {
                self.counts[(v - 1) as usize] += 1
            }
            _ => self.overflow += 1,
        }
    }

    pub fn merge(&mut self, other: &EmpiricalDist) {
        assert_eq!(self.x, other.x);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.n_samples += other.n_samples;
    }

    /// Inverse of [`merge`](Self::merge); used by jackknife resampling.
    pub fn unmerge(&mut self, other: &EmpiricalDist) {
        assert_eq!(self.x, other.x);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a -= b;
        }
        self.overflow -= other.overflow;
        self.n_samples -= other.n_samples;
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn count(&self, value: u64) -> u64 {
        assert!((1..=self.x).contains(&value));
        self.counts[(value - 1) as usize]
    }

    pub fn overflow_count(&self) -> u64 {
        self.overflow
    }

    pub fn mass(&self, value: u64) -> f64 {
        self.count(value) as f64 / self.n_samples as f64
    }

    pub fn overflow_mass(&self) -> f64 {
        self.overflow as f64 / self.n_samples as f64
    }

    /// Write the cache file: header `x,n_samples,seed`, its values, then
    /// `value,count` rows (non-zero only) and a final `overflow,count` row.
    pub fn write_cache<W: std::io::Write>(&self, w: &mut W, seed: u64) -> Result<()> {
        writeln!(w, "x,n_samples,seed")?;
        writeln!(w, "{},{},{}", self.x, self.n_samples, seed)?;
        writeln!(w, "value,count")?;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                writeln!(w, "{},{}", i + 1, c)?;
            }
        }
        writeln!(w, "overflow,{}", self.overflow)?;
        Ok(())
    }

    pub fn read_cache<R: std::io::BufRead>(r: R) -> Result<(EmpiricalDist, u64)> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format("truncated mu cache".into()))?
                .map_err(Error::Io)
        };
        if next()? != "x,n_samples,seed" {
            return Err(Error::Format("bad mu cache header".into()));
        }
        let meta = next()?;
        let parts: Vec<&str> = meta.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Format("bad mu cache meta row".into()));
        }
        let parse = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Format(format!("bad integer {s} in mu cache")))
        };
        let (x, n_samples, seed) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if next()? != "value,count" {
            return Err(Error::Format("bad mu cache column header".into()));
        }
        let mut dist = EmpiricalDist::new_empty(x);
        let mut total = 0u64;
        for line in lines {
            let line = line.map_err(Error::Io)?;
            if line.is_empty() {
                continue;
            }
            let (name, count) = line
                .split_once(',')
                .ok_or_else(|| Error::Format("bad mu cache row".into()))?;
            let c = parse(count)?;
            total += c;
            if name == "overflow" {
                dist.overflow = c;
            } else {
                let v = parse(name)?;
                if !(1..=x).contains(&v) {
                    return Err(Error::Format(format!("mu cache value {v} out of range")));
                }
                dist.counts[(v - 1) as usize] = c;
            }
        }
        if total != n_samples {
            return Err(Error::Format(format!(
                "mu cache counts sum to {total}, expected {n_samples}"
            )));
        }
        dist.n_samples = n_samples;
        Ok((dist, seed))
    }
}

/// Frequency table of `M` over independent replicates. Deterministic for a
/// fixed seed regardless of worker count (streams are derived per replicate
/// and counting is exact).
pub fn estimate_mu(
    x: u64,
    n_samples: u64,
    master_seed: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> Result<EmpiricalDist> {
    if n_samples < 1 {
        return Err(Error::Precondition(
            "estimate_mu needs n_samples >= 1".into(),
        ));
    }
    let family = StreamFamily::new(master_seed, &[("mu-hat", x)]);
    const CHUNK: u64 = 8192;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let dist = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n_samples);
            let mut acc = EmpiricalDist::new_empty(x);
            for i in lo..hi {
                let mut stream = family.stream(i);
                let ms = sample_m(&mut stream, x, table, ladder)
                    .expect("sample_m within validated capacity");
                acc.record(ms.m);
            }
            acc
        })
        .reduce(
            || EmpiricalDist::new_empty(x),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    Ok(dist)
}

/// Total variation distance between two empirical laws on the same support,
/// overflow treated as one extra atom: `sum (mu(i) - nu(i))^+`.
pub fn tv_distance(mu: &EmpiricalDist, nu: &EmpiricalDist) -> Result<f64> {
    if mu.x != nu.x {
        return Err(Error::Precondition(format!(
            "tv_distance support mismatch: {} vs {}",
            mu.x, nu.x
        )));
    }
    let mut acc = 0.0f64;
    for i in 0..mu.counts.len() {
        let d = mu.counts[i] as f64 / mu.n_samples as f64
            - nu.counts[i] as f64 / nu.n_samples as f64;
        if d > 0.0 {
            acc += d;
        }
    }
    let d_ov = mu.overflow_mass() - nu.overflow_mass();
    if d_ov > 0.0 {
        acc += d_ov;
    }
    Ok(acc)
}

/// The total-variation-optimal pairing from `mu` to `nu`, with the
/// cumulative displacement table precomputed.
///
/// `apply(m, a, b)` keeps `m` when `a * mu(m) <= nu(m)` and otherwise moves
/// to the unique value whose displacement interval contains `b`; the output
/// marginal is exactly `nu` and the mismatch probability exactly
/// `dtv(mu, nu)` when `m ~ mu`.
#[derive(Clone, Debug)]
pub struct TvTransport {
    x: u64,
    mu_mass: Vec<f64>,
    mu_overflow: f64,
    nu_mass: Vec<f64>,
    nu_overflow: f64,
    dtv: f64,
    /// Cumulative (mu - nu)^- / dtv over values 1..=x then the overflow atom.
    z: Vec<f64>,
}

impl TvTransport {
    pub fn new(mu: &EmpiricalDist, nu: &EmpiricalDist) -> Result<TvTransport> {
        if mu.x != nu.x {
            return Err(Error::Precondition(
                "transport endpoints on different supports".into(),
            ));
        }
        let x = mu.x;
        let mu_mass: Vec<f64> = (0..x as usize)
            .map(|i| mu.counts[i] as f64 / mu.n_samples as f64)
            .collect();
        let nu_mass: Vec<f64> = (0..x as usize)
            .map(|i| nu.counts[i] as f64 / nu.n_samples as f64)
            .collect();
        let mu_overflow = mu.overflow_mass();
        let nu_overflow = nu.overflow_mass();
        let mut dtv = 0.0f64;
        for i in 0..x as usize {
            let d = mu_mass[i] - nu_mass[i];
            if d > 0.0 {
                dtv += d;
            }
        }
        if mu_overflow > nu_overflow {
            dtv += mu_overflow - nu_overflow;
        }
        let mut z = Vec::new();
        if dtv > 0.0 {
            z.reserve(x as usize + 1);
            let mut cum = 0.0f64;
            for i in 0..x as usize {
                cum += (nu_mass[i] - mu_mass[i]).max(0.0) / dtv;
                z.push(cum);
            }
            cum += (nu_overflow - mu_overflow).max(0.0) / dtv;
            z.push(cum);
            // Guard the cumulative end against rounding droop.
            let last = z.len() - 1;
            z[last] = z[last].max(1.0);
        }
        Ok(TvTransport {
            x,
            mu_mass,
            mu_overflow,
            nu_mass,
            nu_overflow,
            dtv,
            z,
        })
    }

    /// Pairing against the exact uniform law on `[1, x]`.
    pub fn to_uniform(mu: &EmpiricalDist) -> Result<TvTransport> {
        TvTransport::new(mu, &EmpiricalDist::uniform(mu.x))
    }

    pub fn dtv(&self) -> f64 {
        self.dtv
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    fn masses_of(&self, m: Capped) -> (f64, f64) {
        match m {
            Capped::Exact(v) if (1..=self.x).contains(&v) => (
                self.mu_mass[(v - 1) as usize],
                self.nu_mass[(v - 1) as usize],
            ),
            _ => (self.mu_overflow, self.nu_overflow),
        }
    }

    pub fn apply(&self, m: Capped, a: f64, b: f64) -> Capped {
        debug_assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
        let (mu_m, nu_m) = self.masses_of(m);
        if a * mu_m <= nu_m {
            return m;
        }
        if self.dtv == 0.0 || self.z.is_empty() {
            return m;
        }
        let idx = self.z.partition_point(|&zv| zv < b);
        if idx < self.x as usize {
            Capped::Exact(idx as u64 + 1)
        } else {
            Capped::Over
        }
    }
}

/// A fully coupled sample: the `M`-side realization plus the transported
/// uniform variate `N`, its arithmetic profile, and the l1 statistic.
#[derive(Clone, Debug)]
pub struct CoupledSample {
    pub ms: MSample,
    pub n: u64,
    pub prof_n: ArithProfile,
    pub l1: f64,
    pub m_equals_n: bool,
}

pub fn sample_coupled<R: UnitRand>(
    rng: &mut R,
    x: u64,
    transport: &TvTransport,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> Result<CoupledSample> {
    if transport.x() != x {
        return Err(Error::Precondition(format!(
            "transport built for x={}, called with x={x}",
            transport.x()
        )));
    }
    let ms = sample_m(rng, x, table, ladder)?;
    let a = rng.next_unit();
    let b = rng.next_unit();
    let n = match transport.apply(ms.m, a, b) {
        Capped::Exact(v) if (1..=x).contains(&v) => v,
        // Only reachable when the empirical mu is exactly uniform on [1, x]
        // and M still overflowed; fall back to the uniform b-inverse.
        _ => ((b * x as f64) as u64 + 1).min(x),
    };
    let prof_n = table.arith_profile(n)?;
    let l1 = l1_distance(&prof_n, &ms.v, ms.gem.remainder, ms.log_x);
    let m_equals_n = ms.m == Capped::Exact(n);
    Ok(CoupledSample {
        ms,
        n,
        prof_n,
        l1,
        m_equals_n,
    })
}

/// `sum_i |log P_i - V_i log x|` over the longer of the two sequences,
/// padding primes with ones and sticks with zeros; the undrawn-stick tail
/// contributes exactly `remainder * log x` (those prime entries are ones).
pub fn l1_distance(prof: &ArithProfile, v: &[f64], remainder: f64, log_x: f64) -> f64 {
    let m = prof.prime_seq.len().max(v.len());
    let mut sum = 0.0f64;
    for i in 0..m {
        let lp = prof.prime_seq.get(i).map_or(0.0, |&p| (p as f64).ln());
        let vi = v.get(i).copied().unwrap_or(0.0);
        sum += (lp - vi * log_x).abs();
    }
    sum + remainder * log_x
}

/// Per-sample hard inequality: when `M = N`,
/// `l1 <= log(x/N) + 2 log s(N) + 2 Theta + slack`, slack covering only the
/// certified GEM truncation. This must hold for every sample.
pub fn l1_bound_check(s: &CoupledSample) -> Result<bool> {
    if !s.m_equals_n {
        return Err(Error::Precondition(
            "l1 inequality check requires M = N".into(),
        ));
    }
    let x_f = s.ms.x as f64;
    let rhs =
        (x_f / s.n as f64).ln() + 2.0 * (s.prof_n.s as f64).ln() + 2.0 * s.ms.theta.value;
    let slack = 2.0 * s.ms.theta.tail_bound + 1e-9;
    Ok(s.l1 <= rhs + slack)
}

/// Independent-coupling baseline: sticks and the uniform integer are drawn
/// with no correlation. Used as a contrast for the coupled l1 statistic.
pub fn sample_independent_l1<R: UnitRand>(
    rng: &mut R,
    x: u64,
    table: &PrimeTable,
) -> Result<f64> {
    let log_x = (x as f64).ln();
    let gem = sample_gem(rng, log_x, DEFAULT_TAIL_TOL);
    let (v, _) = pd::sort_to_pd(&gem);
    let n = rng.next_below(x) + 1;
    let prof = table.arith_profile(n)?;
    Ok(l1_distance(&prof, &v, gem.remainder, log_x))
}

/// Outcome of reading `J*` off one window.
enum JstarScan {
    Done(u64),
    /// All window points consumed with product still <= x: the window may be
    /// missing small-T* points, so the caller must extend it.
    Exhausted,
}

fn jstar_scan(win: &RWindow, ladder: &PrimeLadder, x: u64) -> Result<JstarScan> {
    let lambda0 = ladder.lambda0();
    // (t_star, q): q = None marks a point beyond ladder coverage, whose
    // prime power exceeds exp(coverage - r_sup) > x and blocks the prefix.
    let mut mapped: Vec<(f64, Option<u64>)> = Vec::new();
    for &(w, y) in &win.points {
        if y > lambda0 {
            match ladder.q_at_or_big(y)? {
                Some(q) => {
                    let (h, _) = ladder.step_h(y)?;
                    mapped.push((w * y / h, Some(q)));
                }
                None => mapped.push((w, None)),
            }
        }
    }
    mapped.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let mut prod: u128 = 1;
    for &(_, q) in &mapped {
        match q {
            None => return Ok(JstarScan::Done(prod as u64)),
            Some(qv) => {
                let next = prod * qv as u128;
                if next > x as u128 {
                    return Ok(JstarScan::Done(prod as u64));
                }
                prod = next;
            }
        }
    }
    Ok(JstarScan::Exhausted)
}

/// `J*` from a window: points with `Y > exp(-gamma)` map to
/// `(T* = W Y / h(Y), Q* = exp(h(Y)))`; sorted by decreasing `T*`, the value
/// is the maximal prefix product that stays `<= x`.
pub fn jstar_from_window(win: &RWindow, ladder: &PrimeLadder, x: u64) -> Result<u64> {
    match jstar_scan(win, ladder, x)? {
        JstarScan::Done(v) => Ok(v),
        // Treat exhaustion as the full product; standalone callers that can
        // extend should use `sample_jstar`.
        JstarScan::Exhausted => {
            let mut prod: u128 = 1;
            for &(_, y) in &win.points {
                if y > ladder.lambda0() {
                    prod = prod.saturating_mul(ladder.q_at(y)? as u128);
                }
            }
            Ok(prod.min(x as u128) as u64)
        }
    }
}

const MAX_WIDENINGS: u32 = 12;

/// Sample `J*` at `x`, extending the window downward until the prefix is
/// resolved within the window.
pub fn sample_jstar<R: UnitRand>(
    rng: &mut R,
    ladder: &PrimeLadder,
    x: u64,
) -> Result<(u64, u32)> {
    let log_x = (x as f64).ln();
    let mut win = sample_r_window(rng, default_w_min(log_x), DEFAULT_W_MAX);
    let mut retries = 0u32;
    loop {
        match jstar_scan(&win, ladder, x)? {
            JstarScan::Done(v) => return Ok((v, retries)),
            JstarScan::Exhausted => {
                retries += 1;
                if retries > MAX_WIDENINGS {
                    return Err(Error::Capacity(
                        "window widening limit reached in J* sampling".into(),
                    ));
                }
                let new_min = win.w_min / 10.0;
                extend_r_window(rng, &mut win, new_min);
            }
        }
    }
}

/// `J` and `J*` computed from one window realization, so their disagreement
/// frequency estimates the coupling defect directly.
#[derive(Clone, Copy, Debug)]
pub struct JPair {
    pub j: Capped,
    pub jstar: u64,
    pub widenings: u32,
}

pub fn sample_j_pair<R: UnitRand>(rng: &mut R, ladder: &PrimeLadder, x: u64) -> Result<JPair> {
    let log_x = (x as f64).ln();
    let mut win = sample_r_window(rng, default_w_min(log_x), DEFAULT_W_MAX);
    let mut widenings = 0u32;
    loop {
        let idx = index_crossing(&win, log_x);
        let scan = jstar_scan(&win, ladder, x)?;
        if idx.crossing_valid {
            if let JstarScan::Done(jstar) = scan {
                // J = prod over indexed marks above the crossing of exp(h(Y)).
                // Unresolved lump points have Y ~ Exp(w > w_max), prime powers
                // with probability exp(-112): treated as ones.
                let cap = 2 * x;
                let mut j = Capped::Exact(1);
                for &y in &idx.y_seq {
                    if let Capped::Exact(cur) = j {
                        let q = match ladder.q_at_or_big(y)? {
                            Some(q) => q,
                            None => {
                                j = Capped::Over;
                                break;
                            }
                        };
                        let next = cur.saturating_mul(q);
                        j = if next > cap {
                            Capped::Over
                        } else {
                            Capped::Exact(next)
                        };
                    }
                }
                return Ok(JPair {
                    j,
                    jstar,
                    widenings,
                });
            }
        }
        widenings += 1;
        if widenings > MAX_WIDENINGS {
            return Err(Error::Capacity(
                "window widening limit reached in J/J* sampling".into(),
            ));
        }
        let new_min = win.w_min / 10.0;
        extend_r_window(rng, &mut win, new_min);
    }
}

/// Empirical frequency of `J != J*` with a Wilson interval.
#[derive(Clone, Copy, Debug)]
pub struct JJstarRate {
    pub rate: f64,
    pub ci: WilsonCi,
    pub n: u64,
    pub total_widenings: u64,
}

pub fn j_vs_jstar_rate(
    x: u64,
    n_samples: u64,
    master_seed: u64,
    ladder: &PrimeLadder,
) -> Result<JJstarRate> {
    let family = StreamFamily::new(master_seed, &[("j-vs-jstar", x)]);
    const CHUNK: u64 = 4096;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let (mismatch, widenings) = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n_samples);
            let mut mis = 0u64;
            let mut wid = 0u64;
            for i in lo..hi {
                let mut stream = family.stream(i);
                let pair =
                    sample_j_pair(&mut stream, ladder, x).expect("window widening converges");
                wid += pair.widenings as u64;
                if pair.j != Capped::Exact(pair.jstar) {
                    mis += 1;
                }
            }
            (mis, wid)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(JJstarRate {
        rate: mismatch as f64 / n_samples as f64,
        ci: wilson(mismatch, n_samples, 3.0)?,
        n: n_samples,
        total_widenings: widenings,
    })
}

/// Quadrature value for `P[J* = j]` with a certified error bar.
#[derive(Clone, Copy, Debug)]
pub struct PmfValue {
    pub value: f64,
    pub err: f64,
}

/// The probability mass of `J*` at `j`, via the integral over `t > 0` of
/// `(sum_{q > x/j} Lambda(q) q^{-1-t}) j^{-1-t} / zeta(1+t)`.
///
/// The prime-power sum is evaluated as the full von Mangoldt series
/// `-zeta'/zeta(1+t)` minus the finite sum over `q <= x/j` taken exactly
/// from the table, so no truncation of the sum is involved.
pub fn jstar_pmf_numeric(j: u64, x: u64, table: &PrimeTable) -> Result<PmfValue> {
    if j < 1 || j > x {
        return Err(Error::Domain(format!("j = {j} outside [1, {x}]")));
    }
    if x > table.limit() {
        return Err(Error::Capacity(format!(
            "x = {x} beyond table limit {}",
            table.limit()
        )));
    }
    let ratio = x as f64 / j as f64;
    // Prime powers q <= x/j with Lambda(q) = ln p.
    let mut finite: Vec<(f64, f64)> = Vec::new(); // (q, ln p)
    for &p in table.primes() {
        let pf = p as f64;
        if pf > ratio {
            break;
        }
        let lp = pf.ln();
        let mut q = pf;
        while q <= ratio {
            finite.push((q, lp));
            q *= pf;
        }
    }
    let jf = j as f64;
    let log_j = jf.ln();
    let f = |t: f64| -> f64 {
        let s = 1.0 + t;
        let mut tail = mangoldt_series(s);
        for &(q, lp) in &finite {
            tail -= lp * q.powf(-s);
        }
        tail * (-s * log_j).exp() / zeta(s)
    };
    let t0 = 1e-9;
    let t_end = 80.0;
    // The integrand decays on the scale 1/log(x) near zero and is smooth;
    // split at a few scales for the adaptive pass.
    let scale = 1.0 / (x as f64).ln();
    let mut splits = vec![t0];
    for m in [0.1, 1.0, 10.0] {
        let p = m * scale;
        if p > t0 && p < 1.0 {
            splits.push(p);
        }
    }
    splits.extend_from_slice(&[1.0, 4.0, t_end]);
    let q = quad::adaptive_split(f, &splits, 1e-12);
    let sliver = f(t0) * t0;
    // For t >= t_end: sum Lambda(n) n^{-1-t} <= S(1+t_end) 2^{-(t-t_end)}.
    let tail = mangoldt_series(1.0 + t_end) * (-(1.0 + t_end) * log_j).exp()
        / (2.0f64.ln() + log_j).max(2.0f64.ln());
    Ok(PmfValue {
        value: q.value + sliver,
        err: q.err + sliver + tail + 1e-13,
    })
}
