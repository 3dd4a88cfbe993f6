//! Random k-factorizations of integers.
//!
//! A factorization family assigns to every prime power `p^e` a probability
//! mass on the compositions of `e` into `k` parts; multiplying across prime
//! powers induces a multiplicative mass function on ordered k-tuples with
//! product `n`. The families here are uniform (all k-factorizations equally
//! likely), recursive (iterated uniform divisor), multinomial, and custom
//! per-prime-power kernels.
//!
//! Exact small-x joint laws are computed by enumeration in 128-bit rational
//! arithmetic with a tracked floating-point fallback on overflow.

use crate::coupling::CoupledSample;
use crate::primes::{ArithProfile, PrimeTable};
use crate::ratio::Rat;
use crate::rng::UnitRand;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Sampling family for the per-prime-power kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Uniform,
    Recursive,
    Multinomial,
    Custom(CustomKernel),
}

/// Explicit kernel: mass on k-compositions per `(p, e)`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CustomKernel {
    pub table: BTreeMap<(u64, u32), Vec<(Vec<u32>, f64)>>,
}

/// A member of the k-factorization class: family plus its slot-probability
/// vector (the mass a single prime puts on each coordinate).
#[derive(Clone, Debug)]
pub struct FactorSpec {
    pub k: usize,
    pub family: Family,
    pub alpha: Vec<f64>,
    alpha_rat: Option<Vec<Rat>>,
}

impl FactorSpec {
    /// Uniform over all k-factorizations; alpha = (1/k, ..., 1/k).
    pub fn uniform(k: usize) -> Result<FactorSpec> {
        if k < 2 {
            return Err(Error::Domain("k must be at least 2".into()));
        }
        Ok(FactorSpec {
            k,
            family: Family::Uniform,
            alpha: vec![1.0 / k as f64; k],
            alpha_rat: Some(vec![Rat::new(1, k as i128); k]),
        })
    }

    /// Iterated uniform divisor; alpha = (1/2, 1/4, ..., 1/2^{k-1}, 1/2^{k-1}).
    pub fn recursive(k: usize) -> Result<FactorSpec> {
        if k < 2 {
            return Err(Error::Domain("k must be at least 2".into()));
        }
        let mut alpha = Vec::with_capacity(k);
        let mut alpha_rat = Vec::with_capacity(k);
        for j in 0..k {
            let pow = if j + 1 < k { j + 1 } else { k - 1 };
            alpha.push(0.5f64.powi(pow as i32));
            alpha_rat.push(Rat::new(1, 1i128 << pow));
        }
        Ok(FactorSpec {
            k,
            family: Family::Recursive,
            alpha,
            alpha_rat: Some(alpha_rat),
        })
    }

    /// Multinomial colors with the given probabilities.
    pub fn multinomial(alpha: &[f64]) -> Result<FactorSpec> {
        validate_alpha(alpha)?;
        Ok(FactorSpec {
            k: alpha.len(),
            family: Family::Multinomial,
            alpha: alpha.to_vec(),
            alpha_rat: None,
        })
    }

    /// Multinomial with exactly rational probabilities, enabling exact
    /// enumeration.
    pub fn multinomial_exact(alpha: &[(i128, i128)]) -> Result<FactorSpec> {
        let rats: Vec<Rat> = alpha.iter().map(|&(n, d)| Rat::new(n, d)).collect();
        let floats: Vec<f64> = rats.iter().map(|r| r.to_f64()).collect();
        validate_alpha(&floats)?;
        let mut sum = Rat::ZERO;
        for r in &rats {
            sum = sum
                .checked_add(r)
                .ok_or_else(|| Error::Domain("alpha overflow".into()))?;
        }
        if sum != Rat::ONE {
            return Err(Error::Domain("rational alpha must sum to 1".into()));
        }
        Ok(FactorSpec {
            k: rats.len(),
            family: Family::Multinomial,
            alpha: floats,
            alpha_rat: Some(rats),
        })
    }

    /// Custom per-prime-power kernel. Kernel masses are validated lazily, at
    /// the `(p, e)` pairs actually needed.
    pub fn custom(alpha: &[f64], kernel: CustomKernel) -> Result<FactorSpec> {
        validate_alpha(alpha)?;
        Ok(FactorSpec {
            k: alpha.len(),
            family: Family::Custom(kernel),
            alpha: alpha.to_vec(),
            alpha_rat: None,
        })
    }

    fn custom_entry(&self, p: u64, e: u32) -> Result<&[(Vec<u32>, f64)]> {
        let Family::Custom(kernel) = &self.family else {
            unreachable!()
        };
        let entry = kernel
            .table
            .get(&(p, e))
            .ok_or_else(|| Error::Kernel(format!("no kernel mass for ({p}, {e})")))?;
        let total: f64 = entry.iter().map(|(_, m)| m).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Kernel(format!(
                "kernel mass for ({p}, {e}) sums to {total}"
            )));
        }
        if entry
            .iter()
            .any(|(c, m)| c.len() != self.k || c.iter().sum::<u32>() != e || *m < 0.0)
        {
            return Err(Error::Kernel(format!(
                "malformed kernel entry for ({p}, {e})"
            )));
        }
        Ok(entry)
    }
}

fn validate_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.len() < 2 {
        return Err(Error::Domain("alpha needs at least 2 slots".into()));
    }
    if alpha.iter().any(|&a| a <= 0.0) {
        return Err(Error::Domain("alpha components must be positive".into()));
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("alpha sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Number of compositions of `total` into `parts` ordered non-negative parts.
pub fn composition_count(total: u32, parts: usize) -> u128 {
    // C(total + parts - 1, parts - 1)
    let n = total as u128 + parts as u128 - 1;
    let k = (parts - 1) as u128;
    let k = k.min(n - k);
    let mut num = 1u128;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

/// All compositions of `total` into `parts`, first coordinate ascending.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; parts];
    fn rec(total: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = total;
            out.push(cur.clone());
            return;
        }
        for e in 0..=total {
            cur[pos] = e;
            rec(total - e, pos + 1, cur, out);
        }
    }
    rec(total, 0, &mut cur, &mut out);
    out
}

fn unrank_composition(mut rank: u128, mut total: u32, parts: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(parts);
    let mut remaining_parts = parts;
    while remaining_parts > 1 {
        let mut e = 0u32;
        loop {
            let block = composition_count(total - e, remaining_parts - 1);
            if rank < block {
                break;
            }
            rank -= block;
            e += 1;
        }
        out.push(e);
        total -= e;
        remaining_parts -= 1;
    }
    out.push(total);
    out
}

fn multinomial_coef(comp: &[u32]) -> u128 {
    // Product of binomials over prefix sums.
    let mut coef = 1u128;
    let mut acc = 0u32;
    for &e in comp {
        acc += e;
        let mut c = 1u128;
        let e = e.min(acc - e);
        for i in 0..e as u128 {
            c = c * (acc as u128 - i) / (i + 1);
        }
        coef *= c;
    }
    coef
}

/// Kernel mass of one composition at prime power `p^e`, as a float.
fn pp_mass_f64(spec: &FactorSpec, p: u64, e: u32, comp: &[u32]) -> Result<f64> {
    match &spec.family {
        Family::Uniform => Ok(1.0 / composition_count(e, spec.k) as f64),
        Family::Recursive => {
            let mut mass = 1.0;
            let mut suffix: u32 = comp.iter().sum();
            for &c in comp.iter().take(spec.k - 1) {
                mass /= (suffix + 1) as f64;
                suffix -= c;
            }
            Ok(mass)
        }
        Family::Multinomial => {
            let mut mass = multinomial_coef(comp) as f64;
            for (i, &c) in comp.iter().enumerate() {
                mass *= spec.alpha[i].powi(c as i32);
            }
            Ok(mass)
        }
        Family::Custom(_) => {
            let entry = spec.custom_entry(p, e)?;
            entry
                .iter()
                .find(|(c, _)| c == comp)
                .map(|&(_, m)| m)
                .ok_or_else(|| {
                    Error::Kernel(format!("kernel for ({p}, {e}) missing a composition"))
                })
        }
    }
}

/// Kernel mass as an exact rational, when the family supports it.
fn pp_mass_rat(spec: &FactorSpec, e: u32, comp: &[u32]) -> Option<Rat> {
    match &spec.family {
        Family::Uniform => Some(Rat::new(1, composition_count(e, spec.k) as i128)),
        Family::Recursive => {
            let mut mass = Rat::ONE;
            let mut suffix: u32 = comp.iter().sum();
            for &c in comp.iter().take(spec.k - 1) {
                mass = mass.checked_mul(&Rat::new(1, (suffix + 1) as i128))?;
                suffix -= c;
            }
            Some(mass)
        }
        Family::Multinomial => {
            let alpha = spec.alpha_rat.as_ref()?;
            let mut mass = Rat::from_int(multinomial_coef(comp) as i128);
            for (i, &c) in comp.iter().enumerate() {
                for _ in 0..c {
                    mass = mass.checked_mul(&alpha[i])?;
                }
            }
            Some(mass)
        }
        Family::Custom(_) => None,
    }
}

/// Number of ordered k-factorizations of `n`.
pub fn tau_k(prof: &ArithProfile, k: usize) -> u128 {
    assert!(k >= 1);
    prof.factors
        .iter()
        .map(|&(_, e)| composition_count(e, k))
        .product()
}

/// One sampled k-factorization with its normalized log vectors.
#[derive(Clone, Debug)]
pub struct KFactSample {
    pub n: u64,
    pub x: u64,
    pub d: Vec<u64>,
    /// `log d_i / log n`, or `(1, 0, ..., 0)` when n = 1.
    pub delta: Vec<f64>,
    /// `log d_i / log x` (all zeros when n = 1).
    pub delta_star: Vec<f64>,
}

impl KFactSample {
    fn from_d(n: u64, x: u64, d: Vec<u64>) -> KFactSample {
        let k = d.len();
        let log_n = (n as f64).ln();
        let log_x = (x as f64).ln();
        let delta = if n == 1 {
            let mut v = vec![0.0; k];
            v[0] = 1.0;
            v
        } else {
            d.iter().map(|&di| (di as f64).ln() / log_n).collect()
        };
        let delta_star = d.iter().map(|&di| (di as f64).ln() / log_x).collect();
        KFactSample {
            n,
            x,
            d,
            delta,
            delta_star,
        }
    }

    /// Deterministic transition bound: `max_i |delta_i - delta*_i|` never
    /// exceeds `log(x/n)/log x`.
    pub fn delta_transition_ok(&self) -> bool {
        let log_x = (self.x as f64).ln();
        let bound = (self.x as f64 / self.n as f64).ln() / log_x;
        let gap = self
            .delta
            .iter()
            .zip(&self.delta_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        gap <= bound + 1e-12
    }
}

/// Draw one composition of `e` at prime `p` under the family kernel.
fn sample_composition<R: UnitRand>(
    rng: &mut R,
    spec: &FactorSpec,
    p: u64,
    e: u32,
) -> Result<Vec<u32>> {
    match &spec.family {
        Family::Uniform => {
            let count = composition_count(e, spec.k);
            let r = rng.next_below(count as u64) as u128;
            Ok(unrank_composition(r, e, spec.k))
        }
        Family::Recursive => {
            // Iterated uniform divisor: e_j uniform on {0..remaining}.
            let mut rem = e;
            let mut comp = Vec::with_capacity(spec.k);
            for _ in 0..spec.k - 1 {
                let ej = rng.next_below(rem as u64 + 1) as u32;
                comp.push(ej);
                rem -= ej;
            }
            comp.push(rem);
            Ok(comp)
        }
        Family::Multinomial => {
            let mut comp = vec![0u32; spec.k];
            for _ in 0..e {
                comp[rng.next_categorical(&spec.alpha)] += 1;
            }
            Ok(comp)
        }
        Family::Custom(_) => {
            let entry = spec.custom_entry(p, e)?;
            let u = rng.next_unit();
            let mut acc = 0.0;
            for (comp, m) in entry {
                acc += m;
                if u <= acc {
                    return Ok(comp.clone());
                }
            }
            Ok(entry.last().unwrap().0.clone())
        }
    }
}

/// Sample a k-factorization of `prof.n`.
pub fn sample_kfact<R: UnitRand>(
    rng: &mut R,
    spec: &FactorSpec,
    prof: &ArithProfile,
    x: u64,
) -> Result<KFactSample> {
    let mut d = vec![1u64; spec.k];
    for &(p, e) in &prof.factors {
        let comp = sample_composition(rng, spec, p, e)?;
        for (i, &c) in comp.iter().enumerate() {
            d[i] *= p.pow(c);
        }
    }
    Ok(KFactSample::from_d(prof.n, x, d))
}

/// Enumerate every k-factorization of `prof.n` with its mass, exact when the
/// family allows. Returns the number of tuples visited.
pub fn enumerate_masses<F: FnMut(&[u64], f64, Option<Rat>)>(
    spec: &FactorSpec,
    prof: &ArithProfile,
    visit: &mut F,
) -> Result<u64> {
    let mut levels: Vec<(u64, Vec<(Vec<u32>, f64, Option<Rat>)>)> = Vec::new();
    for &(p, e) in &prof.factors {
        let mut level = Vec::new();
        for comp in compositions(e, spec.k) {
            let mf = pp_mass_f64(spec, p, e, &comp)?;
            let mr = pp_mass_rat(spec, e, &comp);
            level.push((comp, mf, mr));
        }
        levels.push((p, level));
    }
    fn rec<F: FnMut(&[u64], f64, Option<Rat>)>(
        levels: &[(u64, Vec<(Vec<u32>, f64, Option<Rat>)>)],
        level: usize,
        d: &mut Vec<u64>,
        mass_f: f64,
        mass_r: Option<Rat>,
        visited: &mut u64,
        visit: &mut F,
    ) {
        if level == levels.len() {
            *visited += 1;
            visit(d, mass_f, mass_r);
            return;
        }
        let (p, comps) = &levels[level];
        for (comp, mf, mr) in comps {
            for (i, &c) in comp.iter().enumerate() {
                d[i] *= p.pow(c);
            }
            let next_r = match (&mass_r, mr) {
                (Some(a), Some(b)) => a.checked_mul(b),
                _ => None,
            };
            rec(levels, level + 1, d, mass_f * mf, next_r, visited, visit);
            for (i, &c) in comp.iter().enumerate() {
                d[i] /= p.pow(c);
            }
        }
    }
    let mut d = vec![1u64; spec.k];
    let mut visited = 0u64;
    rec(&levels, 0, &mut d, 1.0, Some(Rat::ONE), &mut visited, visit);
    Ok(visited)
}

/// Exact (or float-fallback) joint law value with an exactness flag.
#[derive(Clone, Copy, Debug)]
pub struct ExactLaw {
    pub value: f64,
    /// True when every term was accumulated in exact rational arithmetic.
    pub exact: bool,
    /// Certified numerical error of `value` (zero when exact).
    pub err: f64,
    pub work: u64,
}

/// `(1/floor(x)) sum_{n <= x} sum_{d: prod d = n, d_i <= n^{u_i} for i < k} f(d)`.
pub fn exact_joint_law(
    spec: &FactorSpec,
    x: u64,
    u: &[f64],
    table: &PrimeTable,
) -> Result<ExactLaw> {
    if u.len() != spec.k - 1 {
        return Err(Error::Precondition(format!(
            "u has {} entries, expected k-1 = {}",
            u.len(),
            spec.k - 1
        )));
    }
    if u.iter().any(|&ui| !(0.0..=1.0).contains(&ui)) {
        return Err(Error::Domain("u components must lie in [0, 1]".into()));
    }
    const WORK_BUDGET: u64 = 100_000_000;
    let mut total_f = 0.0f64;
    let mut comp_f = 0.0f64;
    let mut total_r: Option<Rat> = Some(Rat::ZERO);
    let mut work = 0u64;
    for n in 1..=x {
        let prof = table.arith_profile(n)?;
        let log_n = (n as f64).ln();
        let mut inner_f = 0.0f64;
        let mut inner_r: Option<Rat> = Some(Rat::ZERO);
        work += enumerate_masses(spec, &prof, &mut |d, mf, mr| {
            let ok = d.iter().take(spec.k - 1).zip(u).all(|(&di, &ui)| {
                if ui == 0.0 {
                    di == 1
                } else if ui == 1.0 {
                    true
                } else {
                    (di as f64).ln() <= ui * log_n + 1e-12
                }
            });
            if ok {
                inner_f += mf;
                inner_r = match (&inner_r, &mr) {
                    (Some(a), Some(b)) => a.checked_add(b),
                    _ => None,
                };
            }
        })?;
        if work > WORK_BUDGET {
            return Err(Error::Capacity(format!(
                "enumeration work exceeded {WORK_BUDGET} units at n = {n}"
            )));
        }
        // Kahan step for the float track.
        let y = inner_f - comp_f;
        let t = total_f + y;
        comp_f = (t - total_f) - y;
        total_f = t;
        total_r = match (&total_r, &inner_r) {
            (Some(a), Some(b)) => a.checked_add(b),
            _ => None,
        };
    }
    let xf = x as f64;
    match total_r {
        Some(r) => Ok(ExactLaw {
            value: r.to_f64() / xf,
            exact: true,
            err: 0.0,
            work,
        }),
        None => Ok(ExactLaw {
            value: total_f / xf,
            exact: false,
            err: 1e-13 * work as f64 / xf,
            work,
        }),
    }
}

/// A coupled factorization sample: the k-factorization of `N`, the matched
/// per-color stick sums `Z`, the per-color prime-log sums `rho`, and the
/// per-sample inequality flags.
#[derive(Clone, Debug)]
pub struct CoupledKFact {
    pub kf: KFactSample,
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
    /// `max|delta - delta*| <= log(x/N)/log x` (deterministic).
    pub ok_delta_transition: bool,
    /// `max|delta* - rho| <= log s(N)/log x` (deterministic).
    pub ok_rho_transition: bool,
    /// `max|delta - Z| <= (2 log(x/N) + 3 log s(N) + 2 Theta)/log x + slack`;
    /// must hold whenever the underlying coupling kept `M = N`.
    pub event_ok: bool,
    pub event_bound: f64,
}

/// Stream order: one composition per prime power of `N` (ascending p), then
/// independent colors for square-full prime occurrences in sequence order,
/// then colors for indices beyond the primes of `N`, then one color for the
/// pooled remainder.
pub fn coupled_kfact<R: UnitRand>(
    rng: &mut R,
    cs: &CoupledSample,
    spec: &FactorSpec,
) -> Result<CoupledKFact> {
    let prof = &cs.prof_n;
    let k = spec.k;
    let log_x = cs.ms.log_x;
    // Draw the per-prime-power compositions.
    let mut comp_of: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    let mut d = vec![1u64; k];
    for &(p, e) in &prof.factors {
        let comp = sample_composition(rng, spec, p, e)?;
        for (i, &c) in comp.iter().enumerate() {
            d[i] *= p.pow(c);
        }
        comp_of.insert(p, comp);
    }
    let kf = KFactSample::from_d(prof.n, cs.ms.x, d);
    // Colors: aligned with the non-increasing prime sequence of N and the
    // sorted sticks at the same index.
    let n_idx = prof.prime_seq.len().max(cs.ms.v.len());
    let mut z = vec![0.0f64; k];
    let mut rho = vec![0.0f64; k];
    for i in 0..n_idx {
        let color = match prof.prime_seq.get(i) {
            Some(&p) if prof.valuation(p) == 1 => {
                // p divides the square-free part: the color is the slot that
                // received its single exponent.
                comp_of[&p]
                    .iter()
                    .position(|&c| c == 1)
                    .expect("composition of 1 has a unit entry")
            }
            _ => rng.next_categorical(&spec.alpha),
        };
        if let Some(&p) = prof.prime_seq.get(i) {
            rho[color] += (p as f64).ln() / log_x;
        }
        if let Some(&vi) = cs.ms.v.get(i) {
            z[color] += vi;
        }
    }
    // Pooled remainder mass gets one independent color.
    let rem_color = rng.next_categorical(&spec.alpha);
    z[rem_color] += cs.ms.gem.remainder;

    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max)
    };
    let ok_delta_transition = kf.delta_transition_ok();
    let log_s = (prof.s as f64).ln();
    let ok_rho_transition = sup(&kf.delta_star, &rho) <= log_s / log_x + 1e-12;
    let event_bound = (2.0 * (cs.ms.x as f64 / prof.n as f64).ln()
        + 3.0 * log_s
        + 2.0 * cs.ms.theta.value)
        / log_x;
    let slack = 2.0 * cs.ms.theta.tail_bound / log_x + cs.ms.gem.remainder + 1e-9;
    let event_ok = sup(&kf.delta, &z) <= event_bound + slack;
    Ok(CoupledKFact {
        kf,
        z,
        rho,
        ok_delta_transition,
        ok_rho_transition,
        event_ok,
        event_bound,
    })
}

/// Smallest divisor of `n` that is at least `sqrt(n)`.
pub fn rho_half(prof: &ArithProfile) -> u64 {
    let n = prof.n;
    prof.divisors()
        .into_iter()
        .filter(|&d| d * d >= n)
        .min()
        .expect("n divides itself")
}

/// Interval certificate for the minimal stick subset-sum in `[1/2, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct PsiInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PsiInterval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

const PSI_POOL_EPS: f64 = 1e-6;

fn min_subset_sum_at_least(sticks: &[f64], suffix: &[f64], target: f64) -> f64 {
    // DFS over include/exclude in descending-stick order; sums only grow, so
    // both the target hit and the best-so-far prune are exact.
    fn rec(sticks: &[f64], suffix: &[f64], i: usize, cur: f64, target: f64, best: &mut f64) {
        if cur >= *best {
            return;
        }
        if cur >= target {
            *best = cur;
            return;
        }
        if i == sticks.len() || cur + suffix[i] < target {
            return;
        }
        rec(sticks, suffix, i + 1, cur + sticks[i], target, best);
        rec(sticks, suffix, i + 1, cur, target, best);
    }
    if target <= 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    rec(sticks, suffix, 0, 0.0, target, &mut best);
    best
}

/// Minimal subset-sum of the sticks lying in `[1/2, 1]`, as an interval:
/// sticks below `1e-6` (and the remainder) are pooled, widening the answer
/// by at most the pooled mass.
pub fn rho_psi(v: &[f64], remainder: f64) -> PsiInterval {
    let mut sig: Vec<f64> = v.iter().copied().filter(|&s| s >= PSI_POOL_EPS).collect();
    sig.sort_unstable_by(|a, b| b.total_cmp(a));
    let pooled: f64 = v.iter().filter(|&&s| s < PSI_POOL_EPS).sum::<f64>() + remainder;
    let mut suffix = vec![0.0f64; sig.len() + 1];
    for i in (0..sig.len()).rev() {
        suffix[i] = suffix[i + 1] + sig[i];
    }
    let hi = min_subset_sum_at_least(&sig, &suffix, 0.5);
    let lo_raw = min_subset_sum_at_least(&sig, &suffix, 0.5 - pooled);
    let hi = if hi.is_finite() { hi } else { 1.0 };
    let lo = lo_raw.max(0.5).min(hi);
    PsiInterval { lo, hi }
}
