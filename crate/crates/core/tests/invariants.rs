//! Heavier distributional invariants that sit above the per-module unit
//! tests: uniformity of the transported variate, equality in law of the two
//! GEM realizations, the exact moment bound for the uniform variate, and
//! mismatch-frequency consistency.

use pdc_core::coupling::{estimate_mu, sample_coupled, tv_distance, EmpiricalDist, TvTransport};
use pdc_core::pd::{
    default_w_min, extend_r_window, gem_from_r, index_crossing, sample_gem, sample_r_window,
    DEFAULT_TAIL_TOL, DEFAULT_W_MAX,
};
use pdc_core::primes::{PrimeLadder, PrimeTable};
use pdc_core::rng::{StreamFamily, UnitRand};
use pdc_core::stats::{chi2_pvalue, chi2_stat, MeanAcc};
use rayon::prelude::*;

const SEED: u64 = 424242;

#[test]
fn transported_variate_is_uniform_chi_square() {
    // 1e6 coupled draws at x = 100. N is uniform only up to the estimation
    // error of the empirical M-law the transport was built from, so the
    // chi-square budget carries the explicit variance inflation factor
    // (1 + n_draws / n_mu): both the draw counts and the pairing table
    // fluctuate around the same atoms.
    let x = 100u64;
    let n_mu = 4_000_000u64;
    let table = PrimeTable::build(x).unwrap();
    let ladder = PrimeLadder::build((x as f64).ln() + 1.0).unwrap();
    let mu = estimate_mu(x, n_mu, SEED, &table, &ladder).unwrap();
    let transport = TvTransport::to_uniform(&mu).unwrap();
    let family = StreamFamily::new(SEED, &[("uniformity", x)]);
    let n: u64 = 1_000_000;
    const CHUNK: u64 = 8192;
    let (counts, mismatches) = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let mut counts = vec![0u64; x as usize];
            let mut mis = 0u64;
            for i in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let mut stream = family.stream(i);
                let cs = sample_coupled(&mut stream, x, &transport, &table, &ladder).unwrap();
                counts[(cs.n - 1) as usize] += 1;
                if !cs.m_equals_n {
                    mis += 1;
                }
            }
            (counts, mis)
        })
        .reduce(
            || (vec![0u64; x as usize], 0),
            |mut a, b| {
                for (x, y) in a.0.iter_mut().zip(b.0) {
                    *x += y;
                }
                (a.0, a.1 + b.1)
            },
        );
    let expected = vec![n as f64 / x as f64; x as usize];
    let stat = chi2_stat(&counts, &expected).unwrap();
    let budgeted = stat / (1.0 + n as f64 / n_mu as f64);
    let p = chi2_pvalue(budgeted, x - 1);
    assert!(p > 1e-4, "uniformity chi2 p = {p} (raw stat {stat:.1})");

    // Mismatch frequency tracks dtv(mu_hat, uniform) within 3 sigma.
    let dtv = tv_distance(&mu, &EmpiricalDist::uniform(x)).unwrap();
    let rate = mismatches as f64 / n as f64;
    let sigma = (rate * (1.0 - rate) / n as f64).sqrt();
    assert!(
        (rate - dtv).abs() < 3.0 * sigma + 2e-3,
        "mismatch rate {rate:.5} vs dtv {dtv:.5}"
    );
}

#[test]
fn gem_realizations_match_in_law() {
    // First two sticks from the window realization vs direct stick-breaking:
    // first and second moments agree within 3 sigma.
    let log_x = (10_000.0f64).ln();
    let n = 200_000u64;
    let fam_w = StreamFamily::new(SEED, &[("gem-window", 0)]);
    let fam_d = StreamFamily::new(SEED, &[("gem-direct", 0)]);
    let acc = |vals: Vec<(f64, f64)>| {
        let mut m = [MeanAcc::default(); 4];
        for (l1, l2) in vals {
            m[0].push(l1);
            m[1].push(l2);
            m[2].push(l1 * l1);
            m[3].push(l2 * l2);
        }
        m
    };
    let win_vals: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut stream = fam_w.stream(i);
            let mut win = sample_r_window(&mut stream, default_w_min(log_x), DEFAULT_W_MAX);
            let mut idx = index_crossing(&win, log_x);
            while !idx.crossing_valid {
                let new_min = win.w_min / 10.0;
                extend_r_window(&mut stream, &mut win, new_min);
                idx = index_crossing(&win, log_x);
            }
            let gem = gem_from_r(&idx, log_x).unwrap();
            (gem.sticks[0], gem.sticks.get(1).copied().unwrap_or(0.0))
        })
        .collect();
    let dir_vals: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut stream = fam_d.stream(i);
            let gem = sample_gem(&mut stream, log_x, DEFAULT_TAIL_TOL);
            (gem.sticks[0], gem.sticks.get(1).copied().unwrap_or(0.0))
        })
        .collect();
    let a = acc(win_vals);
    let b = acc(dir_vals);
    for (i, name) in ["E[L1]", "E[L2]", "E[L1^2]", "E[L2^2]"].iter().enumerate() {
        let sigma = (a[i].stderr().powi(2) + b[i].stderr().powi(2)).sqrt();
        assert!(
            (a[i].mean - b[i].mean).abs() < 3.5 * sigma,
            "{name}: window {:.5} vs direct {:.5} (sigma {sigma:.5})",
            a[i].mean,
            b[i].mean
        );
    }
    // E[L1] of a GEM stick is 1/2.
    assert!((b[0].mean - 0.5).abs() < 4.0 * b[0].stderr());
}

#[test]
fn uniform_variate_moment_bound_exact() {
    // E[(x/N)^a s(N)^b] stays bounded over the grid, computed as an exact
    // sum over [1, x] (no sampling).
    let table = PrimeTable::build(100_000).unwrap();
    let (a, b) = (0.5f64, 1.0 / 3.0);
    let mut values = Vec::new();
    for &x in &[100u64, 1000, 10_000, 100_000] {
        let mut sum = 0.0f64;
        for n in 1..=x {
            let prof = table.arith_profile(n).unwrap();
            sum += (x as f64 / n as f64).powf(a) * (prof.s as f64).powf(b);
        }
        values.push(sum / x as f64);
    }
    // Splitting n = flat * s bounds the mean by
    //   (1/(1-a)) * sum over square-full s of s^{b-1},
    // an x-independent constant. Square-full integers are uniquely
    // m^2 * c^3 with c square-free; the tail over s > 1e8 is bounded via
    // the O(sqrt(t)) count of square-full numbers.
    let mut sf_sum = 0.0f64;
    let cap = 100_000_000u64;
    for c in 1u64..=464 {
        let c_sqfree = {
            let mut v = c;
            let mut ok = true;
            let mut p = 2;
            while p * p <= v {
                if v % (p * p) == 0 {
                    ok = false;
                    break;
                }
                while v % p == 0 {
                    v /= p;
                }
                p += 1;
            }
            ok
        };
        if !c_sqfree {
            continue;
        }
        let c3 = c * c * c;
        let mut m = 1u64;
        while m * m <= cap / c3 {
            sf_sum += ((m * m * c3) as f64).powf(b - 1.0);
            m += 1;
        }
    }
    let tail = 6.5 * (cap as f64).powf(-1.0 / 6.0);
    let bound = (sf_sum + tail) / (1.0 - a);
    let mut prev = 0.0;
    for &v in &values {
        assert!(v <= bound, "moment value {v} above analytic bound {bound}");
        assert!(v > prev, "exact means are increasing toward the limit");
        prev = v;
    }
    // Convergence: successive increments shrink.
    let d1 = values[1] - values[0];
    let d2 = values[2] - values[1];
    let d3 = values[3] - values[2];
    assert!(d2 < d1 && d3 < d2, "increments not shrinking: {values:?}");
    // And the l1 lower bound: E[l1] >= E[log(x/N)] - 3 sigma at x = 1000.
    let x = 1000u64;
    let ladder = PrimeLadder::build((x as f64).ln() + 1.0).unwrap();
    let mu = estimate_mu(x, 200_000, SEED, &table, &ladder).unwrap();
    let transport = TvTransport::to_uniform(&mu).unwrap();
    let family = StreamFamily::new(SEED, &[("lower-bound", x)]);
    let mut l1 = MeanAcc::default();
    let mut logratio = MeanAcc::default();
    for i in 0..50_000u64 {
        let mut stream = family.stream(i);
        let cs = sample_coupled(&mut stream, x, &transport, &table, &ladder).unwrap();
        l1.push(cs.l1);
        logratio.push((x as f64 / cs.n as f64).ln());
    }
    assert!(l1.mean >= logratio.mean - 3.0 * logratio.stderr());
    // Remark-level sanity: E[log(x/N)] = 1 - o(1).
    assert!((logratio.mean - 1.0).abs() < 0.05);
}
