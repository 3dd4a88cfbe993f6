//! The probabilistic substrate: GEM stick-breaking, Poisson-Dirichlet
//! sorting, the planar Poisson process with intensity `exp(-w y) dw dy`
//! restricted to a window of `w`, tail-sum indexation around `log x`, the
//! theta statistic, and analytic oracles (Campbell integrals, the moment
//! generating function of the total deviation).

use crate::primes::PrimeLadder;
use crate::quad::{self, Quad};
use crate::rng::UnitRand;
use crate::{Error, Result};

/// Default GEM truncation: undrawn sticks contribute less than this to the
/// theta statistic.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9 * crate::primes::EXP_NEG_GAMMA;

/// Default `w` window used by the window samplers: `w_min = 1e-3 / log x`
/// makes the crossing failure probability about `1e-3` (failures are then
/// resolved by extending, never dropped), and `w_max = 200` leaves unresolved
/// lump points that are prime powers only with probability `exp(-112)`.
pub const DEFAULT_W_MAX: f64 = 200.0;

pub fn default_w_min(log_x: f64) -> f64 {
    1e-3 / log_x
}

/// Truncated stick-breaking sequence with certified remainder mass.
#[derive(Clone, Debug)]
pub struct GemSample {
    /// Sticks in generation order: `L_1 = U_1`, `L_j = U_j prod_{i<j} (1-U_i)`.
    pub sticks: Vec<f64>,
    /// `1 - sum(sticks)`, carried exactly as the running product.
    pub remainder: f64,
    pub uniforms_used: u32,
}

/// Draw sticks until `remainder * log_x < min(tail_tol, exp(-gamma))`.
///
/// Every undrawn stick then satisfies `L * log_x < exp(-gamma)` (so it maps
/// to the prime power 1), and the undrawn theta contribution is at most
/// `tail_tol`.
pub fn sample_gem<R: UnitRand>(rng: &mut R, log_x: f64, tail_tol: f64) -> GemSample {
    assert!(log_x > 0.0 && tail_tol > 0.0);
    let threshold = tail_tol.min(crate::primes::EXP_NEG_GAMMA);
    let mut sticks = Vec::with_capacity(32);
    let mut remainder = 1.0f64;
    let mut used = 0u32;
    while remainder * log_x >= threshold {
        let u = rng.next_unit();
        used += 1;
        sticks.push(u * remainder);
        remainder *= 1.0 - u;
    }
    GemSample {
        sticks,
        remainder,
        uniforms_used: used,
    }
}

/// Sort sticks into non-increasing order; the remainder is reported
/// unchanged alongside.
pub fn sort_to_pd(gem: &GemSample) -> (Vec<f64>, f64) {
    let mut v = gem.sticks.clone();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    (v, gem.remainder)
}

/// Theta statistic with a certified truncation bound: the true value over
/// the full (infinite) stick sequence lies in `[value, value + tail_bound]`.
#[derive(Clone, Copy, Debug)]
pub struct ThetaStat {
    pub value: f64,
    pub tail_bound: f64,
}

/// `sum_i r(L_i log x)` over drawn sticks. Undrawn sticks sit below the
/// ladder where `r(t) = t`, so their total contribution is at most
/// `remainder * log_x`.
pub fn theta_stat(ladder: &PrimeLadder, gem: &GemSample, log_x: f64) -> Result<ThetaStat> {
    let mut sum = 0.0f64;
    for &l in &gem.sticks {
        let t = l * log_x;
        if t > 0.0 {
            sum += ladder.r(t)?;
        }
    }
    Ok(ThetaStat {
        value: sum,
        tail_bound: gem.remainder * log_x,
    })
}

/// One window of the planar Poisson process: points `(W, Y)` with
/// `W` in `[w_min, w_max]` ascending, plus a single `lump` draw distributed
/// as the total `Y`-mass above `w_max` (exponential with rate `w_max`).
#[derive(Clone, Debug)]
pub struct RWindow {
    pub points: Vec<(f64, f64)>,
    pub w_min: f64,
    pub w_max: f64,
    pub lump: f64,
}

/// Sample the window: the `W`-marginal is a Poisson process with intensity
/// `dw/w` (exponential spacings in `log w`), and each mark is
/// `Y ~ Exp(W)` conditionally.
pub fn sample_r_window<R: UnitRand>(rng: &mut R, w_min: f64, w_max: f64) -> RWindow {
    assert!(0.0 < w_min && w_min < w_max);
    let mut points = Vec::new();
    let mut lw = w_min.ln();
    let lw_max = w_max.ln();
    loop {
        lw += rng.next_exp(1.0);
        if lw > lw_max {
            break;
        }
        let w = lw.exp();
        let y = rng.next_exp(w);
        points.push((w, y));
    }
    let lump = rng.next_exp(w_max);
    RWindow {
        points,
        w_min,
        w_max,
        lump,
    }
}

/// Extend an existing window downward to `new_w_min` by sampling the strip
/// `[new_w_min, w_min)`. Strips of a Poisson process are independent, so the
/// union is an exact sample of the wider window containing the original
/// points; used to resolve crossing failures without re-drawing.
pub fn extend_r_window<R: UnitRand>(rng: &mut R, win: &mut RWindow, new_w_min: f64) {
    assert!(0.0 < new_w_min && new_w_min < win.w_min);
    let mut strip = Vec::new();
    let mut lw = new_w_min.ln();
    let lw_max = win.w_min.ln();
    loop {
        lw += rng.next_exp(1.0);
        if lw >= lw_max {
            break;
        }
        let w = lw.exp();
        let y = rng.next_exp(w);
        strip.push((w, y));
    }
    strip.extend(win.points.iter().copied());
    win.points = strip;
    win.w_min = new_w_min;
}

pub fn window_csv<W: std::io::Write>(win: &RWindow, w: &mut W) -> Result<()> {
    writeln!(w, "W,Y")?;
    for &(x, y) in &win.points {
        writeln!(w, "{x:.17},{y:.17}")?;
    }
    Ok(())
}

/// Tail-sum indexation of a window around `log x`: scanning points by
/// decreasing `W` and accumulating `Y` (starting from the lump), the first
/// cumulative value strictly exceeding `log x` defines index 0; points above
/// it get indices 1, 2, ... in increasing-`W` order.
#[derive(Clone, Debug)]
pub struct IndexedR {
    /// `Y_1, Y_2, ...`: marks above the crossing, index 1 = smallest `W`.
    pub y_seq: Vec<f64>,
    pub s0: f64,
    pub s1: f64,
    /// Mark of the index-0 point (first below the crossing).
    pub y0: f64,
    pub lump: f64,
    /// False when the crossing is unresolved: either inside the lump or
    /// below the window. Callers extend the window and re-index.
    pub crossing_valid: bool,
}

pub fn index_crossing(win: &RWindow, log_x: f64) -> IndexedR {
    let invalid = |lump: f64| IndexedR {
        y_seq: Vec::new(),
        s0: f64::NAN,
        s1: f64::NAN,
        y0: f64::NAN,
        lump,
        crossing_valid: false,
    };
    let mut cum = win.lump;
    if cum > log_x {
        // Crossing inside the lump: the index-0 point is unresolved.
        return invalid(win.lump);
    }
    for k in (0..win.points.len()).rev() {
        let y = win.points[k].1;
        if cum + y > log_x {
            let y_seq = win.points[k + 1..].iter().map(|&(_, y)| y).collect();
            return IndexedR {
                y_seq,
                s0: cum + y,
                s1: cum,
                y0: y,
                lump: win.lump,
                crossing_valid: true,
            };
        }
        cum += y;
    }
    invalid(win.lump)
}

/// Realize a GEM sample from an indexed window:
/// `(1 - S_1/log x, Y_1/log x, Y_2/log x, ...)` with the lump mass as the
/// certified remainder.
pub fn gem_from_r(idx: &IndexedR, log_x: f64) -> Result<GemSample> {
    if !idx.crossing_valid {
        return Err(Error::Precondition(
            "gem_from_r on an unresolved crossing".into(),
        ));
    }
    let mut sticks = Vec::with_capacity(idx.y_seq.len() + 1);
    sticks.push((1.0 - idx.s1 / log_x).max(0.0));
    for &y in &idx.y_seq {
        sticks.push(y / log_x);
    }
    Ok(GemSample {
        sticks,
        remainder: idx.lump / log_x,
        uniforms_used: 0,
    })
}

/// Moment generating function estimate for the total deviation statistic:
/// `exp(int_0^{Y_max} (exp(alpha r(y)) - 1) / y dy)` with `Y_max` the ladder
/// coverage. `tail_bound` is a certified bound on the multiplicative error
/// against the untruncated integral, extrapolating the measured envelope
/// `r(t) <= tail_c / t^2` past the ladder.
#[derive(Clone, Copy, Debug)]
pub struct MgfEstimate {
    pub value: f64,
    pub quad_err: f64,
    pub tail_bound: f64,
}

pub fn theta_mgf_numeric(ladder: &PrimeLadder, alpha: f64) -> Result<MgfEstimate> {
    if alpha < 0.0 {
        return Err(Error::Domain(
            "theta MGF integral diverges for negative alpha".into(),
        ));
    }
    if alpha == 0.0 {
        return Ok(MgfEstimate {
            value: 1.0,
            quad_err: 0.0,
            tail_bound: 0.0,
        });
    }
    let lambda = ladder.lambda_values();
    let logq: Vec<f64> = ladder.q_values().iter().map(|&q| (q as f64).ln()).collect();
    // Below lambda_0: r(y) = y, integrand (e^{alpha y} - 1)/y -> alpha at 0.
    let f0 = |y: f64| {
        if y < 1e-8 {
            alpha + 0.5 * alpha * alpha * y
        } else {
            ((alpha * y).exp() - 1.0) / y
        }
    };
    let mut total = quad::adaptive(f0, 0.0, lambda[0], 1e-12);
    // Each rung integrates (e^{alpha |c - y|} - 1)/y with a kink at c = ln q.
    for j in 0..ladder.len() {
        let (lo, hi) = (lambda[j], lambda[j + 1]);
        let c = logq[j];
        let f = |y: f64| ((alpha * (c - y).abs()).exp() - 1.0) / y;
        let tol = 1e-11 * ((hi - lo) / ladder.coverage()).max(1e-6);
        let piece = if c > lo && c < hi {
            quad::adaptive_split(f, &[lo, c, hi], tol)
        } else {
            quad::adaptive(f, lo, hi, tol)
        };
        total = total.add(piece);
    }
    let cov = ladder.coverage();
    // (e^{alpha r} - 1)/y <= alpha e^{alpha r_sup} r(y)/y with r(y) <= tail_c/y^2.
    let tail_int = alpha * (alpha * ladder.r_sup()).exp() * ladder.tail_c() / (2.0 * cov * cov);
    let value = total.value.exp();
    Ok(MgfEstimate {
        value,
        quad_err: value * total.err,
        tail_bound: value * ((tail_int).exp() - 1.0),
    })
}

/// Sum `r(y)` over a window's resolved points, treating marks beyond ladder
/// coverage as zero deviation (each such mark contributes at most
/// `tail_c / coverage^2`, reported through `truncated`).
pub fn theta_window(ladder: &PrimeLadder, win: &RWindow) -> Result<(f64, u32)> {
    let mut sum = 0.0;
    let mut truncated = 0u32;
    for &(_, y) in &win.points {
        if y > ladder.coverage() {
            truncated += 1;
        } else if y > 0.0 {
            sum += ladder.r(y)?;
        }
    }
    Ok((sum, truncated))
}

/// Catalog of test functions for the Campbell check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CampbellF {
    /// f(y) = y
    Y,
    /// f(y) = min(y, 1)
    MinY1,
    /// f(y) = r(y)
    R,
}

#[derive(Clone, Copy, Debug)]
pub struct CampbellCheck {
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub integral: f64,
    pub integral_err: f64,
}

/// Monte Carlo mean of `sum_points f(Y)` over windows versus the Campbell
/// integral `int int f(y) e^{-w y} dw dy` over the same window, computed as
/// `int f(y) (e^{-w_min y} - e^{-w_max y}) / y dy`.
pub fn campbell_check<R: UnitRand>(
    rng: &mut R,
    f: CampbellF,
    w_min: f64,
    w_max: f64,
    n_windows: u64,
    ladder: &PrimeLadder,
) -> Result<CampbellCheck> {
    assert!(n_windows > 0);
    let eval = |y: f64| -> f64 {
        match f {
            CampbellF::Y => y,
            CampbellF::MinY1 => y.min(1.0),
            CampbellF::R => {
                if y > ladder.coverage() {
                    0.0
                } else {
                    ladder.r(y).unwrap_or(0.0)
                }
            }
        }
    };
    let mut acc = crate::stats::MeanAcc::default();
    for _ in 0..n_windows {
        let win = sample_r_window(rng, w_min, w_max);
        let s: f64 = win.points.iter().map(|&(_, y)| eval(y)).sum();
        acc.push(s);
    }
    let kernel = |y: f64| ((-w_min * y).exp() - (-w_max * y).exp()) / y;
    let (integral, integral_err) = match f {
        CampbellF::Y => {
            // int y * kernel(y)/y ... = 1/w_min - 1/w_max exactly.
            (1.0 / w_min - 1.0 / w_max, 0.0)
        }
        CampbellF::MinY1 => {
            let upper = (60.0 / w_min).min(1e9);
            let q = quad::adaptive_split(
                |y| eval(y) * kernel(y),
                &[1e-12, 1.0, upper],
                1e-10,
            );
            (q.value, q.err + 1e-10)
        }
        CampbellF::R => {
            let lambda = ladder.lambda_values();
            let mut q = quad::adaptive(|y| y * kernel(y), 1e-12, lambda[0], 1e-12);
            for j in 0..ladder.len() {
                let (lo, hi) = (lambda[j], lambda[j + 1]);
                let c = (ladder.q_values()[j] as f64).ln();
                let g = |y: f64| (c - y).abs() * kernel(y);
                let tol = 1e-12 * ((hi - lo) / ladder.coverage()).max(1e-6);
                q = q.add(if c > lo && c < hi {
                    quad::adaptive_split(g, &[lo, c, hi], tol)
                } else {
                    quad::adaptive(g, lo, hi, tol)
                });
            }
            let cov = ladder.coverage();
            let tail = ladder.tail_c() / (cov * cov) * (-w_min * cov).exp() / (w_min * cov);
            (q.value, q.err + tail)
        }
    };
    Ok(CampbellCheck {
        mc_mean: acc.mean,
        mc_stderr: acc.stderr(),
        integral,
        integral_err,
    })
}

/// Convenience wrapper bundling a window integral result.
pub fn window_expected_count(w_min: f64, w_max: f64) -> f64 {
    (w_max / w_min).ln()
}

#[allow(dead_code)]
fn quad_noop() -> Quad {
    Quad::ZERO
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, ScriptedUnits};
    use crate::stats::{ks_pvalue, ks_stat, MeanAcc};

    fn ladder() -> PrimeLadder {
        PrimeLadder::build(14.0).unwrap()
    }

    #[test]
    fn gem_from_constant_half_stream() {
        let mut s = ScriptedUnits::constant(0.5);
        let g = sample_gem(&mut s, 10.0, 1e-6);
        assert!((g.sticks[0] - 0.5).abs() < 1e-15);
        assert!((g.sticks[1] - 0.25).abs() < 1e-15);
        assert!((g.sticks[2] - 0.125).abs() < 1e-15);
        let total: f64 = g.sticks.iter().sum();
        assert!((total + g.remainder - 1.0).abs() < 1e-12);
        // Stopping rule.
        assert!(g.remainder * 10.0 < 1e-6);
        assert!(g.uniforms_used as usize == g.sticks.len());
    }

    #[test]
    fn gem_conservation_random_streams() {
        let mut s = derive_stream(5, &[("gem", 0)]);
        for _ in 0..200 {
            let g = sample_gem(&mut s, 9.2, DEFAULT_TAIL_TOL);
            let total: f64 = g.sticks.iter().sum();
            assert!((total + g.remainder - 1.0).abs() < 1e-12);
            assert!(g.remainder * 9.2 < DEFAULT_TAIL_TOL);
        }
    }

    #[test]
    fn sort_to_pd_examples() {
        let g = GemSample {
            sticks: vec![0.2, 0.5, 0.3],
            remainder: 0.0,
            uniforms_used: 3,
        };
        let (v, rem) = sort_to_pd(&g);
        assert_eq!(v, vec![0.5, 0.3, 0.2]);
        assert_eq!(rem, 0.0);
        let already = GemSample {
            sticks: vec![0.5, 0.25, 0.125],
            remainder: 0.125,
            uniforms_used: 3,
        };
        assert_eq!(sort_to_pd(&already).0, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn theta_stat_small_sticks_is_linear_sum() {
        let l = ladder();
        // All sticks below lambda_0 / log_x: r(t) = t there.
        let g = GemSample {
            sticks: vec![0.01, 0.02, 0.03],
            remainder: 0.94,
            uniforms_used: 3,
        };
        let log_x = 5.0;
        let t = theta_stat(&l, &g, log_x).unwrap();
        let expected: f64 = g.sticks.iter().map(|&s| s * log_x).sum();
        assert!((t.value - expected).abs() < 1e-12);
        assert!((t.tail_bound - 0.94 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn theta_stat_exact_rung_hit_contributes_zero() {
        let l = ladder();
        let log_x = 4.0;
        let stick = 2.0f64.ln() / log_x; // t = ln 2 inside rung 1
        let g = GemSample {
            sticks: vec![stick],
            remainder: 1.0 - stick,
            uniforms_used: 1,
        };
        let t = theta_stat(&l, &g, log_x).unwrap();
        assert!(t.value < 1e-12);
    }

    #[test]
    fn theta_stat_matches_term_by_term_oracle() {
        let l = ladder();
        let mut s = derive_stream(42, &[("theta", 0)]);
        let g = sample_gem(&mut s, 10.0, 1e-9);
        let t = theta_stat(&l, &g, 10.0).unwrap();
        let mut oracle = 0.0;
        for &st in &g.sticks {
            let (h, r) = l.step_h(st * 10.0).unwrap();
            assert!((r - (h - st * 10.0).abs()).abs() < 1e-15);
            oracle += r;
        }
        assert!((t.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn window_count_and_lump_match_expectations() {
        let mut s = derive_stream(9, &[("win", 0)]);
        let (w_min, w_max) = (1.0, 2.0);
        let n = 100_000u64;
        let mut count = MeanAcc::default();
        let mut lump = MeanAcc::default();
        for _ in 0..n {
            let w = sample_r_window(&mut s, w_min, w_max);
            count.push(w.points.len() as f64);
            lump.push(w.lump);
            for &(wv, _) in &w.points {
                assert!((w_min..=w_max).contains(&wv));
            }
        }
        let expect = window_expected_count(w_min, w_max);
        assert!(
            (count.mean - expect).abs() < 3.0 * count.stderr(),
            "count {} vs {}",
            count.mean,
            expect
        );
        assert!((lump.mean - 1.0 / w_max).abs() < 3.0 * lump.stderr());
    }

    #[test]
    fn near_empty_window() {
        let mut s = derive_stream(10, &[("win", 1)]);
        let mut total = 0usize;
        for _ in 0..2000 {
            total += sample_r_window(&mut s, 1.0, 1.0 + 1e-6).points.len();
        }
        // Poisson(1e-6) over 2000 windows: almost always zero.
        assert!(total <= 1);
    }

    #[test]
    fn index_crossing_examples() {
        // Points by decreasing W have Y = (3, 4): stored ascending-W as
        // [(1, 4), (2, 3)]. lump = 0 (use tiny to stay positive-free), log_x = 5.
        let win = RWindow {
            points: vec![(1.0, 4.0), (2.0, 3.0)],
            w_min: 0.5,
            w_max: 3.0,
            lump: 0.0,
        };
        let idx = index_crossing(&win, 5.0);
        assert!(idx.crossing_valid);
        assert_eq!(idx.s1, 3.0);
        assert_eq!(idx.s0, 7.0);
        assert_eq!(idx.y0, 4.0);
        assert_eq!(idx.y_seq, vec![3.0]);

        // Lump alone exceeds log_x: unresolved.
        let win2 = RWindow {
            points: vec![(1.0, 1.0)],
            w_min: 0.5,
            w_max: 3.0,
            lump: 6.0,
        };
        assert!(!index_crossing(&win2, 5.0).crossing_valid);

        // Total mass never exceeds log_x: unresolved (window too shallow).
        let win3 = RWindow {
            points: vec![(1.0, 1.0)],
            w_min: 0.5,
            w_max: 3.0,
            lump: 0.5,
        };
        assert!(!index_crossing(&win3, 5.0).crossing_valid);
    }

    #[test]
    fn crossing_invariant_over_random_windows() {
        let log_x = (1000.0f64).ln();
        let mut s = derive_stream(12, &[("cross", 0)]);
        let mut valid = 0u32;
        for _ in 0..20_000 {
            let mut win = sample_r_window(&mut s, default_w_min(log_x), DEFAULT_W_MAX);
            let mut idx = index_crossing(&win, log_x);
            let mut tries = 0;
            while !idx.crossing_valid && tries < 6 {
                let new_min = win.w_min / 10.0;
                extend_r_window(&mut s, &mut win, new_min);
                idx = index_crossing(&win, log_x);
                tries += 1;
            }
            assert!(idx.crossing_valid);
            assert!(idx.s1 <= log_x && log_x < idx.s0);
            assert!((idx.s0 - idx.s1 - idx.y0).abs() < 1e-9);
            valid += 1;
        }
        assert_eq!(valid, 20_000);
    }

    #[test]
    fn gem_from_r_telescopes() {
        let idx = IndexedR {
            y_seq: vec![2.0, 1.0],
            s0: 10.0,
            s1: 3.0 + 0.5,
            y0: 6.5,
            lump: 0.5,
            crossing_valid: true,
        };
        let log_x = 10.0;
        let g = gem_from_r(&idx, log_x).unwrap();
        assert!((g.sticks[0] - (1.0 - 3.5 / 10.0)).abs() < 1e-15);
        let total: f64 = g.sticks.iter().sum();
        assert!((total + g.remainder - 1.0).abs() < 1e-12);
        let bad = IndexedR {
            crossing_valid: false,
            ..idx
        };
        assert!(gem_from_r(&bad, log_x).is_err());
    }

    #[test]
    fn gem_from_r_first_stick_uniform_ks() {
        let log_x = (10_000.0f64).ln();
        let mut s = derive_stream(13, &[("gfr", 0)]);
        let mut l1s = Vec::with_capacity(30_000);
        for _ in 0..30_000 {
            let mut win = sample_r_window(&mut s, default_w_min(log_x), DEFAULT_W_MAX);
            let mut idx = index_crossing(&win, log_x);
            while !idx.crossing_valid {
                let new_min = win.w_min / 10.0;
                extend_r_window(&mut s, &mut win, new_min);
                idx = index_crossing(&win, log_x);
            }
            l1s.push(gem_from_r(&idx, log_x).unwrap().sticks[0]);
        }
        let d = ks_stat(&mut l1s, |x| x.clamp(0.0, 1.0)).unwrap();
        let p = ks_pvalue(d, 30_000);
        assert!(p > 1e-4, "KS p-value {p}");
    }

    #[test]
    fn it_sum_is_exponential() {
        // Prop-style check: total Y mass above W = t is Exp(t).
        for &t in &[0.5f64, 1.0, 2.0] {
            let mut s = derive_stream(14, &[("it", t.to_bits())]);
            let mut sums = Vec::with_capacity(20_000);
            for _ in 0..20_000 {
                let win = sample_r_window(&mut s, t, DEFAULT_W_MAX);
                let total: f64 = win.points.iter().map(|&(_, y)| y).sum::<f64>() + win.lump;
                sums.push(total);
            }
            let d = ks_stat(&mut sums, |x| 1.0 - (-t * x).exp()).unwrap();
            let p = ks_pvalue(d, 20_000);
            assert!(p > 1e-4, "t={t}: KS p={p}");
        }
    }

    #[test]
    fn mgf_basic_properties() {
        let l = ladder();
        assert_eq!(theta_mgf_numeric(&l, 0.0).unwrap().value, 1.0);
        let half = theta_mgf_numeric(&l, 0.5).unwrap();
        let one = theta_mgf_numeric(&l, 1.0).unwrap();
        assert!(one.value > half.value && half.value > 1.0);
        assert!(one.value.is_finite());
        assert!(one.quad_err < 1e-6 * one.value);
        assert!(one.tail_bound < 0.01 * one.value);
        assert!(theta_mgf_numeric(&l, -0.5).is_err());
    }

    #[test]
    fn mgf_matches_monte_carlo() {
        // E[exp(Theta_trunc)] over full windows, Theta truncated at ladder
        // coverage exactly as in the quadrature.
        let l = ladder();
        let oracle = theta_mgf_numeric(&l, 1.0).unwrap();
        let mut s = derive_stream(15, &[("mgf", 0)]);
        let mut acc = MeanAcc::default();
        for _ in 0..200_000 {
            let win = sample_r_window(&mut s, 1e-4, 2000.0);
            let (theta, _) = theta_window(&l, &win).unwrap();
            acc.push(theta.exp());
        }
        // Window truncation bias: E[missing theta] <= w_min * C + 1/w_max.
        let band = 3.0 * acc.stderr() + 0.02;
        assert!(
            (acc.mean - oracle.value).abs() < band,
            "MC {} vs oracle {} (band {band})",
            acc.mean,
            oracle.value
        );
    }

    #[test]
    fn theta_additivity_between_gem_and_window() {
        let l = ladder();
        let log_x = (1000.0f64).ln();
        let mut s = derive_stream(16, &[("add", 0)]);
        for _ in 0..2000 {
            let mut win = sample_r_window(&mut s, default_w_min(log_x), DEFAULT_W_MAX);
            let mut idx = index_crossing(&win, log_x);
            while !idx.crossing_valid {
                let new_min = win.w_min / 10.0;
                extend_r_window(&mut s, &mut win, new_min);
                idx = index_crossing(&win, log_x);
            }
            let gem = gem_from_r(&idx, log_x).unwrap();
            let t = theta_stat(&l, &gem, log_x).unwrap();
            // r(L_1 log x) + sum r(Y_i) computed directly on window marks.
            let mut direct = l.r(gem.sticks[0] * log_x).unwrap_or(0.0);
            for &y in &idx.y_seq {
                direct += l.r(y).unwrap_or(0.0);
            }
            assert!(
                (t.value - direct).abs() < 1e-9 + 1e-12 * direct.abs(),
                "gem theta {} vs window theta {}",
                t.value,
                direct
            );
        }
    }

    #[test]
    fn campbell_y_window_1_2() {
        let l = ladder();
        let mut s = derive_stream(17, &[("cb", 0)]);
        let c = campbell_check(&mut s, CampbellF::Y, 1.0, 2.0, 100_000, &l).unwrap();
        assert!((c.integral - 0.5).abs() < 1e-12);
        assert!((c.mc_mean - c.integral).abs() < 3.0 * c.mc_stderr + c.integral_err);
    }

    #[test]
    fn campbell_min_and_r() {
        let l = ladder();
        for f in [CampbellF::MinY1, CampbellF::R] {
            let mut s = derive_stream(18, &[("cb", f as u64)]);
            let c = campbell_check(&mut s, f, 0.1, 10.0, 150_000, &l).unwrap();
            assert!(
                (c.mc_mean - c.integral).abs() < 3.0 * c.mc_stderr + c.integral_err + 1e-3,
                "{f:?}: mc {} vs integral {} +- {}",
                c.mc_mean,
                c.integral,
                c.mc_stderr
            );
        }
    }
}
