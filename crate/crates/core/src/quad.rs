//! Adaptive Simpson quadrature with explicit split points.
//!
//! The integrands in this crate are piecewise smooth with known breakpoints
//! (ladder rungs, kinks of `r`), so the caller supplies splits and each piece
//! is integrated adaptively with an embedded error estimate.

/// Integral value with an accumulated error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub err: f64,
}

impl Quad {
    pub const ZERO: Quad = Quad {
        value: 0.0,
        err: 0.0,
    };

    pub fn add(self, other: Quad) -> Quad {
        Quad {
            value: self.value + other.value,
            err: self.err + other.err,
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    (fa + 4.0 * fm + fb) * h / 6.0
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Quad {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Quad {
            value: left + right + delta / 15.0,
            err: delta.abs() / 15.0,
        };
    }
    let l = adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let r = adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    l.add(r)
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quad {
    if a >= b {
        return Quad::ZERO;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    adapt(&f, a, b, fa, fm, fb, whole, tol.max(1e-300), 48)
}

/// Adaptive Simpson over consecutive segments `[pts[0], pts[1]], ...`, with
/// the tolerance split evenly across segments.
pub fn adaptive_split<F: Fn(f64) -> f64>(f: F, pts: &[f64], tol: f64) -> Quad {
    let mut total = Quad::ZERO;
    let segs = pts.len().saturating_sub(1).max(1);
    for w in pts.windows(2) {
        total = total.add(adaptive(&f, w[0], w[1], tol / segs as f64));
    }
    total
}
