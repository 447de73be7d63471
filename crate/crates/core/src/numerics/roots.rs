//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Converged root of a bracketed scalar equation.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    /// Width of the final bracket.
    pub bracket: f64,
    pub iterations: usize,
}

/// Brent's method on `[a, b]` with `f(a)` and `f(b)` of opposite sign (or one
/// of them zero). Values of `f` may be infinite; interpolation steps are then
/// replaced by bisection. Stops when the bracket is narrower than `xtol`
/// (plus a few ulps of the iterate) or when `f` vanishes exactly.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Root> {
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "brent: [{a}, {b}] is not a bracket (f = {fa}, {fb})"
        )));
    }
    if fa == 0.0 {
        return Ok(Root { x: a, fx: 0.0, bracket: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: 0.0, bracket: 0.0, iterations: 0 });
    }

    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for iter in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, bracket: (c - b).abs(), iterations: iter });
        }
        let finite = fa.is_finite() && fb.is_finite() && fc.is_finite();
        if finite && e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::InvalidArgument(format!("brent: f({b}) is NaN")));
        }
    }
    Err(Error::Convergence { what: "brent root finder", iterations: max_iter })
}
