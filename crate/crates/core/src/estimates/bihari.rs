//! Local existence time from the Gronwall-Bihari inequality.

use crate::error::{Error, Result};

/// `T* = (y0 + c)^-4 / 4`, the closed form for `f(x) = x^5` and `int g = c`.
pub fn bihari_tstar(y0: f64, c: f64) -> Result<f64> {
    if !(y0 > 0.0) || !y0.is_finite() {
        return Err(Error::InvalidParameter(format!("y0 = {y0} must be positive")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c = {c} must be nonnegative")));
    }
    Ok((y0 + c).powi(-4) / 4.0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `F(x) = int_x^inf ds / f(s)`, with `s = x / sigma^2` mapping the tail to
/// `(0, 1]`. Infinite when the mapped integrand is not integrable at 0.
fn tail_integral(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let integrand = |sigma: f64| {
        let sigma = sigma.max(1e-12);
        2.0 * x / (sigma.powi(3) * f(x / (sigma * sigma)))
    };
    let total = adaptive_simpson(&integrand, 0.0, 1.0, 1e-16 * (1.0 + x.recip()));
    if 1e-8 * integrand(1e-8) > 1e-6 * total {
        return f64::INFINITY;
    }
    total
}

/// Solves `T = F(y0 + int_0^T g)` by bisection, where `F` is the tail
/// integral of `1/f`. `f` must be positive and non-decreasing, `g` nonnegative.
pub fn bihari_general(y0: f64, g: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    if !(y0 > 0.0) || !y0.is_finite() {
        return Err(Error::InvalidParameter(format!("y0 = {y0} must be positive")));
    }
    let mut prev = 0.0;
    for i in 0..=240 {
        let x = y0 * 10f64.powf(i as f64 / 20.0);
        let fx = f(x);
        if !(fx > 0.0) || !fx.is_finite() {
            return Err(Error::InvalidParameter(format!("f({x}) = {fx} is not positive")));
        }
        if fx < prev * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!("f decreases near {x}")));
        }
        prev = fx;
    }
    let big_f = |x: f64| tail_integral(&f, x);
    let upper = big_f(y0);
    if !upper.is_finite() {
        return Err(Error::InvalidParameter("int^inf 1/f diverges".into()));
    }
    for i in 0..=64 {
        let s = upper * i as f64 / 64.0;
        let gs = g(s);
        if !(gs >= 0.0) || !gs.is_finite() {
            return Err(Error::InvalidParameter(format!("g({s}) = {gs} is not nonnegative")));
        }
    }
    let h = |t: f64| t - big_f(y0 + adaptive_simpson(&g, 0.0, t, 1e-16));
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
