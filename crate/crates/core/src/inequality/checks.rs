//! The individual inequality checks.

use ndarray::{ArrayD, IxDyn};

use super::sobolev::{hs_norm, level_sq, Nodal};
use super::{RatioAccumulator, RatioReport, SampleSpec};
use crate::error::{Error, Result};
use crate::field::{cubic_expansion, forward, SpectralField, VectorField};

/// `epsilon` in `|grad v|^2 <= C_eps |v|^2 + eps |lap v|^2`.
pub const EQ2_EPSILON: f64 = 0.1;
/// Bound asserted for the zeroth-order cubic difference.
pub const CUBIC_L2_CONSTANT: f64 = 2.0;

/// `(|lap v|^2 / (|grad v| |grad lap v|), |grad lap v|^2 / (|lap v| |lap^2 v|))`
/// as `(lhs, rhs)` pairs.
pub fn interp_sides(v: &SpectralField<f64>) -> [(f64, f64); 2] {
    let l: Vec<f64> = (0..=4).map(|j| level_sq(v, j)).collect();
    [(l[2], (l[1] * l[3]).sqrt()), (l[3], (l[2] * l[4]).sqrt())]
}

/// `eq3: |lap v|^2 <= |grad v| |grad lap v|` and
/// `eq4: |grad lap v|^2 <= |lap v| |lap^2 v|`, both with constant one.
pub fn check_interp(spec: &SampleSpec) -> Result<Vec<RatioReport>> {
    let mut eq3 = RatioAccumulator::new("eq3", Some(1.0));
    let mut eq4 = RatioAccumulator::new("eq4", Some(1.0));
    for i in 0..spec.count {
        let [a, b] = interp_sides(&spec.sample(i)?);
        eq3.push(i, a.0, a.1);
        eq4.push(i, b.0, b.1);
    }
    let seed = |i: usize| spec.sample_seed(i as u64);
    Ok(vec![eq3.finish(seed), eq4.finish(seed)])
}

/// Empirical constants of the elliptic-regularity bounds:
///
/// * `eq1: |v|_{H^2}^2 / (|v|^2 + |lap v|^2)`, at most 3/2 on cosine modes
/// * `eq2: (|grad v|^2 - eps |lap v|^2)^+ / |v|^2`, at most `1 / (4 eps)`
/// * `eq5: |v|_{H^3}^2 / (|v|^2 + |grad v|^2 + |grad lap v|^2)`
/// * `eq6: |v|_{H^4}^2 / (|v|^2 + |lap v|^2 + |lap^2 v|^2)`
/// * `eq8: |v|_{H^5}^2 / (|v|^2 + |grad v|^2 + |grad lap v|^2 + |grad lap^2 v|^2)`
pub fn check_elliptic(spec: &SampleSpec) -> Result<Vec<RatioReport>> {
    let mut acc = [
        RatioAccumulator::new("eq1", Some(1.5)),
        RatioAccumulator::new("eq2", Some(0.25 / EQ2_EPSILON)),
        RatioAccumulator::new("eq5", None),
        RatioAccumulator::new("eq6", None),
        RatioAccumulator::new("eq8", None),
    ];
    for i in 0..spec.count {
        let v = spec.sample(i)?;
        let l: Vec<f64> = (0..=5).map(|j| level_sq(&v, j)).collect();
        let h = |s: usize| l[..=s].iter().sum::<f64>();
        acc[0].push(i, h(2), l[0] + l[2]);
        acc[1].push(i, (l[1] - EQ2_EPSILON * l[2]).max(0.0), l[0]);
        acc[2].push(i, h(3), l[0] + l[1] + l[3]);
        acc[3].push(i, h(4), l[0] + l[2] + l[4]);
        acc[4].push(i, h(5), l[0] + l[1] + l[3] + l[5]);
    }
    let seed = |i: usize| spec.sample_seed(i as u64);
    Ok(acc.into_iter().map(|a| a.finish(seed)).collect())
}

/// `| |u| |v| |_{H^s} / (|u|_{H^s} |v|_{H^s})`; the scalar product is
/// sampled on the dealiasing grid and expanded there.
pub fn product_sides(u: &SpectralField<f64>, v: &SpectralField<f64>, s: u32) -> Result<(f64, f64)> {
    let (nu, nv) = (Nodal::new(u, 0)?, Nodal::new(v, 0)?);
    let n = nu.nodes();
    let (a, b) = (nu.values(), nv.values());
    let mut data = vec![0.0; 3 * n];
    for i in 0..n {
        let la = (0..3).map(|c| a[c * n + i].powi(2)).sum::<f64>().sqrt();
        let lb = (0..3).map(|c| b[c * n + i].powi(2)).sum::<f64>().sqrt();
        data[i] = la * lb;
    }
    let shape: Vec<usize> = std::iter::once(3).chain(nu.grid.points().iter().copied()).collect();
    let w = forward(&VectorField::new(
        nu.grid.clone(),
        ArrayD::from_shape_vec(IxDyn(&shape), data).expect("field shape"),
    )?)?;
    Ok((hs_norm(&w, s), hs_norm(u, s) * hs_norm(v, s)))
}

/// Product estimate `| |u||v| |_{H^s} <= C |u|_{H^s} |v|_{H^s}` for integer `s > d/2`.
pub fn check_product_hs(spec: &SampleSpec, s: u32) -> Result<RatioReport> {
    let d = spec.grid.dim() as u32;
    if 2 * s <= d {
        return Err(Error::InvalidParameter(format!(
            "product estimate needs s > d/2, got s = {s}, d = {d}"
        )));
    }
    let mut acc = RatioAccumulator::new(format!("eq7_s{s}"), None);
    for i in 0..spec.count {
        let (u, v) = spec.pair(i)?;
        let (lhs, rhs) = product_sides(&u, &v, s)?;
        acc.push(i, lhs, rhs);
    }
    Ok(acc.finish(|i| spec.sample_seed(2 * i as u64)))
}

/// Sides of the cubic-difference bound of order `k`:
///
/// * `k = 0`: `| |u|^2u - |v|^2v |` against `(|u|_inf^2 + |v|_inf^2) |u - v|`
/// * `k = 1`: `|D(...)|` against `(|u|_{H^1} + |v|_{H^1})(|u|_{H^2} + |v|_{H^2}) |u - v|_{H^1}`
/// * `k = 2`: `|D^2(...)|` against `(|u|_{H^2}^2 + |v|_{H^2}^2) |u - v|_{H^2}`
///
/// Order zero uses nodal quadrature on the dealiasing grid, so the pointwise
/// bound carries over exactly; higher orders use the exact cubic expansion.
pub fn cubic_lipschitz_sides(u: &SpectralField<f64>, v: &SpectralField<f64>, k: u32) -> Result<(f64, f64)> {
    match k {
        0 => {
            let (nu, nv) = (Nodal::new(u, 0)?, Nodal::new(v, 0)?);
            let n = nu.nodes();
            let (a, b) = (nu.values(), nv.values());
            let (mut lhs, mut diff) = (0.0, 0.0);
            for i in 0..n {
                let x: [f64; 3] = std::array::from_fn(|c| a[c * n + i]);
                let y: [f64; 3] = std::array::from_fn(|c| b[c * n + i]);
                let (sx, sy) = (
                    x.iter().map(|t| t * t).sum::<f64>(),
                    y.iter().map(|t| t * t).sum::<f64>(),
                );
                for c in 0..3 {
                    lhs += (sx * x[c] - sy * y[c]).powi(2);
                    diff += (x[c] - y[c]).powi(2);
                }
            }
            let h = nu.grid.cell_volume();
            let (su, sv) = (nu.sup(), nv.sup());
            Ok(((lhs * h).sqrt(), (su * su + sv * sv) * (diff * h).sqrt()))
        }
        1 | 2 => {
            let diff = cubic_expansion(u)?.sub(&cubic_expansion(v)?);
            let lhs = level_sq(&diff, k).sqrt();
            let w = u.sub(v);
            let rhs = if k == 1 {
                (hs_norm(u, 1) + hs_norm(v, 1)) * (hs_norm(u, 2) + hs_norm(v, 2)) * hs_norm(&w, 1)
            } else {
                (hs_norm(u, 2).powi(2) + hs_norm(v, 2).powi(2)) * hs_norm(&w, 2)
            };
            Ok((lhs, rhs))
        }
        _ => Err(Error::InvalidParameter(format!(
            "cubic difference order {k} not in 0..=2"
        ))),
    }
}

pub fn check_cubic_lipschitz(spec: &SampleSpec, k: u32) -> Result<RatioReport> {
    let constant = (k == 0).then_some(CUBIC_L2_CONSTANT);
    let mut acc = RatioAccumulator::new(format!("cubic_diff_k{k}"), constant);
    for i in 0..spec.count {
        let (u, v) = spec.pair(i)?;
        let (lhs, rhs) = cubic_lipschitz_sides(&u, &v, k)?;
        acc.push(i, lhs, rhs);
    }
    Ok(acc.finish(|i| spec.sample_seed(2 * i as u64)))
}

/// `|u x D^k u - v x D^k v|` against `|u|_inf |D^k(u - v)| + | |u - v| |D^k v| |`,
/// all by nodal quadrature on the dealiasing grid.
pub fn cross_diff_sides(u: &SpectralField<f64>, v: &SpectralField<f64>, k: usize) -> Result<(f64, f64)> {
    let (nu, nv) = (Nodal::new(u, k)?, Nodal::new(v, k)?);
    let n = nu.nodes();
    let (a, b) = (nu.values(), nv.values());
    let (mut lhs, mut dw, mut wdv) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x: [f64; 3] = std::array::from_fn(|c| a[c * n + i]);
        let y: [f64; 3] = std::array::from_fn(|c| b[c * n + i]);
        let w2: f64 = (0..3).map(|c| (x[c] - y[c]).powi(2)).sum();
        for ((m, du), (_, dv)) in nu.tensors[k].iter().zip(&nv.tensors[k]) {
            let p: [f64; 3] = std::array::from_fn(|c| du[c * n + i]);
            let q: [f64; 3] = std::array::from_fn(|c| dv[c * n + i]);
            let cross = |s: [f64; 3], t: [f64; 3]| {
                [
                    s[1] * t[2] - s[2] * t[1],
                    s[2] * t[0] - s[0] * t[2],
                    s[0] * t[1] - s[1] * t[0],
                ]
            };
            let (cu, cv) = (cross(x, p), cross(y, q));
            lhs += m * (0..3).map(|c| (cu[c] - cv[c]).powi(2)).sum::<f64>();
            dw += m * (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>();
            wdv += m * w2 * q.iter().map(|t| t * t).sum::<f64>();
        }
    }
    let h = nu.grid.cell_volume();
    Ok(((lhs * h).sqrt(), nu.sup() * (dw * h).sqrt() + (wdv * h).sqrt()))
}

pub fn check_cross_diff(spec: &SampleSpec, k: usize) -> Result<RatioReport> {
    let mut acc = RatioAccumulator::new(format!("cross_diff_k{k}"), Some(1.0));
    for i in 0..spec.count {
        let (u, v) = spec.pair(i)?;
        let (lhs, rhs) = cross_diff_sides(&u, &v, k)?;
        acc.push(i, lhs, rhs);
    }
    Ok(acc.finish(|i| spec.sample_seed(2 * i as u64)))
}

#[cfg(test)]
mod tests {
    use super::super::AmplitudeLaw;
    use super::*;
    use crate::grid::{eigenvalue, GridSpec};

    fn eigenmode(g: &GridSpec, k: &[usize], c: usize) -> SpectralField<f64> {
        let mut s = SpectralField::zeros(g.clone(), g.points()).unwrap();
        s.set_coeff(c, k, 0.7);
        s
    }

    #[test]
    fn interp_equality_on_eigenmodes() {
        let g = GridSpec::new(vec![1.0, 2.0], vec![8, 8], 2).unwrap();
        for k in [[1, 0], [3, 5], [7, 7]] {
            for (lhs, rhs) in interp_sides(&eigenmode(&g, &k, 1)) {
                assert!((lhs / rhs - 1.0).abs() < 1e-12);
            }
        }
        // Constant field: both sides vanish.
        for (lhs, rhs) in interp_sides(&eigenmode(&g, &[0, 0], 0)) {
            assert!(lhs < 1e-14 && rhs < 1e-14);
        }
    }

    #[test]
    fn random_interp_has_no_violations() {
        let spec = SampleSpec::unit_box(2, 8, 3, 200, AmplitudeLaw::Flat).unwrap();
        for r in check_interp(&spec).unwrap() {
            assert_eq!(r.violations, 0, "{r}");
            assert!(r.max_ratio <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn elliptic_eigen_ratio_closed_form() {
        let g = GridSpec::unit(1, 8).unwrap();
        for k in 0..8 {
            let v = eigenmode(&g, &[k], 2);
            let l = eigenvalue(g.extents(), &[k]);
            let spec_h2: f64 = (0..=2).map(|j| level_sq(&v, j)).sum();
            let ratio = spec_h2 / (level_sq(&v, 0) + level_sq(&v, 2));
            let want = (1.0 + l + l * l) / (1.0 + l * l);
            assert!((ratio - want).abs() < 1e-12 * want);
            assert!(ratio <= 1.5);
        }
        let spec = SampleSpec::unit_box(2, 8, 5, 100, AmplitudeLaw::Decay(1.0)).unwrap();
        for r in check_elliptic(&spec).unwrap() {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn product_with_positive_factor() {
        // u = (2 + 0.5 cos(pi x), 0, 0) is positive, v = (1, 0, 0): |u||v| = u.
        let g = GridSpec::unit(1, 8).unwrap();
        let mut u = SpectralField::zeros(g.clone(), &[8]).unwrap();
        u.set_coeff(0, &[0], 2.0);
        u.set_coeff(0, &[1], 0.5);
        let mut v = SpectralField::zeros(g, &[8]).unwrap();
        v.set_coeff(0, &[0], 1.0);
        let (lhs, rhs) = product_sides(&u, &v, 1).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
        let spec = SampleSpec::unit_box(2, 8, 1, 1, AmplitudeLaw::Flat).unwrap();
        assert!(check_product_hs(&spec, 1).is_err());
    }

    #[test]
    fn product_of_eigenmode_with_itself() {
        let g = GridSpec::unit(1, 8).unwrap();
        let mut u = SpectralField::zeros(g, &[8]).unwrap();
        u.set_coeff(0, &[1], 0.8);
        let (lhs, rhs) = product_sides(&u, &u, 2).unwrap();
        // u = 0.8 sqrt(2) cos(pi x), so |u|^2 = 0.64 (1 + cos(2 pi x)) = 0.64 e_0 + (0.64 / sqrt 2) e_2.
        let l2 = (2.0 * std::f64::consts::PI).powi(2);
        let (c0, c2) = (0.64, 0.64 / 2f64.sqrt());
        let want = (c0 * c0 + c2 * c2 * (1.0 + l2 + l2 * l2)).sqrt();
        assert!((lhs - want).abs() < 1e-12 * want);
        let l1 = std::f64::consts::PI.powi(2);
        assert!((rhs - 0.64 * (1.0 + l1 + l1 * l1)).abs() < 1e-10);
    }

    #[test]
    fn cubic_difference_cases() {
        let g = GridSpec::unit(1, 8).unwrap();
        let spec = SampleSpec::unit_box(1, 8, 9, 50, AmplitudeLaw::Decay(1.0)).unwrap();
        let u = spec.sample(0).unwrap();
        let zero = SpectralField::zeros(g, &[8]).unwrap();
        let (lhs, rhs) = cubic_lipschitz_sides(&u, &zero, 0).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-12));
        for k in 0..3 {
            let (lhs, rhs) = cubic_lipschitz_sides(&u, &u, k).unwrap();
            assert!(lhs < 1e-14 && rhs < 1e-14);
            let r = check_cubic_lipschitz(&spec, k).unwrap();
            assert!(r.passed(), "{r}");
        }
        assert!(cubic_lipschitz_sides(&u, &u, 3).is_err());
    }

    #[test]
    fn cross_difference_bound() {
        let spec = SampleSpec::unit_box(2, 6, 2, 30, AmplitudeLaw::Flat).unwrap();
        for k in 0..3 {
            let r = check_cross_diff(&spec, k).unwrap();
            assert_eq!(r.violations, 0, "{r}");
        }
        let u = spec.sample(0).unwrap();
        let zero = SpectralField::zeros(spec.grid.clone(), &[6, 6]).unwrap();
        let (lhs, rhs) = cross_diff_sides(&u, &zero, 2).unwrap();
        assert!(lhs <= rhs);
    }
}
