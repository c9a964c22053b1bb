//! Pointwise forms of the derivatives of the cubic `|v|^2 v`.
//!
//! With the column-wise conventions of [`super::ops`]:
//!
//! * `grad(|v|^2 v) = 2 v (v . grad v) + |v|^2 grad v`
//! * `lap(|v|^2 v) = 2 |grad v|^2 v + 2 (v . lap v) v + 4 grad v (v . grad v)^T + |v|^2 lap v`

use ndarray::{ArrayD, IxDyn};

use super::ops::jacobian_data;
use super::{forward, JacobianField, SpectralField, Transform, VectorField};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

fn check_grids(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch("operands live on different grids".into()));
    }
    Ok(())
}

/// Assembles `grad(|v|^2 v)` from nodal `v` and `grad v`.
pub fn nabla_cubic_from<T: Real>(u: &VectorField<T>, grad: &JacobianField<T>) -> Result<JacobianField<T>> {
    check_grids(u.grid(), grad.grid())?;
    let g = u.grid();
    let (n, d) = (g.node_count(), g.dim());
    let us = u.as_slice();
    let gs = grad.as_slice();
    let two = T::lit(2.0);
    let mut out = vec![T::zero(); 3 * d * n];
    for i in 0..n {
        let v = [us[i], us[n + i], us[2 * n + i]];
        let sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        for j in 0..d {
            let col = |c: usize| gs[(c * d + j) * n + i];
            let vdot = v[0] * col(0) + v[1] * col(1) + v[2] * col(2);
            for c in 0..3 {
                out[(c * d + j) * n + i] = two * v[c] * vdot + sq * col(c);
            }
        }
    }
    let shape: Vec<usize> = [3, d].iter().chain(g.points()).copied().collect();
    Ok(JacobianField::from_raw(
        g.clone(),
        ArrayD::from_shape_vec(IxDyn(&shape), out).expect("jacobian shape"),
    ))
}

/// Assembles `lap(|v|^2 v)` from nodal `v`, `grad v` and `lap v`.
pub fn delta_cubic_from<T: Real>(
    u: &VectorField<T>,
    grad: &JacobianField<T>,
    lap: &VectorField<T>,
) -> Result<VectorField<T>> {
    check_grids(u.grid(), grad.grid())?;
    check_grids(u.grid(), lap.grid())?;
    let g = u.grid();
    let (n, d) = (g.node_count(), g.dim());
    let (us, gs, ls) = (u.as_slice(), grad.as_slice(), lap.as_slice());
    let (two, four) = (T::lit(2.0), T::lit(4.0));
    let mut out = vec![T::zero(); 3 * n];
    for i in 0..n {
        let v = [us[i], us[n + i], us[2 * n + i]];
        let l = [ls[i], ls[n + i], ls[2 * n + i]];
        let sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let vl = v[0] * l[0] + v[1] * l[1] + v[2] * l[2];
        let mut grad_sq = T::zero();
        let mut transport = [T::zero(); 3];
        for j in 0..d {
            let col = [gs[j * n + i], gs[(d + j) * n + i], gs[(2 * d + j) * n + i]];
            let vdot = v[0] * col[0] + v[1] * col[1] + v[2] * col[2];
            for c in 0..3 {
                grad_sq += col[c] * col[c];
                transport[c] += col[c] * vdot;
            }
        }
        for c in 0..3 {
            out[c * n + i] = two * grad_sq * v[c] + two * vl * v[c] + four * transport[c] + sq * l[c];
        }
    }
    let shape: Vec<usize> = std::iter::once(3).chain(g.points().iter().copied()).collect();
    Ok(VectorField::from_raw(
        g.clone(),
        ArrayD::from_shape_vec(IxDyn(&shape), out).expect("vector shape"),
    ))
}

/// `grad(|u|^2 u)` by the identity, sampled on the dealiasing grid of `u`.
pub fn nabla_cubic<T: Real>(u: &VectorField<T>) -> Result<JacobianField<T>> {
    let s = forward(u)?;
    let pad = u.grid().padded();
    nabla_cubic_from(&s.values_on(&pad)?, &s.gradient_on(&pad)?)
}

/// `lap(|u|^2 u)` by the identity, sampled on the dealiasing grid of `u`.
pub fn delta_cubic<T: Real>(u: &VectorField<T>) -> Result<VectorField<T>> {
    let s = forward(u)?;
    let pad = u.grid().padded();
    delta_cubic_from(
        &s.values_on(&pad)?,
        &s.gradient_on(&pad)?,
        &s.laplacian().values_on(&pad)?,
    )
}

/// Exact cosine coefficients of the pointwise cubic `|u|^2 u`.
///
/// A band of `M` modes per axis produces a cubic of band `3M - 2`; the
/// product is sampled on a grid with at least that many nodes, where the
/// projection is exact. The result lives on that grid.
pub fn cubic_expansion<T: Real>(s: &SpectralField<T>) -> Result<SpectralField<T>> {
    let modes: Vec<usize> = s.modes().iter().map(|&m| 3 * m - 2).collect();
    let points: Vec<usize> = modes.iter().map(|&m| m.max(crate::grid::MIN_POINTS)).collect();
    let fine = s.grid().with_points(points)?;
    let v = s.values_on(&fine)?;
    let n = fine.node_count();
    let vs = v.as_slice();
    let mut prod = vs.to_vec();
    for i in 0..n {
        let sq = vs[i] * vs[i] + vs[n + i] * vs[n + i] + vs[2 * n + i] * vs[2 * n + i];
        for c in 0..3 {
            prod[c * n + i] = sq * vs[c * n + i];
        }
    }
    let shape = v.data().shape().to_vec();
    let t = Transform::<T>::new(fine.extents(), fine.points(), fine.points())?;
    let coeffs = t.analyze(&ArrayD::from_shape_vec(IxDyn(&shape), prod).expect("shape"));
    SpectralField::from_raw(fine.clone(), coeffs).truncated(&modes)
}

/// Largest normal component of `grad(|u|^2 u)` over sample points on every
/// face of the box. The cosine span makes this vanish up to rounding.
pub fn cubic_normal_flux_at_faces<T: Real>(s: &SpectralField<T>) -> Result<T> {
    let g = s.grid();
    let d = g.dim();
    let mut worst = T::zero();
    for axis in 0..d {
        let nodes: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                if j == axis {
                    vec![0.0, g.extents()[j]]
                } else {
                    (0..g.points()[j]).map(|i| g.coordinate(j, i)).collect()
                }
            })
            .collect();
        let t = Transform::<T>::at_nodes(g.extents(), s.modes(), &nodes)?;
        let values = t.synthesize(s.coeffs(), &vec![0; d]);
        let m: usize = values.len() / 3;
        let jac = jacobian_data(&t, s.coeffs());
        let vs = values.as_slice().expect("standard layout");
        let js = jac.as_slice().expect("standard layout");
        for i in 0..m {
            let v = [vs[i], vs[m + i], vs[2 * m + i]];
            let col = |c: usize| js[(c * d + axis) * m + i];
            let sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            let vdot = v[0] * col(0) + v[1] * col(1) + v[2] * col(2);
            for (c, &vc) in v.iter().enumerate() {
                let flux = T::lit(2.0) * vc * vdot + sq * col(c);
                worst = worst.max(flux.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::inverse;
    use crate::rng::CounterRng;

    fn random(grid: &GridSpec, modes: &[usize], seed: u64) -> SpectralField<f64> {
        SpectralField::random(grid.clone(), modes, &CounterRng::new(seed), 1.0, 1.0).unwrap()
    }

    fn direct_forms(s: &SpectralField<f64>, pad: &GridSpec) -> (JacobianField<f64>, VectorField<f64>) {
        let cubic = cubic_expansion(s).unwrap();
        (
            cubic.gradient_on(pad).unwrap(),
            cubic.laplacian().values_on(pad).unwrap(),
        )
    }

    #[test]
    fn constant_field_gives_zero() {
        let g = GridSpec::new(vec![1.0, 2.0], vec![6, 4], 2).unwrap();
        let u = VectorField::constant(g, [0.4, -0.2, 0.9]);
        assert!(nabla_cubic(&u).unwrap().l2_norm() < 1e-12);
        assert!(delta_cubic(&u).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn one_component_chain_rule() {
        let l = 1.0;
        let g = GridSpec::new(vec![l], vec![16], 2).unwrap();
        let k = std::f64::consts::PI / l;
        let f = |x: f64| 0.3 + 0.7 * (k * x).cos();
        let df = |x: f64| -0.7 * k * (k * x).sin();
        let u = VectorField::<f64>::from_fn(g, |x| [f(x[0]), 0.0, 0.0]).unwrap();
        let out = nabla_cubic(&u).unwrap();
        let pad = out.grid().clone();
        for i in 0..pad.node_count() {
            let x = pad.coordinate(0, i);
            assert!((out.data()[[0, 0, i]] - 3.0 * f(x).powi(2) * df(x)).abs() < 1e-12);
            assert!(out.data()[[1, 0, i]].abs() < 1e-15);
        }
    }

    #[test]
    fn identity_forms_match_direct_products() {
        for (seed, (ext, pts)) in [
            (vec![1.0], vec![12]),
            (vec![1.0, 1.5], vec![8, 6]),
            (vec![1.0, 0.7, 1.2], vec![4, 5, 4]),
        ]
        .into_iter()
        .enumerate()
        {
            let g = GridSpec::new(ext, pts.clone(), 2).unwrap();
            let s = random(&g, &pts, seed as u64);
            let u = inverse(&s).unwrap();
            let nab = nabla_cubic(&u).unwrap();
            let del = delta_cubic(&u).unwrap();
            let (nab_direct, del_direct) = direct_forms(&s, nab.grid());
            let scale_n = nab_direct.data().iter().fold(1.0f64, |m, x| m.max(x.abs()));
            let scale_d = del_direct.max_norm().max(1.0);
            assert!(nab.max_abs_diff(&nab_direct) < 1e-10 * scale_n);
            assert!(del.max_abs_diff(&del_direct) < 1e-10 * scale_d);
        }
    }

    #[test]
    fn eigenmode_delta_cubic() {
        let l = 1.3;
        let g = GridSpec::new(vec![l], vec![8], 2).unwrap();
        let a = 0.8;
        let u = VectorField::from_fn(g.clone(), |x| [a * (std::f64::consts::PI * x[0] / l).cos(), 0.0, 0.0]).unwrap();
        let del = delta_cubic(&u).unwrap();
        let (_, direct) = direct_forms(&forward(&u).unwrap(), del.grid());
        assert!(del.max_abs_diff(&direct) < 1e-10);
    }

    #[test]
    fn unit_length_reduction() {
        // u = (cos th, sin th, 0) with analytic derivatives, th = x^2 + 0.3 x.
        let g = GridSpec::new(vec![1.0], vec![16], 2).unwrap();
        let th = |x: f64| x * x + 0.3 * x;
        let dth = |x: f64| 2.0 * x + 0.3;
        let ddth = 2.0;
        let u = VectorField::from_fn(g.clone(), |x| [th(x[0]).cos(), th(x[0]).sin(), 0.0]).unwrap();
        let mut grad = JacobianField::zeros(g.clone());
        let mut lap = VectorField::zeros(g.clone());
        for i in 0..16 {
            let x = g.coordinate(0, i);
            let (c, s, p) = (th(x).cos(), th(x).sin(), dth(x));
            grad.data[[0, 0, i]] = -s * p;
            grad.data[[1, 0, i]] = c * p;
            lap.data[[0, i]] = -c * p * p - s * ddth;
            lap.data[[1, i]] = -s * p * p + c * ddth;
        }
        let del = delta_cubic_from(&u, &grad, &lap).unwrap();
        // With |u| = 1 the cubic is u itself, and u . lap u = -|grad u|^2.
        assert!(del.max_abs_diff(&lap) < 1e-12);
        for i in 0..16 {
            let v = u.at(i);
            let lhs: f64 = (0..3).map(|c| v[c] * del.at(i)[c]).sum();
            let g2 = grad.data[[0, 0, i]].powi(2) + grad.data[[1, 0, i]].powi(2);
            assert!((lhs + g2).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_flux_vanishes_on_faces() {
        let g = GridSpec::new(vec![1.0, 2.0], vec![8, 8], 2).unwrap();
        let s = random(&g, &[8, 8], 11);
        assert!(cubic_normal_flux_at_faces(&s).unwrap() < 1e-9);
    }

    #[test]
    fn cross_green_identity() {
        use crate::field::cross;
        let g = GridSpec::new(vec![1.0, 1.2], vec![8, 8], 2).unwrap();
        let pad = g.padded();
        let su = random(&g, &[8, 8], 2);
        let sv = random(&g, &[8, 8], 3);
        // Products are quadratic here, so the padded grid integrates them exactly.
        let u = su.values_on(&pad).unwrap();
        let lhs = cross(&u, &su.laplacian().values_on(&pad).unwrap())
            .unwrap()
            .inner(&sv.values_on(&pad).unwrap());
        let rhs = cross(&u, &su.gradient_on(&pad).unwrap())
            .unwrap()
            .inner(&sv.gradient_on(&pad).unwrap());
        assert!((lhs + rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
