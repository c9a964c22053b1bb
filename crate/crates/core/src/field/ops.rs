//! Transforms, spectral differential operators and column-wise products.

use ndarray::{ArrayD, IxDyn};

use super::{JacobianField, ScalarField, SpectralField, Transform, VectorField};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Orthonormal cosine coefficients of `u`, one mode per node and axis.
pub fn forward<T: Real>(u: &VectorField<T>) -> Result<SpectralField<T>> {
    super::check_finite(u.data(), "vector field")?;
    let g = u.grid();
    let t = Transform::<T>::new(g.extents(), g.points(), g.points())?;
    Ok(SpectralField::from_raw(g.clone(), t.analyze(u.data())))
}

/// Series values at the nodes of the field's own grid.
pub fn inverse<T: Real>(s: &SpectralField<T>) -> Result<VectorField<T>> {
    if s.modes().iter().zip(s.grid().points()).any(|(m, n)| m > n) {
        return Err(Error::BandExceedsGrid {
            band: s.modes().to_vec(),
            available: s.grid().points().to_vec(),
        });
    }
    s.values_on(s.grid())
}

fn unit_orders(dim: usize, axis: usize, order: usize) -> Vec<usize> {
    let mut o = vec![0; dim];
    o[axis] = order;
    o
}

impl<T: Real> SpectralField<T> {
    fn transform_to(&self, grid: &GridSpec) -> Result<Transform<T>> {
        if !grid.same_box(self.grid()) {
            return Err(Error::ShapeMismatch("evaluation grid covers a different box".into()));
        }
        Transform::new(grid.extents(), self.modes(), grid.points())
    }

    /// Values of the series at the nodes of `grid` (same box, any resolution).
    pub fn values_on(&self, grid: &GridSpec) -> Result<VectorField<T>> {
        let t = self.transform_to(grid)?;
        let data = t.synthesize(self.coeffs(), &vec![0; grid.dim()]);
        Ok(VectorField::from_raw(grid.clone(), data))
    }

    /// Jacobian of the series at the nodes of `grid`.
    pub fn gradient_on(&self, grid: &GridSpec) -> Result<JacobianField<T>> {
        let t = self.transform_to(grid)?;
        Ok(jacobian_from(&t, self.coeffs(), grid))
    }
}

pub(crate) fn jacobian_from<T: Real>(t: &Transform<T>, coeffs: &ArrayD<T>, grid: &GridSpec) -> JacobianField<T> {
    JacobianField::from_raw(grid.clone(), jacobian_data(t, coeffs))
}

/// Jacobian values `[3, d, P..]` at the nodes of `t`.
pub(crate) fn jacobian_data<T: Real>(t: &Transform<T>, coeffs: &ArrayD<T>) -> ArrayD<T> {
    let d = t.points().len();
    let n: usize = t.points().iter().product();
    let mut data = vec![T::zero(); 3 * d * n];
    for j in 0..d {
        let col = t.synthesize(coeffs, &unit_orders(d, j, 1));
        let col = col.as_slice().expect("standard layout");
        for c in 0..3 {
            data[(c * d + j) * n..(c * d + j + 1) * n].copy_from_slice(&col[c * n..(c + 1) * n]);
        }
    }
    let shape: Vec<usize> = [3, d].iter().chain(t.points()).copied().collect();
    ArrayD::from_shape_vec(IxDyn(&shape), data).expect("jacobian shape")
}

/// Spectral Jacobian `(d_j u_k)`, exact on band-limited fields.
pub fn gradient<T: Real>(u: &VectorField<T>) -> Result<JacobianField<T>> {
    forward(u)?.gradient_on(u.grid())
}

pub fn laplacian<T: Real>(u: &VectorField<T>) -> Result<VectorField<T>> {
    forward(u)?.laplacian().values_on(u.grid())
}

pub fn bilaplacian<T: Real>(u: &VectorField<T>) -> Result<VectorField<T>> {
    forward(u)?.bilaplacian().values_on(u.grid())
}

/// `grad(lap u)`, which equals `lap(grad u)` since both are diagonal in the basis.
pub fn grad_laplacian<T: Real>(u: &VectorField<T>) -> Result<JacobianField<T>> {
    forward(u)?.laplacian().gradient_on(u.grid())
}

/// Nodal data made of `columns()` three-vectors per node.
pub trait Columns<T: Real>: Sized {
    fn grid(&self) -> &GridSpec;
    fn columns(&self) -> usize;
    /// Entry `c` of column `j` at node `i` sits at `(c * columns + j) * nodes + i`.
    fn raw(&self) -> &[T];
    fn from_raw_parts(grid: GridSpec, data: Vec<T>) -> Self;
}

impl<T: Real> Columns<T> for VectorField<T> {
    fn grid(&self) -> &GridSpec {
        VectorField::grid(self)
    }
    fn columns(&self) -> usize {
        1
    }
    fn raw(&self) -> &[T] {
        self.as_slice()
    }
    fn from_raw_parts(grid: GridSpec, data: Vec<T>) -> Self {
        let shape: Vec<usize> = std::iter::once(3).chain(grid.points().iter().copied()).collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&shape), data).expect("vector shape");
        VectorField::from_raw(grid, arr)
    }
}

impl<T: Real> Columns<T> for JacobianField<T> {
    fn grid(&self) -> &GridSpec {
        JacobianField::grid(self)
    }
    fn columns(&self) -> usize {
        self.grid().dim()
    }
    fn raw(&self) -> &[T] {
        self.as_slice()
    }
    fn from_raw_parts(grid: GridSpec, data: Vec<T>) -> Self {
        let shape: Vec<usize> = [3, grid.dim()].iter().chain(grid.points()).copied().collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&shape), data).expect("jacobian shape");
        JacobianField::from_raw(grid, arr)
    }
}

fn same_nodes(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "grids differ: {:?} vs {:?}",
            a.points(),
            b.points()
        )));
    }
    Ok(())
}

/// Column-wise cross product `z x A`.
pub fn cross<T: Real, F: Columns<T>>(z: &VectorField<T>, a: &F) -> Result<F> {
    same_nodes(z.grid(), a.grid())?;
    let n = z.grid().node_count();
    let cols = a.columns();
    let zs = z.as_slice();
    let ar = a.raw();
    let mut out = vec![T::zero(); ar.len()];
    for j in 0..cols {
        let at = |c: usize, i: usize| ar[(c * cols + j) * n + i];
        for i in 0..n {
            let (z0, z1, z2) = (zs[i], zs[n + i], zs[2 * n + i]);
            let (a0, a1, a2) = (at(0, i), at(1, i), at(2, i));
            out[j * n + i] = z1 * a2 - z2 * a1;
            out[(cols + j) * n + i] = z2 * a0 - z0 * a2;
            out[(2 * cols + j) * n + i] = z0 * a1 - z1 * a0;
        }
    }
    Ok(F::from_raw_parts(a.grid().clone(), out))
}

/// Pointwise `A . B = sum_j A^(j) . B^(j)`.
pub fn dot<T: Real, F: Columns<T>>(a: &F, b: &F) -> Result<ScalarField<T>> {
    same_nodes(a.grid(), b.grid())?;
    if a.columns() != b.columns() {
        return Err(Error::ShapeMismatch("column counts differ".into()));
    }
    let n = a.grid().node_count();
    let mut out = vec![T::zero(); n];
    for (idx, (x, y)) in a.raw().iter().zip(b.raw()).enumerate() {
        out[idx % n] += *x * *y;
    }
    let arr = ArrayD::from_shape_vec(IxDyn(a.grid().points()), out).expect("scalar shape");
    Ok(ScalarField::from_raw(a.grid().clone(), arr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use std::f64::consts::PI;

    fn random_band(grid: &GridSpec, modes: &[usize], seed: u64) -> SpectralField<f64> {
        SpectralField::random(grid.clone(), modes, &CounterRng::new(seed), 1.0, 0.0).unwrap()
    }

    #[test]
    fn constant_field_has_single_mean_coefficient() {
        let g = GridSpec::new(vec![1.0], vec![8], 2).unwrap();
        let u = VectorField::<f64>::constant(g, [1.0, 0.0, 0.0]);
        let s = forward(&u).unwrap();
        assert!((s.coeff(0, &[0]) - 1.0).abs() < 1e-14);
        let rest: f64 = s.as_slice().iter().skip(1).map(|x| x.abs()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn cosine_is_a_single_mode() {
        let l = 2.0;
        let g = GridSpec::new(vec![l], vec![16], 2).unwrap();
        let u = VectorField::<f64>::from_fn(g, |x| [(PI * x[0] / l).cos(), 0.0, 0.0]).unwrap();
        let s = forward(&u).unwrap();
        assert!((s.coeff(0, &[1]) - (l / 2.0).sqrt()).abs() < 1e-13);
        assert!((s.eigenvalues()[[1]] - (PI / l).powi(2)).abs() < 1e-14);
        let lap = laplacian(&u).unwrap();
        let want = u.data() * (-(PI / l).powi(2));
        assert!(lap.data().iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = GridSpec::new(vec![1.0, 1.7], vec![8, 6], 2).unwrap();
        let s = random_band(&g, &[8, 6], 3);
        let u = inverse(&s).unwrap();
        let back = forward(&u).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-12);
        let p = u.inner(&u);
        assert!((p - s.inner(&s)).abs() < 1e-10 * p);
    }

    #[test]
    fn inverse_is_adjoint_of_forward() {
        let g = GridSpec::new(vec![1.3, 0.8], vec![6, 5], 2).unwrap();
        let s = random_band(&g, &[6, 5], 1);
        let u = inverse(&random_band(&g, &[6, 5], 2)).unwrap();
        let lhs = forward(&u).unwrap().inner(&s);
        let rhs = u.inner(&inverse(&s).unwrap());
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn analytic_gradient() {
        let l = 1.5;
        let g = GridSpec::new(vec![l], vec![12], 2).unwrap();
        let u = VectorField::<f64>::from_fn(g.clone(), |x| [(PI * x[0] / l).cos(), 0.0, 0.0]).unwrap();
        let j = gradient(&u).unwrap();
        for i in 0..12 {
            let x = g.coordinate(0, i);
            assert!((j.data()[[0, 0, i]] + PI / l * (PI * x / l).sin()).abs() < 1e-12);
            assert!(j.data()[[1, 0, i]].abs() < 1e-14);
        }
        // Rounding in the transform leaves ~1e-16 in high modes, which the
        // operators amplify by up to lambda_max^2.
        let c = VectorField::constant(g, [0.3, -1.0, 2.0]);
        let lmax = (11.0 * PI / l).powi(2);
        assert!(gradient(&c).unwrap().l2_norm() < 1e-13 * lmax.sqrt());
        assert!(laplacian(&c).unwrap().l2_norm() < 1e-13 * lmax);
        assert!(bilaplacian(&c).unwrap().l2_norm() < 1e-13 * lmax * lmax);
        assert!(grad_laplacian(&c).unwrap().l2_norm() < 1e-13 * lmax.powf(1.5));
    }

    #[test]
    fn gradient_matches_sixth_order_differences() {
        // Smooth band-limited field sampled off-grid through the series.
        let l = 1.0;
        let g = GridSpec::new(vec![l], vec![16], 2).unwrap();
        let s = random_band(&g, &[4], 9);
        let eval = |x: f64, order: usize| -> f64 {
            (0..4)
                .map(|k| s.coeff(1, &[k]) * super::super::basis::basis_derivative(l, k, order, x))
                .sum()
        };
        let h = 1e-3;
        let j = s.gradient_on(&g).unwrap();
        for i in 0..16 {
            let x = g.coordinate(0, i);
            let fd = (-eval(x - 3.0 * h, 0) + 9.0 * eval(x - 2.0 * h, 0) - 45.0 * eval(x - h, 0)
                + 45.0 * eval(x + h, 0)
                - 9.0 * eval(x + 2.0 * h, 0)
                + eval(x + 3.0 * h, 0))
                / (60.0 * h);
            assert!((fd - j.data()[[1, 0, i]]).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn bilaplacian_is_laplacian_squared() {
        let g = GridSpec::new(vec![1.0, 2.0], vec![8, 8], 2).unwrap();
        let s = random_band(&g, &[5, 6], 4);
        let a = s.bilaplacian();
        let b = s.laplacian().laplacian();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
        }
        let u = inverse(&s).unwrap();
        let a = bilaplacian(&u).unwrap();
        let b = laplacian(&laplacian(&u).unwrap()).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-9 * a.max_norm());
    }

    #[test]
    fn cross_products() {
        let g = GridSpec::new(vec![1.0, 1.0], vec![4, 4], 2).unwrap();
        let z = VectorField::constant(g.clone(), [1.0, 0.0, 0.0]);
        let mut a = JacobianField::zeros(g.clone());
        for x in a.data.index_axis_mut(ndarray::Axis(0), 1).iter_mut() {
            *x = 1.0;
        }
        let c = cross(&z, &a).unwrap();
        assert!(c.data().index_axis(ndarray::Axis(0), 2).iter().all(|&x| x == 1.0));
        assert!(c.data().index_axis(ndarray::Axis(0), 0).iter().all(|&x| x == 0.0));
        let u = inverse(&random_band(&g, &[4, 4], 5)).unwrap();
        assert!(cross(&u, &u).unwrap().max_norm() == 0.0);
        let v = inverse(&random_band(&g, &[4, 4], 6)).unwrap();
        let w = cross(&u, &v).unwrap();
        for i in 0..g.node_count() {
            let (p, q, r) = (u.at(i), v.at(i), w.at(i));
            let want = [
                p[1] * q[2] - p[2] * q[1],
                p[2] * q[0] - p[0] * q[2],
                p[0] * q[1] - p[1] * q[0],
            ];
            for c in 0..3 {
                assert!((want[c] - r[c]).abs() < 1e-14);
            }
        }
        let other = GridSpec::new(vec![1.0, 1.0], vec![5, 4], 2).unwrap();
        assert!(cross(&VectorField::zeros(other), &u).is_err());
    }

    #[test]
    fn green_identity() {
        let g = GridSpec::new(vec![1.0, 1.4], vec![10, 8], 2).unwrap();
        let u = inverse(&random_band(&g, &[10, 8], 7)).unwrap();
        let v = inverse(&random_band(&g, &[10, 8], 8)).unwrap();
        let lhs = -laplacian(&u).unwrap().inner(&v);
        let rhs = gradient(&u).unwrap().inner(&gradient(&v).unwrap());
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = GridSpec::unit(1, 4).unwrap();
        let mut data = ArrayD::zeros(IxDyn(&[3, 4]));
        data[[1, 2]] = f64::NAN;
        assert!(VectorField::new(g.clone(), data.clone()).is_err());
        let raw = VectorField::from_raw(g, data);
        assert!(matches!(forward(&raw), Err(Error::NonFinite { .. })));
    }
}
