//! Galerkin projection and the right-hand side of the truncated system
//!
//! `u' = b1 lap u - b2 lap^2 u + b3 P((1 - |u|^2) u) - b4 P(u x lap u) + b5 P lap(|u|^2 u)`
//!
//! on the span of the retained cosine modes.

use std::sync::Mutex;

use ndarray::{ArrayD, Axis, IxDyn};

use crate::error::{Error, Result};
use crate::field::basis::Workspace;
use crate::field::identities::delta_cubic_from;
use crate::field::{eigenvalue_table, SpectralField, Transform};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// `lambda_r - lambda_e / (2 chi)`.
pub fn derive_beta1(lambda_r: f64, lambda_e: f64, chi: f64) -> Result<f64> {
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::InvalidParameter(format!("chi must be positive, got {chi}")));
    }
    if !lambda_r.is_finite() || !lambda_e.is_finite() {
        return Err(Error::InvalidParameter("non-finite relaxation constant".into()));
    }
    Ok(lambda_r - lambda_e / (2.0 * chi))
}

/// Physical inputs from which `beta1` may be derived.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalInputs {
    pub lambda_r: f64,
    pub lambda_e: f64,
    pub chi: f64,
    pub gamma: Option<f64>,
}

/// The constants `beta1..beta5`; `beta1` may have either sign, the rest are positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LLBarParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub physical: Option<PhysicalInputs>,
}

impl LLBarParams {
    pub fn new(beta1: f64, beta2: f64, beta3: f64, beta4: f64, beta5: f64) -> Result<Self> {
        let p = Self {
            beta1,
            beta2,
            beta3,
            beta4,
            beta5,
            physical: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_physical(physical: PhysicalInputs, beta2: f64, beta3: f64, beta4: f64, beta5: f64) -> Result<Self> {
        let beta1 = derive_beta1(physical.lambda_r, physical.lambda_e, physical.chi)?;
        let p = Self {
            beta1,
            beta2,
            beta3,
            beta4,
            beta5,
            physical: Some(physical),
        };
        p.validate()?;
        Ok(p)
    }

    /// Positivity of `beta2..beta5` and consistency with the physical inputs.
    pub fn validate(&self) -> Result<()> {
        if !self.beta1.is_finite() {
            return Err(Error::InvalidParameter("beta1 is not finite".into()));
        }
        for (name, v) in [
            ("beta2", self.beta2),
            ("beta3", self.beta3),
            ("beta4", self.beta4),
            ("beta5", self.beta5),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(ph) = self.physical {
            let b1 = derive_beta1(ph.lambda_r, ph.lambda_e, ph.chi)?;
            if (b1 - self.beta1).abs() > 1e-14 * b1.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "beta1 = {} disagrees with lambda_r - lambda_e/(2 chi) = {b1}",
                    self.beta1
                )));
            }
            if let Some(g) = ph.gamma {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")));
                }
            }
        }
        Ok(())
    }

    /// Constants with `beta2..beta5 >= 0` rather than `> 0`, for reduced
    /// problems that switch terms off.
    pub fn reduced(beta1: f64, beta2: f64, beta3: f64, beta4: f64, beta5: f64) -> Result<Self> {
        if !beta1.is_finite() {
            return Err(Error::InvalidParameter("beta1 is not finite".into()));
        }
        for (name, v) in [("beta2", beta2), ("beta3", beta3), ("beta4", beta4), ("beta5", beta5)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(Self::unchecked(beta1, beta2, beta3, beta4, beta5))
    }

    /// Same constants without the positivity check, for reduced test problems
    /// (linear-only or precession-only runs switch terms off with zeros).
    pub fn unchecked(beta1: f64, beta2: f64, beta3: f64, beta4: f64, beta5: f64) -> Self {
        Self {
            beta1,
            beta2,
            beta3,
            beta4,
            beta5,
            physical: None,
        }
    }
}

/// Retained mode counts `M_j` per axis; `V_n` is spanned by `e_k`, `k_j < M_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeBand {
    modes: Vec<usize>,
}

impl ModeBand {
    pub fn new(modes: Vec<usize>, grid: &GridSpec) -> Result<Self> {
        if modes.len() != grid.dim() || modes.contains(&0) || modes.iter().zip(grid.points()).any(|(m, n)| m > n) {
            return Err(Error::BandExceedsGrid {
                band: modes,
                available: grid.points().to_vec(),
            });
        }
        Ok(Self { modes })
    }

    pub fn full(grid: &GridSpec) -> Self {
        Self {
            modes: grid.points().to_vec(),
        }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Dimension `n` of `V_n`.
    pub fn size(&self) -> usize {
        self.modes.iter().product()
    }

    pub fn contains(&self, k: &[usize]) -> bool {
        k.iter().zip(&self.modes).all(|(a, b)| a < b)
    }
}

/// Orthogonal projection onto `V_n`: zeroes every coefficient outside the band.
pub fn project<T: Real>(s: &SpectralField<T>, band: &ModeBand) -> Result<SpectralField<T>> {
    let band = ModeBand::new(band.modes.clone(), s.grid())?;
    let mut out = s.clone();
    for (axis, &m) in band.modes.iter().enumerate() {
        let len = out.modes()[axis];
        if m < len {
            out.coeffs_mut()
                .slice_axis_mut(Axis(axis + 1), (m..len).into())
                .fill(T::zero());
        }
    }
    Ok(out)
}

/// Restricts `v` to exactly the band's shape (projecting away higher modes).
fn restrict<T: Real>(v: &SpectralField<T>, band: &ModeBand) -> Result<SpectralField<T>> {
    ModeBand::new(band.modes.clone(), v.grid())?;
    let keep: Vec<usize> = band.modes.iter().zip(v.modes()).map(|(a, b)| *a.min(b)).collect();
    let t = v.truncated(&keep)?;
    if keep == band.modes {
        Ok(t)
    } else {
        t.extended(v.grid().clone(), &band.modes)
    }
}

#[derive(Debug)]
struct Buffers<T> {
    stacked: Vec<T>,
    values: Vec<T>,
    coeffs: Vec<T>,
    transform: Workspace<T>,
}

impl<T> Default for Buffers<T> {
    fn default() -> Self {
        Self {
            stacked: Vec::new(),
            values: Vec::new(),
            coeffs: Vec::new(),
            transform: Workspace::default(),
        }
    }
}

/// Pseudo-spectral evaluator of the projected nonlinear products on the
/// dealiasing grid, with cached transform tables and scratch buffers.
#[derive(Debug)]
pub struct ProductEvaluator<T> {
    grid: GridSpec,
    band: ModeBand,
    transform: Transform<T>,
    neg_lambda: ArrayD<T>,
    buffers: Mutex<Buffers<T>>,
}

impl<T: Clone> Clone for ProductEvaluator<T> {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            band: self.band.clone(),
            transform: self.transform.clone(),
            neg_lambda: self.neg_lambda.clone(),
            buffers: Mutex::default(),
        }
    }
}

impl<T: Real> ProductEvaluator<T> {
    pub fn new(grid: &GridSpec, band: &ModeBand) -> Result<Self> {
        let band = ModeBand::new(band.modes.clone(), grid)?;
        let pad = grid.padded();
        let transform = Transform::new(pad.extents(), band.modes(), pad.points())?;
        let neg_lambda = eigenvalue_table::<T>(grid.extents(), band.modes()).mapv(|l| -l);
        Ok(Self {
            grid: grid.clone(),
            band,
            transform,
            neg_lambda,
            buffers: Mutex::default(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn band(&self) -> &ModeBand {
        &self.band
    }

    /// `-lambda(k)` over the band, shape `[M..]`.
    pub fn neg_lambda(&self) -> &ArrayD<T> {
        &self.neg_lambda
    }

    fn coeff_shape(&self, batch: usize) -> Vec<usize> {
        std::iter::once(batch)
            .chain(self.band.modes().iter().copied())
            .collect()
    }

    /// `(P(|v|^2 v), P(v x lap v))` for coefficients `v` of shape `[3, M..]`.
    pub fn products(&self, v: &ArrayD<T>) -> (ArrayD<T>, ArrayD<T>) {
        let (c, x, _) = self.products_with_sup(v);
        (c, x)
    }

    /// Largest pointwise length of `v` over the dealiasing grid.
    pub fn sup_norm(&self, v: &ArrayD<T>) -> T {
        let values = self.transform.synthesize(v, &vec![0; self.grid.dim()]);
        let n: usize = self.transform.points().iter().product();
        let s = values.as_slice().expect("standard layout");
        (0..n)
            .map(|i| s[i] * s[i] + s[n + i] * s[n + i] + s[2 * n + i] * s[2 * n + i])
            .fold(T::zero(), T::max)
            .sqrt()
    }

    /// As [`Self::products`], also returning the sup norm of `v` on the
    /// dealiasing grid (NaN if any node is non-finite).
    pub fn products_with_sup(&self, v: &ArrayD<T>) -> (ArrayD<T>, ArrayD<T>, T) {
        let mut guard = self.buffers.lock().unwrap_or_else(|e| e.into_inner());
        let Buffers {
            stacked,
            values,
            coeffs,
            transform,
        } = &mut *guard;
        let m = self.band.size();
        let v = v.as_standard_layout();
        let vs = v.as_slice().expect("standard layout");
        let nl = self.neg_lambda.as_slice().expect("standard layout");
        stacked.clear();
        stacked.extend_from_slice(&vs[..3 * m]);
        for c in 0..3 {
            stacked.extend(vs[c * m..(c + 1) * m].iter().zip(nl).map(|(&x, &l)| x * l));
        }
        let orders = vec![0; self.grid.dim()];
        self.transform.synthesize_into(stacked, 6, &orders, values, transform);
        let n: usize = self.transform.points().iter().product();
        let mut sup_sq = T::zero();
        let s = &mut values[..6 * n];
        for i in 0..n {
            let u = [s[i], s[n + i], s[2 * n + i]];
            let l = [s[3 * n + i], s[4 * n + i], s[5 * n + i]];
            let sq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
            if !(sq <= sup_sq) {
                sup_sq = if sq.is_nan() { T::nan() } else { sq.max(sup_sq) };
            }
            s[i] = sq * u[0];
            s[n + i] = sq * u[1];
            s[2 * n + i] = sq * u[2];
            s[3 * n + i] = u[1] * l[2] - u[2] * l[1];
            s[4 * n + i] = u[2] * l[0] - u[0] * l[2];
            s[5 * n + i] = u[0] * l[1] - u[1] * l[0];
        }
        self.transform.analyze_into(&values[..6 * n], 6, coeffs, transform);
        let shape = self.coeff_shape(3);
        let cubic = ArrayD::from_shape_vec(IxDyn(&shape), coeffs[..3 * m].to_vec()).expect("band shape");
        let cross = ArrayD::from_shape_vec(IxDyn(&shape), coeffs[3 * m..6 * m].to_vec()).expect("band shape");
        (cubic, cross, sup_sq.sqrt())
    }
}

/// Per-mode multiplier `m(k) = -b1 lambda(k) - b2 lambda(k)^2` of the linear part.
pub fn rhs_linear_factor<T: Real>(grid: &GridSpec, band: &ModeBand, p: &LLBarParams) -> ArrayD<T> {
    let (b1, b2) = (T::lit(p.beta1), T::lit(p.beta2));
    eigenvalue_table::<T>(grid.extents(), band.modes()).mapv(|l| -b1 * l - b2 * l * l)
}

/// The truncated system: linear multiplier plus explicit nonlinear part.
#[derive(Clone, Debug)]
pub struct GalerkinSystem<T> {
    params: LLBarParams,
    evaluator: ProductEvaluator<T>,
    linear: ArrayD<T>,
}

impl<T: Real> GalerkinSystem<T> {
    pub fn new(grid: &GridSpec, band: &ModeBand, params: LLBarParams) -> Result<Self> {
        let evaluator = ProductEvaluator::new(grid, band)?;
        let linear = rhs_linear_factor(grid, band, &params);
        Ok(Self {
            params,
            evaluator,
            linear,
        })
    }

    pub fn params(&self) -> &LLBarParams {
        &self.params
    }

    pub fn grid(&self) -> &GridSpec {
        self.evaluator.grid()
    }

    pub fn band(&self) -> &ModeBand {
        self.evaluator.band()
    }

    pub fn evaluator(&self) -> &ProductEvaluator<T> {
        &self.evaluator
    }

    /// `m(k)` over the band, shape `[M..]`.
    pub fn linear_factor(&self) -> &ArrayD<T> {
        &self.linear
    }

    /// `b3 (v - P(|v|^2 v)) - b4 P(v x lap v) + b5 lap P(|v|^2 v)`.
    pub fn nonlinear(&self, v: &ArrayD<T>) -> ArrayD<T> {
        self.nonlinear_with_sup(v).0
    }

    /// Nonlinear part together with the sup norm of `v` on the dealiasing grid.
    pub fn nonlinear_with_sup(&self, v: &ArrayD<T>) -> (ArrayD<T>, T) {
        let p = &self.params;
        let (cubic, cross, sup) = self.evaluator.products_with_sup(v);
        let (b3, b4, b5) = (T::lit(p.beta3), T::lit(p.beta4), T::lit(p.beta5));
        let mut out = v * b3;
        ndarray::Zip::from(&mut out)
            .and(&cubic)
            .and(&cross)
            .and_broadcast(&self.evaluator.neg_lambda.view().insert_axis(Axis(0)))
            .for_each(|o, &c, &x, &nl| *o += (b5 * nl - b3) * c - b4 * x);
        (out, sup)
    }

    /// Full right-hand side `m v + N(v)`.
    pub fn rhs(&self, v: &ArrayD<T>) -> ArrayD<T> {
        let mut out = self.nonlinear(v);
        out += &(v * &self.linear);
        out
    }
}

pub fn f1<T: Real>(v: &SpectralField<T>) -> SpectralField<T> {
    v.laplacian()
}

pub fn f2<T: Real>(v: &SpectralField<T>) -> SpectralField<T> {
    v.bilaplacian()
}

fn products<T: Real>(v: &SpectralField<T>, band: &ModeBand) -> Result<(SpectralField<T>, SpectralField<T>)> {
    let v = restrict(v, band)?;
    let eval = ProductEvaluator::new(v.grid(), band)?;
    let (c, x) = eval.products(v.coeffs());
    Ok((
        SpectralField::from_raw(v.grid().clone(), c),
        SpectralField::from_raw(v.grid().clone(), x),
    ))
}

/// `P(|v|^2 v)` on the band.
pub fn f3<T: Real>(v: &SpectralField<T>, band: &ModeBand) -> Result<SpectralField<T>> {
    Ok(products(v, band)?.0)
}

/// `P(v x lap v)` on the band.
pub fn f4<T: Real>(v: &SpectralField<T>, band: &ModeBand) -> Result<SpectralField<T>> {
    Ok(products(v, band)?.1)
}

/// `P lap(|v|^2 v)` on the band, from the pointwise identity for `lap(|v|^2 v)`
/// on the dealiasing grid. Agrees with `f1(f3(v))` since `P` and `lap` commute.
pub fn f5<T: Real>(v: &SpectralField<T>, band: &ModeBand) -> Result<SpectralField<T>> {
    let v = restrict(v, band)?;
    let pad = v.grid().padded();
    let lap = delta_cubic_from(
        &v.values_on(&pad)?,
        &v.gradient_on(&pad)?,
        &v.laplacian().values_on(&pad)?,
    )?;
    let t = Transform::<T>::new(pad.extents(), band.modes(), pad.points())?;
    Ok(SpectralField::from_raw(v.grid().clone(), t.analyze(lap.data())))
}

/// Right-hand side of the Galerkin system for `u` (restricted to `band`).
pub fn rhs<T: Real>(u: &SpectralField<T>, p: &LLBarParams, band: &ModeBand) -> Result<SpectralField<T>> {
    let u = restrict(u, band)?;
    let sys = GalerkinSystem::new(u.grid(), band, *p)?;
    let out = sys.rhs(u.coeffs());
    if let Some(index) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "galerkin right-hand side",
            index,
        });
    }
    Ok(SpectralField::from_raw(u.grid().clone(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::identities::nabla_cubic_from;
    use crate::field::{cross, dot, VectorField};
    use crate::rng::CounterRng;

    fn params() -> LLBarParams {
        LLBarParams::new(0.7, 0.3, 1.1, 0.9, 0.4).unwrap()
    }

    fn random(grid: &GridSpec, modes: &[usize], seed: u64, amp: f64) -> SpectralField<f64> {
        SpectralField::random(grid.clone(), modes, &CounterRng::new(seed), amp, 2.0).unwrap()
    }

    #[test]
    fn beta1_arithmetic() {
        assert_eq!(derive_beta1(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(derive_beta1(0.5, 1.0, 0.5).unwrap(), -0.5);
        assert_eq!(derive_beta1(0.5, 1.0, 1.0).unwrap(), 0.0);
        assert!(derive_beta1(0.5, 1.0, 0.0).is_err());
        let ph = PhysicalInputs {
            lambda_r: 0.5,
            lambda_e: 1.0,
            chi: 0.5,
            gamma: Some(1.0),
        };
        let p = LLBarParams::from_physical(ph, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.beta1, -0.5);
        let mut bad = p;
        bad.beta1 = 0.1;
        assert!(bad.validate().is_err());
        assert!(LLBarParams::new(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn projection_properties() {
        let g = GridSpec::new(vec![1.0, 1.5], vec![8, 8], 2).unwrap();
        let s = random(&g, &[8, 8], 1, 1.0);
        let t = random(&g, &[8, 8], 2, 1.0);
        assert_eq!(project(&s, &ModeBand::full(&g)).unwrap(), s);
        let band = ModeBand::new(vec![5, 3], &g).unwrap();
        let ps = project(&s, &band).unwrap();
        assert!(ps.l2_norm() <= s.l2_norm());
        assert_eq!(project(&ps, &band).unwrap(), ps);
        let lhs = ps.inner(&t);
        let rhs = s.inner(&project(&t, &band).unwrap());
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        let mut single = SpectralField::<f64>::zeros(g.clone(), &[8, 8]).unwrap();
        single.set_coeff(1, &[6, 1], 1.0);
        assert_eq!(project(&single, &band).unwrap().l2_norm(), 0.0);
        assert!(ModeBand::new(vec![9, 3], &g).is_err());
    }

    #[test]
    fn constant_unit_field() {
        let g = GridSpec::new(vec![1.0, 1.0], vec![6, 6], 2).unwrap();
        let band = ModeBand::full(&g);
        let u = crate::field::forward(&VectorField::constant(g.clone(), [0.6, 0.8, 0.0])).unwrap();
        assert!(f1(&u).l2_norm() < 1e-12);
        assert!(f2(&u).l2_norm() < 1e-9);
        assert!(f4(&u, &band).unwrap().l2_norm() < 1e-12);
        assert!(f5(&u, &band).unwrap().l2_norm() < 1e-12);
        assert!(f3(&u, &band).unwrap().max_abs_diff(&u) < 1e-14);
        assert!(rhs(&u, &params(), &band).unwrap().l2_norm() < 1e-9);
        let two = u.scaled(2.0);
        let r = rhs(&two, &params(), &band).unwrap();
        assert!(r.max_abs_diff(&two.scaled(-3.0 * params().beta3)) < 1e-9);
    }

    #[test]
    fn eigenmode_precession_vanishes() {
        let g = GridSpec::new(vec![1.3], vec![8], 2).unwrap();
        let mut s = SpectralField::<f64>::zeros(g.clone(), &[8]).unwrap();
        s.set_coeff(0, &[1], 0.7);
        assert!(f4(&s, &ModeBand::full(&g)).unwrap().l2_norm() < 1e-14);
    }

    #[test]
    fn laplacian_commutes_with_projection() {
        for (ext, pts, band) in [
            (vec![1.0], vec![16], vec![10]),
            (vec![1.0, 2.0], vec![8, 8], vec![8, 5]),
            (vec![1.0, 1.0, 1.0], vec![6, 4, 4], vec![4, 4, 3]),
        ] {
            let g = GridSpec::new(ext, pts, 2).unwrap();
            let band = ModeBand::new(band, &g).unwrap();
            let v = random(&g, band.modes(), 5, 1.0);
            let a = f5(&v, &band).unwrap();
            let b = f1(&f3(&v, &band).unwrap());
            assert!(a.sub(&b).l2_norm() < 1e-10 * a.l2_norm().max(1.0));
        }
    }

    #[test]
    fn linear_factor_values() {
        let g = GridSpec::new(vec![std::f64::consts::PI], vec![8], 2).unwrap();
        let band = ModeBand::full(&g);
        let m = rhs_linear_factor::<f64>(&g, &band, &LLBarParams::unchecked(1.0, 1.0, 0.0, 0.0, 0.0));
        assert_eq!(m[[0]], 0.0);
        assert!((m[[1]] + 2.0).abs() < 1e-14);
        let neg = LLBarParams::unchecked(-1.0, 0.5, 0.0, 0.0, 0.0);
        let m = rhs_linear_factor::<f64>(&g, &band, &neg);
        for k in 1..8 {
            let l = (k * k) as f64;
            assert_eq!(m[[k]] < 0.0, l > 1.0 / 0.5);
            assert!((m[[k]] - (l - 0.5 * l * l)).abs() < 1e-12 * l * l);
        }
    }

    /// Padded-grid values of `u`, `grad u` and `lap u`.
    fn nodal(s: &SpectralField<f64>) -> (VectorField<f64>, crate::field::JacobianField<f64>, VectorField<f64>) {
        let pad = s.grid().padded();
        (
            s.values_on(&pad).unwrap(),
            s.gradient_on(&pad).unwrap(),
            s.laplacian().values_on(&pad).unwrap(),
        )
    }

    #[test]
    fn weak_form_pairing() {
        let g = GridSpec::new(vec![1.0, 1.4], vec![8, 8], 2).unwrap();
        let band = ModeBand::new(vec![7, 6], &g).unwrap();
        let p = params();
        let u = random(&g, band.modes(), 7, 0.8);
        let r = rhs(&u, &p, &band).unwrap();
        let (uv, ug, ul) = nodal(&u);
        let sq = dot(&uv, &uv).unwrap();
        let mut relax = uv.data().clone();
        for c in 0..3 {
            let mut comp = relax.index_axis_mut(Axis(0), c);
            comp.zip_mut_with(sq.data(), |x, s| *x *= 1.0 - s);
        }
        let relax = VectorField::new(uv.grid().clone(), relax).unwrap();
        let uxg = cross(&uv, &ug).unwrap();
        let ncub = nabla_cubic_from(&uv, &ug).unwrap();
        for seed in 0..10 {
            let phi = random(&g, band.modes(), 100 + seed, 1.0);
            let (pv, pg, pl) = nodal(&phi);
            let want = -p.beta1 * ug.inner(&pg) - p.beta2 * ul.inner(&pl)
                + p.beta3 * relax.inner(&pv)
                + p.beta4 * uxg.inner(&pg)
                - p.beta5 * ncub.inner(&pg);
            let got = r.inner(&phi);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} {want}");
        }
    }

    #[test]
    fn l2_balance_and_precession_neutrality() {
        let g = GridSpec::new(vec![1.0, 0.8], vec![8, 8], 2).unwrap();
        let band = ModeBand::full(&g);
        let p = params();
        let u = random(&g, band.modes(), 3, 0.6);
        let (uv, ug, ul) = nodal(&u);
        assert!(f4(&u, &band).unwrap().inner(&u).abs() < 1e-10);
        let sq = dot(&uv, &uv).unwrap();
        let l4 = sq.data().iter().map(|x| x * x).sum::<f64>() * uv.grid().cell_volume();
        let n = uv.grid().node_count();
        let (us, gs) = (uv.as_slice(), ug.as_slice());
        let d = 2;
        let (mut udg, mut mod_grad) = (0.0, 0.0);
        for i in 0..n {
            let mut g2 = 0.0;
            for j in 0..d {
                let col: Vec<f64> = (0..3).map(|c| gs[(c * d + j) * n + i]).collect();
                let ud: f64 = (0..3).map(|c| us[c * n + i] * col[c]).sum();
                udg += ud * ud;
                g2 += col.iter().map(|x| x * x).sum::<f64>();
            }
            mod_grad += sq.data().as_slice().unwrap()[i] * g2;
        }
        let w = uv.grid().cell_volume();
        let want = -p.beta1 * ug.inner(&ug) - p.beta2 * ul.inner(&ul) + p.beta3 * uv.inner(&uv)
            - p.beta3 * l4
            - 2.0 * p.beta5 * udg * w
            - p.beta5 * mod_grad * w;
        let got = rhs(&u, &p, &band).unwrap().inner(&u);
        assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{got} {want}");
    }

    #[test]
    fn evaluator_matches_exact_cubic() {
        let g = GridSpec::new(vec![1.0, 1.2], vec![6, 6], 2).unwrap();
        let band = ModeBand::full(&g);
        let v = random(&g, &[6, 6], 9, 1.0);
        let exact = crate::field::identities::cubic_expansion(&v).unwrap();
        let exact = exact.truncated(&[6, 6]).unwrap();
        assert!(f3(&v, &band).unwrap().max_abs_diff(&exact) < 1e-12);
    }
}
