//! Vector fields on boxes, their cosine expansions, spectral differential
//! operators and the pointwise vector identities used by the solver.

pub mod basis;
pub mod identities;
pub mod ops;
pub mod snapshot;

use ndarray::{ArrayD, ArrayViewD, Axis, IxDyn};

use crate::error::{Error, Result};
use crate::grid::{eigenvalue, multi_indices, GridSpec};
use crate::rng::{mode_counter, CounterRng};
use crate::scalar::Real;

pub use basis::Transform;
pub use identities::{
    cubic_expansion, cubic_normal_flux_at_faces, delta_cubic, delta_cubic_from, nabla_cubic, nabla_cubic_from,
};
pub use ops::{bilaplacian, cross, dot, forward, grad_laplacian, gradient, inverse, laplacian, Columns};
pub use snapshot::{read_snapshot, write_snapshot};

fn check_finite<T: Real>(data: &ArrayD<T>, what: &'static str) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

fn stack_shape(lead: &[usize], grid: &GridSpec) -> Vec<usize> {
    lead.iter().chain(grid.points()).copied().collect()
}

/// Samples of `u: Omega -> R^3`, stored component-major: shape `[3, N_1, .., N_d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    grid: GridSpec,
    data: ArrayD<T>,
}

impl<T: Real> VectorField<T> {
    pub fn new(grid: GridSpec, data: ArrayD<T>) -> Result<Self> {
        let want = stack_shape(&[3], &grid);
        if data.shape() != want.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "vector field data {:?}, grid wants {:?}",
                data.shape(),
                want
            )));
        }
        check_finite(&data, "vector field")?;
        Ok(Self {
            grid,
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub(crate) fn from_raw(grid: GridSpec, data: ArrayD<T>) -> Self {
        debug_assert_eq!(data.shape(), stack_shape(&[3], &grid).as_slice());
        Self { grid, data }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let data = ArrayD::zeros(IxDyn(&stack_shape(&[3], &grid)));
        Self { grid, data }
    }

    pub fn constant(grid: GridSpec, c: [T; 3]) -> Self {
        let mut f = Self::zeros(grid);
        for (comp, &v) in c.iter().enumerate() {
            f.data.index_axis_mut(Axis(0), comp).fill(v);
        }
        f
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> [f64; 3]) -> Result<Self> {
        let n = grid.node_count();
        let mut data = vec![T::zero(); 3 * n];
        for i in 0..n {
            let v = f(&grid.node(i));
            for c in 0..3 {
                data[c * n + i] = T::lit(v[c]);
            }
        }
        let arr = ArrayD::from_shape_vec(IxDyn(&stack_shape(&[3], &grid)), data).expect("shape matches node count");
        Self::new(grid, arr)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &ArrayD<T> {
        &self.data
    }

    pub fn into_data(self) -> ArrayD<T> {
        self.data
    }

    pub fn component(&self, c: usize) -> ArrayViewD<'_, T> {
        self.data.index_axis(Axis(0), c)
    }

    /// Flat component-major storage: component `c` at node `i` is `[c * n + i]`.
    pub fn as_slice(&self) -> &[T] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn at(&self, node: usize) -> [T; 3] {
        let n = self.grid.node_count();
        let s = self.as_slice();
        [s[node], s[n + node], s[2 * n + node]]
    }

    /// L2 inner product by midpoint quadrature on the nodes.
    pub fn inner(&self, other: &Self) -> T {
        let w = T::lit(self.grid.cell_volume());
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| *a * *b)
            .sum::<T>()
            * w
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// Maximum pointwise Euclidean length over the nodes.
    pub fn max_norm(&self) -> T {
        let n = self.grid.node_count();
        let s = self.as_slice();
        (0..n)
            .map(|i| (s[i] * s[i] + s[n + i] * s[n + i] + s[2 * n + i] * s[2 * n + i]).sqrt())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Nodal Jacobians `(d_j v_k)`, shape `[3, d, N_1, .., N_d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianField<T> {
    grid: GridSpec,
    data: ArrayD<T>,
}

impl<T: Real> JacobianField<T> {
    pub fn new(grid: GridSpec, data: ArrayD<T>) -> Result<Self> {
        let want = stack_shape(&[3, grid.dim()], &grid);
        if data.shape() != want.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "jacobian data {:?}, grid wants {:?}",
                data.shape(),
                want
            )));
        }
        check_finite(&data, "jacobian field")?;
        Ok(Self {
            grid,
            data: data.as_standard_layout().into_owned(),
        })
    }

    pub(crate) fn from_raw(grid: GridSpec, data: ArrayD<T>) -> Self {
        debug_assert_eq!(data.shape(), stack_shape(&[3, grid.dim()], &grid).as_slice());
        Self { grid, data }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let data = ArrayD::zeros(IxDyn(&stack_shape(&[3, grid.dim()], &grid)));
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &ArrayD<T> {
        &self.data
    }

    /// Flat storage: entry `d_j v_k` at node `i` is `[(k * d + j) * n + i]`.
    pub fn as_slice(&self) -> &[T] {
        self.data.as_slice().expect("standard layout")
    }

    /// Column `j`, i.e. the vector field `d_j v`.
    pub fn column(&self, j: usize) -> VectorField<T> {
        let col = self.data.index_axis(Axis(1), j).to_owned();
        VectorField::from_raw(self.grid.clone(), col)
    }

    pub fn inner(&self, other: &Self) -> T {
        let w = T::lit(self.grid.cell_volume());
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| *a * *b)
            .sum::<T>()
            * w
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Nodal scalar values, shape `[N_1, .., N_d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: GridSpec,
    data: ArrayD<T>,
}

impl<T: Real> ScalarField<T> {
    pub(crate) fn from_raw(grid: GridSpec, data: ArrayD<T>) -> Self {
        debug_assert_eq!(data.shape(), grid.points());
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &ArrayD<T> {
        &self.data
    }

    pub fn integral(&self) -> T {
        self.data.iter().copied().sum::<T>() * T::lit(self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

/// Cosine coefficients of a vector field: shape `[3, M_1, .., M_d]` with
/// `M_j <= N_j` retained modes per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    grid: GridSpec,
    modes: Vec<usize>,
    coeffs: ArrayD<T>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(grid: GridSpec, coeffs: ArrayD<T>) -> Result<Self> {
        if coeffs.ndim() != grid.dim() + 1 || coeffs.shape()[0] != 3 {
            return Err(Error::ShapeMismatch(format!(
                "coefficients {:?} for a {}-d grid",
                coeffs.shape(),
                grid.dim()
            )));
        }
        let modes = coeffs.shape()[1..].to_vec();
        if modes.iter().zip(grid.points()).any(|(m, n)| m > n) || modes.contains(&0) {
            return Err(Error::BandExceedsGrid {
                band: modes,
                available: grid.points().to_vec(),
            });
        }
        check_finite(&coeffs, "spectral coefficients")?;
        Ok(Self {
            grid,
            modes,
            coeffs: coeffs.as_standard_layout().into_owned(),
        })
    }

    pub(crate) fn from_raw(grid: GridSpec, coeffs: ArrayD<T>) -> Self {
        let modes = coeffs.shape()[1..].to_vec();
        Self { grid, modes, coeffs }
    }

    pub fn zeros(grid: GridSpec, modes: &[usize]) -> Result<Self> {
        let shape: Vec<usize> = std::iter::once(3).chain(modes.iter().copied()).collect();
        Self::new(grid, ArrayD::zeros(IxDyn(&shape)))
    }

    /// Builds coefficients from `f(component, k)`.
    pub fn from_fn(grid: GridSpec, modes: &[usize], f: impl Fn(usize, &[usize]) -> f64) -> Result<Self> {
        let mut s = Self::zeros(grid, modes)?;
        let m: usize = modes.iter().product();
        let data = s.coeffs.as_slice_mut().expect("standard layout");
        for (flat, k) in multi_indices(modes).enumerate() {
            for c in 0..3 {
                data[c * m + flat] = T::lit(f(c, &k));
            }
        }
        check_finite(&s.coeffs, "spectral coefficients")?;
        Ok(s)
    }

    /// Gaussian coefficients `amplitude * g * (1 + lambda)^(-smoothness / 2)`.
    ///
    /// Each draw depends only on the seed, the component and the multi-index,
    /// so fields of nested bands share their common coefficients.
    pub fn random(grid: GridSpec, modes: &[usize], rng: &CounterRng, amplitude: f64, smoothness: f64) -> Result<Self> {
        let extents = grid.extents().to_vec();
        Self::from_fn(grid, modes, |c, k| {
            let decay = (1.0 + eigenvalue(&extents, k)).powf(-0.5 * smoothness);
            amplitude * rng.gaussian(0, mode_counter(c, k)) * decay
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn coeffs(&self) -> &ArrayD<T> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut ArrayD<T> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> ArrayD<T> {
        self.coeffs
    }

    pub fn as_slice(&self) -> &[T] {
        self.coeffs.as_slice().expect("standard layout")
    }

    pub fn mode_count(&self) -> usize {
        self.modes.iter().product()
    }

    /// Coefficient of `component` at multi-index `k`.
    pub fn coeff(&self, component: usize, k: &[usize]) -> T {
        let mut idx = vec![component];
        idx.extend_from_slice(k);
        self.coeffs[IxDyn(&idx)]
    }

    pub fn set_coeff(&mut self, component: usize, k: &[usize], value: T) {
        let mut idx = vec![component];
        idx.extend_from_slice(k);
        self.coeffs[IxDyn(&idx)] = value;
    }

    /// Eigenvalues `lambda(k)` laid out like one component, shape `[M_1, .., M_d]`.
    pub fn eigenvalues(&self) -> ArrayD<T> {
        eigenvalue_table(self.grid.extents(), &self.modes)
    }

    /// Coefficient-space L2 inner product (Parseval).
    pub fn inner(&self, other: &Self) -> T {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| *a * *b).sum()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// `sum_k lambda(k)^p |c_k|^2`, e.g. `p = 1` gives `||grad u||^2`.
    pub fn weighted_norm_sq(&self, p: i32) -> T {
        let lam = self.eigenvalues();
        let m = self.mode_count();
        let lam = lam.as_slice().expect("standard layout");
        let c = self.as_slice();
        let mut total = T::zero();
        for (i, &l) in lam.iter().enumerate() {
            let w = if p == 0 { T::one() } else { l.powi(p) };
            if w == T::zero() {
                continue;
            }
            for comp in 0..3 {
                let x = c[comp * m + i];
                total += w * x * x;
            }
        }
        total
    }

    /// Multiplies each mode by `g(lambda(k))`.
    pub fn map_modes(&self, g: impl Fn(T) -> T) -> Self {
        let lam = self.eigenvalues();
        let factor = lam.mapv(g);
        let coeffs = &self.coeffs * &factor;
        Self::from_raw(self.grid.clone(), coeffs)
    }

    /// Spectral Laplacian (multiplication by `-lambda`).
    pub fn laplacian(&self) -> Self {
        self.map_modes(|l| -l)
    }

    pub fn bilaplacian(&self) -> Self {
        self.map_modes(|l| l * l)
    }

    pub fn scaled(&self, a: T) -> Self {
        Self::from_raw(self.grid.clone(), &self.coeffs * a)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_raw(self.grid.clone(), &self.coeffs + &other.coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_raw(self.grid.clone(), &self.coeffs - &other.coeffs)
    }

    /// Keeps the first `modes` per axis (drops the rest).
    pub fn truncated(&self, modes: &[usize]) -> Result<Self> {
        if modes.len() != self.modes.len() || modes.iter().zip(&self.modes).any(|(a, b)| a > b) {
            return Err(Error::BandExceedsGrid {
                band: modes.to_vec(),
                available: self.modes.clone(),
            });
        }
        let mut view = self.coeffs.view();
        for (axis, &m) in modes.iter().enumerate() {
            view.slice_axis_inplace(Axis(axis + 1), (0..m).into());
        }
        Ok(Self::from_raw(self.grid.clone(), view.to_owned()))
    }

    /// Zero-extends to `modes` per axis, optionally on a different grid of the same box.
    pub fn extended(&self, grid: GridSpec, modes: &[usize]) -> Result<Self> {
        if !grid.same_box(&self.grid) || modes.len() != self.modes.len() {
            return Err(Error::ShapeMismatch("extension to a different box".into()));
        }
        let mut out = Self::zeros(grid, modes)?;
        let mut view = out.coeffs.view_mut();
        for (axis, &m) in self.modes.iter().enumerate() {
            if m > modes[axis] {
                return Err(Error::ShapeMismatch("extension would drop modes".into()));
            }
            view.slice_axis_inplace(Axis(axis + 1), (0..m).into());
        }
        view.assign(&self.coeffs);
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// `lambda(k)` for all `k < modes`, shape `[M_1, .., M_d]`.
pub fn eigenvalue_table<T: Real>(extents: &[f64], modes: &[usize]) -> ArrayD<T> {
    let data = multi_indices(modes).map(|k| T::lit(eigenvalue(extents, &k))).collect();
    ArrayD::from_shape_vec(IxDyn(modes), data).expect("mode table shape")
}
