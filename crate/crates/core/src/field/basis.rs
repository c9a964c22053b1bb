//! Orthonormal Neumann cosine bases and per-axis transforms.
//!
//! On `[0, L]` the basis is `e_0 = 1/sqrt(L)`, `e_k = sqrt(2/L) cos(k pi x / L)`.
//! Every `e_k` has vanishing normal derivative (and vanishing normal
//! derivative of its Laplacian) at both faces. Multi-dimensional bases are
//! tensor products, so every transform is a sequence of dense per-axis
//! contractions.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayD, ArrayView2, ArrayViewMut2, IxDyn, ShapeBuilder};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Highest derivative order tabulated per axis.
pub const MAX_ORDER: usize = 2;

/// Value of the `order`-th derivative of the unit-norm cosine mode `k` at `x`.
pub fn basis_derivative(length: f64, k: usize, order: usize, x: f64) -> f64 {
    if k == 0 {
        return if order == 0 { 1.0 / length.sqrt() } else { 0.0 };
    }
    let a = k as f64 * PI / length;
    (2.0 / length).sqrt() * a.powi(order as i32) * (a * x + order as f64 * FRAC_PI_2).cos()
}

#[derive(Clone, Debug)]
struct AxisBasis<T> {
    /// `synth[o][(j, k)]` = o-th derivative of mode k at node j.
    synth: Vec<Array2<T>>,
    /// Midpoint-quadrature projection onto the modes.
    analysis: Array2<T>,
    /// Half-size tables for mirror-symmetric node sets.
    folded: Option<Folded<T>>,
}

/// On cell-centred nodes, node `P-1-j` mirrors node `j` and the `o`-th
/// derivative of mode `k` picks up the sign `(-1)^(k+o)`. Even and odd modes
/// then decouple over the first half of the nodes.
#[derive(Clone, Debug)]
struct Folded<T> {
    /// `synth_even[o]` is `h x ceil(M/2)`, `synth_odd[o]` is `h x floor(M/2)`.
    synth_even: Vec<Array2<T>>,
    synth_odd: Vec<Array2<T>>,
    analysis_even: Array2<T>,
    analysis_odd: Array2<T>,
}

impl<T: Real> Folded<T> {
    fn new(synth: &[Array2<T>], analysis: &Array2<T>) -> Self {
        let h = analysis.ncols() / 2;
        let rows = |a: &Array2<T>, step_start: usize| a.slice(s![.., step_start..;2]).slice(s![..h, ..]).to_owned();
        Self {
            synth_even: synth.iter().map(|m| rows(m, 0)).collect(),
            synth_odd: synth.iter().map(|m| rows(m, 1)).collect(),
            analysis_even: analysis.slice(s![0..;2, ..h]).to_owned(),
            analysis_odd: analysis.slice(s![1..;2, ..h]).to_owned(),
        }
    }
}

impl<T: Real> AxisBasis<T> {
    fn new(length: f64, modes: usize, points: usize) -> Self {
        let h = length / points as f64;
        let nodes: Vec<f64> = (0..points).map(|j| (j as f64 + 0.5) * h).collect();
        let mut b = Self::at_nodes(length, modes, &nodes);
        if points.is_multiple_of(2) && modes >= 2 {
            b.folded = Some(Folded::new(&b.synth, &b.analysis));
        }
        b
    }

    /// The analysis matrix is a projection only for cell-centred nodes.
    fn at_nodes(length: f64, modes: usize, nodes: &[f64]) -> Self {
        let points = nodes.len();
        let h = length / points as f64;
        let synth = (0..=MAX_ORDER)
            .map(|o| {
                Array2::from_shape_fn((points, modes), |(j, k)| {
                    T::lit(basis_derivative(length, k, o, nodes[j]))
                })
            })
            .collect();
        let analysis = Array2::from_shape_fn((modes, points), |(k, j)| {
            T::lit(basis_derivative(length, k, 0, nodes[j]) * h)
        });
        Self {
            synth,
            analysis,
            folded: None,
        }
    }

    /// `dst = synth[order] * src` along the middle axis of `(pre, M, post)`.
    fn synthesize(&self, src: &[T], dims: (usize, usize, usize), order: usize, dst: &mut [T], ws: &mut Scratch<T>) {
        match &self.folded {
            Some(f) => synth_folded(
                src,
                dims,
                &f.synth_even[order],
                &f.synth_odd[order],
                order % 2 == 1,
                dst,
                ws,
            ),
            None => contract(src, dims, &self.synth[order].view(), dst),
        }
    }

    /// `dst = analysis * src` along the middle axis of `(pre, P, post)`.
    fn analyze(&self, src: &[T], dims: (usize, usize, usize), dst: &mut [T], ws: &mut Scratch<T>) {
        match &self.folded {
            Some(f) => analyze_folded(src, dims, &f.analysis_even, &f.analysis_odd, dst, ws),
            None => contract(src, dims, &self.analysis.view(), dst),
        }
    }
}

/// Reusable buffers for the transforms; grows to the largest request and is
/// then reused without further allocation.
#[derive(Debug)]
pub struct Workspace<T> {
    ping: Vec<T>,
    pong: Vec<T>,
    scratch: Scratch<T>,
}

impl<T> Default for Workspace<T> {
    fn default() -> Self {
        Self {
            ping: Vec::new(),
            pong: Vec::new(),
            scratch: Scratch::default(),
        }
    }
}

#[derive(Debug)]
struct Scratch<T> {
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
    d: Vec<T>,
}

impl<T> Default for Scratch<T> {
    fn default() -> Self {
        Self {
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            d: Vec::new(),
        }
    }
}

fn ensure<T: Real>(v: &mut Vec<T>, len: usize) -> &mut [T] {
    if v.len() < len {
        v.resize(len, T::zero());
    }
    &mut v[..len]
}

/// Transform between `modes` cosine coefficients and values on a grid of
/// `points` cell-centred nodes over a box of the given extents.
///
/// Arrays carry a leading batch axis (components), followed by the spatial
/// axes, in standard row-major layout.
#[derive(Clone, Debug)]
pub struct Transform<T> {
    extents: Vec<f64>,
    modes: Vec<usize>,
    points: Vec<usize>,
    axes: Vec<AxisBasis<T>>,
}

#[derive(Clone, Copy)]
enum Direction<'a> {
    Synthesis(&'a [usize]),
    Analysis,
}

impl<T: Real> Transform<T> {
    pub fn new(extents: &[f64], modes: &[usize], points: &[usize]) -> Result<Self> {
        if extents.len() != modes.len() || modes.len() != points.len() {
            return Err(Error::ShapeMismatch(format!(
                "transform axes: {} extents, {} mode counts, {} point counts",
                extents.len(),
                modes.len(),
                points.len()
            )));
        }
        if modes.contains(&0) {
            return Err(Error::InvalidParameter("zero retained modes".into()));
        }
        let axes = extents
            .iter()
            .zip(modes)
            .zip(points)
            .map(|((&l, &m), &p)| AxisBasis::new(l, m, p))
            .collect();
        Ok(Self {
            extents: extents.to_vec(),
            modes: modes.to_vec(),
            points: points.to_vec(),
            axes,
        })
    }

    /// Synthesis-only transform onto arbitrary per-axis coordinates.
    pub fn at_nodes(extents: &[f64], modes: &[usize], nodes: &[Vec<f64>]) -> Result<Self> {
        if extents.len() != modes.len() || modes.len() != nodes.len() {
            return Err(Error::ShapeMismatch("transform axes disagree".into()));
        }
        if modes.contains(&0) || nodes.iter().any(|n| n.is_empty()) {
            return Err(Error::InvalidParameter("empty transform axis".into()));
        }
        let axes = extents
            .iter()
            .zip(modes)
            .zip(nodes)
            .map(|((&l, &m), x)| AxisBasis::at_nodes(l, m, x))
            .collect();
        Ok(Self {
            extents: extents.to_vec(),
            modes: modes.to_vec(),
            points: nodes.iter().map(Vec::len).collect(),
            axes,
        })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    /// Evaluates the series (or its mixed derivative of per-axis `orders`) at
    /// the nodes. `coeffs` has shape `[batch, M_1, .., M_d]`.
    pub fn synthesize(&self, coeffs: &ArrayD<T>, orders: &[usize]) -> ArrayD<T> {
        debug_assert_eq!(coeffs.shape()[1..], self.modes[..]);
        let batch = coeffs.shape()[0];
        let c = coeffs.as_standard_layout();
        let mut out = Vec::new();
        let input = c.as_slice().expect("standard layout");
        self.synthesize_into(input, batch, orders, &mut out, &mut Workspace::default());
        self.wrap(out, batch, &self.points)
    }

    /// Projects nodal values `[batch, P_1, .., P_d]` onto the retained modes.
    pub fn analyze(&self, values: &ArrayD<T>) -> ArrayD<T> {
        debug_assert_eq!(values.shape()[1..], self.points[..]);
        let batch = values.shape()[0];
        let v = values.as_standard_layout();
        let mut out = Vec::new();
        let input = v.as_slice().expect("standard layout");
        self.analyze_into(input, batch, &mut out, &mut Workspace::default());
        self.wrap(out, batch, &self.modes)
    }

    fn wrap(&self, mut data: Vec<T>, batch: usize, dims: &[usize]) -> ArrayD<T> {
        let shape: Vec<usize> = std::iter::once(batch).chain(dims.iter().copied()).collect();
        data.truncate(shape.iter().product());
        ArrayD::from_shape_vec(IxDyn(&shape), data).expect("transform shape")
    }

    /// Slice form of [`Self::synthesize`]: reads `batch * prod(M)` row-major
    /// coefficients and leaves `batch * prod(P)` values at the front of `out`.
    pub fn synthesize_into(
        &self,
        coeffs: &[T],
        batch: usize,
        orders: &[usize],
        out: &mut Vec<T>,
        ws: &mut Workspace<T>,
    ) {
        debug_assert_eq!(orders.len(), self.axes.len());
        self.sweep(coeffs, batch, Direction::Synthesis(orders), out, ws);
    }

    /// Slice form of [`Self::analyze`].
    pub fn analyze_into(&self, values: &[T], batch: usize, out: &mut Vec<T>, ws: &mut Workspace<T>) {
        self.sweep(values, batch, Direction::Analysis, out, ws);
    }

    fn sweep(&self, input: &[T], batch: usize, dir: Direction<'_>, out: &mut Vec<T>, ws: &mut Workspace<T>) {
        let Workspace { ping, pong, scratch } = ws;
        let mut shape: Vec<usize> = std::iter::once(batch)
            .chain(match dir {
                Direction::Synthesis(_) => self.modes.iter().copied(),
                Direction::Analysis => self.points.iter().copied(),
            })
            .collect();
        let mut len: usize = shape.iter().product();
        debug_assert!(input.len() >= len);
        for (axis, basis) in self.axes.iter().enumerate() {
            let dims = split3(&shape, axis + 1);
            let rows = match dir {
                Direction::Synthesis(_) => self.points[axis],
                Direction::Analysis => self.modes[axis],
            };
            let new_len = dims.0 * rows * dims.2;
            let (src, dst): (&[T], &mut Vec<T>) = match axis {
                0 => (&input[..len], &mut *ping),
                a if a % 2 == 1 => (&ping[..len], &mut *pong),
                _ => (&pong[..len], &mut *ping),
            };
            let dst = ensure(dst, new_len);
            match dir {
                Direction::Synthesis(orders) => basis.synthesize(src, dims, orders[axis], dst, scratch),
                Direction::Analysis => basis.analyze(src, dims, dst, scratch),
            }
            shape[axis + 1] = rows;
            len = new_len;
        }
        let last = if self.axes.len() % 2 == 1 { ping } else { pong };
        std::mem::swap(out, last);
        out.truncate(len);
    }
}

fn split3(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let pre = shape[..axis].iter().product();
    let post = shape[axis + 1..].iter().product();
    (pre, shape[axis], post)
}

/// `dst[p, :, q] = mat * src[p, :, q]` on row-major `(pre, n, post)` data.
fn contract<T: Real>(src: &[T], dims: (usize, usize, usize), mat: &ArrayView2<'_, T>, dst: &mut [T]) {
    let (pre, n, post) = dims;
    let rows = mat.nrows();
    debug_assert_eq!(mat.ncols(), n);
    if post == 1 {
        let a = ArrayView2::from_shape((pre, n), &src[..pre * n]).expect("source shape");
        let mut o = ArrayViewMut2::from_shape((pre, rows), &mut dst[..pre * rows]).expect("target shape");
        general_mat_mul(T::one(), &a, &mat.t(), T::zero(), &mut o);
    } else {
        for p in 0..pre {
            let a = ArrayView2::from_shape((n, post), &src[p * n * post..(p + 1) * n * post]).expect("source shape");
            let mut o = ArrayViewMut2::from_shape((rows, post), &mut dst[p * rows * post..(p + 1) * rows * post])
                .expect("target shape");
            general_mat_mul(T::one(), mat, &a, T::zero(), &mut o);
        }
    }
}

/// Like [`contract`], reading only the rows `start, start + 2, ..` of the
/// middle axis of `src` (a strided view, no copy).
fn contract_alternate<T: Real>(
    src: &[T],
    dims: (usize, usize, usize),
    start: usize,
    mat: &ArrayView2<'_, T>,
    dst: &mut [T],
) {
    let (pre, n, post) = dims;
    let count = mat.ncols();
    let rows = mat.nrows();
    debug_assert_eq!(count, (n + 1 - start) / 2);
    if post == 1 {
        let a = ArrayView2::from_shape((pre, count).strides((n, 2)), &src[start..]).expect("strided source");
        let mut o = ArrayViewMut2::from_shape((pre, rows), &mut dst[..pre * rows]).expect("target shape");
        general_mat_mul(T::one(), &a, &mat.t(), T::zero(), &mut o);
    } else {
        for (p, o) in dst[..pre * rows * post].chunks_exact_mut(rows * post).enumerate() {
            let base = (p * n + start) * post;
            let a = ArrayView2::from_shape((count, post).strides((2 * post, 1)), &src[base..]).expect("strided source");
            let mut o = ArrayViewMut2::from_shape((rows, post), o).expect("target shape");
            general_mat_mul(T::one(), mat, &a, T::zero(), &mut o);
        }
    }
}

/// Contracts the middle axis of row-major `(pre, n, post)` data with `mat`.
#[cfg(test)]
pub(crate) fn apply_axis<T: Real>(a: &ArrayD<T>, axis: usize, mat: &Array2<T>) -> ArrayD<T> {
    let a = a.as_standard_layout();
    let dims = split3(a.shape(), axis);
    let mut shape = a.shape().to_vec();
    shape[axis] = mat.nrows();
    let mut out = ArrayD::zeros(IxDyn(&shape));
    contract(
        a.as_slice().expect("standard layout"),
        dims,
        &mat.view(),
        out.as_slice_mut().expect("owned"),
    );
    out
}

/// Synthesis through the even/odd split: with `E`, `O` the even- and
/// odd-mode sums on the first half, node `j` gets `E + O` and its mirror
/// `+-(E - O)`.
fn synth_folded<T: Real>(
    src: &[T],
    dims: (usize, usize, usize),
    even: &Array2<T>,
    odd: &Array2<T>,
    odd_order: bool,
    dst: &mut [T],
    ws: &mut Scratch<T>,
) {
    let (pre, _, post) = dims;
    let h = even.nrows();
    let block = pre * h * post;
    let Scratch { c, d, .. } = ws;
    contract_alternate(src, dims, 0, &even.view(), ensure(c, block));
    contract_alternate(src, dims, 1, &odd.view(), ensure(d, block));
    let width = h * post;
    let rows = dst[..2 * block]
        .chunks_exact_mut(2 * width)
        .zip(c[..block].chunks_exact(width).zip(d[..block].chunks_exact(width)));
    for (out, (e, o)) in rows {
        let (lo, hi) = out.split_at_mut(width);
        for ((l, &x), &y) in lo.iter_mut().zip(e).zip(o) {
            *l = x + y;
        }
        // The mirrored half runs through the nodes backwards, row by row.
        for ((hrow, erow), orow) in hi
            .chunks_exact_mut(post)
            .rev()
            .zip(e.chunks_exact(post))
            .zip(o.chunks_exact(post))
        {
            for ((v, &x), &y) in hrow.iter_mut().zip(erow).zip(orow) {
                *v = if odd_order { y - x } else { x - y };
            }
        }
    }
}

/// Analysis through the even/odd split: even modes see `y_j + y_mirror`,
/// odd modes `y_j - y_mirror`.
fn analyze_folded<T: Real>(
    src: &[T],
    dims: (usize, usize, usize),
    even: &Array2<T>,
    odd: &Array2<T>,
    dst: &mut [T],
    ws: &mut Scratch<T>,
) {
    let (pre, _, post) = dims;
    let h = even.ncols();
    let block = pre * h * post;
    let width = h * post;
    let Scratch { a, b, c, d } = ws;
    {
        let (sum, diff) = (ensure(a, block), ensure(b, block));
        let rows = src[..2 * block]
            .chunks_exact(2 * width)
            .zip(sum.chunks_exact_mut(width).zip(diff.chunks_exact_mut(width)));
        for (y, (s, df)) in rows {
            let (lo, hi) = y.split_at(width);
            for (((srow, drow), lrow), hrow) in s
                .chunks_exact_mut(post)
                .zip(df.chunks_exact_mut(post))
                .zip(lo.chunks_exact(post))
                .zip(hi.chunks_exact(post).rev())
            {
                for (((sv, dv), &x), &z) in srow.iter_mut().zip(drow.iter_mut()).zip(lrow).zip(hrow) {
                    *sv = x + z;
                    *dv = x - z;
                }
            }
        }
    }
    let (me, mo) = (even.nrows(), odd.nrows());
    contract(&a[..block], (pre, h, post), &even.view(), ensure(c, pre * me * post));
    contract(&b[..block], (pre, h, post), &odd.view(), ensure(d, pre * mo * post));
    let modes = me + mo;
    for (p, out) in dst[..pre * modes * post].chunks_exact_mut(modes * post).enumerate() {
        let e = &c[p * me * post..(p + 1) * me * post];
        let o = &d[p * mo * post..(p + 1) * mo * post];
        for (k, row) in out.chunks_exact_mut(post).enumerate() {
            let from = if k % 2 == 0 { e } else { o };
            let at = (k / 2) * post;
            row.copy_from_slice(&from[at..at + post]);
        }
    }
}
