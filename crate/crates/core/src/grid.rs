//! Tensor-product grids on axis-aligned boxes.
//!
//! Nodes are cell centred: along an axis of length `L` with `N` points the
//! nodes sit at `x_j = (j + 1/2) L / N`. Cosine modes sampled there are
//! discretely orthogonal under the midpoint weight `L / N`, which makes the
//! transform pair exact and Parseval hold without a trapezoid correction.

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;
pub const DEFAULT_DEALIAS_PAD: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    extents: Vec<f64>,
    points: Vec<usize>,
    dealias_pad: usize,
}

impl GridSpec {
    pub fn new(extents: Vec<f64>, points: Vec<usize>, dealias_pad: usize) -> Result<Self> {
        let dim = extents.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} extents but {} point counts",
                dim,
                points.len()
            )));
        }
        if let Some(l) = extents.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("extent {l} must be finite and > 0")));
        }
        if let Some(n) = points.iter().find(|&&n| n < MIN_POINTS) {
            return Err(Error::InvalidGrid(format!(
                "{n} points per axis, need at least {MIN_POINTS}"
            )));
        }
        if dealias_pad < 1 {
            return Err(Error::InvalidGrid("dealias_pad must be >= 1".into()));
        }
        Ok(Self {
            extents,
            points,
            dealias_pad,
        })
    }

    /// Unit box `[0,1]^dim` with `n` points per axis and the default padding.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(vec![1.0; dim], vec![n; dim], DEFAULT_DEALIAS_PAD)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn dealias_pad(&self) -> usize {
        self.dealias_pad
    }

    pub fn node_count(&self) -> usize {
        self.points.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.extents
            .iter()
            .zip(&self.points)
            .map(|(l, &n)| l / n as f64)
            .product()
    }

    /// Grid used for pointwise products: every axis refined by `dealias_pad`.
    pub fn padded(&self) -> GridSpec {
        GridSpec {
            extents: self.extents.clone(),
            points: self.points.iter().map(|n| n * self.dealias_pad).collect(),
            dealias_pad: self.dealias_pad,
        }
    }

    /// Same box with different point counts.
    pub fn with_points(&self, points: Vec<usize>) -> Result<GridSpec> {
        GridSpec::new(self.extents.clone(), points, self.dealias_pad)
    }

    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        (j as f64 + 0.5) * self.extents[axis] / self.points[axis] as f64
    }

    /// Coordinates of the node with row-major flat index `flat` (last axis fastest).
    pub fn node(&self, mut flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.points[axis];
            x[axis] = self.coordinate(axis, flat % n);
            flat /= n;
        }
        x
    }

    pub fn same_box(&self, other: &GridSpec) -> bool {
        self.extents == other.extents
    }
}

/// Neumann-Laplacian eigenvalue `sum_j (k_j pi / L_j)^2` of multi-index `k`.
pub fn eigenvalue(extents: &[f64], k: &[usize]) -> f64 {
    k.iter()
        .zip(extents)
        .map(|(&kj, l)| {
            let a = kj as f64 * std::f64::consts::PI / l;
            a * a
        })
        .sum()
}

/// Iterates all multi-indices `0 <= k_j < bounds_j` in row-major order.
pub fn multi_indices(bounds: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = bounds.iter().product();
    (0..total).map(move |mut flat| {
        let mut k = vec![0; bounds.len()];
        for axis in (0..bounds.len()).rev() {
            k[axis] = flat % bounds[axis];
            flat /= bounds[axis];
        }
        k
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(vec![1.0], vec![3], 2).is_err());
        assert!(GridSpec::new(vec![1.0, 1.0], vec![8], 2).is_err());
        assert!(GridSpec::new(vec![0.0], vec![8], 2).is_err());
        assert!(GridSpec::new(vec![1.0; 4], vec![8; 4], 2).is_err());
        assert!(GridSpec::new(vec![1.0], vec![8], 0).is_err());
        assert!(GridSpec::new(vec![2.0, 1.0], vec![4, 6], 1).is_ok());
    }

    #[test]
    fn nodes_are_cell_centred_row_major() {
        let g = GridSpec::new(vec![2.0, 1.0], vec![4, 5], 2).unwrap();
        assert_eq!(g.node(0), vec![0.25, 0.1]);
        assert_eq!(g.node(6), vec![0.75, 0.3]);
        assert_eq!(g.padded().points(), &[8, 10]);
        assert!((g.cell_volume() * g.node_count() as f64 - g.volume()).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_increase_along_each_axis() {
        let ext = [1.0, 2.0];
        assert_eq!(eigenvalue(&ext, &[0, 0]), 0.0);
        for k in 0..10 {
            assert!(eigenvalue(&ext, &[k + 1, 3]) > eigenvalue(&ext, &[k, 3]));
            assert!(eigenvalue(&ext, &[2, k + 1]) > eigenvalue(&ext, &[2, k]));
        }
    }
}
