//! Integer-order Sobolev norms of band-limited fields.
//!
//! `|v|_{H^s}^2 = sum_{j <= s} |D^j v|^2`, where `D^j v` is the full tensor of
//! `j`-th derivatives with the Frobenius norm. In the cosine basis
//! `|D^j v|^2 = sum_k lambda(k)^j |c_k|^2`.

use crate::error::{Error, Result};
use crate::field::{SpectralField, Transform};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// `sum_k lambda(k)^j |c_k|^2`.
pub fn level_sq<T: Real>(v: &SpectralField<T>, j: u32) -> f64 {
    v.weighted_norm_sq(j as i32).to_f64_lossy()
}

pub fn hs_norm<T: Real>(v: &SpectralField<T>, s: u32) -> f64 {
    (0..=s).map(|j| level_sq(v, j)).sum::<f64>().sqrt()
}

/// Nodal values of a field and its derivatives on the dealiasing grid.
pub struct Nodal {
    pub grid: GridSpec,
    /// `tensors[j]` lists `(multiplicity, values [3 * n])` over the distinct
    /// derivatives of order `j`; multiplicities count ordered index tuples.
    pub tensors: Vec<Vec<(f64, Vec<f64>)>>,
}

pub const MAX_TENSOR_ORDER: usize = 2;

impl Nodal {
    pub fn new<T: Real>(v: &SpectralField<T>, max_order: usize) -> Result<Self> {
        if max_order > MAX_TENSOR_ORDER {
            return Err(Error::InvalidParameter(format!(
                "derivative order {max_order} exceeds {MAX_TENSOR_ORDER}"
            )));
        }
        let grid = v.grid().padded();
        let tr = Transform::<T>::new(grid.extents(), v.modes(), grid.points())?;
        let d = grid.dim();
        let eval = |orders: &[usize]| -> Vec<f64> {
            tr.synthesize(v.coeffs(), orders)
                .iter()
                .map(|x| x.to_f64_lossy())
                .collect()
        };
        let mut tensors = vec![vec![(1.0, eval(&vec![0; d]))]];
        if max_order >= 1 {
            tensors.push(
                (0..d)
                    .map(|j| {
                        let mut o = vec![0; d];
                        o[j] = 1;
                        (1.0, eval(&o))
                    })
                    .collect(),
            );
        }
        if max_order >= 2 {
            let mut second = Vec::new();
            for i in 0..d {
                for j in i..d {
                    let mut o = vec![0; d];
                    o[i] += 1;
                    o[j] += 1;
                    second.push((if i == j { 1.0 } else { 2.0 }, eval(&o)));
                }
            }
            tensors.push(second);
        }
        Ok(Self { grid, tensors })
    }

    pub fn nodes(&self) -> usize {
        self.grid.node_count()
    }

    pub fn values(&self) -> &[f64] {
        &self.tensors[0][0].1
    }

    /// `|D^j v(x_i)|^2`.
    pub fn tensor_sq(&self, j: usize, i: usize) -> f64 {
        let n = self.nodes();
        self.tensors[j]
            .iter()
            .map(|(m, vals)| m * (0..3).map(|c| vals[c * n + i].powi(2)).sum::<f64>())
            .sum()
    }

    /// `(sum_{j <= r} |D^j v(x_i)|^2)^(1/2)`.
    pub fn jet_length(&self, r: usize, i: usize) -> f64 {
        (0..=r).map(|j| self.tensor_sq(j, i)).sum::<f64>().sqrt()
    }

    /// `W^{r,q}` norm by nodal quadrature; `q = None` is the sup norm.
    pub fn w_norm(&self, r: usize, q: Option<u32>) -> f64 {
        let n = self.nodes();
        match q {
            None => (0..n).map(|i| self.jet_length(r, i)).fold(0.0, f64::max),
            Some(q) => {
                let sum: f64 = (0..n).map(|i| self.jet_length(r, i).powi(q as i32)).sum();
                (sum * self.grid.cell_volume()).powf(1.0 / q as f64)
            }
        }
    }

    pub fn sup(&self) -> f64 {
        self.w_norm(0, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn nodal_w2_matches_spectral_h() {
        let g = GridSpec::new(vec![1.0, 0.7], vec![8, 8], 2).unwrap();
        let v = SpectralField::<f64>::random(g, &[8, 8], &CounterRng::new(1), 1.0, 2.0).unwrap();
        let nodal = Nodal::new(&v, 2).unwrap();
        for r in 0..=2 {
            let a = nodal.w_norm(r, Some(2));
            let b = hs_norm(&v, r as u32);
            assert!((a - b).abs() < 1e-10 * b, "r = {r}: {a} vs {b}");
        }
    }
}
