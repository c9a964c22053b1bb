//! Norms monitored along a trajectory.

use ndarray::ArrayD;

use crate::error::Result;
use crate::field::{eigenvalue_table, SpectralField, Transform};
use crate::galerkin::{ModeBand, ProductEvaluator};
use crate::grid::GridSpec;
use crate::scalar::Real;

/// Norms of one state. `l2`..`grad_delta2_l2` are `L^2` norms of `u`, `grad u`,
/// `lap u`, `grad lap u`, `lap^2 u` and `grad lap^2 u`; the mixed entries are
/// `L^2` norms of `u . grad u`, `|u||grad u|`, `u . lap u` and `|u||lap u|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSuite {
    pub t: f64,
    pub l2: f64,
    pub l4: f64,
    pub l6: f64,
    pub linf: f64,
    pub grad_l2: f64,
    pub delta_l2: f64,
    pub grad_delta_l2: f64,
    pub delta2_l2: f64,
    pub grad_delta2_l2: f64,
    pub u_dot_grad_u: f64,
    pub abs_u_abs_grad_u: f64,
    pub u_dot_delta_u: f64,
    pub abs_u_abs_delta_u: f64,
    /// `<lap(|u|^2 u), lap u>`, needed by the gradient-level balance. Not
    /// part of the ledger file, so `None` after reading one back.
    pub cubic_delta_pairing: Option<f64>,
}

impl NormSuite {
    pub fn zero(t: f64) -> Self {
        Self {
            t,
            l2: 0.0,
            l4: 0.0,
            l6: 0.0,
            linf: 0.0,
            grad_l2: 0.0,
            delta_l2: 0.0,
            grad_delta_l2: 0.0,
            delta2_l2: 0.0,
            grad_delta2_l2: 0.0,
            u_dot_grad_u: 0.0,
            abs_u_abs_grad_u: 0.0,
            u_dot_delta_u: 0.0,
            abs_u_abs_delta_u: 0.0,
            cubic_delta_pairing: Some(0.0),
        }
    }

    /// Values in ledger column order (after `t`).
    pub fn values(&self) -> [f64; 13] {
        [
            self.l2,
            self.l4,
            self.l6,
            self.linf,
            self.grad_l2,
            self.delta_l2,
            self.grad_delta_l2,
            self.delta2_l2,
            self.grad_delta2_l2,
            self.u_dot_grad_u,
            self.abs_u_abs_grad_u,
            self.u_dot_delta_u,
            self.abs_u_abs_delta_u,
        ]
    }

    pub fn from_values(t: f64, v: [f64; 13]) -> Self {
        Self {
            t,
            l2: v[0],
            l4: v[1],
            l6: v[2],
            linf: v[3],
            grad_l2: v[4],
            delta_l2: v[5],
            grad_delta_l2: v[6],
            delta2_l2: v[7],
            grad_delta2_l2: v[8],
            u_dot_grad_u: v[9],
            abs_u_abs_grad_u: v[10],
            u_dot_delta_u: v[11],
            abs_u_abs_delta_u: v[12],
            cubic_delta_pairing: None,
        }
    }

    /// Norm of `D^r u` for `r = 0..=5` (`D^{2j} = lap^j`, `D^{2j+1} = grad lap^j`).
    pub fn level(&self, r: usize) -> f64 {
        [
            self.l2,
            self.grad_l2,
            self.delta_l2,
            self.grad_delta_l2,
            self.delta2_l2,
            self.grad_delta2_l2,
        ][r]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite() && *x >= 0.0)
    }
}

/// Cached transforms for repeated norm evaluation on one grid and band.
#[derive(Clone, Debug)]
pub struct NormEvaluator<T> {
    grid: GridSpec,
    modes: Vec<usize>,
    lambda: ArrayD<T>,
    padded: Transform<T>,
    /// Grid on which `|u|^6` is integrated exactly.
    sextic: Transform<T>,
    sextic_cell: f64,
    products: ProductEvaluator<T>,
}

impl<T: Real> NormEvaluator<T> {
    pub fn new(grid: &GridSpec, modes: &[usize]) -> Result<Self> {
        let band = ModeBand::new(modes.to_vec(), grid)?;
        let pad = grid.padded();
        let padded = Transform::new(pad.extents(), modes, pad.points())?;
        let sextic_points: Vec<usize> = pad.points().iter().zip(modes).map(|(&p, &m)| p.max(3 * m)).collect();
        let sextic_grid = grid.with_points(sextic_points)?;
        let sextic = Transform::new(sextic_grid.extents(), modes, sextic_grid.points())?;
        Ok(Self {
            grid: grid.clone(),
            modes: modes.to_vec(),
            lambda: eigenvalue_table(grid.extents(), modes),
            padded,
            sextic,
            sextic_cell: sextic_grid.cell_volume(),
            products: ProductEvaluator::new(grid, &band)?,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// All monitored norms of `u` at time `t`.
    pub fn norms(&self, t: f64, u: &SpectralField<T>) -> NormSuite {
        let c = u.coeffs().mapv(|x| x.to_f64_lossy());
        let lam = self.lambda.mapv(|x| x.to_f64_lossy());
        let m: usize = self.modes.iter().product();
        let cs = c.as_slice().expect("standard layout");
        let ls = lam.as_slice().expect("standard layout");
        let mut levels = [0.0f64; 6];
        for comp in 0..3 {
            for (i, &l) in ls.iter().enumerate() {
                let x = cs[comp * m + i];
                let mut w = x * x;
                for level in levels.iter_mut() {
                    *level += w;
                    w *= l;
                }
            }
        }

        let d = self.grid.dim();
        let pad = self.grid.padded();
        let n = pad.node_count();
        let zeros = vec![0; d];
        let vals = self.padded.synthesize(u.coeffs(), &zeros);
        let lap_coeffs = u.coeffs() * &self.lambda.mapv(|l| -l);
        let laps = self.padded.synthesize(&lap_coeffs, &zeros);
        let grads: Vec<ArrayD<T>> = (0..d)
            .map(|j| {
                let mut o = zeros.clone();
                o[j] = 1;
                self.padded.synthesize(u.coeffs(), &o)
            })
            .collect();
        let v = vals.as_slice().expect("standard layout");
        let lp = laps.as_slice().expect("standard layout");
        let (mut l4, mut sup, mut udg, mut ag, mut udl, mut al) = (0.0, 0.0f64, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let u: [f64; 3] = std::array::from_fn(|c| v[c * n + i].to_f64_lossy());
            let l: [f64; 3] = std::array::from_fn(|c| lp[c * n + i].to_f64_lossy());
            let sq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
            l4 += sq * sq;
            sup = sup.max(sq);
            let mut g2 = 0.0;
            for g in &grads {
                let gs = g.as_slice().expect("standard layout");
                let col: [f64; 3] = std::array::from_fn(|c| gs[c * n + i].to_f64_lossy());
                let dot = u[0] * col[0] + u[1] * col[1] + u[2] * col[2];
                udg += dot * dot;
                g2 += col[0] * col[0] + col[1] * col[1] + col[2] * col[2];
            }
            ag += sq * g2;
            let dot = u[0] * l[0] + u[1] * l[1] + u[2] * l[2];
            udl += dot * dot;
            al += sq * (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
        }
        let w = pad.cell_volume();

        let fine = self.sextic.synthesize(u.coeffs(), &zeros);
        let nf = fine.len() / 3;
        let f = fine.as_slice().expect("standard layout");
        let l6: f64 = (0..nf)
            .map(|i| {
                let sq: f64 = (0..3).map(|c| f[c * nf + i].to_f64_lossy().powi(2)).sum();
                sq * sq * sq
            })
            .sum::<f64>()
            * self.sextic_cell;

        let (cubic, _) = self.products.products(u.coeffs());
        let pairing: f64 = cubic
            .iter()
            .zip(u.coeffs().iter())
            .enumerate()
            .map(|(idx, (a, b))| {
                let l = ls[idx % m];
                l * l * a.to_f64_lossy() * b.to_f64_lossy()
            })
            .sum();

        NormSuite {
            t,
            l2: levels[0].sqrt(),
            l4: (l4 * w).powf(0.25),
            l6: l6.powf(1.0 / 6.0),
            linf: sup.sqrt(),
            grad_l2: levels[1].sqrt(),
            delta_l2: levels[2].sqrt(),
            grad_delta_l2: levels[3].sqrt(),
            delta2_l2: levels[4].sqrt(),
            grad_delta2_l2: levels[5].sqrt(),
            u_dot_grad_u: (udg * w).sqrt(),
            abs_u_abs_grad_u: (ag * w).sqrt(),
            u_dot_delta_u: (udl * w).sqrt(),
            abs_u_abs_delta_u: (al * w).sqrt(),
            cubic_delta_pairing: Some(pairing),
        }
    }
}

/// Norms of `u` at `t = 0`; see [`NormEvaluator`] for repeated use.
pub fn norms<T: Real>(u: &SpectralField<T>) -> Result<NormSuite> {
    Ok(NormEvaluator::new(u.grid(), u.modes())?.norms(0.0, u))
}
