//! Hölder-in-time quotients of a trajectory.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::Transform;
use crate::integrator::SolverState;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HolderNorm {
    L2,
    Linf,
}

impl fmt::Display for HolderNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HolderNorm::L2 => "L2",
            HolderNorm::Linf => "Linf",
        })
    }
}

impl FromStr for HolderNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(HolderNorm::L2),
            "linf" => Ok(HolderNorm::Linf),
            _ => Err(Error::InvalidParameter(format!(
                "unknown norm {s:?} (expected L2 or Linf)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderReport {
    pub exponent: f64,
    pub norm: HolderNorm,
    pub sup_quotient: f64,
    pub pair_count: usize,
}

pub const MIN_SNAPSHOTS: usize = 10;

/// `sup |u(t) - u(s)| / |t - s|^exponent` over all snapshot pairs. The
/// `Linf` norm is taken over the dealiasing grid.
pub fn holder_quotient<T: Real>(snapshots: &[SolverState<T>], exponent: f64, norm: HolderNorm) -> Result<HolderReport> {
    if !(exponent > 0.0 && exponent < 1.0) {
        return Err(Error::InvalidParameter(format!("exponent {exponent} not in (0, 1)")));
    }
    if snapshots.len() < MIN_SNAPSHOTS {
        return Err(Error::InsufficientData(format!(
            "Hölder quotient needs at least {MIN_SNAPSHOTS} snapshots, got {}",
            snapshots.len()
        )));
    }
    let first = &snapshots[0].u;
    if snapshots
        .iter()
        .any(|s| s.u.grid() != first.grid() || s.u.modes() != first.modes())
    {
        return Err(Error::ShapeMismatch("snapshots differ in grid or band".into()));
    }
    // Per-snapshot vectors whose difference norms are the wanted norms.
    let (vectors, n): (Vec<Vec<f64>>, usize) = match norm {
        HolderNorm::L2 => (
            snapshots
                .iter()
                .map(|s| s.u.as_slice().iter().map(|x| x.to_f64_lossy()).collect())
                .collect(),
            0,
        ),
        HolderNorm::Linf => {
            let pad = first.grid().padded();
            let tr = Transform::<T>::new(pad.extents(), first.modes(), pad.points())?;
            let zeros = vec![0; pad.dim()];
            let v = snapshots
                .iter()
                .map(|s| {
                    tr.synthesize(s.u.coeffs(), &zeros)
                        .iter()
                        .map(|x| x.to_f64_lossy())
                        .collect()
                })
                .collect();
            (v, pad.node_count())
        }
    };
    let mut sup = 0.0f64;
    let mut pairs = 0;
    for i in 0..snapshots.len() {
        for j in i + 1..snapshots.len() {
            let dt = (snapshots[j].t - snapshots[i].t).abs();
            if dt == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "repeated snapshot time {}",
                    snapshots[i].t
                )));
            }
            let (a, b) = (&vectors[i], &vectors[j]);
            let diff = match norm {
                HolderNorm::L2 => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
                HolderNorm::Linf => (0..n)
                    .map(|k| (0..3).map(|c| (a[c * n + k] - b[c * n + k]).powi(2)).sum::<f64>())
                    .fold(0.0, f64::max)
                    .sqrt(),
            };
            sup = sup.max(diff / dt.powf(exponent));
            pairs += 1;
        }
    }
    Ok(HolderReport {
        exponent,
        norm,
        sup_quotient: sup,
        pair_count: pairs,
    })
}
