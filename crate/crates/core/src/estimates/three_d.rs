//! Completed-square identity behind the three-dimensional bound.

use crate::error::{Error, Result};
use crate::field::{nabla_cubic_from, SpectralField};
use crate::galerkin::LLBarParams;
use crate::integrator::SolverState;
use crate::scalar::Real;

use super::norms::NormEvaluator;

/// Both sides of
/// `2 b2 |A|^2 - (4 a b2 + 2 b5) <A, B> + 4 a b5 |B|^2 = |sqrt(2 b2) A - sqrt(4 a b5) B|^2`
/// with `A = grad lap u`, `B = grad(|u|^2 u)` and `a = b5 / (2 b2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareIdentity {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` relative to the sum of the absolute values of the three
    /// quadratic-form terms (absolute when they all vanish).
    pub residual: f64,
    pub l4_pow4: f64,
    /// Running trapezoid integral of `|u|_6^6` up to `t`.
    pub l6_pow6_integral: f64,
}

impl SquareIdentity {
    pub fn is_finite(&self) -> bool {
        [self.lhs, self.rhs, self.residual, self.l4_pow4, self.l6_pow6_integral]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Evaluates both sides at one state on the dealiasing grid.
pub fn square_identity<T: Real>(u: &SpectralField<T>, p: &LLBarParams) -> Result<(f64, f64, f64)> {
    if !(p.beta2 > 0.0) {
        return Err(Error::InvalidParameter("the completed square needs beta2 > 0".into()));
    }
    let alpha = p.beta5 / (2.0 * p.beta2);
    let pad = u.grid().padded();
    let a = u.laplacian().gradient_on(&pad)?;
    let b = nabla_cubic_from(&u.values_on(&pad)?, &u.gradient_on(&pad)?)?;
    let (mut aa, mut ab, mut bb, mut sq) = (0.0, 0.0, 0.0, 0.0);
    let (ca, cb) = ((2.0 * p.beta2).sqrt(), (4.0 * alpha * p.beta5).sqrt());
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
        aa += x * x;
        ab += x * y;
        bb += y * y;
        sq += (ca * x - cb * y).powi(2);
    }
    let h = pad.cell_volume();
    let terms = [
        2.0 * p.beta2 * aa * h,
        -(4.0 * alpha * p.beta2 + 2.0 * p.beta5) * ab * h,
        4.0 * alpha * p.beta5 * bb * h,
    ];
    let lhs: f64 = terms.iter().sum();
    let rhs = sq * h;
    let scale: f64 = terms.iter().map(|x| x.abs()).sum();
    let residual = if scale > 0.0 {
        (lhs - rhs).abs() / scale
    } else {
        (lhs - rhs).abs()
    };
    Ok((lhs, rhs, residual))
}

/// The completed-square identity per snapshot together with the quartic and
/// sextic quantities of the three-dimensional bound.
pub fn three_d_energy_identity<T: Real>(snapshots: &[SolverState<T>], p: &LLBarParams) -> Result<Vec<SquareIdentity>> {
    let Some(first) = snapshots.first() else {
        return Ok(Vec::new());
    };
    let eval = NormEvaluator::new(first.u.grid(), first.u.modes())?;
    let mut out: Vec<SquareIdentity> = Vec::with_capacity(snapshots.len());
    let mut prev: Option<(f64, f64)> = None;
    let mut integral = 0.0;
    for s in snapshots {
        if s.u.grid() != first.u.grid() || s.u.modes() != first.u.modes() {
            return Err(Error::ShapeMismatch("snapshots differ in grid or band".into()));
        }
        let (lhs, rhs, residual) = square_identity(&s.u, p)?;
        let n = eval.norms(s.t, &s.u);
        let l6 = n.l6.powi(6);
        if let Some((t0, y0)) = prev {
            integral += 0.5 * (s.t - t0) * (y0 + l6);
        }
        prev = Some((s.t, l6));
        out.push(SquareIdentity {
            t: s.t,
            lhs,
            rhs,
            residual,
            l4_pow4: n.l4.powi(4),
            l6_pow6_integral: integral,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward, VectorField};
    use crate::grid::GridSpec;
    use crate::rng::CounterRng;

    #[test]
    fn constant_field_gives_zeros() {
        let g = GridSpec::unit(3, 4).unwrap();
        let u = forward(&VectorField::constant(g, [0.3, -0.4, 0.5])).unwrap();
        let p = LLBarParams::new(1.0, 0.5, 1.0, 1.0, 0.2).unwrap();
        let (lhs, rhs, _) = square_identity(&u, &p).unwrap();
        assert!(lhs.abs() < 1e-12 && rhs.abs() < 1e-12);
    }

    #[test]
    fn random_fields_satisfy_the_square() {
        let p = LLBarParams::new(0.1, 0.02, 1.0, 1.0, 0.3).unwrap();
        for seed in 0..4 {
            let g = GridSpec::new(vec![1.0, 0.8, 1.2], vec![6, 6, 6], 2).unwrap();
            let u = SpectralField::<f64>::random(g, &[6, 6, 6], &CounterRng::new(seed), 1.0, 2.0).unwrap();
            let (lhs, rhs, residual) = square_identity(&u, &p).unwrap();
            assert!(residual < 1e-10, "{lhs} {rhs} {residual}");
            assert!(rhs >= 0.0);
        }
        let zero_b2 = LLBarParams::unchecked(1.0, 0.0, 1.0, 1.0, 1.0);
        let g = GridSpec::unit(1, 4).unwrap();
        assert!(square_identity(&SpectralField::<f64>::zeros(g, &[4]).unwrap(), &zero_b2).is_err());
    }
}
