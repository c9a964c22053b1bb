//! Residual of the weak formulation along a discrete trajectory.

use crate::error::{Error, Result};
use crate::field::{forward, nabla_cubic_from, SpectralField, VectorField};
use crate::galerkin::LLBarParams;
use crate::integrator::SolverState;
use crate::scalar::Real;

/// Relative out-of-band energy above which a test function is rejected.
const BAND_TOLERANCE: f64 = 1e-20;

fn spectral_pairing<T: Real>(u: &SpectralField<T>, phi: &SpectralField<T>, lambda: &[f64], power: i32) -> f64 {
    let m = lambda.len();
    u.as_slice()
        .iter()
        .zip(phi.as_slice())
        .enumerate()
        .map(|(i, (a, b))| lambda[i % m].powi(power) * a.to_f64_lossy() * b.to_f64_lossy())
        .sum()
}

/// Integrand `b1<grad u, grad phi> + b2<lap u, lap phi> - b3<(1-|u|^2)u, phi>
/// - b4<u x grad u, grad phi> + b5<grad(|u|^2 u), grad phi>`.
fn integrand<T: Real>(
    u: &SpectralField<T>,
    phi: &SpectralField<T>,
    phi_vals: &VectorField<T>,
    phi_grad: &crate::field::JacobianField<T>,
    lambda: &[f64],
    p: &LLBarParams,
) -> Result<f64> {
    let pad = phi_vals.grid();
    let vals = u.values_on(pad)?;
    let grad = u.gradient_on(pad)?;
    let cubic_grad = nabla_cubic_from(&vals, &grad)?;
    let (n, d) = (pad.node_count(), pad.dim());
    let (us, gs, cg) = (vals.as_slice(), grad.as_slice(), cubic_grad.as_slice());
    let (ps, pg) = (phi_vals.as_slice(), phi_grad.as_slice());
    let f = |x: T| x.to_f64_lossy();
    let (mut reaction, mut precession, mut cubic) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let v = [f(us[i]), f(us[n + i]), f(us[2 * n + i])];
        let sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        for c in 0..3 {
            reaction += (1.0 - sq) * v[c] * f(ps[c * n + i]);
        }
        for j in 0..d {
            let g = |c: usize| f(gs[(c * d + j) * n + i]);
            let w = |c: usize| f(pg[(c * d + j) * n + i]);
            let cross = [
                v[1] * g(2) - v[2] * g(1),
                v[2] * g(0) - v[0] * g(2),
                v[0] * g(1) - v[1] * g(0),
            ];
            for c in 0..3 {
                precession += cross[c] * w(c);
                cubic += f(cg[(c * d + j) * n + i]) * w(c);
            }
        }
    }
    let h = pad.cell_volume();
    Ok(
        p.beta1 * spectral_pairing(u, phi, lambda, 1) + p.beta2 * spectral_pairing(u, phi, lambda, 2)
            - p.beta3 * reaction * h
            - p.beta4 * precession * h
            + p.beta5 * cubic * h,
    )
}

/// `<u(t), phi> - <u0, phi> + int_0^t (linear and nonlinear pairings)` at every
/// snapshot time, with the time integral by the composite trapezoid rule.
/// `phi` must live on the snapshots' grid and lie in their band.
pub fn weak_residual<T: Real>(snapshots: &[SolverState<T>], phi: &VectorField<T>, p: &LLBarParams) -> Result<Vec<f64>> {
    let first = &snapshots
        .first()
        .ok_or_else(|| Error::InsufficientData("weak residual needs at least one snapshot".into()))?
        .u;
    let grid = first.grid();
    if phi.grid().points() != grid.points() || !phi.grid().same_box(grid) {
        return Err(Error::ShapeMismatch("test function lives on a different grid".into()));
    }
    let full = forward(phi)?;
    let phi_band = full.truncated(first.modes())?;
    let total = full.l2_norm().to_f64_lossy().powi(2);
    let kept = phi_band.l2_norm().to_f64_lossy().powi(2);
    if total - kept > BAND_TOLERANCE * total.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!(
            "test function has energy {:e} outside the band {:?}",
            total - kept,
            first.modes()
        )));
    }
    let pad = grid.padded();
    let phi_vals = phi_band.values_on(&pad)?;
    let phi_grad = phi_band.gradient_on(&pad)?;
    let lambda: Vec<f64> = first.eigenvalues().iter().map(|x| x.to_f64_lossy()).collect();

    let base = spectral_pairing(first, &phi_band, &lambda, 0);
    let mut out = Vec::with_capacity(snapshots.len());
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in snapshots {
        if s.u.grid() != grid || s.u.modes() != first.modes() {
            return Err(Error::ShapeMismatch("snapshots differ in grid or band".into()));
        }
        let g = integrand(&s.u, &phi_band, &phi_vals, &phi_grad, &lambda, p)?;
        if let Some((t0, g0)) = prev {
            integral += 0.5 * (s.t - t0) * (g0 + g);
        }
        prev = Some((s.t, g));
        out.push(spectral_pairing(&s.u, &phi_band, &lambda, 0) - base + integral);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{rhs, ModeBand};
    use crate::grid::GridSpec;
    use crate::rng::CounterRng;

    #[test]
    fn integrand_is_minus_rhs_pairing() {
        let g = GridSpec::unit(2, 8).unwrap();
        let band = ModeBand::full(&g);
        let u = SpectralField::<f64>::random(g.clone(), &[8, 8], &CounterRng::new(3), 0.8, 3.0).unwrap();
        let phi = SpectralField::<f64>::random(g.clone(), &[8, 8], &CounterRng::new(9), 1.0, 2.0).unwrap();
        let p = LLBarParams::new(0.3, 0.01, 0.7, 0.5, 0.02).unwrap();
        let pad = g.padded();
        let lambda: Vec<f64> = u.eigenvalues().iter().copied().collect();
        let lhs = integrand(
            &u,
            &phi,
            &phi.values_on(&pad).unwrap(),
            &phi.gradient_on(&pad).unwrap(),
            &lambda,
            &p,
        )
        .unwrap();
        let r = rhs(&u, &p, &band).unwrap();
        let want = -r.inner(&phi);
        assert!((lhs - want).abs() < 1e-9 * (1.0 + want.abs()), "{lhs} vs {want}");
    }

    #[test]
    fn zero_test_function_and_rejection() {
        let g = GridSpec::unit(1, 8).unwrap();
        let u = SpectralField::<f64>::random(g.clone(), &[4], &CounterRng::new(1), 1.0, 2.0).unwrap();
        let snaps = vec![
            SolverState::initial(u.clone()),
            SolverState {
                t: 0.1,
                ..SolverState::initial(u)
            },
        ];
        let p = LLBarParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = weak_residual(&snaps, &VectorField::zeros(g.clone()), &p).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        // cos(7 pi x) is outside the 4-mode band.
        let phi = VectorField::from_fn(g.clone(), |x| [(7.0 * std::f64::consts::PI * x[0]).cos(), 0.0, 0.0]).unwrap();
        assert!(weak_residual(&snaps, &phi, &p).is_err());
        let other = VectorField::zeros(GridSpec::unit(1, 16).unwrap());
        assert!(weak_residual(&snaps, &other, &p).is_err());
    }
}
