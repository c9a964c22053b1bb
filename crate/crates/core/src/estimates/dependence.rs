//! Continuous dependence on the initial data.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::galerkin::{GalerkinSystem, LLBarParams, ModeBand};
use crate::integrator::{integrate_from, IntegratorPolicy, Monitor, SolverState, Stepper};
use crate::scalar::Real;

/// Terminal differences against the Gronwall envelope, one entry per
/// perturbed initial datum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DependenceReport {
    /// `|u0 - v0|` in `L^2`.
    pub deltas: Vec<f64>,
    /// `|u(T) - v(T)|` in `L^2`.
    pub terminal_diffs: Vec<f64>,
    /// `exp(int_0^T (1 + |u|_inf^4 + |v|_inf^4))`.
    pub gronwall_factors: Vec<f64>,
    /// Observed `terminal_diff / (sqrt(factor) * delta)`; 0 when both vanish.
    pub margins: Vec<f64>,
}

impl DependenceReport {
    fn push(&mut self, delta: f64, diff: f64, factor: f64) {
        let margin = if diff == 0.0 {
            0.0
        } else {
            diff / (factor.sqrt() * delta)
        };
        self.deltas.push(delta);
        self.terminal_diffs.push(diff);
        self.gronwall_factors.push(factor);
        self.margins.push(margin);
    }

    /// Largest observed margin.
    pub fn max_margin(&self) -> f64 {
        self.margins.iter().fold(0.0, |m, x| m.max(*x))
    }

    /// Whether every difference lies within `c_margin` times its envelope.
    pub fn within(&self, c_margin: f64) -> bool {
        self.margins.iter().all(|m| *m <= c_margin)
    }

    pub fn is_finite(&self) -> bool {
        self.deltas
            .iter()
            .chain(&self.terminal_diffs)
            .chain(&self.gronwall_factors)
            .chain(&self.margins)
            .all(|x| x.is_finite())
    }
}

/// Sup norm at every step.
struct SupTrace {
    samples: Vec<(f64, f64)>,
}

impl<T: Real> Monitor<T> for SupTrace {
    fn observe(&mut self, state: &SolverState<T>, stepper: &Stepper<T>) -> Result<()> {
        self.samples.push((state.t, stepper.sup_norm(&state.u).to_f64_lossy()));
        Ok(())
    }
}

struct Run<T> {
    terminal: SpectralField<T>,
    sup: Vec<(f64, f64)>,
}

fn run<T: Real>(stepper: &Stepper<T>, u0: &SpectralField<T>) -> Result<Run<T>> {
    let mut trace = SupTrace { samples: Vec::new() };
    let traj = integrate_from(stepper, SolverState::initial(u0.clone()), &mut [&mut trace])?;
    Ok(Run {
        terminal: traj.terminal().u.clone(),
        sup: trace.samples,
    })
}

fn gronwall_factor(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let g = |i: usize| 1.0 + a[i].1.powi(4) + b[i].1.powi(4);
    let integral: f64 = (1..a.len())
        .map(|i| 0.5 * (a[i].0 - a[i - 1].0) * (g(i - 1) + g(i)))
        .sum();
    integral.exp()
}

fn stepper_for<T: Real>(u0: &SpectralField<T>, p: &LLBarParams, policy: &IntegratorPolicy) -> Result<Stepper<T>> {
    let band = ModeBand::new(u0.modes().to_vec(), u0.grid())?;
    Stepper::new(GalerkinSystem::new(u0.grid(), &band, *p)?, *policy)
}

fn check_compatible<T: Real>(a: &SpectralField<T>, b: &SpectralField<T>) -> Result<()> {
    if a.grid() != b.grid() || a.modes() != b.modes() {
        return Err(Error::ShapeMismatch("initial data differ in grid or band".into()));
    }
    Ok(())
}

/// Integrates from `u0` and `v0` and compares the terminal states.
pub fn continuous_dependence<T: Real>(
    u0: &SpectralField<T>,
    v0: &SpectralField<T>,
    p: &LLBarParams,
    policy: &IntegratorPolicy,
) -> Result<DependenceReport> {
    check_compatible(u0, v0)?;
    let stepper = stepper_for(u0, p, policy)?;
    let (a, b) = (run(&stepper, u0)?, run(&stepper, v0)?);
    let mut report = DependenceReport::default();
    report.push(
        u0.sub(v0).l2_norm().to_f64_lossy(),
        a.terminal.sub(&b.terminal).l2_norm().to_f64_lossy(),
        gronwall_factor(&a.sup, &b.sup),
    );
    Ok(report)
}

/// As [`continuous_dependence`] for `v0 = u0 + delta * direction` over
/// several `delta`, integrating the reference trajectory once.
pub fn dependence_sweep<T: Real>(
    u0: &SpectralField<T>,
    direction: &SpectralField<T>,
    deltas: &[f64],
    p: &LLBarParams,
    policy: &IntegratorPolicy,
) -> Result<DependenceReport> {
    check_compatible(u0, direction)?;
    let stepper = stepper_for(u0, p, policy)?;
    let base = run(&stepper, u0)?;
    let mut report = DependenceReport::default();
    for &delta in deltas {
        let v0 = u0.add(&direction.scaled(T::lit(delta)));
        let other = run(&stepper, &v0)?;
        report.push(
            u0.sub(&v0).l2_norm().to_f64_lossy(),
            base.terminal.sub(&other.terminal).l2_norm().to_f64_lossy(),
            gronwall_factor(&base.sup, &other.sup),
        );
    }
    Ok(report)
}

/// Applies the rotation `r` to every coefficient triple.
pub fn rotate<T: Real>(u: &SpectralField<T>, r: [[f64; 3]; 3]) -> SpectralField<T> {
    let m = u.mode_count();
    let s = u.as_slice();
    let mut out = u.clone();
    let o = out.coeffs_mut().as_slice_mut().expect("standard layout");
    for i in 0..m {
        let v = [s[i], s[m + i], s[2 * m + i]];
        for (c, row) in r.iter().enumerate() {
            o[c * m + i] = T::lit(row[0]) * v[0] + T::lit(row[1]) * v[1] + T::lit(row[2]) * v[2];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::integrator::Scheme;
    use crate::rng::CounterRng;

    fn setup() -> (SpectralField<f64>, LLBarParams, IntegratorPolicy) {
        let g = GridSpec::unit(1, 16).unwrap();
        let u0 = SpectralField::random(g, &[16], &CounterRng::new(5), 0.5, 3.0).unwrap();
        let p = LLBarParams::new(0.5, 0.01, 1.0, 1.0, 0.05).unwrap();
        (u0, p, IntegratorPolicy::new(Scheme::Etdrk2, 1e-3, 0.1).unwrap())
    }

    #[test]
    fn identical_data_give_zero_difference() {
        let (u0, p, pol) = setup();
        let rep = continuous_dependence(&u0, &u0, &p, &pol).unwrap();
        assert_eq!(rep.terminal_diffs, vec![0.0]);
        assert_eq!(rep.margins, vec![0.0]);
        assert!(rep.gronwall_factors[0] >= (0.1f64).exp());
    }

    #[test]
    fn differences_scale_linearly() {
        let (u0, p, pol) = setup();
        let mut e = SpectralField::zeros(u0.grid().clone(), &[16]).unwrap();
        e.set_coeff(1, &[2], 1.0);
        let rep = dependence_sweep(&u0, &e, &[1e-3, 1e-4, 1e-5], &p, &pol).unwrap();
        assert!(rep.is_finite());
        for w in rep.terminal_diffs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 10.0 / 3.0 && ratio < 30.0, "{ratio}");
        }
        assert!(rep.within(1.0), "{:?}", rep.margins);
    }

    #[test]
    fn precession_commutes_with_rotations() {
        let g = GridSpec::unit(2, 8).unwrap();
        let u0 = SpectralField::<f64>::random(g, &[8, 8], &CounterRng::new(2), 1.0, 3.0).unwrap();
        let p = LLBarParams::unchecked(0.0, 0.0, 0.0, 1.0, 0.0);
        let pol = IntegratorPolicy::new(Scheme::Etdrk2, 1e-4, 0.01).unwrap();
        let (a, b, c) = (0.7f64.cos(), 0.7f64.sin(), 1.0 / 3.0);
        // Rotation by 0.7 rad about (1, 1, 1) / sqrt(3) (Rodrigues).
        let k = [1.0 / 3f64.sqrt(); 3];
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let cross = match (i, j) {
                    (0, 1) => -k[2],
                    (1, 0) => k[2],
                    (0, 2) => k[1],
                    (2, 0) => -k[1],
                    (1, 2) => -k[0],
                    (2, 1) => k[0],
                    _ => 0.0,
                };
                *entry = if i == j { a } else { 0.0 } + b * cross + (1.0 - a) * c;
            }
        }
        let v0 = rotate(&u0, r);
        let stepper = stepper_for(&u0, &p, &pol).unwrap();
        let (ru, rv) = (run(&stepper, &u0).unwrap(), run(&stepper, &v0).unwrap());
        let diff = rotate(&ru.terminal, r).sub(&rv.terminal).l2_norm();
        assert!(diff < 1e-9, "{diff}");
        assert!(ru.terminal.sub(&u0).l2_norm() > 1e-6);
    }
}
