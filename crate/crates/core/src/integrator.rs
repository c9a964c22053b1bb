//! Time stepping of the Galerkin system with the stiff diagonal linear part
//! treated exactly (ETDRK2) or implicitly (IMEX), nonlinear terms explicitly.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayD, Zip};

use crate::error::{Error, Result};
use crate::field::{forward, SpectralField, VectorField};
use crate::galerkin::{project, GalerkinSystem, LLBarParams, ModeBand};
use crate::scalar::Real;

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Cox-Matthews exponential Runge-Kutta, second order.
    Etdrk2,
    /// Crank-Nicolson on the linear part, second-order Adams-Bashforth on the rest.
    ImexCnab2,
    /// Backward Euler on the linear part, forward Euler on the rest.
    ImexEuler,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::ImexEuler => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Etdrk2 => "ETDRK2",
            Scheme::ImexCnab2 => "IMEX-CNAB2",
            Scheme::ImexEuler => "IMEX-Euler",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "etdrk2" => Ok(Scheme::Etdrk2),
            "imex-cnab2" | "cnab2" => Ok(Scheme::ImexCnab2),
            "imex-euler" | "euler" => Ok(Scheme::ImexEuler),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scheme {s:?} (expected ETDRK2, IMEX-CNAB2 or IMEX-Euler)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorPolicy {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub max_steps: usize,
    /// Abort once the sup norm of the state exceeds this value.
    pub blowup_threshold: f64,
}

impl IntegratorPolicy {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Result<Self> {
        let p = Self {
            scheme,
            dt,
            t_end,
            max_steps: usize::MAX,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        };
        p.step_count()?;
        Ok(p)
    }

    /// Number of steps to reach `t_end`; `t_end` must be a whole number of steps.
    pub fn step_count(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidParameter("blowup_threshold must be positive".into()));
        }
        let ratio = self.t_end / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        let n = n as usize;
        if n > self.max_steps {
            return Err(Error::InvalidParameter(format!(
                "{n} steps exceed max_steps = {}",
                self.max_steps
            )));
        }
        Ok(n)
    }
}

/// State of the discrete system at `t = step_index * dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T> {
    pub t: f64,
    pub step_index: usize,
    pub u: SpectralField<T>,
    /// Nonlinear term of the previous step (multistep schemes only).
    pub prev_nonlinear: Option<ArrayD<T>>,
}

impl<T: Real> SolverState<T> {
    pub fn initial(u: SpectralField<T>) -> Self {
        Self {
            t: 0.0,
            step_index: 0,
            u,
            prev_nonlinear: None,
        }
    }
}

/// `(e^z - 1) / z`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0))
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z - 1 - z) / z^2`.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // sum_j z^j / (j + 2)!
        let mut term = 0.5;
        let mut sum = 0.0;
        for j in 0..14 {
            sum += term;
            term *= z / (j as f64 + 3.0);
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

#[derive(Clone, Debug)]
enum Coefficients<T> {
    Etdrk2 {
        exp: ArrayD<T>,
        phi1: ArrayD<T>,
        phi2: ArrayD<T>,
    },
    Cnab2 {
        gain: ArrayD<T>,
        scale: ArrayD<T>,
    },
    Euler {
        scale: ArrayD<T>,
    },
}

/// Precomputed per-mode stepping tables for one system and policy.
#[derive(Clone, Debug)]
pub struct Stepper<T> {
    system: GalerkinSystem<T>,
    policy: IntegratorPolicy,
    coeffs: Coefficients<T>,
}

impl<T: Real> Stepper<T> {
    pub fn new(system: GalerkinSystem<T>, policy: IntegratorPolicy) -> Result<Self> {
        policy.step_count()?;
        let h = policy.dt;
        let m = system.linear_factor().mapv(|x| x.to_f64_lossy());
        let table = |f: &dyn Fn(f64) -> f64| m.mapv(|x| T::lit(f(x)));
        let coeffs = match policy.scheme {
            Scheme::Etdrk2 => Coefficients::Etdrk2 {
                exp: table(&|x| (h * x).exp()),
                phi1: table(&|x| h * phi1(h * x)),
                phi2: table(&|x| h * phi2(h * x)),
            },
            Scheme::ImexCnab2 => Coefficients::Cnab2 {
                gain: table(&|x| (1.0 + 0.5 * h * x) / (1.0 - 0.5 * h * x)),
                scale: table(&|x| h / (1.0 - 0.5 * h * x)),
            },
            Scheme::ImexEuler => Coefficients::Euler {
                scale: table(&|x| 1.0 / (1.0 - h * x)),
            },
        };
        Ok(Self { system, policy, coeffs })
    }

    pub fn system(&self) -> &GalerkinSystem<T> {
        &self.system
    }

    pub fn policy(&self) -> &IntegratorPolicy {
        &self.policy
    }

    fn check_bound(&self, sup: T, t: f64) -> Result<()> {
        let sup = sup.to_f64_lossy();
        if !sup.is_finite() || sup > self.policy.blowup_threshold {
            return Err(Error::BlowUp {
                t,
                norm: "Linf",
                value: sup,
                threshold: self.policy.blowup_threshold,
            });
        }
        Ok(())
    }

    /// Sup norm of a state on the dealiasing grid.
    pub fn sup_norm(&self, u: &SpectralField<T>) -> T {
        self.system.evaluator().sup_norm(u.coeffs())
    }

    /// Advances one step; fails on a non-finite result or when the incoming
    /// state exceeds the blow-up threshold.
    pub fn step(&self, state: &SolverState<T>) -> Result<SolverState<T>> {
        let u = state.u.coeffs();
        let (n0, sup) = self.system.nonlinear_with_sup(u);
        self.check_bound(sup, state.t)?;
        let h = T::lit(self.policy.dt);
        let mut prev = None;
        let next = match &self.coeffs {
            Coefficients::Etdrk2 { exp, phi1, phi2 } => {
                let mut a = u * exp;
                Zip::from(&mut a)
                    .and(&n0)
                    .and_broadcast(phi1)
                    .for_each(|a, &n, &p| *a += p * n);
                let (na, _) = self.system.nonlinear_with_sup(&a);
                Zip::from(&mut a)
                    .and(&na)
                    .and(&n0)
                    .and_broadcast(phi2)
                    .for_each(|a, &x, &y, &p| *a += p * (x - y));
                a
            }
            Coefficients::Cnab2 { gain, scale } => {
                let old = state.prev_nonlinear.as_ref().unwrap_or(&n0);
                let (three_half, half) = (T::lit(1.5), T::lit(0.5));
                let mut out = u * gain;
                Zip::from(&mut out)
                    .and(&n0)
                    .and(old)
                    .and_broadcast(scale)
                    .for_each(|o, &n, &p, &s| *o += s * (three_half * n - half * p));
                prev = Some(n0);
                out
            }
            Coefficients::Euler { scale } => {
                let mut out = u + &(&n0 * h);
                out *= scale;
                out
            }
        };
        let step_index = state.step_index + 1;
        let t = step_index as f64 * self.policy.dt;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { t, step: step_index });
        }
        Ok(SolverState {
            t,
            step_index,
            u: SpectralField::from_raw(state.u.grid().clone(), next),
            prev_nonlinear: prev,
        })
    }
}

/// One step of `policy.scheme` for the system `(grid of u, band of u, p)`.
pub fn step<T: Real>(state: &SolverState<T>, p: &LLBarParams, policy: &IntegratorPolicy) -> Result<SolverState<T>> {
    let band = ModeBand::new(state.u.modes().to_vec(), state.u.grid())?;
    let system = GalerkinSystem::new(state.u.grid(), &band, *p)?;
    Stepper::new(system, *policy)?.step(state)
}

/// Observer invoked during integration.
pub trait Monitor<T: Real> {
    /// Steps between observations; the initial and final states are always observed.
    fn cadence(&self) -> usize {
        1
    }

    fn observe(&mut self, state: &SolverState<T>, stepper: &Stepper<T>) -> Result<()>;

    /// Called once when integration ends, successfully or not.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Records the state every `cadence` steps.
#[derive(Clone, Debug)]
pub struct Recorder<T> {
    cadence: usize,
    pub states: Vec<SolverState<T>>,
}

impl<T> Recorder<T> {
    pub fn new(cadence: usize) -> Self {
        Self {
            cadence: cadence.max(1),
            states: Vec::new(),
        }
    }
}

impl<T: Real> Monitor<T> for Recorder<T> {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, state: &SolverState<T>, _: &Stepper<T>) -> Result<()> {
        let mut s = state.clone();
        s.prev_nonlinear = None;
        self.states.push(s);
        Ok(())
    }
}

/// Initial and terminal states of an integration.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub snapshots: Vec<SolverState<T>>,
    pub steps: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn initial(&self) -> &SolverState<T> {
        &self.snapshots[0]
    }

    pub fn terminal(&self) -> &SolverState<T> {
        self.snapshots.last().expect("non-empty trajectory")
    }
}

/// Projects `u0` onto `band` (coefficients shaped to the band).
pub fn project_initial<T: Real>(u0: &VectorField<T>, band: &ModeBand) -> Result<SpectralField<T>> {
    let s = project(&forward(u0)?, band)?;
    s.truncated(band.modes())
}

/// Integrates from the band projection of `u0` to `policy.t_end`.
pub fn integrate<T: Real>(
    u0: &VectorField<T>,
    band: &ModeBand,
    p: &LLBarParams,
    policy: &IntegratorPolicy,
    monitors: &mut [&mut dyn Monitor<T>],
) -> Result<Trajectory<T>> {
    let s0 = project_initial(u0, band)?;
    let system = GalerkinSystem::new(u0.grid(), band, *p)?;
    let stepper = Stepper::new(system, *policy)?;
    integrate_from(&stepper, SolverState::initial(s0), monitors)
}

/// Integrates an existing state with a prepared stepper up to `t_end`.
pub fn integrate_from<T: Real>(
    stepper: &Stepper<T>,
    start: SolverState<T>,
    monitors: &mut [&mut dyn Monitor<T>],
) -> Result<Trajectory<T>> {
    let result = run_steps(stepper, start, monitors);
    let mut finish = Ok(());
    for m in monitors.iter_mut() {
        let r = m.finish();
        if finish.is_ok() {
            finish = r;
        }
    }
    let traj = result?;
    finish?;
    Ok(traj)
}

fn run_steps<T: Real>(
    stepper: &Stepper<T>,
    start: SolverState<T>,
    monitors: &mut [&mut dyn Monitor<T>],
) -> Result<Trajectory<T>> {
    let total = stepper.policy().step_count()?;
    let first = start.step_index;
    let mut snapshots = vec![start.clone()];
    let mut state = start;
    for m in monitors.iter_mut() {
        m.observe(&state, stepper)?;
    }
    while state.step_index < total {
        state = stepper.step(&state)?;
        let last = state.step_index == total;
        for m in monitors.iter_mut() {
            if last || state.step_index.is_multiple_of(m.cadence().max(1)) {
                m.observe(&state, stepper)?;
            }
        }
    }
    if state.step_index > first {
        let sup = stepper.sup_norm(&state.u);
        stepper.check_bound(sup, state.t)?;
        snapshots.push(state);
    }
    Ok(Trajectory {
        steps: snapshots.last().expect("non-empty").step_index - first,
        snapshots,
    })
}
