//! Experiment drivers behind the command-line subcommands.

use std::fmt;

use crate::config::{InitialKind, RunConfig};
use crate::error::{Error, Result};
use crate::estimates::{bihari_tstar, dependence_sweep, holder_quotient, DependenceReport, HolderNorm, HolderReport};
use crate::field::{
    cross, cubic_expansion, cubic_normal_flux_at_faces, delta_cubic_from, nabla_cubic_from, SpectralField,
};
use crate::galerkin::{GalerkinSystem, ModeBand};
use crate::grid::GridSpec;
use crate::inequality::{
    check_cross_diff, check_cubic_lipschitz, check_elliptic, check_interp, check_product_hs, gn_check, AmplitudeLaw,
    RatioReport, SampleSpec, PAPER_GN_TABLE,
};
use crate::integrator::{integrate_from, Recorder, SolverState, Stepper};
use crate::rng::CounterRng;
use crate::run::{initial_field, prepare};

/// Worst relative error of one identity over a family of random fields.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub id: &'static str,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub witness_seed: u64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} samples {:>5}  max error {:.3e}  tolerance {:.0e}  witness seed {}",
            self.id, self.samples, self.max_error, self.tolerance, self.witness_seed
        )
    }
}

struct Worst {
    id: &'static str,
    tolerance: f64,
    max_error: f64,
    witness_seed: u64,
}

impl Worst {
    fn new(id: &'static str, tolerance: f64) -> Self {
        Self {
            id,
            tolerance,
            max_error: 0.0,
            witness_seed: 0,
        }
    }

    fn push(&mut self, err: f64, seed: u64) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if err > self.max_error {
            self.max_error = err;
            self.witness_seed = seed;
        }
    }

    fn finish(self, samples: usize) -> IdentityCheck {
        IdentityCheck {
            id: self.id,
            samples,
            max_error: self.max_error,
            tolerance: self.tolerance,
            witness_seed: self.witness_seed,
        }
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

/// Checks the discrete calculus identities on `count` random fields of
/// `band`: Parseval, the Green and cross-Green identities, both pointwise
/// forms of the cubic derivatives, and the vanishing normal flux.
pub fn verify_identities(grid: &GridSpec, band: &ModeBand, seed: u64, count: usize) -> Result<Vec<IdentityCheck>> {
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let pad = grid.padded();
    let mut checks = [
        Worst::new("parseval", 1e-10),
        Worst::new("green", 1e-10),
        Worst::new("cross_green", 1e-9),
        Worst::new("nabla_cubic", 1e-10),
        Worst::new("delta_cubic", 1e-10),
        Worst::new("normal_flux", 1e-9),
    ];
    let root = CounterRng::new(seed);
    for i in 0..count as u64 {
        let (su_seed, sv_seed) = (root.split(2 * i).seed(), root.split(2 * i + 1).seed());
        let draw = |s| SpectralField::<f64>::random(grid.clone(), band.modes(), &CounterRng::new(s), 1.0, 1.0);
        let (su, sv) = (draw(su_seed)?, draw(sv_seed)?);

        let coeff_sq = su.weighted_norm_sq(0);
        let nodal = su.values_on(grid)?.l2_norm().powi(2);
        checks[0].push(rel(nodal, coeff_sq, coeff_sq), su_seed);

        let u = su.values_on(&pad)?;
        let v = sv.values_on(&pad)?;
        let (gu, gv) = (su.gradient_on(&pad)?, sv.gradient_on(&pad)?);
        let lap_u = su.laplacian().values_on(&pad)?;
        let lhs = -lap_u.inner(&v);
        let rhs = gu.inner(&gv);
        checks[1].push(rel(lhs, rhs, gu.l2_norm() * gv.l2_norm()), su_seed);

        let a = cross(&u, &lap_u)?.inner(&v);
        let b = cross(&u, &gu)?.inner(&gv);
        let scale = u.max_norm() * gu.l2_norm() * gv.l2_norm();
        checks[2].push(rel(a, -b, scale), su_seed);

        let cubic = cubic_expansion(&su)?;
        let nab = nabla_cubic_from(&u, &gu)?;
        let nab_direct = cubic.gradient_on(&pad)?;
        let scale = nab_direct.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        checks[3].push(nab.max_abs_diff(&nab_direct) / scale.max(f64::MIN_POSITIVE), su_seed);
        let del = delta_cubic_from(&u, &gu, &lap_u)?;
        let del_direct = cubic.laplacian().values_on(&pad)?;
        checks[4].push(
            del.max_abs_diff(&del_direct) / del_direct.max_norm().max(f64::MIN_POSITIVE),
            su_seed,
        );
        checks[5].push(cubic_normal_flux_at_faces(&su)? / scale.max(1.0), su_seed);
    }
    Ok(checks.into_iter().map(|c| c.finish(count)).collect())
}

/// Sobolev index used for the product bound in dimension `d`.
pub fn product_index(d: usize) -> u32 {
    if d == 1 {
        1
    } else {
        2
    }
}

/// Runs every inequality check applicable to samples of `grid` and `band`,
/// spread over at most `threads` workers. Report order does not depend on
/// the thread count.
pub fn verify_inequalities(
    grid: &GridSpec,
    band: &ModeBand,
    seed: u64,
    count: usize,
    threads: usize,
) -> Result<Vec<RatioReport>> {
    let d = grid.dim();
    let spec = SampleSpec::new(seed, count, grid.clone(), band.clone(), AmplitudeLaw::Decay(2.0))?;
    type Job<'a> = Box<dyn Fn() -> Result<Vec<RatioReport>> + Send + Sync + 'a>;
    let spec = &spec;
    let mut jobs: Vec<Job> = vec![
        Box::new(move || check_interp(spec)),
        Box::new(move || check_elliptic(spec)),
        Box::new(move || Ok(vec![check_product_hs(spec, product_index(d))?])),
    ];
    for k in 0..3 {
        jobs.push(Box::new(move || Ok(vec![check_cubic_lipschitz(spec, k)?])));
    }
    for k in 0..2 {
        jobs.push(Box::new(move || Ok(vec![check_cross_diff(spec, k)?])));
    }
    for (p, _) in PAPER_GN_TABLE.iter().filter(|(p, _)| p.d as usize == d) {
        jobs.push(Box::new(move || Ok(vec![gn_check(spec, p)?])));
    }
    let threads = threads.clamp(1, jobs.len());
    let mut slots: Vec<Option<Result<Vec<RatioReport>>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let jobs = &jobs;
                scope.spawn(move || {
                    (w..jobs.len())
                        .step_by(threads)
                        .map(|j| (j, jobs[j]()))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (j, r) in h.join().expect("inequality worker panicked") {
                slots[j] = Some(r);
            }
        }
    });
    let mut out = Vec::new();
    for r in slots {
        out.extend(r.expect("every job ran")?);
    }
    Ok(out)
}

/// Terminal `L^2` differences between consecutive bands.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub bands: Vec<usize>,
    /// `|u_{N_i} - u_{N_{i+1}}|` at the final time.
    pub diffs: Vec<f64>,
    /// `diffs[i] / diffs[i + 1]`.
    pub ratios: Vec<f64>,
    /// Differences below this are rounding noise and count as converged.
    pub floor: f64,
}

impl ConvergenceReport {
    /// Each band doubling shrinks the difference by `min_ratio`, unless
    /// the finer difference is already at the rounding floor.
    pub fn passed(&self, min_ratio: f64) -> bool {
        self.diffs.iter().all(|d| d.is_finite())
            && self
                .ratios
                .iter()
                .zip(&self.diffs[1..])
                .all(|(r, fine)| *r >= min_ratio || *fine <= self.floor)
    }
}

/// Integrates `cfg` on grids with `N` points and modes per axis for each `N`
/// in `bands` up to `t_end`, and compares consecutive terminal states.
pub fn converge(cfg: &RunConfig, bands: &[usize], t_end: f64) -> Result<ConvergenceReport> {
    if bands.len() < 2 || bands.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "need at least two increasing bands, got {bands:?}"
        )));
    }
    if matches!(cfg.initial.kind, InitialKind::File(_)) {
        return Err(Error::InvalidParameter(
            "band convergence needs initial data defined on every grid, not a file".into(),
        ));
    }
    let mut policy = cfg.policy;
    policy.t_end = t_end;
    let mut terminals = Vec::new();
    for &n in bands {
        let grid = cfg.grid.with_points(vec![n; cfg.grid.dim()])?;
        let band = ModeBand::full(&grid);
        let u0 = initial_field(&cfg.initial, &grid, &band)?;
        let stepper = Stepper::new(GalerkinSystem::new(&grid, &band, cfg.params)?, policy)?;
        let traj = integrate_from(&stepper, SolverState::initial(u0), &mut [])?;
        terminals.push(traj.terminal().u.clone());
    }
    let mut diffs = Vec::new();
    let mut scale = 0.0f64;
    for w in terminals.windows(2) {
        let fine = &w[1];
        let coarse = w[0].extended(fine.grid().clone(), fine.modes())?;
        diffs.push(fine.sub(&coarse).l2_norm());
        scale = scale.max(fine.l2_norm());
    }
    let ratios = diffs
        .windows(2)
        .map(|w| {
            if w[1] == 0.0 && w[0] == 0.0 {
                f64::INFINITY
            } else {
                w[0] / w[1]
            }
        })
        .collect();
    Ok(ConvergenceReport {
        bands: bands.to_vec(),
        diffs,
        ratios,
        floor: 1e-13 * scale.max(1.0),
    })
}

/// Hölder quotients at a snapshot cadence and at half that cadence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderComparison {
    pub coarse: HolderReport,
    pub fine: HolderReport,
}

impl HolderComparison {
    pub fn relative_change(&self) -> f64 {
        (self.fine.sup_quotient - self.coarse.sup_quotient).abs() / self.coarse.sup_quotient
    }

    pub fn passed(&self, max_change: f64) -> bool {
        self.coarse.sup_quotient.is_finite()
            && self.fine.sup_quotient.is_finite()
            && self.relative_change() < max_change
    }
}

/// Integrates `cfg` once, sampling states every `cadence` and every
/// `cadence / 2` steps, and evaluates the Hölder quotient on both.
pub fn holder(cfg: &RunConfig, exponent: f64, norm: HolderNorm, cadence: usize) -> Result<HolderComparison> {
    if cadence < 2 || !cadence.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "cadence {cadence} must be even and at least 2"
        )));
    }
    let (stepper, u0) = prepare(cfg)?;
    let mut coarse = Recorder::new(cadence);
    let mut fine = Recorder::new(cadence / 2);
    integrate_from(&stepper, SolverState::initial(u0), &mut [&mut coarse, &mut fine])?;
    Ok(HolderComparison {
        coarse: holder_quotient(&coarse.states, exponent, norm)?,
        fine: holder_quotient(&fine.states, exponent, norm)?,
    })
}

/// Unit perturbation along the first mode of the second component.
pub fn dependence_direction(grid: &GridSpec, band: &ModeBand) -> Result<SpectralField<f64>> {
    let mut k = vec![0; grid.dim()];
    k[0] = 1;
    let mut e = SpectralField::zeros(grid.clone(), band.modes())?;
    e.set_coeff(1, &k, 1.0);
    Ok(e)
}

/// Whether `diffs / deltas` stays within `factor` of itself across the sweep.
pub fn scales_linearly(report: &DependenceReport, factor: f64) -> bool {
    let slopes: Vec<f64> = report
        .terminal_diffs
        .iter()
        .zip(&report.deltas)
        .map(|(d, e)| d / e)
        .collect();
    let lo = slopes.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    let hi = slopes.iter().fold(0.0f64, |m, x| m.max(*x));
    lo > 0.0 && hi.is_finite() && hi <= factor * lo
}

/// Perturbs the configured initial state by each `delta` along
/// [`dependence_direction`] and compares terminal states.
pub fn depend(cfg: &RunConfig, deltas: &[f64]) -> Result<DependenceReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "deltas must be positive, got {deltas:?}"
        )));
    }
    let u0 = initial_field(&cfg.initial, &cfg.grid, &cfg.band)?;
    let e = dependence_direction(&cfg.grid, &cfg.band)?;
    dependence_sweep(&u0, &e, deltas, &cfg.params, &cfg.policy)
}

/// Existence horizon for the configured initial state, `y0 = |grad u0|^2`.
pub fn tstar_for(cfg: &RunConfig, c: f64) -> Result<f64> {
    let u0 = initial_field(&cfg.initial, &cfg.grid, &cfg.band)?;
    bihari_tstar(u0.weighted_norm_sq(1), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn base(initial: &str) -> RunConfig {
        parse_config(&format!(
            r#"
[grid]
dim = 1
points = 16
[params]
beta1 = 1.0
beta2 = 0.01
beta3 = 1.0
beta4 = 1.0
beta5 = 0.05
[integrator]
dt = 1e-3
t_end = 0.1
[initial]
{initial}
"#
        ))
        .unwrap()
    }

    const RANDOM: &str = "kind = \"random_band\"\ndecay = 4.0\namplitude = 0.5\nseed = 3";

    #[test]
    fn identities_hold_on_random_fields() {
        for (ext, pts) in [(vec![1.0], vec![12]), (vec![1.0, 1.4], vec![8, 6])] {
            let g = GridSpec::new(ext, pts, 2).unwrap();
            let checks = verify_identities(&g, &ModeBand::full(&g), 5, 5).unwrap();
            assert_eq!(checks.len(), 6);
            for c in &checks {
                assert!(c.passed(), "{c}");
            }
        }
    }

    #[test]
    fn inequality_reports_do_not_depend_on_threads() {
        let g = GridSpec::unit(2, 6).unwrap();
        let band = ModeBand::full(&g);
        let one = verify_inequalities(&g, &band, 9, 8, 1).unwrap();
        let four = verify_inequalities(&g, &band, 9, 8, 4).unwrap();
        assert_eq!(one, four);
        assert!(one.iter().any(|r| r.id.starts_with("gn_d2")));
        assert!(one.iter().all(|r| r.passed()), "{one:?}");
    }

    #[test]
    fn constant_data_converges_trivially() {
        let cfg = base("kind = \"constant\"\nvalue = [0.0, 0.6, 0.8]");
        let r = converge(&cfg, &[8, 16], 0.1).unwrap();
        // Zero up to the rounding of the padded products.
        assert!(r.diffs[0] < 1e-15, "{r:?}");
        assert!(r.passed(10.0));
    }

    #[test]
    fn smooth_data_converges_fast() {
        let cfg = base(RANDOM);
        let r = converge(&cfg, &[8, 16, 32], 0.1).unwrap();
        assert!(r.passed(10.0), "{r:?}");
        assert!(converge(&cfg, &[16, 8], 0.1).is_err());
    }

    #[test]
    fn holder_quotient_is_stable_under_refinement() {
        let cfg = base(RANDOM);
        let c = holder(&cfg, 0.5, HolderNorm::L2, 10).unwrap();
        assert!(c.passed(0.1), "{c:?}");
        assert!(holder(&cfg, 0.5, HolderNorm::L2, 3).is_err());
    }

    #[test]
    fn dependence_scales_linearly() {
        let cfg = base(RANDOM);
        let r = depend(&cfg, &[1e-3, 1e-4]).unwrap();
        assert!(scales_linearly(&r, 3.0), "{r:?}");
        assert!(r.within(1.0), "{r:?}");
    }

    #[test]
    fn tstar_uses_gradient_energy() {
        let cfg = base("kind = \"eigenmode\"\nk = [1]\namplitude = 1.0");
        let y0 = std::f64::consts::PI.powi(2);
        assert!((tstar_for(&cfg, 0.0).unwrap() - y0.powi(-4) / 4.0).abs() < 1e-15);
    }
}
