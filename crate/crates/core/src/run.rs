//! Run orchestration: initial data, integration and output files.

use std::path::{Path, PathBuf};

use crate::config::{InitialKind, InitialSpec, RunConfig};
use crate::error::{Error, Result};
use crate::estimates::{LedgerMonitor, NormEvaluator, NormSuite};
use crate::field::{read_snapshot, write_snapshot, SpectralField, VectorField};
use crate::galerkin::{GalerkinSystem, ModeBand};
use crate::grid::GridSpec;
use crate::integrator::{integrate_from, project_initial, Monitor, SolverState, Stepper};
use crate::rng::CounterRng;

pub const LEDGER_FILE: &str = "ledger.csv";

pub fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:08}.llbr")
}

/// Builds the initial coefficients described by `spec` on `band`.
pub fn initial_field(spec: &InitialSpec, grid: &GridSpec, band: &ModeBand) -> Result<SpectralField<f64>> {
    let u = match &spec.kind {
        InitialKind::Constant(c) => {
            // e_0 = |box|^(-1/2), so the constant sits in a single coefficient.
            let mut s = SpectralField::zeros(grid.clone(), band.modes())?;
            let root = grid.volume().sqrt();
            for (i, x) in c.iter().enumerate() {
                s.set_coeff(i, &vec![0; grid.dim()], x * root);
            }
            s
        }
        InitialKind::Eigenmode {
            k,
            amplitude,
            direction,
        } => {
            if k.len() != grid.dim() || !band.contains(k) {
                return Err(Error::InvalidParameter(format!(
                    "eigenmode {k:?} lies outside the band {:?}",
                    band.modes()
                )));
            }
            let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut s = SpectralField::zeros(grid.clone(), band.modes())?;
            for (c, d) in direction.iter().enumerate() {
                s.set_coeff(c, k, amplitude * d / norm);
            }
            s
        }
        InitialKind::RandomBand { decay, amplitude } => SpectralField::random(
            grid.clone(),
            band.modes(),
            &CounterRng::new(spec.seed),
            *amplitude,
            *decay,
        )?,
        InitialKind::File(path) => {
            let v: VectorField<f64> = read_snapshot(path)?;
            if v.grid().points() != grid.points() || !v.grid().same_box(grid) {
                return Err(Error::InvalidParameter(format!(
                    "{}: snapshot grid {:?} on {:?} does not match the configured {:?} on {:?}",
                    path.display(),
                    v.grid().points(),
                    v.grid().extents(),
                    grid.points(),
                    grid.extents()
                )));
            }
            let v = VectorField::new(grid.clone(), v.into_data())?;
            project_initial(&v, band)?
        }
    };
    match spec.normalize_linf {
        Some(target) => {
            let sup = u.values_on(&grid.padded())?.max_norm();
            if !(sup > 0.0) {
                return Err(Error::InvalidParameter(
                    "cannot normalize an initial field that vanishes".into(),
                ));
            }
            Ok(u.scaled(target / sup))
        }
        None => Ok(u),
    }
}

/// Prepared system and initial state of a configuration.
pub fn prepare(cfg: &RunConfig) -> Result<(Stepper<f64>, SpectralField<f64>)> {
    let u0 = initial_field(&cfg.initial, &cfg.grid, &cfg.band)?;
    let system = GalerkinSystem::new(&cfg.grid, &cfg.band, cfg.params)?;
    Ok((Stepper::new(system, cfg.policy)?, u0))
}

/// Writes the nodal values of the state every `cadence` steps.
pub struct SnapshotMonitor {
    dir: PathBuf,
    cadence: usize,
    pub written: Vec<PathBuf>,
}

impl SnapshotMonitor {
    pub fn new(dir: &Path, cadence: usize) -> Self {
        Self {
            dir: dir.to_path_buf(),
            cadence: cadence.max(1),
            written: Vec::new(),
        }
    }
}

impl Monitor<f64> for SnapshotMonitor {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, state: &SolverState<f64>, _: &Stepper<f64>) -> Result<()> {
        let path = self.dir.join(snapshot_name(state.step_index));
        write_snapshot(&path, &state.u.values_on(state.u.grid())?)?;
        self.written.push(path);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub terminal: NormSuite,
    pub steps: usize,
    pub ledger_rows: usize,
    pub ledger: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Integrates `cfg`, writing `ledger.csv` and snapshots into the output
/// directory. Files are flushed before an error is returned.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (stepper, u0) = prepare(cfg)?;
    let ledger_path = dir.join(LEDGER_FILE);
    let evaluator = NormEvaluator::new(&cfg.grid, cfg.band.modes())?;
    let mut ledger = LedgerMonitor::new(evaluator, cfg.params, cfg.output.cadence).with_csv(&ledger_path)?;
    let mut snaps = SnapshotMonitor::new(dir, cfg.output.snapshot_cadence);
    let traj = if cfg.output.snapshot_cadence > 0 {
        integrate_from(&stepper, SolverState::initial(u0), &mut [&mut ledger, &mut snaps])?
    } else {
        integrate_from(&stepper, SolverState::initial(u0), &mut [&mut ledger])?
    };
    let records = ledger.ledger().records();
    Ok(RunSummary {
        terminal: *records.last().expect("initial state is always recorded"),
        steps: traj.steps,
        ledger_rows: records.len(),
        ledger: ledger_path,
        snapshots: snaps.written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_with;
    use crate::estimates::EnergyLedger;

    fn config(body: &str, dir: &Path) -> RunConfig {
        parse_config_with(body, &[format!("output.dir = {:?}", dir.display().to_string())]).unwrap()
    }

    const BASE: &str = r#"
[grid]
dim = 2
points = 8
[params]
beta1 = 1.0
beta2 = 0.01
beta3 = 1.0
beta4 = 1.0
beta5 = 0.1
[integrator]
dt = 1e-3
t_end = 0.1
[initial]
kind = "constant"
value = [1.0, 0.0, 0.0]
"#;

    #[test]
    fn constant_unit_state_is_stationary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(BASE, dir.path());
        let (stepper, u0) = prepare(&cfg).unwrap();
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.steps, 100);
        assert_eq!(summary.ledger_rows, 101);
        assert!((summary.terminal.linf - 1.0).abs() < 1e-12);
        let mut state = SolverState::initial(u0.clone());
        for _ in 0..100 {
            state = stepper.step(&state).unwrap();
        }
        assert!(state.u.max_abs_diff(&u0) < 1e-12);
    }

    #[test]
    fn linear_single_mode_decays_exponentially() {
        let dir = tempfile::tempdir().unwrap();
        let body = BASE
            .replace(
                "beta3 = 1.0\nbeta4 = 1.0\nbeta5 = 0.1",
                "beta3 = 0.0\nbeta4 = 0.0\nbeta5 = 0.0\nreduced = true",
            )
            .replace(
                "kind = \"constant\"\nvalue = [1.0, 0.0, 0.0]",
                "kind = \"eigenmode\"\nk = [1, 2]\namplitude = 0.7\ndirection = [0.0, 3.0, 4.0]",
            );
        let cfg = config(&body, dir.path());
        run(&cfg).unwrap();
        let ledger = EnergyLedger::load(&dir.path().join(LEDGER_FILE)).unwrap();
        let lambda = 5.0 * std::f64::consts::PI.powi(2);
        let m = -lambda - 0.01 * lambda * lambda;
        for r in ledger.records() {
            let exact = 0.7 * (m * r.t).exp();
            assert!((r.l2 - exact).abs() < 1e-10 * exact.max(1e-300), "t = {}", r.t);
        }
    }

    #[test]
    fn cadence_controls_rows_and_reruns_are_identical() {
        let body = BASE.replace("t_end = 0.1", "t_end = 1.0").replace(
            "kind = \"constant\"\nvalue = [1.0, 0.0, 0.0]",
            "kind = \"random_band\"\ndecay = 4.0\namplitude = 0.5\nseed = 11",
        ) + "[output]\ncadence = 10\nsnapshot_cadence = 500\n";
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run(&config(&body, a.path())).unwrap();
        let rb = run(&config(&body, b.path())).unwrap();
        assert_eq!(ra.ledger_rows, 101);
        let text = std::fs::read_to_string(&ra.ledger).unwrap();
        assert_eq!(text.lines().count(), 102);
        assert_eq!(text, std::fs::read_to_string(&rb.ledger).unwrap());
        assert_eq!(ra.snapshots.len(), 3);
        for (x, y) in ra.snapshots.iter().zip(&rb.snapshots) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn file_initial_data_must_match_grid() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::unit(2, 8).unwrap();
        let v = VectorField::from_fn(grid, |x| [x[0].cos(), 0.0, 0.0]).unwrap();
        let good = dir.path().join("u0.llbr");
        write_snapshot(&good, &v).unwrap();
        let body = BASE.replace(
            "kind = \"constant\"\nvalue = [1.0, 0.0, 0.0]",
            &format!("kind = \"file\"\npath = {:?}", good.display().to_string()),
        );
        let cfg = config(&body, dir.path());
        let u = initial_field(&cfg.initial, &cfg.grid, &cfg.band).unwrap();
        assert!(u.values_on(&cfg.grid).unwrap().max_abs_diff(&v) < 1e-13);
        let coarse = config(&body.replace("points = 8", "points = 4"), dir.path());
        assert!(initial_field(&coarse.initial, &coarse.grid, &coarse.band).is_err());
    }

    #[test]
    fn blow_up_keeps_partial_ledger() {
        let dir = tempfile::tempdir().unwrap();
        let body = BASE.replace("beta1 = 1.0", "beta1 = -20.0").replace(
            "kind = \"constant\"\nvalue = [1.0, 0.0, 0.0]",
            "kind = \"eigenmode\"\nk = [1, 0]\namplitude = 0.1",
        ) + "[output]\ncadence = 1\n";
        let cfg = parse_config_with(
            &body,
            &[
                format!("output.dir = {:?}", dir.path().display().to_string()),
                "integrator.blowup_threshold = 0.5".into(),
                "params.beta3 = 0.0".into(),
                "params.beta5 = 0.0".into(),
                "params.reduced = true".into(),
            ],
        )
        .unwrap();
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err}");
        let ledger = EnergyLedger::load(&dir.path().join(LEDGER_FILE)).unwrap();
        assert!(ledger.len() > 3 && ledger.len() < 101);
    }
}
