//! Energy ledger and balance residuals.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::galerkin::LLBarParams;
use crate::integrator::{Monitor, SolverState, Stepper};
use crate::scalar::Real;

use super::norms::{NormEvaluator, NormSuite};

pub const LEDGER_HEADER: [&str; 15] = [
    "t",
    "L2",
    "L4",
    "L6",
    "Linf",
    "gradL2",
    "deltaL2",
    "gradDeltaL2",
    "delta2L2",
    "gradDelta2L2",
    "uDotGradU",
    "absUabsGradU",
    "uDotDeltaU",
    "absUabsDeltaU",
    "balance_residual",
];

/// Time-ordered norm records with their `L^2` balance residuals
/// (NaN where fewer than three records are available).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    records: Vec<NormSuite>,
    residuals: Vec<f64>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[NormSuite] {
        &self.records
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record; times must increase strictly.
    pub fn push(&mut self, record: NormSuite) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(record.t > last.t) {
                return Err(Error::InvalidParameter(format!(
                    "ledger time {} does not follow {}",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        self.residuals.push(f64::NAN);
        Ok(())
    }

    /// Recomputes every residual for parameters `p`.
    pub fn update_residuals(&mut self, p: &LLBarParams) {
        if self.records.len() >= 3 {
            for i in 0..self.records.len() {
                self.residuals[i] = l2_balance_at(&self.records, i, p);
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LEDGER_HEADER)?;
        for (r, res) in self.records.iter().zip(&self.residuals) {
            w.write_record(csv_row(r, *res))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers()?.clone();
        if header.iter().ne(LEDGER_HEADER.iter().copied()) {
            return Err(Error::InvalidParameter(format!(
                "unexpected ledger header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut ledger = Self::new();
        for (line, row) in rd.records().enumerate() {
            let row = row?;
            let mut vals = [0.0; 15];
            for (v, field) in vals.iter_mut().zip(row.iter()) {
                *v = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("ledger row {}: cannot parse {field:?}", line + 1)))?;
            }
            let body: [f64; 13] = vals[1..14].try_into().expect("13 values");
            ledger.push(NormSuite::from_values(vals[0], body))?;
            *ledger.residuals.last_mut().expect("just pushed") = vals[14];
        }
        Ok(ledger)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

fn csv_row(r: &NormSuite, residual: f64) -> Vec<String> {
    std::iter::once(r.t)
        .chain(r.values())
        .chain(std::iter::once(residual))
        .map(|x| format!("{x:.16e}"))
        .collect()
}

/// Derivative at `ts[at]` of the quadratic through three points.
fn three_point_derivative(ts: [f64; 3], ys: [f64; 3], at: usize) -> f64 {
    let x = ts[at];
    let mut d = 0.0;
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let denom = (ts[i] - ts[j]) * (ts[i] - ts[k]);
        d += ys[i] * ((x - ts[j]) + (x - ts[k])) / denom;
    }
    d
}

/// Second-order derivative of `y(records)` at index `i`: centered in the
/// interior, one-sided at both ends.
fn derivative(records: &[NormSuite], i: usize, y: impl Fn(&NormSuite) -> f64) -> f64 {
    let n = records.len();
    let (start, at) = match i {
        0 => (0, 0),
        _ if i == n - 1 => (n - 3, 2),
        _ => (i - 1, 1),
    };
    let w = &records[start..start + 3];
    three_point_derivative([w[0].t, w[1].t, w[2].t], [y(&w[0]), y(&w[1]), y(&w[2])], at)
}

fn l2_balance_at(records: &[NormSuite], i: usize, p: &LLBarParams) -> f64 {
    let dt = derivative(records, i, |r| 0.5 * r.l2 * r.l2);
    let r = &records[i];
    dt + p.beta1 * r.grad_l2.powi(2)
        + p.beta2 * r.delta_l2.powi(2)
        + p.beta3 * r.l4.powi(4)
        + 2.0 * p.beta5 * r.u_dot_grad_u.powi(2)
        + p.beta5 * r.abs_u_abs_grad_u.powi(2)
        - p.beta3 * r.l2.powi(2)
}

fn h1_balance_at(records: &[NormSuite], i: usize, p: &LLBarParams) -> Result<f64> {
    let dt = derivative(records, i, |r| 0.5 * r.grad_l2 * r.grad_l2);
    let r = &records[i];
    let pairing = r
        .cubic_delta_pairing
        .ok_or_else(|| Error::InsufficientData(format!("record at t = {} lacks the cubic pairing", r.t)))?;
    Ok(
        dt + p.beta1 * r.delta_l2.powi(2) + p.beta2 * r.grad_delta_l2.powi(2) - p.beta3 * r.grad_l2.powi(2)
            + p.beta3 * (2.0 * r.u_dot_grad_u.powi(2) + r.abs_u_abs_grad_u.powi(2))
            + p.beta5 * pairing,
    )
}

fn need_three(records: &[NormSuite]) -> Result<()> {
    if records.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "balance residual needs at least 3 records, got {}",
            records.len()
        )));
    }
    Ok(())
}

/// Residual of `1/2 d/dt |u|^2 + b1|grad u|^2 + b2|lap u|^2 + b3|u|_4^4
/// + 2 b5|u.grad u|^2 + b5||u||grad u||^2 - b3|u|^2 = 0` per record.
pub fn energy_balance_residual(records: &[NormSuite], p: &LLBarParams) -> Result<Vec<f64>> {
    need_three(records)?;
    Ok((0..records.len()).map(|i| l2_balance_at(records, i, p)).collect())
}

/// Residual of the gradient-level balance
/// `1/2 d/dt |grad u|^2 + b1|lap u|^2 + b2|grad lap u|^2 - b3|grad u|^2
/// + b3 <grad(|u|^2 u), grad u> + b5 <lap(|u|^2 u), lap u> = 0` per record.
pub fn h1_balance_residual(records: &[NormSuite], p: &LLBarParams) -> Result<Vec<f64>> {
    need_three(records)?;
    (0..records.len()).map(|i| h1_balance_at(records, i, p)).collect()
}

pub fn max_abs(series: &[f64]) -> f64 {
    series.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Least-squares slope of `log err` against `log h`.
pub fn convergence_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::InsufficientData(
            "order fit needs at least two matching (h, error) pairs".into(),
        ));
    }
    if h.iter().chain(err).any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("order fit needs positive finite data".into()));
    }
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|x| x.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Monitor that records norms every `cadence` steps and optionally streams
/// the ledger to a CSV file. A row is written as soon as its residual is
/// final, and the remainder on `finish`, so an aborted run keeps its prefix.
pub struct LedgerMonitor<T> {
    evaluator: NormEvaluator<T>,
    params: LLBarParams,
    cadence: usize,
    ledger: EnergyLedger,
    sink: Option<(PathBuf, csv::Writer<File>)>,
    written: usize,
}

impl<T: Real> LedgerMonitor<T> {
    pub fn new(evaluator: NormEvaluator<T>, params: LLBarParams, cadence: usize) -> Self {
        Self {
            evaluator,
            params,
            cadence: cadence.max(1),
            ledger: EnergyLedger::new(),
            sink: None,
            written: 0,
        }
    }

    /// Streams rows to `path`, writing the header immediately.
    pub fn with_csv(mut self, path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(LEDGER_HEADER)?;
        self.sink = Some((path.to_path_buf(), w));
        Ok(self)
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> EnergyLedger {
        self.ledger
    }

    fn flush_rows(&mut self, upto: usize) -> Result<()> {
        if let Some((path, w)) = &mut self.sink {
            while self.written < upto {
                let i = self.written;
                w.write_record(csv_row(&self.ledger.records[i], self.ledger.residuals[i]))?;
                self.written += 1;
            }
            w.flush().map_err(|e| Error::io(path.clone(), e))?;
        }
        Ok(())
    }
}

impl<T: Real> Monitor<T> for LedgerMonitor<T> {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, state: &SolverState<T>, _: &Stepper<T>) -> Result<()> {
        self.ledger.push(self.evaluator.norms(state.t, &state.u))?;
        let n = self.ledger.len();
        if n >= 3 {
            // Record n-2 now has both neighbours; record 0 is fixed once n = 3.
            for i in [n - 3, n - 2] {
                self.ledger.residuals[i] = l2_balance_at(&self.ledger.records, i, &self.params);
            }
            self.flush_rows(n - 1)?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.ledger.update_residuals(&self.params);
        let n = self.ledger.len();
        self.flush_rows(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_record(t: f64, rate: f64) -> NormSuite {
        let mut r = NormSuite::zero(t);
        r.l2 = (-rate * t).exp();
        r.grad_l2 = r.l2 * rate.sqrt();
        r
    }

    #[test]
    fn three_point_stencils_are_exact_on_quadratics() {
        let ts = [0.1, 0.35, 0.5];
        let ys = ts.map(|t| 3.0 * t * t - t + 2.0);
        for at in 0..3 {
            let want = 6.0 * ts[at] - 1.0;
            assert!((three_point_derivative(ts, ys, at) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_decay_residual_is_second_order() {
        // u = e^{-b1 lambda t} e_k with lambda = 1: |grad u|^2 = |u|^2.
        let p = LLBarParams::unchecked(1.0, 0.0, 0.0, 0.0, 0.0);
        let mut maxes = vec![];
        let hs = [0.04, 0.02, 0.01];
        for &h in &hs {
            let recs: Vec<_> = (0..=(1.0 / h) as usize)
                .map(|i| decay_record(i as f64 * h, 1.0))
                .collect();
            let r = energy_balance_residual(&recs, &p).unwrap();
            // Centered difference of e^{-2t}/2 overshoots y' by h^2/6 y''' = -2h^2/3 e^{-2t}.
            let mid = recs.len() / 2;
            let t = recs[mid].t;
            let want = -2.0 / 3.0 * h * h * (-2.0 * t).exp();
            assert!((r[mid] - want).abs() < 0.02 * want.abs(), "{} vs {want}", r[mid]);
            maxes.push(max_abs(&r));
        }
        let order = convergence_order(&hs, &maxes).unwrap();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn too_few_records_rejected() {
        let p = LLBarParams::unchecked(1.0, 1.0, 1.0, 1.0, 1.0);
        let recs = [NormSuite::zero(0.0), NormSuite::zero(1.0)];
        assert!(matches!(
            energy_balance_residual(&recs, &p),
            Err(Error::InsufficientData(_))
        ));
        assert!(h1_balance_residual(&recs, &p).is_err());
    }

    #[test]
    fn csv_round_trip_and_ordering() {
        let p = LLBarParams::unchecked(1.0, 0.0, 0.0, 0.0, 0.0);
        let mut ledger = EnergyLedger::new();
        for i in 0..5 {
            ledger.push(decay_record(0.1 * i as f64 + 1.0 / 3.0, 1.0)).unwrap();
        }
        ledger.update_residuals(&p);
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&LEDGER_HEADER.join(",")));
        let back = EnergyLedger::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in back.records().iter().zip(ledger.records()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.values(), b.values());
        }
        assert_eq!(back.residuals(), ledger.residuals());
        assert!(ledger.push(decay_record(0.0, 1.0)).is_err());
    }

    #[test]
    fn order_fit_recovers_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x * x).collect();
        assert!((convergence_order(&h, &e).unwrap() - 3.0).abs() < 1e-12);
    }
}
