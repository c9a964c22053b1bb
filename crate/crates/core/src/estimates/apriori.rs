//! Band-doubling stability of the uniform-in-band bounds.

use crate::error::{Error, Result};

use super::ledger::EnergyLedger;

/// Below this both quantities count as zero and therefore as agreeing.
const ZERO: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct AprioriReport {
    pub level: usize,
    /// `sup_t |D^r u|` per ledger.
    pub sup_level: Vec<f64>,
    /// `int_0^T |D^{r+2} u|^2 dt` per ledger (trapezoid rule).
    pub integral_next: Vec<f64>,
    /// Largest pairwise ratio between ledgers of `sup_level`.
    pub sup_ratio: f64,
    pub integral_ratio: f64,
}

impl AprioriReport {
    pub fn finite(&self) -> bool {
        self.sup_level.iter().chain(&self.integral_next).all(|x| x.is_finite())
    }

    pub fn band_stable(&self) -> bool {
        self.sup_ratio <= 2.0 && self.integral_ratio <= 2.0
    }

    pub fn passed(&self) -> bool {
        self.finite() && self.band_stable()
    }
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().fold(0.0f64, |m, x| m.max(*x));
    let lo = values.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    if hi < ZERO {
        1.0
    } else {
        hi / lo
    }
}

/// Compares level-`r` bounds (`r` in `0..=3`) across ledgers of the same
/// initial data computed in different bands.
pub fn apriori_monitor(ledgers: &[&EnergyLedger], r: usize) -> Result<AprioriReport> {
    if r > 3 {
        return Err(Error::InvalidParameter(format!("regularity level {r} not in 0..=3")));
    }
    if ledgers.is_empty() || ledgers.iter().any(|l| l.is_empty()) {
        return Err(Error::InsufficientData(
            "a priori monitor needs non-empty ledgers".into(),
        ));
    }
    let mut sup_level = Vec::new();
    let mut integral_next = Vec::new();
    for ledger in ledgers {
        let recs = ledger.records();
        sup_level.push(recs.iter().fold(0.0f64, |m, x| m.max(x.level(r))));
        integral_next.push(
            recs.windows(2)
                .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].level(r + 2).powi(2) + w[1].level(r + 2).powi(2)))
                .sum(),
        );
    }
    Ok(AprioriReport {
        level: r,
        sup_ratio: spread(&sup_level),
        integral_ratio: spread(&integral_next),
        sup_level,
        integral_next,
    })
}
