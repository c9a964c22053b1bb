//! Randomized checks of the functional inequalities behind the estimates.
//!
//! Every check evaluates a ratio `lhs / rhs` per sample and summarizes the
//! distribution in a [`RatioReport`]. Samples are drawn deterministically
//! from a [`SampleSpec`].

mod checks;
mod gn;
mod sobolev;

use std::fmt;
use std::io::Write;

pub use checks::{
    check_cross_diff, check_cubic_lipschitz, check_elliptic, check_interp, check_product_hs, cross_diff_sides,
    cubic_lipschitz_sides, interp_sides, product_sides, CUBIC_L2_CONSTANT, EQ2_EPSILON,
};
pub use gn::{gn_check, gn_theta, GnParams, PAPER_GN_TABLE};
pub use sobolev::{hs_norm, level_sq, Nodal};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::galerkin::ModeBand;
use crate::grid::GridSpec;
use crate::rng::CounterRng;

/// Both sides below this count as a passing `0/0`.
pub const DEGENERATE: f64 = 1e-14;
/// Slack on constant-one bounds.
pub const UNIT_SLACK: f64 = 1e-9;

/// Spectral amplitude law of random samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AmplitudeLaw {
    Flat,
    /// Coefficients scaled by `(1 + lambda)^(-p/2)`.
    Decay(f64),
}

impl AmplitudeLaw {
    fn exponent(self) -> f64 {
        match self {
            AmplitudeLaw::Flat => 0.0,
            AmplitudeLaw::Decay(p) => p,
        }
    }
}

/// Deterministic family of random band-limited fields.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    pub seed: u64,
    pub count: usize,
    pub grid: GridSpec,
    pub band: ModeBand,
    pub law: AmplitudeLaw,
    /// Overall factor applied to every sample.
    pub scale: f64,
}

impl SampleSpec {
    /// Samples on the unit box with `modes` per axis and a grid of the same size.
    pub fn unit_box(dim: usize, modes: usize, seed: u64, count: usize, law: AmplitudeLaw) -> Result<Self> {
        let grid = GridSpec::unit(dim, modes)?;
        let band = ModeBand::full(&grid);
        Self::new(seed, count, grid, band, law)
    }

    pub fn new(seed: u64, count: usize, grid: GridSpec, band: ModeBand, law: AmplitudeLaw) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        if let AmplitudeLaw::Decay(p) = law {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!("decay exponent {p} must be >= 0")));
            }
        }
        ModeBand::new(band.modes().to_vec(), &grid)?;
        Ok(Self {
            seed,
            count,
            grid,
            band,
            law,
            scale: 1.0,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Seed of the `stream`-th generator derived from this spec.
    pub fn sample_seed(&self, stream: u64) -> u64 {
        CounterRng::new(self.seed).split(stream).seed()
    }

    fn draw(&self, stream: u64) -> Result<SpectralField<f64>> {
        SpectralField::random(
            self.grid.clone(),
            self.band.modes(),
            &CounterRng::new(self.sample_seed(stream)),
            self.scale,
            self.law.exponent(),
        )
    }

    /// The `i`-th single sample.
    pub fn sample(&self, i: usize) -> Result<SpectralField<f64>> {
        self.draw(i as u64)
    }

    /// The `i`-th pair of independent samples.
    pub fn pair(&self, i: usize) -> Result<(SpectralField<f64>, SpectralField<f64>)> {
        Ok((self.draw(2 * i as u64)?, self.draw(2 * i as u64 + 1)?))
    }
}

/// Distribution of `lhs / rhs` over a sample family.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub id: String,
    pub samples: usize,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// Bound the ratio is asserted against, if any.
    pub constant: Option<f64>,
    pub violations: usize,
    /// Sample index attaining `max_ratio` (or the first violation).
    pub witness_index: usize,
    pub witness_seed: u64,
}

impl RatioReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.max_ratio.is_finite()
    }
}

impl fmt::Display for RatioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} samples {:>5}  max {:.6e}  median {:.6e}",
            self.id, self.samples, self.max_ratio, self.median_ratio
        )?;
        if let Some(c) = self.constant {
            write!(f, "  bound {c:.6e}  violations {}", self.violations)?;
        }
        write!(f, "  witness #{} (seed {})", self.witness_index, self.witness_seed)
    }
}

/// Accumulates `(lhs, rhs)` pairs into a [`RatioReport`].
pub(crate) struct RatioAccumulator {
    id: String,
    constant: Option<f64>,
    ratios: Vec<f64>,
    violations: usize,
    witness: Option<(usize, f64)>,
    first_violation: Option<usize>,
}

impl RatioAccumulator {
    pub(crate) fn new(id: impl Into<String>, constant: Option<f64>) -> Self {
        Self {
            id: id.into(),
            constant,
            ratios: Vec::new(),
            violations: 0,
            witness: None,
            first_violation: None,
        }
    }

    pub(crate) fn push(&mut self, index: usize, lhs: f64, rhs: f64) {
        let ratio = if lhs.abs() < DEGENERATE && rhs.abs() < DEGENERATE {
            0.0
        } else if rhs.abs() < DEGENERATE {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        let bad = match self.constant {
            Some(c) => ratio > c + UNIT_SLACK * c.max(1.0),
            None => !ratio.is_finite(),
        };
        if bad {
            self.violations += 1;
            self.first_violation.get_or_insert(index);
        }
        if self.witness.is_none_or(|(_, r)| ratio > r) {
            self.witness = Some((index, ratio));
        }
        self.ratios.push(ratio);
    }

    pub(crate) fn finish(mut self, witness_seed: impl Fn(usize) -> u64) -> RatioReport {
        self.ratios.sort_by(f64::total_cmp);
        let n = self.ratios.len();
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => self.ratios[n / 2],
            _ => 0.5 * (self.ratios[n / 2 - 1] + self.ratios[n / 2]),
        };
        let witness = self.first_violation.or(self.witness.map(|w| w.0)).unwrap_or(0);
        RatioReport {
            id: self.id,
            samples: n,
            max_ratio: self.ratios.last().copied().unwrap_or(0.0),
            median_ratio: median,
            constant: self.constant,
            violations: self.violations,
            witness_index: witness,
            witness_seed: witness_seed(witness),
        }
    }
}

pub const REPORT_HEADER: [&str; 5] = ["inequality", "max_ratio", "median_ratio", "violations", "witness_seed"];

/// Writes reports as CSV with [`REPORT_HEADER`].
pub fn write_reports<W: Write>(out: W, reports: &[RatioReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.id.clone(),
            format!("{:.16e}", r.max_ratio),
            format!("{:.16e}", r.median_ratio),
            r.violations.to_string(),
            r.witness_seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
