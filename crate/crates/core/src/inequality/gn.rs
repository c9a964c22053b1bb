//! Gagliardo-Nirenberg interpolation with the explicit exponent.

use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use super::sobolev::{hs_norm, Nodal, MAX_TENSOR_ORDER};
use super::{RatioAccumulator, RatioReport, SampleSpec};
use crate::error::{Error, Result};

/// `|v|_{W^{r,q}} <= C |v|_{H^{s1}}^theta |v|_{H^{s2}}^{1-theta}` in dimension `d`;
/// `q = None` stands for `q = infinity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GnParams {
    pub d: u32,
    pub q: Option<u32>,
    pub r: u32,
    pub s1: u32,
    pub s2: u32,
}

impl GnParams {
    pub const fn new(d: u32, q: Option<u32>, r: u32, s1: u32, s2: u32) -> Self {
        Self { d, q, r, s1, s2 }
    }
}

impl fmt::Display for GnParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.q.map_or("inf".to_string(), |q| q.to_string());
        write!(f, "gn_d{}_q{}_r{}_s{}-{}", self.d, q, self.r, self.s1, self.s2)
    }
}

/// Exponent tuples used in the a priori bounds, with their exponents.
pub const PAPER_GN_TABLE: [(GnParams, (i64, i64)); 7] = [
    (GnParams::new(1, Some(4), 1, 0, 3), (7, 12)),
    (GnParams::new(2, Some(4), 0, 0, 1), (1, 2)),
    (GnParams::new(3, Some(4), 0, 0, 2), (5, 8)),
    (GnParams::new(1, Some(4), 1, 1, 2), (3, 4)),
    (GnParams::new(2, None, 0, 0, 2), (1, 2)),
    (GnParams::new(3, None, 0, 1, 2), (1, 2)),
    (GnParams::new(3, Some(4), 0, 0, 1), (1, 4)),
];

fn inadmissible(p: &GnParams, why: String) -> Error {
    Error::Inadmissible(format!("{p}: {why}"))
}

/// `theta = (2q(s2 - r) - d(q - 2)) / (2q(s2 - s1))`, or its limit
/// `(2(s2 - r) - d) / (2(s2 - s1))` for `q = infinity`, after checking
/// `q > 2`, `s1 < s2`, `0 < theta < 1` and `r < theta s1 + (1 - theta) s2`.
pub fn gn_theta(p: &GnParams) -> Result<Ratio<i64>> {
    if p.d == 0 {
        return Err(inadmissible(p, "dimension must be positive".into()));
    }
    if let Some(q) = p.q {
        if q <= 2 {
            return Err(inadmissible(p, format!("q = {q} violates q > 2")));
        }
    }
    if p.s1 >= p.s2 {
        return Err(inadmissible(p, format!("s1 = {} violates s1 < s2 = {}", p.s1, p.s2)));
    }
    let (d, r, s1, s2) = (p.d as i64, p.r as i64, p.s1 as i64, p.s2 as i64);
    let theta = match p.q {
        Some(q) => {
            let q = q as i64;
            Ratio::new(2 * q * (s2 - r) - d * (q - 2), 2 * q * (s2 - s1))
        }
        None => Ratio::new(2 * (s2 - r) - d, 2 * (s2 - s1)),
    };
    if theta <= Ratio::zero() || theta >= Ratio::from_integer(1) {
        return Err(inadmissible(p, format!("theta = {theta} violates 0 < theta < 1")));
    }
    let cap = theta * s1 + (Ratio::from_integer(1) - theta) * s2;
    if Ratio::from_integer(r) >= cap {
        return Err(inadmissible(
            p,
            format!("r = {r} violates r < theta s1 + (1 - theta) s2 = {cap}"),
        ));
    }
    Ok(theta)
}

/// `|v|_{W^{r,q}} / (|v|_{H^{s1}}^theta |v|_{H^{s2}}^{1-theta})` over the samples.
pub fn gn_check(spec: &SampleSpec, p: &GnParams) -> Result<RatioReport> {
    let theta = gn_theta(p)?.to_f64().expect("small rational");
    if spec.grid.dim() != p.d as usize {
        return Err(Error::InvalidParameter(format!(
            "{p} needs {}-dimensional samples, got {}",
            p.d,
            spec.grid.dim()
        )));
    }
    if p.r as usize > MAX_TENSOR_ORDER {
        return Err(Error::InvalidParameter(format!(
            "{p}: r above {MAX_TENSOR_ORDER} is not supported"
        )));
    }
    let mut acc = RatioAccumulator::new(p.to_string(), None);
    for i in 0..spec.count {
        let v = spec.sample(i)?;
        let lhs = Nodal::new(&v, p.r as usize)?.w_norm(p.r as usize, p.q);
        let rhs = hs_norm(&v, p.s1).powf(theta) * hs_norm(&v, p.s2).powf(1.0 - theta);
        acc.push(i, lhs, rhs);
    }
    Ok(acc.finish(|i| spec.sample_seed(i as u64)))
}
