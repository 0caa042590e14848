//! Huber ψ/ρ machinery and interval-truncated M-estimation of a single
//! sample's date.
//!
//! The location estimate solves `A(μ) = Σ ψ_c((y_i − μ)/σ_i)/σ_i = 0`.
//! `A` is nonincreasing in `μ`, so on an interval `[lo, hi]` exactly one of
//! three cases holds: the root is interior, `A(hi) > 0` (estimate truncates
//! to `hi`), or `A(lo) < 0` (estimate truncates to `lo`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipping threshold for the Huber ψ. `c = ∞` is the Gaussian (mean) case,
/// `c → 0` the double-exponential (median) case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberSpec {
    pub c: f64,
}

impl HuberSpec {
    /// 95%-efficiency threshold, the classical default.
    pub const DEFAULT_C: f64 = 1.345;

    pub fn new(c: f64) -> Result<Self> {
        if c >= 0.0 {
            Ok(HuberSpec { c })
        } else {
            Err(Error::InvalidArgument(format!("huber threshold must be >= 0, got {c}")))
        }
    }

    pub fn gaussian() -> Self {
        HuberSpec { c: f64::INFINITY }
    }
}

impl Default for HuberSpec {
    fn default() -> Self {
        HuberSpec { c: Self::DEFAULT_C }
    }
}

/// ψ_c(x): identity inside `[-c, c]`, clipped outside. Odd in `x`.
pub fn huber_psi(x: f64, c: f64) -> f64 {
    x.clamp(-c, c)
}

/// ρ_c(x): `x²/2` inside the linear zone, `c|x| − c²/2` beyond. Its
/// derivative is ψ_c; continuous with continuous first derivative.
pub fn huber_rho(x: f64, c: f64) -> f64 {
    let ax = x.abs();
    if ax <= c {
        0.5 * x * x
    } else {
        c * ax - 0.5 * c * c
    }
}

/// Which interval end (if any) the estimate truncated to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Truncation {
    None,
    Lower,
    Upper,
}

/// Σ ψ_c((y_i − μ)/σ_i)/σ_i, the estimating function. Nonincreasing in μ.
pub fn score(obs: &[(f64, f64)], c: f64, mu: f64) -> f64 {
    obs.iter().map(|&(y, s)| huber_psi((y - mu) / s, c) / s).sum()
}

/// Σ ρ_c((y_i − μ)/σ_i), the objective the score differentiates.
pub fn objective(obs: &[(f64, f64)], c: f64, mu: f64) -> f64 {
    obs.iter().map(|&(y, s)| huber_rho((y - mu) / s, c)).sum()
}

const TOL_YEARS: f64 = 1e-6;

/// M-estimate of a sample date restricted to `[lo, hi]`.
///
/// Returns the interior root of the score when it exists, otherwise the
/// interval end dictated by the score's sign there. When the score has a
/// flat zero segment (all residuals saturated), the midpoint of the root
/// interval is returned so the output is deterministic.
pub fn m_estimate_interval(
    obs: &[(f64, f64)],
    c: f64,
    lo: f64,
    hi: f64,
) -> Result<(f64, Truncation)> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("interval [{lo}, {hi}] is empty")));
    }
    if obs.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    if lo == hi {
        return Ok((lo, Truncation::None));
    }
    if score(obs, c, hi) > 0.0 {
        return Ok((hi, Truncation::Upper));
    }
    if score(obs, c, lo) < 0.0 {
        return Ok((lo, Truncation::Lower));
    }
    // Interior (possibly flat) root: bracket its lower and upper edges.
    let r_low = bisect(lo, hi, |mu| score(obs, c, mu) > 0.0);
    let r_high = bisect(lo, hi, |mu| score(obs, c, mu) >= 0.0);
    Ok(((r_low + r_high) / 2.0, Truncation::None))
}

/// Unconstrained root (interval midpoint under flat segments).
pub fn m_estimate(obs: &[(f64, f64)], c: f64) -> Result<f64> {
    let lo = obs.iter().map(|&(y, _)| y).fold(f64::INFINITY, f64::min) - 1.0;
    let hi = obs.iter().map(|&(y, _)| y).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    m_estimate_interval(obs, c, lo, hi).map(|(mu, _)| mu)
}

/// Last `x` in `[lo, hi]` where `pred` holds, assuming `pred` is true on a
/// left prefix; converges to the switch point within `TOL_YEARS`.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    if !pred(lo) {
        return lo;
    }
    while hi - lo > TOL_YEARS {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
