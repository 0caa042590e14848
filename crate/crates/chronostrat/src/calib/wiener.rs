//! Gaussian calibration posterior under a Wiener (Brownian-with-drift)
//! prior on the curve values, with the empirical-Bayes variance-rate
//! estimate and the Bayesian/frequentist per-observation calibration.
//!
//! Model: calibration data `z_i ~ N(β_i, ν_i)` at calendar years `y_i`;
//! a priori `β` is Gaussian with mean `γ0 + γ1·y_i` and covariance
//! `σ²·min{y_i − o, y_j − o}` for an origin `o` just before the first
//! data year. Both layers are Gaussian, so the posterior of `β` is the
//! conjugate update `m + K(K+V)⁻¹(z − m)` with covariance `K − K(K+V)⁻¹K`.
//! Off-grid years interpolate by the Brownian-bridge conditional, which is
//! exact for this kernel.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CalibPoint;
use crate::error::{Error, Result};

/// Prior for the calibration curve: known drift, unknown variance rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerPriorModel {
    pub gamma0: f64,
    pub gamma1: f64,
    /// Variance accumulated per calendar year.
    pub sigma2: f64,
    /// Time origin of the process; prior variance at year `y` is
    /// `sigma2 · (y − origin)`.
    pub origin: f64,
}

impl WienerPriorModel {
    /// Origin convention: one year before the earliest calibration point,
    /// guaranteeing strictly positive prior variances on the data.
    pub fn with_origin_before(points: &[CalibPoint], gamma0: f64, gamma1: f64, sigma2: f64) -> Result<Self> {
        let first = points
            .iter()
            .map(|p| p.cal_year)
            .fold(f64::INFINITY, f64::min);
        if !first.is_finite() {
            return Err(Error::InvalidArgument("no calibration points".into()));
        }
        Ok(WienerPriorModel { gamma0, gamma1, sigma2, origin: first - 1.0 })
    }

    pub fn drift_at(&self, year: f64) -> f64 {
        self.gamma0 + self.gamma1 * year
    }
}

/// Posterior law of the curve values on the calibration data grid.
#[derive(Debug, Clone)]
pub struct GaussianCurvePosterior {
    pub years: Vec<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub model: WienerPriorModel,
}

impl GaussianCurvePosterior {
    /// Posterior mean and variance at an arbitrary year inside the data
    /// span, via the Brownian-bridge conditional between the two flanking
    /// grid years. Exact under the min-kernel prior.
    pub fn mean_var_at(&self, year: f64) -> (f64, f64) {
        let years = &self.years;
        let n = years.len();
        if year <= years[0] {
            return (self.mean[0], self.cov[(0, 0)]);
        }
        if year >= years[n - 1] {
            return (self.mean[n - 1], self.cov[(n - 1, n - 1)]);
        }
        let j = years.partition_point(|&y| y <= year).min(n - 1);
        let i = j - 1;
        let dy = years[j] - years[i];
        let w = (year - years[i]) / dy;
        let mean = (1.0 - w) * self.mean[i] + w * self.mean[j];
        let var = (1.0 - w) * (1.0 - w) * self.cov[(i, i)]
            + 2.0 * w * (1.0 - w) * self.cov[(i, j)]
            + w * w * self.cov[(j, j)]
            + self.model.sigma2 * dy * w * (1.0 - w);
        (mean, var)
    }
}

fn min_kernel(years: &[f64], model: &WienerPriorModel) -> DMatrix<f64> {
    let n = years.len();
    DMatrix::from_fn(n, n, |i, j| {
        model.sigma2 * ((years[i] - model.origin).min(years[j] - model.origin))
    })
}

/// Conjugate Gaussian update of the Wiener prior by the calibration data.
/// Points must be sorted by calendar year; measurement variances must be
/// positive.
pub fn wiener_posterior(points: &[CalibPoint], model: &WienerPriorModel) -> Result<GaussianCurvePosterior> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no calibration points".into()));
    }
    if model.sigma2 < 0.0 {
        return Err(Error::InvalidArgument("sigma2 must be nonnegative".into()));
    }
    let mut pts: Vec<&CalibPoint> = points.iter().collect();
    pts.sort_by(|a, b| a.cal_year.total_cmp(&b.cal_year));
    for p in &pts {
        if !(p.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "measurement sigma must be positive, got {}",
                p.sigma
            )));
        }
    }
    let n = pts.len();
    let years: Vec<f64> = pts.iter().map(|p| p.cal_year).collect();
    let z = DVector::from_iterator(n, pts.iter().map(|p| p.bp_age));
    let m = DVector::from_iterator(n, years.iter().map(|&y| model.drift_at(y)));
    let k = min_kernel(&years, model);
    let mut kv = k.clone();
    for (i, p) in pts.iter().enumerate() {
        kv[(i, i)] += p.sigma * p.sigma;
    }
    let chol = Cholesky::new(kv)
        .ok_or_else(|| Error::Numeric("K + V not positive definite".into()))?;
    let mean = &m + &k * chol.solve(&(&z - &m));
    let cov = &k - &k * chol.solve(&k);
    Ok(GaussianCurvePosterior { years, mean, cov, model: *model })
}

/// Outcome flag of the σ² bracket search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BracketStatus {
    Bracketed,
    /// No sign change in the bracket; the returned endpoint minimizes |g|.
    EndpointFallback,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Sigma2Estimate {
    pub sigma2: f64,
    pub status: BracketStatus,
}

const SIGMA2_LO: f64 = 1e-6;
const SIGMA2_HI: f64 = 1e6;

/// Empirical-Bayes variance rate: the σ² at which the summed prior second
/// moments of the curve increments equal their posterior counterparts.
///
/// `g(σ²) = σ²·ΣΔy − Σ[(Δmean − γ1Δy)² + Var(Δβ | z)]`, solved by bisection
/// on log σ² over `[1e-6, 1e6]`. Increments carry the Wiener structure with
/// n−1 effective degrees of freedom; matching the level moments instead is
/// dominated by a handful of low-frequency components and does not recover
/// a known rate.
pub fn estimate_sigma2(points: &[CalibPoint], gamma0: f64, gamma1: f64) -> Result<Sigma2Estimate> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("sigma2 estimation needs at least 2 points".into()));
    }
    let model0 = WienerPriorModel::with_origin_before(points, gamma0, gamma1, 1.0)?;
    let g = |sigma2: f64| -> Result<f64> {
        let model = WienerPriorModel { sigma2, ..model0 };
        let post = wiener_posterior(points, &model)?;
        let n = post.years.len();
        let mut prior2 = 0.0;
        let mut post2 = 0.0;
        for i in 0..n - 1 {
            let dy = post.years[i + 1] - post.years[i];
            prior2 += sigma2 * dy;
            let dmean = post.mean[i + 1] - post.mean[i] - gamma1 * dy;
            let dvar = post.cov[(i + 1, i + 1)] + post.cov[(i, i)] - 2.0 * post.cov[(i, i + 1)];
            post2 += dmean * dmean + dvar;
        }
        Ok(prior2 - post2)
    };
    let g_lo = g(SIGMA2_LO)?;
    let g_hi = g(SIGMA2_HI)?;
    if g_lo * g_hi > 0.0 {
        let sigma2 = if g_lo.abs() <= g_hi.abs() { SIGMA2_LO } else { SIGMA2_HI };
        return Ok(Sigma2Estimate { sigma2, status: BracketStatus::EndpointFallback });
    }
    let mut lo = SIGMA2_LO.ln();
    let mut hi = SIGMA2_HI.ln();
    let mut f_lo = g_lo;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let f_mid = g(mid.exp())?;
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(Sigma2Estimate { sigma2: (0.5 * (lo + hi)).exp(), status: BracketStatus::Bracketed })
}

/// Normalized per-year density of a sample's calendar age given one BP
/// measurement, on a uniform grid over the posterior's span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationDensity {
    pub grid_start: f64,
    pub step: f64,
    pub density: Vec<f64>,
}

impl CalibrationDensity {
    pub fn year_at(&self, index: usize) -> f64 {
        self.grid_start + index as f64 * self.step
    }

    pub fn cell_of(&self, year: f64) -> Option<usize> {
        let idx = ((year - self.grid_start) / self.step).round();
        (idx >= 0.0 && (idx as usize) < self.density.len()).then_some(idx as usize)
    }
}

/// Highest-density credible set over the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CredibleSet {
    pub level: f64,
    /// Density threshold actually used (density of the last cell admitted).
    pub threshold: f64,
    pub member_mask: Vec<bool>,
    /// Contiguous member runs as closed year intervals.
    pub intervals: Vec<(f64, f64)>,
    /// Total measure: member-cell count × step.
    pub measure: f64,
    /// End-to-end extent including gaps between intervals.
    pub span: f64,
    pub mass: f64,
}

impl CredibleSet {
    pub fn contains_year(&self, density: &CalibrationDensity, year: f64) -> bool {
        density.cell_of(year).map(|i| self.member_mask[i]).unwrap_or(false)
    }
}

/// Per-year likelihood `N(obs_bp; mean(y), var(y) + obs_sigma²)` normalized
/// to a density over the grid, plus its highest-density credible set of the
/// requested mass.
pub fn bayes_calibrate(
    obs_bp: f64,
    obs_sigma: f64,
    posterior: &GaussianCurvePosterior,
    level: f64,
    step: f64,
) -> Result<(CalibrationDensity, CredibleSet)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0,1), got {level}")));
    }
    let lo = posterior.years[0];
    let hi = posterior.years[posterior.years.len() - 1];
    let n = ((hi - lo) / step).round() as usize + 1;
    let mut loglik = Vec::with_capacity(n);
    let mut max_ll = f64::NEG_INFINITY;
    for i in 0..n {
        let y = lo + i as f64 * step;
        let (mean, var) = posterior.mean_var_at(y);
        let v = var + obs_sigma * obs_sigma;
        let ll = -0.5 * (obs_bp - mean).powi(2) / v - 0.5 * v.ln();
        max_ll = max_ll.max(ll);
        loglik.push(ll);
    }
    let mut density: Vec<f64> = loglik.iter().map(|&ll| (ll - max_ll).exp()).collect();
    let total: f64 = density.iter().sum();
    for d in &mut density {
        *d /= total;
    }
    let density = CalibrationDensity { grid_start: lo, step, density };
    let set = credible_set_from_density(&density, level);
    Ok((density, set))
}

/// Greedy highest-density accumulation until the requested mass is reached.
pub fn credible_set_from_density(density: &CalibrationDensity, level: f64) -> CredibleSet {
    let n = density.density.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| density.density[b].total_cmp(&density.density[a]).then(a.cmp(&b)));
    let mut mask = vec![false; n];
    let mut mass = 0.0;
    let mut threshold = 0.0;
    for &i in &order {
        mask[i] = true;
        mass += density.density[i];
        threshold = density.density[i];
        if mass >= level {
            break;
        }
    }
    let mut intervals = Vec::new();
    let mut measure = 0.0;
    let mut run_start: Option<usize> = None;
    for i in 0..n {
        if mask[i] {
            measure += density.step;
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else if let Some(s) = run_start.take() {
            intervals.push((density.year_at(s), density.year_at(i - 1)));
        }
    }
    if let Some(s) = run_start {
        intervals.push((density.year_at(s), density.year_at(n - 1)));
    }
    let span = match (intervals.first(), intervals.last()) {
        (Some(&(a, _)), Some(&(_, b))) => b - a + density.step,
        _ => 0.0,
    };
    CredibleSet { level, threshold, member_mask: mask, intervals, measure, span, mass }
}

/// Frequentist comparator: the interval of length `match_length` centered at
/// the likelihood-maximizing grid year (earliest grid year on ties).
pub fn mle_calibrate(
    obs_bp: f64,
    obs_sigma: f64,
    posterior: &GaussianCurvePosterior,
    match_length: f64,
    step: f64,
) -> Result<(f64, (f64, f64))> {
    if match_length < 0.0 {
        return Err(Error::InvalidArgument("match_length must be nonnegative".into()));
    }
    let lo = posterior.years[0];
    let hi = posterior.years[posterior.years.len() - 1];
    let n = ((hi - lo) / step).round() as usize + 1;
    let mut best = f64::NEG_INFINITY;
    let mut best_year = lo;
    for i in 0..n {
        let y = lo + i as f64 * step;
        let (mean, var) = posterior.mean_var_at(y);
        let v = var + obs_sigma * obs_sigma;
        let ll = -0.5 * (obs_bp - mean).powi(2) / v - 0.5 * v.ln();
        if ll > best {
            best = ll;
            best_year = y;
        }
    }
    Ok((best_year, (best_year - match_length / 2.0, best_year + match_length / 2.0)))
}
