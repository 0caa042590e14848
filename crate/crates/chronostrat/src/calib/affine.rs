//! Affine calibration over a short window, with the residual diagnostics
//! that justify it: a permutation test for serial correlation and a
//! permutation F-test for a lab effect.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CalibPoint;
use crate::error::{Error, Result};

/// Straight-line calibration `bp = slope·cal_year + intercept` fitted over a
/// window, together with the inverse map used to place lab ages on the
/// calendar axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCalibration {
    /// d(bp)/d(cal_year) of the fitted line.
    pub slope: f64,
    /// bp at cal_year = 0.
    pub intercept: f64,
    /// Root mean squared residual with the n−2 degrees-of-freedom correction.
    pub residual_sd: f64,
    /// Calendar window the fit is valid over.
    pub window: (f64, f64),
    /// Calendar years of points excluded from the fit.
    pub exclusions: Vec<f64>,
}

impl AffineCalibration {
    /// The tenth-century-BCE window map, `cal = 2221.8 − 1.135·bp`, expressed
    /// in the forward direction. Used when no calibration data file is at
    /// hand.
    pub fn iron_age_default() -> Self {
        let inv_slope = -1.135;
        let inv_intercept = 2221.8;
        AffineCalibration {
            slope: 1.0 / inv_slope,
            intercept: -inv_intercept / inv_slope,
            residual_sd: 0.0,
            window: (-1150.0, -800.0),
            exclusions: vec![-997.0, -1109.5],
        }
    }

    /// Calendar year for a radiocarbon age: the inverse of the fitted line.
    pub fn calendar_from_bp(&self, bp: f64) -> f64 {
        (bp - self.intercept) / self.slope
    }

    /// Radiocarbon age the line assigns to a calendar year.
    pub fn bp_from_calendar(&self, cal_year: f64) -> f64 {
        self.intercept + self.slope * cal_year
    }

    /// Inverse-map coefficients `(a, b)` of `cal = a + b·bp`.
    pub fn inverse_coefficients(&self) -> (f64, f64) {
        (-self.intercept / self.slope, 1.0 / self.slope)
    }

    /// Standard error transported to the calendar axis.
    pub fn sigma_to_calendar(&self, sigma_bp: f64) -> f64 {
        sigma_bp * (1.0 / self.slope).abs()
    }
}

/// Result rows of the affine fit: the retained points' residuals in
/// chronological order, tagged by lab.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineFitDetail {
    pub model: AffineCalibration,
    pub residuals: Vec<f64>,
    pub labs: Vec<String>,
    pub cal_years: Vec<f64>,
}

/// Ordinary least squares of `bp` on `cal_year` over a window, with listed
/// calendar years excluded. Needs at least three retained points.
pub fn fit_affine(
    points: &[CalibPoint],
    window: (f64, f64),
    exclusions: &[f64],
) -> Result<AffineFitDetail> {
    let mut used: Vec<&CalibPoint> = points
        .iter()
        .filter(|p| p.cal_year >= window.0 && p.cal_year <= window.1)
        .filter(|p| !exclusions.iter().any(|&e| (p.cal_year - e).abs() < 0.5))
        .collect();
    used.sort_by(|a, b| a.cal_year.total_cmp(&b.cal_year));
    let n = used.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "affine fit needs at least 3 points after exclusion, got {n}"
        )));
    }
    let xbar = used.iter().map(|p| p.cal_year).sum::<f64>() / n as f64;
    let ybar = used.iter().map(|p| p.bp_age).sum::<f64>() / n as f64;
    let sxx: f64 = used.iter().map(|p| (p.cal_year - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("degenerate design: all calendar years equal".into()));
    }
    let sxy: f64 = used.iter().map(|p| (p.cal_year - xbar) * (p.bp_age - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residuals: Vec<f64> =
        used.iter().map(|p| p.bp_age - (intercept + slope * p.cal_year)).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let residual_sd = (rss / (n as f64 - 2.0)).sqrt();
    Ok(AffineFitDetail {
        model: AffineCalibration {
            slope,
            intercept,
            residual_sd,
            window,
            exclusions: exclusions.to_vec(),
        },
        residuals,
        labs: used.iter().map(|p| p.source_lab.clone()).collect(),
        cal_years: used.iter().map(|p| p.cal_year).collect(),
    })
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let denom: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let num: f64 = (0..n - 1).map(|i| (xs[i] - mean) * (xs[i + 1] - mean)).sum();
    num / denom
}

/// Whether permutations shuffle the full series or each chronological half
/// separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationMode {
    Full,
    SplitHalves,
}

/// One-sided permutation p-value for positive serial correlation of ordered
/// residuals: the fraction of permutations whose lag-1 autocorrelation
/// reaches the observed one.
pub fn permutation_serial_correlation(
    residuals: &[f64],
    n_perm: usize,
    mode: PermutationMode,
    seed: u64,
) -> Result<(f64, f64)> {
    if residuals.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 residuals".into()));
    }
    if n_perm < 100 {
        return Err(Error::InvalidArgument("need at least 100 permutations".into()));
    }
    let observed = lag1_autocorrelation(residuals);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = residuals.to_vec();
    let half = residuals.len() / 2;
    let mut hits = 0usize;
    for _ in 0..n_perm {
        match mode {
            PermutationMode::Full => shuffle(&mut work, &mut rng),
            PermutationMode::SplitHalves => {
                let (a, b) = work.split_at_mut(half);
                shuffle(a, &mut rng);
                shuffle(b, &mut rng);
            }
        }
        if lag1_autocorrelation(&work) >= observed {
            hits += 1;
        }
    }
    Ok((observed, hits as f64 / n_perm as f64))
}

fn shuffle(xs: &mut [f64], rng: &mut ChaCha8Rng) {
    for i in (1..xs.len()).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
    }
}

/// Per-lab residual offsets and a permutation F-test against "no lab
/// effect".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabEffect {
    pub labs: Vec<String>,
    pub offsets: Vec<f64>,
    pub counts: Vec<usize>,
    /// Largest minus smallest lab mean, the headline "lab effect" size.
    pub spread: f64,
    pub f_statistic: f64,
    pub p_value: f64,
}

/// One-way ANOVA-style analysis of residuals by lab, with the p-value
/// obtained by permuting lab labels.
pub fn lab_effect(residuals: &[f64], labs: &[String], n_perm: usize, seed: u64) -> Result<LabEffect> {
    if residuals.len() != labs.len() {
        return Err(Error::InvalidArgument("residuals and labs must have equal length".into()));
    }
    let mut names: Vec<String> = labs.to_vec();
    names.sort();
    names.dedup();
    if names.len() < 2 {
        return Err(Error::InvalidArgument("lab effect needs at least 2 labs".into()));
    }
    let idx: Vec<usize> =
        labs.iter().map(|l| names.iter().position(|n| n == l).unwrap()).collect();
    let f_of = |perm: &[usize]| -> f64 {
        let k = names.len();
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&g, &r) in perm.iter().zip(residuals) {
            sums[g] += r;
            counts[g] += 1;
        }
        let grand = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let mut between = 0.0;
        for g in 0..k {
            if counts[g] > 0 {
                let m = sums[g] / counts[g] as f64;
                between += counts[g] as f64 * (m - grand).powi(2);
            }
        }
        let mut within = 0.0;
        for (&g, &r) in perm.iter().zip(residuals) {
            let m = sums[g] / counts[g] as f64;
            within += (r - m).powi(2);
        }
        let df1 = (k - 1) as f64;
        let df2 = (residuals.len() - k) as f64;
        if within == 0.0 {
            return f64::INFINITY;
        }
        (between / df1) / (within / df2)
    };
    let observed = f_of(&idx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = idx.clone();
    let mut hits = 0usize;
    for _ in 0..n_perm {
        for i in (1..perm.len()).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        if f_of(&perm) >= observed {
            hits += 1;
        }
    }
    let k = names.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&g, &r) in idx.iter().zip(residuals) {
        sums[g] += r;
        counts[g] += 1;
    }
    let offsets: Vec<f64> =
        (0..k).map(|g| if counts[g] > 0 { sums[g] / counts[g] as f64 } else { 0.0 }).collect();
    let spread = offsets.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - offsets.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(LabEffect {
        labs: names,
        offsets,
        counts,
        spread,
        f_statistic: observed,
        p_value: hits as f64 / n_perm as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(y: f64, v: f64, lab: &str) -> CalibPoint {
        CalibPoint { cal_year: y, bp_age: v, sigma: 10.0, source_lab: lab.into() }
    }

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<CalibPoint> = (0..10).map(|i| pt(i as f64, 2.0 * i as f64 + 1.0, "a")).collect();
        let fit = fit_affine(&pts, (0.0, 9.0), &[]).unwrap();
        assert!((fit.model.slope - 2.0).abs() < 1e-12);
        assert!((fit.model.intercept - 1.0).abs() < 1e-12);
        assert!(fit.model.residual_sd < 1e-9);
    }

    #[test]
    fn duplication_leaves_fit_unchanged() {
        let pts: Vec<CalibPoint> =
            (0..8).map(|i| pt(i as f64, 3.0 * i as f64 + (i % 3) as f64, "a")).collect();
        let doubled: Vec<CalibPoint> = pts.iter().chain(pts.iter()).cloned().collect();
        let f1 = fit_affine(&pts, (0.0, 7.0), &[]).unwrap();
        let f2 = fit_affine(&doubled, (0.0, 7.0), &[]).unwrap();
        assert!((f1.model.slope - f2.model.slope).abs() < 1e-12);
        assert!((f1.model.intercept - f2.model.intercept).abs() < 1e-12);
    }

    #[test]
    fn residuals_centered_and_orthogonal_to_year()
    {
        let pts: Vec<CalibPoint> =
            (0..30).map(|i| pt(i as f64 * 5.0, 2800.0 - 0.9 * i as f64 * 5.0 + ((i * 7) % 11) as f64, "a")).collect();
        let fit = fit_affine(&pts, (0.0, 150.0), &[]).unwrap();
        let scale: f64 = fit.residuals.iter().map(|r| r.abs()).sum::<f64>().max(1.0);
        let sum: f64 = fit.residuals.iter().sum();
        let dot: f64 = fit.residuals.iter().zip(&fit.cal_years).map(|(r, y)| r * y).sum();
        assert!(sum.abs() < 1e-8 * scale);
        assert!(dot.abs() < 1e-6 * scale * 150.0);
    }

    #[test]
    fn exclusions_and_degenerate_design() {
        let mut pts: Vec<CalibPoint> = (0..6).map(|i| pt(i as f64, i as f64, "a")).collect();
        pts.push(pt(3.0, 1000.0, "a")); // outlier at year 3 — excluded below
        let fit = fit_affine(&pts, (0.0, 6.0), &[3.0]).unwrap();
        assert!((fit.model.slope - 1.0).abs() < 1e-9);
        let flat: Vec<CalibPoint> = (0..5).map(|_| pt(2.0, 1.0, "a")).collect();
        assert!(matches!(fit_affine(&flat, (0.0, 6.0), &[]), Err(Error::Numeric(_))));
    }

    #[test]
    fn iron_age_default_matches_inverse_map() {
        let cal = AffineCalibration::iron_age_default();
        // bp = 2800 -> 2221.8 - 1.135*2800 = -956.2 (i.e. 956.2 BCE)
        assert!((cal.calendar_from_bp(2800.0) - -956.2).abs() < 1e-9);
        assert!((cal.calendar_from_bp(0.0) - 2221.8).abs() < 1e-9);
        let (a, b) = cal.inverse_coefficients();
        assert!((a - 2221.8).abs() < 1e-9);
        assert!((b - -1.135).abs() < 1e-12);
        assert!((cal.sigma_to_calendar(30.0) - 30.0 * 1.135).abs() < 1e-9);
        // strictly decreasing in bp when the inverse slope is negative
        assert!(cal.calendar_from_bp(2900.0) < cal.calendar_from_bp(2800.0));
    }

    #[test]
    fn identity_scale_map() {
        let cal = AffineCalibration {
            slope: -1.0,
            intercept: 0.0,
            residual_sd: 0.0,
            window: (-1000.0, 0.0),
            exclusions: vec![],
        };
        assert_eq!(cal.calendar_from_bp(100.0), -100.0);
    }

    #[test]
    fn permutation_detects_monotone_series() {
        let rising: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let (stat, p) =
            permutation_serial_correlation(&rising, 10_000, PermutationMode::Full, 7).unwrap();
        assert!(stat > 0.8);
        assert!(p <= 0.01, "p = {p}");
    }

    #[test]
    fn observed_statistic_is_self_consistent() {
        let xs = [0.3, -1.2, 0.7, 2.0, -0.5, 0.1, 1.1, -0.9];
        let (stat, _) =
            permutation_serial_correlation(&xs, 200, PermutationMode::SplitHalves, 1).unwrap();
        assert_eq!(stat, lag1_autocorrelation(&xs));
    }

    #[test]
    fn lab_effect_mean_readoff() {
        let residuals = [0.0, 0.0, 14.0, 14.0];
        let labs: Vec<String> = ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        let eff = lab_effect(&residuals, &labs, 500, 3).unwrap();
        assert!((eff.spread - 14.0).abs() < 1e-12);
        assert_eq!(eff.offsets, vec![0.0, 14.0]);
        let zeros = [0.0; 6];
        let labs2: Vec<String> = ["a", "a", "b", "b", "c", "c"].iter().map(|s| s.to_string()).collect();
        let eff2 = lab_effect(&zeros, &labs2, 200, 3).unwrap();
        assert!(eff2.offsets.iter().all(|&o| o == 0.0));
    }

    #[test]
    fn lab_effect_needs_two_labs() {
        let labs: Vec<String> = vec!["a".into(); 4];
        assert!(lab_effect(&[1.0, 2.0, 3.0, 4.0], &labs, 200, 0).is_err());
    }
}
