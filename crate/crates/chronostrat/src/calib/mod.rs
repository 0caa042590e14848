//! Calibration-curve toolkit: radiocarbon age/concentration formulas,
//! kernel smoothing of calibration data, affine window fits with permutation
//! diagnostics, and the Wiener-prior Gaussian calibration posterior.

mod affine;
mod wiener;

pub use affine::{
    fit_affine, lab_effect, permutation_serial_correlation, AffineCalibration, LabEffect,
    PermutationMode,
};
pub use wiener::{
    bayes_calibrate, estimate_sigma2, mle_calibrate, wiener_posterior, BracketStatus,
    CalibrationDensity, CredibleSet, GaussianCurvePosterior, Sigma2Estimate, WienerPriorModel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::time;

/// Libby mean life of radiocarbon, the constant inside the BP definition.
pub const LIBBY_MEAN_LIFE: f64 = 8033.0;
/// Cambridge mean life, governing the physical decay in the concentration
/// formula.
pub const CAMBRIDGE_MEAN_LIFE: f64 = 8267.0;

/// One calibration-curve data point (tree-ring dated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibPoint {
    /// Calendar year on the signed axis.
    pub cal_year: f64,
    /// Measured radiocarbon age, years BP.
    pub bp_age: f64,
    /// Reported standard error of `bp_age`, years.
    pub sigma: f64,
    pub source_lab: String,
}

/// Conventional radiocarbon age from a fraction-modern value:
/// `BP = -8033 ln f`. Fractions above 1 give negative ages.
pub fn bp_from_fraction(f: f64) -> Result<f64> {
    if f <= 0.0 {
        return Err(Error::InvalidArgument(format!("fraction must be positive, got {f}")));
    }
    Ok(-LIBBY_MEAN_LIFE * f.ln())
}

/// Atmospheric concentration ratio `C(y)/C0` implied by a BP age measured
/// on material that grew in calendar year `y`:
/// `exp((y - 1950)/8267 - BP/8033)`.
pub fn concentration_ratio(cal_year: f64, bp: f64) -> f64 {
    ((cal_year - 1950.0) / CAMBRIDGE_MEAN_LIFE - bp / LIBBY_MEAN_LIFE).exp()
}

/// Nadaraya–Watson estimate with a Gaussian kernel of the given bandwidth,
/// evaluated at each grid year.
pub fn kernel_smooth(points: &[CalibPoint], bandwidth: f64, eval_grid: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("kernel smoother needs at least one point".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let two_bw2 = 2.0 * bandwidth * bandwidth;
    Ok(eval_grid
        .iter()
        .map(|&y| {
            let mut wsum = 0.0;
            let mut vsum = 0.0;
            for p in points {
                let d = y - p.cal_year;
                let w = (-d * d / two_bw2).exp();
                wsum += w;
                vsum += w * p.bp_age;
            }
            vsum / wsum
        })
        .collect())
}

/// Parses the IntCal raw-data layout: delimited text with columns
/// `cal_age_BP, c14_age_BP, sigma, dataset_id`; `#` starts a comment line.
/// Calendar ages convert to the signed axis via `year = 1950 - cal_BP`.
/// Returns the points and the number of comment lines skipped.
pub fn read_intcal<R: std::io::BufRead>(reader: R) -> Result<(Vec<CalibPoint>, usize)> {
    let mut points = Vec::new();
    let mut comments = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            comments += 1;
            continue;
        }
        let fields: Vec<&str> = trimmed
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() < 4 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 4 columns, got {}", fields.len()),
            });
        }
        let num = |j: usize| -> Result<f64> {
            fields[j].parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad number {:?} in column {}", fields[j], j + 1),
            })
        };
        points.push(CalibPoint {
            cal_year: time::from_cal_bp(num(0)?),
            bp_age: num(1)?,
            sigma: num(2)?,
            source_lab: fields[3].to_string(),
        });
    }
    Ok((points, comments))
}
