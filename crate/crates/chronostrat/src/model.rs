//! Core data model and time conventions.
//!
//! All inference runs on a single signed calendar axis: the value increases
//! toward the present, BCE year `y` maps to `-y`, and 1950 CE is `1950`.
//! Laboratory BP ages are converted onto this axis at ingestion through an
//! affine calibration (see [`crate::calib::AffineCalibration`]), so order
//! constraints are always expressed the same way regardless of the unit the
//! data arrived in.

use serde::{Deserialize, Serialize};

use crate::calib::AffineCalibration;
use crate::error::{Error, Result, ValidationReport, Violation};

/// Signed-calendar-axis conventions and unit conversions.
///
/// Round trips are exact: these are sign flips and shifts, nothing else.
pub mod time {
    /// Calendar year on the internal axis for a BCE year (positive input).
    pub fn from_bce(year_bce: f64) -> f64 {
        -year_bce
    }

    /// BCE year for an internal calendar value (only meaningful when < 0).
    pub fn to_bce(cal_year: f64) -> f64 {
        -cal_year
    }

    /// Internal calendar year for a *calendar* age BP (years before 1950).
    ///
    /// This is the unit IntCal tables use for the calendar column. It is not
    /// the radiocarbon BP age, which needs a calibration model instead.
    pub fn from_cal_bp(cal_bp: f64) -> f64 {
        1950.0 - cal_bp
    }

    /// Calendar age BP for an internal calendar year.
    pub fn to_cal_bp(cal_year: f64) -> f64 {
        1950.0 - cal_year
    }
}

/// One laboratory measurement: a conventional radiocarbon age and its error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Determination {
    pub bp_age: f64,
    pub sigma_bp: f64,
    pub lab_id: String,
    pub note: Option<String>,
}

/// A dated find; one or more determinations of the same event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub determinations: Vec<Determination>,
}

/// An archaeological layer: samples sharing one time interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub name: String,
    pub samples: Vec<Sample>,
}

/// Samples grouped into consecutively ordered strata (oldest first), with
/// known epoch bounds `[t_start, t_end]` on the signed calendar axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedDataset {
    pub strata: Vec<Stratum>,
    pub t_start: f64,
    pub t_end: f64,
}

impl StratifiedDataset {
    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }

    pub fn n_samples(&self) -> usize {
        self.strata.iter().map(|s| s.samples.len()).sum()
    }

    pub fn n_determinations(&self) -> usize {
        self.strata
            .iter()
            .flat_map(|s| &s.samples)
            .map(|s| s.determinations.len())
            .sum()
    }

    /// Checks every dataset invariant and reports *all* violations at once.
    ///
    /// Idempotent: a dataset that validates once validates again unchanged.
    pub fn validate(&self) -> Result<&Self> {
        let mut report = ValidationReport::default();
        if self.strata.is_empty() {
            report.violations.push(Violation::NoStrata);
        }
        if !(self.t_start < self.t_end) {
            report.violations.push(Violation::BadWindow { t_start: self.t_start, t_end: self.t_end });
        }
        let mut seen = std::collections::HashSet::new();
        for stratum in &self.strata {
            if stratum.samples.is_empty() {
                report.violations.push(Violation::EmptyStratum { stratum: stratum.name.clone() });
            }
            for sample in &stratum.samples {
                if !seen.insert(sample.id.clone()) {
                    report.violations.push(Violation::DuplicateSampleId { sample_id: sample.id.clone() });
                }
                if sample.determinations.is_empty() {
                    report.violations.push(Violation::EmptySample { sample_id: sample.id.clone() });
                }
                for (i, det) in sample.determinations.iter().enumerate() {
                    if !(det.sigma_bp > 0.0) || !det.sigma_bp.is_finite() {
                        report.violations.push(Violation::NonPositiveSigma {
                            sample_id: sample.id.clone(),
                            index: i,
                            sigma: det.sigma_bp,
                        });
                    }
                    if !det.bp_age.is_finite() {
                        report
                            .violations
                            .push(Violation::NonFiniteAge { sample_id: sample.id.clone(), index: i });
                    }
                }
            }
        }
        if report.violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(report))
        }
    }

    /// Converts every determination onto the calendar axis through `cal`.
    ///
    /// Standard errors scale by |slope| of the calibration map.
    pub fn calibrate(&self, cal: &AffineCalibration) -> CalendarDataset {
        let strata = self
            .strata
            .iter()
            .map(|s| CalendarStratum {
                name: s.name.clone(),
                samples: s
                    .samples
                    .iter()
                    .map(|smp| CalendarSample {
                        id: smp.id.clone(),
                        obs: smp
                            .determinations
                            .iter()
                            .map(|d| (cal.calendar_from_bp(d.bp_age), cal.sigma_to_calendar(d.sigma_bp)))
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        CalendarDataset { strata, t_start: self.t_start, t_end: self.t_end }
    }
}

/// A stratum with observations already on the calendar axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarStratum {
    pub name: String,
    pub samples: Vec<CalendarSample>,
}

/// A sample with `(calendar year, sigma)` pairs, one per determination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarSample {
    pub id: String,
    pub obs: Vec<(f64, f64)>,
}

/// Calendar-space view of a [`StratifiedDataset`]; this is what the
/// estimators consume. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarDataset {
    pub strata: Vec<CalendarStratum>,
    pub t_start: f64,
    pub t_end: f64,
}

impl CalendarDataset {
    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }

    pub fn n_samples(&self) -> usize {
        self.strata.iter().map(|s| s.samples.len()).sum()
    }

    /// Range spanned by the observation values themselves.
    pub fn obs_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.strata {
            for smp in &s.samples {
                for &(y, _) in &smp.obs {
                    lo = lo.min(y);
                    hi = hi.max(y);
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Replaces the epoch window, e.g. after widening to cover the data.
    pub fn with_window(mut self, t_start: f64, t_end: f64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }
}

/// Monotone stratum transition times: `G - 1` interior boundaries plus the
/// fixed endpoints. Equal adjacent boundaries are allowed — zero-length
/// strata occur at posterior modes and must be representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVector {
    interior: Vec<f64>,
    t_start: f64,
    t_end: f64,
}

impl BoundaryVector {
    pub fn new(interior: Vec<f64>, t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_start <= t_end) {
            return Err(Error::InvalidArgument(format!(
                "t_start {t_start} must not exceed t_end {t_end}"
            )));
        }
        let mut prev = t_start;
        for &tau in &interior {
            if !(tau >= prev) {
                return Err(Error::InvalidArgument(format!(
                    "boundaries must be nondecreasing within [{t_start}, {t_end}], got {interior:?}"
                )));
            }
            prev = tau;
        }
        if !(prev <= t_end) {
            return Err(Error::InvalidArgument(format!(
                "boundary {prev} exceeds t_end {t_end}"
            )));
        }
        Ok(BoundaryVector { interior, t_start, t_end })
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of strata the boundaries partition the window into.
    pub fn n_strata(&self) -> usize {
        self.interior.len() + 1
    }

    /// `[start, end]` of stratum `g` (0-based, oldest first).
    pub fn stratum_interval(&self, g: usize) -> (f64, f64) {
        let lo = if g == 0 { self.t_start } else { self.interior[g - 1] };
        let hi = if g == self.interior.len() { self.t_end } else { self.interior[g] };
        (lo, hi)
    }

    /// Replaces one interior boundary, re-checking monotonicity.
    pub fn with_boundary(&self, index: usize, value: f64) -> Result<Self> {
        let mut interior = self.interior.clone();
        interior[index] = value;
        Self::new(interior, self.t_start, self.t_end)
    }
}

/// CSV record layout for determination files.
///
/// Header: `sample_id,stratum,bp,sigma,lab`; one row per determination.
/// Strata must appear in chronological order of first occurrence.
#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    sample_id: String,
    stratum: String,
    bp: f64,
    sigma: f64,
    lab: String,
}

/// Reads a determination CSV into strata grouped by order of first
/// occurrence. The epoch window is not part of the file; supply it when
/// constructing the [`StratifiedDataset`].
pub fn read_determinations<R: std::io::Read>(reader: R) -> Result<Vec<Stratum>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut strata: Vec<Stratum> = Vec::new();
    let mut stratum_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (i, rec) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = i + 2; // header is line 1
        let row = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let si = *stratum_index.entry(row.stratum.clone()).or_insert_with(|| {
            strata.push(Stratum { name: row.stratum.clone(), samples: Vec::new() });
            strata.len() - 1
        });
        let det = Determination {
            bp_age: row.bp,
            sigma_bp: row.sigma,
            lab_id: row.lab,
            note: None,
        };
        match strata[si].samples.iter_mut().find(|s| s.id == row.sample_id) {
            Some(sample) => sample.determinations.push(det),
            None => strata[si]
                .samples
                .push(Sample { id: row.sample_id, determinations: vec![det] }),
        }
    }
    Ok(strata)
}

/// Writes strata back out in the determination CSV layout.
pub fn write_determinations<W: std::io::Write>(strata: &[Stratum], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for stratum in strata {
        for sample in &stratum.samples {
            for det in &sample.determinations {
                wtr.serialize(CsvRow {
                    sample_id: sample.id.clone(),
                    stratum: stratum.name.clone(),
                    bp: det.bp_age,
                    sigma: det.sigma_bp,
                    lab: det.lab_id.clone(),
                })
                .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(bp: f64, sigma: f64) -> Determination {
        Determination { bp_age: bp, sigma_bp: sigma, lab_id: "lab".into(), note: None }
    }

    fn small_dataset() -> StratifiedDataset {
        StratifiedDataset {
            strata: vec![
                Stratum {
                    name: "I".into(),
                    samples: vec![Sample { id: "a".into(), determinations: vec![det(2900.0, 30.0)] }],
                },
                Stratum {
                    name: "II".into(),
                    samples: vec![Sample { id: "b".into(), determinations: vec![det(2800.0, 25.0)] }],
                },
            ],
            t_start: -1200.0,
            t_end: -800.0,
        }
    }

    #[test]
    fn time_axis_round_trips() {
        for y in [-3000.0, -1.5, 0.0, 1950.0] {
            assert_eq!(time::from_bce(time::to_bce(y)), y);
            assert_eq!(time::from_cal_bp(time::to_cal_bp(y)), y);
        }
        assert_eq!(time::from_bce(956.2), -956.2);
        assert_eq!(time::from_cal_bp(0.0), 1950.0);
    }

    #[test]
    fn validate_accepts_good_dataset_idempotently() {
        let ds = small_dataset();
        assert!(ds.validate().is_ok());
        assert!(ds.validate().is_ok());
    }

    #[test]
    fn validate_reports_every_violation() {
        let mut ds = small_dataset();
        ds.strata[0].samples[0].determinations[0].sigma_bp = 0.0;
        ds.strata.push(Stratum { name: "III".into(), samples: vec![] });
        ds.strata[1].samples.push(Sample { id: "a".into(), determinations: vec![det(2700.0, 20.0)] });
        ds.t_end = ds.t_start;
        let err = ds.validate().unwrap_err();
        let Error::Validation(report) = err else { panic!("expected validation error") };
        let text = report.to_string();
        assert!(text.contains("nonpositive standard error"), "{text}");
        assert!(text.contains("stratum III has no samples"), "{text}");
        assert!(text.contains("duplicate sample id a"), "{text}");
        assert!(text.contains("window start"), "{text}");
        assert_eq!(report.violations.len(), 4);
    }

    #[test]
    fn boundary_vector_enforces_monotonicity() {
        assert!(BoundaryVector::new(vec![-950.0, -920.0], -1000.0, -900.0).is_ok());
        // equal boundaries are fine (zero-length stratum)
        assert!(BoundaryVector::new(vec![-950.0, -950.0], -1000.0, -900.0).is_ok());
        assert!(BoundaryVector::new(vec![-920.0, -950.0], -1000.0, -900.0).is_err());
        assert!(BoundaryVector::new(vec![-1100.0], -1000.0, -900.0).is_err());
        let b = BoundaryVector::new(vec![-950.0], -1000.0, -900.0).unwrap();
        assert!(b.with_boundary(0, -890.0).is_err());
        assert_eq!(b.stratum_interval(0), (-1000.0, -950.0));
        assert_eq!(b.stratum_interval(1), (-950.0, -900.0));
    }

    #[test]
    fn csv_round_trip_preserves_grouping() {
        let csv_text = "sample_id,stratum,bp,sigma,lab\n\
                        R4,D,2890,30,RT\n\
                        R4,D,2870,50,RT\n\
                        R18,C2,2761,14,GR\n";
        let strata = read_determinations(csv_text.as_bytes()).unwrap();
        assert_eq!(strata.len(), 2);
        assert_eq!(strata[0].samples[0].determinations.len(), 2);
        let mut out = Vec::new();
        write_determinations(&strata, &mut out).unwrap();
        let again = read_determinations(out.as_slice()).unwrap();
        assert_eq!(strata, again);
    }

    #[test]
    fn csv_parse_error_carries_line_number() {
        let csv_text = "sample_id,stratum,bp,sigma,lab\nR4,D,notanumber,30,RT\n";
        let err = read_determinations(csv_text.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
