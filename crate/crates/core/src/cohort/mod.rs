//! Longitudinal cohort data: visit records, baseline covariates, outcomes,
//! CSV ingestion, preprocessing and a synthetic generator.

mod csv_io;
mod generate;
mod prep;

pub use csv_io::{
    load_cohort, load_cohort_strict, read_cohort, save_cohort, write_outcomes, write_visits, Diagnostic,
    LoadedCohort, OUTCOME_COLUMNS, VISIT_COLUMNS,
};
pub use generate::{
    generate_cohort, generate_cohort_with_truth, summarize, GenConfig, GroupSummary, HazardCoefs, LatentTruth,
    SyntheticCohort,
};
pub use prep::{compute_norm_stats, normalize, split_cohort, truncate_visits, NormStats};

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::{Error, Result};

pub const NUM_MEASURES: usize = 5;

/// Measure order used everywhere a measure vector appears.
pub const MEASURE_NAMES: [&str; NUM_MEASURES] = ["adas13", "ravlt_immediate", "ravlt_learning", "faq", "mmse"];

/// Plausibility bounds enforced on ingestion, in `MEASURE_NAMES` order.
pub const MEASURE_BOUNDS: [(f64, f64); NUM_MEASURES] = [(0.0, 85.0), (0.0, 75.0), (-10.0, 15.0), (0.0, 30.0), (0.0, 30.0)];

pub const VISIT_MONTHS: [u32; 3] = [0, 6, 12];

/// Follow-up window used to build a prognostic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Horizon {
    Six,
    Twelve,
}

impl Horizon {
    pub const ALL: [Horizon; 2] = [Horizon::Six, Horizon::Twelve];

    pub fn months(self) -> u32 {
        match self {
            Horizon::Six => 6,
            Horizon::Twelve => 12,
        }
    }
}

impl TryFrom<u32> for Horizon {
    type Error = Error;

    fn try_from(months: u32) -> Result<Self> {
        match months {
            6 => Ok(Horizon::Six),
            12 => Ok(Horizon::Twelve),
            other => Err(Error::InvalidArgument(format!("horizon must be 6 or 12 months, got {other}"))),
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}m", self.months())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitRecord {
    pub visit_month: u32,
    /// Ordered as [`MEASURE_NAMES`].
    pub measures: [f64; NUM_MEASURES],
}

impl VisitRecord {
    pub fn check_bounds(&self) -> std::result::Result<(), String> {
        for (k, (&v, &(lo, hi))) in self.measures.iter().zip(&MEASURE_BOUNDS).enumerate() {
            if !v.is_finite() || v < lo || v > hi {
                return Err(format!("{} = {v} outside [{lo}, {hi}]", MEASURE_NAMES[k]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub age: f64,
    /// 0/1
    pub sex: u8,
    pub education_years: f64,
    /// APOE e4 allele count, 0..=2.
    pub apoe4_count: u8,
    /// Externally supplied imaging-based risk score.
    pub imaging_risk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    /// Conversion time if `event`, otherwise last follow-up.
    pub time_months: f64,
    pub event: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohortTag {
    Train,
    Test,
}

impl fmt::Display for CohortTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CohortTag::Train => "train",
            CohortTag::Test => "test",
        })
    }
}

impl FromStr for CohortTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(CohortTag::Train),
            "test" => Ok(CohortTag::Test),
            other => Err(Error::Data(format!("cohort_tag must be `train` or `test`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTrajectory {
    pub subject_id: String,
    /// Strictly increasing visit months; the baseline visit comes first.
    pub visits: Vec<VisitRecord>,
    pub baseline: Baseline,
    pub outcome: Outcome,
    pub cohort_tag: Option<CohortTag>,
}

impl SubjectTrajectory {
    /// Measure vectors in visit order, the autoencoder's input.
    pub fn sequence(&self) -> Vec<DVector<f64>> {
        self.visits.iter().map(|v| DVector::from_row_slice(&v.measures)).collect()
    }

    pub fn visit_months(&self) -> Vec<u32> {
        self.visits.iter().map(|v| v.visit_month).collect()
    }

    pub fn visit(&self, month: u32) -> Option<&VisitRecord> {
        self.visits.iter().find(|v| v.visit_month == month)
    }

    /// Structural and plausibility checks on raw (unnormalized) data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Data(format!("subject {}: {msg}", self.subject_id)));
        match self.visits.first() {
            Some(v) if v.visit_month == 0 => {}
            _ => return fail("baseline visit missing".into()),
        }
        if self.visits.len() > VISIT_MONTHS.len() {
            return fail(format!("{} visits exceeds {}", self.visits.len(), VISIT_MONTHS.len()));
        }
        for pair in self.visits.windows(2) {
            if pair[1].visit_month <= pair[0].visit_month {
                return fail("visit months not strictly increasing".into());
            }
        }
        for v in &self.visits {
            if !VISIT_MONTHS.contains(&v.visit_month) {
                return fail(format!("visit month {} not in {:?}", v.visit_month, VISIT_MONTHS));
            }
            if let Err(msg) = v.check_bounds() {
                return fail(format!("month {}: {msg}", v.visit_month));
            }
        }
        if !(self.outcome.time_months > 0.0 && self.outcome.time_months.is_finite()) {
            return fail(format!("time_months must be positive, got {}", self.outcome.time_months));
        }
        let b = &self.baseline;
        if b.sex > 1 || b.apoe4_count > 2 {
            return fail("sex must be 0/1 and apoe4_count 0..=2".into());
        }
        if ![b.age, b.education_years, b.imaging_risk].iter().all(|v| v.is_finite()) {
            return fail("non-finite baseline covariate".into());
        }
        Ok(())
    }
}
