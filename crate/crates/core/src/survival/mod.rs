//! Cox proportional-hazards regression and concordance-based evaluation.

mod bootstrap;
mod concordance;
mod cox;

pub use bootstrap::{bootstrap_cindex_diff, BootstrapComparison};
pub use concordance::{concordance_counts, concordance_index, ConcordanceCounts};
pub use cox::{cox_grad_hess, cox_nll, fit_cox, read_cox_model, write_cox_model, CoxModel, FitOptions};

use crate::{Error, Result};

/// One subject's `(time, event, covariates)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub subject_id: String,
    pub time_months: f64,
    /// `true` for an observed conversion, `false` when censored.
    pub event: bool,
    pub x: Vec<f64>,
}

pub(crate) fn validate_records(records: &[SurvivalRecord], dim: Option<usize>) -> Result<usize> {
    let p = dim.or_else(|| records.first().map(|r| r.x.len())).unwrap_or(0);
    for r in records {
        if r.x.len() != p {
            return Err(Error::DimensionMismatch {
                context: "survival covariates",
                expected: p,
                actual: r.x.len(),
            });
        }
        if !(r.time_months > 0.0 && r.time_months.is_finite()) {
            return Err(Error::Data(format!("{}: time must be positive, got {}", r.subject_id, r.time_months)));
        }
        if r.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("covariates of {}", r.subject_id)));
        }
    }
    if !records.iter().any(|r| r.event) {
        return Err(Error::NoEvents);
    }
    Ok(p)
}

/// How one covariate is transformed before fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Used as is (binary indicators, allele counts).
    Identity,
    /// `(x - center) / scale`
    Standardize { center: f64, scale: f64 },
}

impl Scaling {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Scaling::Identity => v,
            Scaling::Standardize { center, scale } => (v - center) / scale,
        }
    }
}

/// Ordered covariate names with per-covariate scaling estimated on the
/// training split.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSpec {
    pub names: Vec<String>,
    pub scaling: Vec<Scaling>,
}

impl CovariateSpec {
    /// Estimates scaling from training rows. Columns flagged in `standardize`
    /// are z-scored with the population standard deviation.
    pub fn fit(names: Vec<String>, standardize: &[bool], train_rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if standardize.len() != p {
            return Err(Error::DimensionMismatch {
                context: "covariate spec flags",
                expected: p,
                actual: standardize.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate covariate name `{dup}`")));
        }
        if train_rows.is_empty() {
            return Err(Error::InvalidArgument("no training rows for covariate scaling".into()));
        }
        let n = train_rows.len() as f64;
        let mut scaling = Vec::with_capacity(p);
        for j in 0..p {
            if !standardize[j] {
                scaling.push(Scaling::Identity);
                continue;
            }
            let col = || train_rows.iter().map(|r| r[j]);
            let mean = col().sum::<f64>() / n;
            let sd = (col().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if !(sd > 0.0) {
                return Err(Error::ConstantCovariate(names[j].clone()));
            }
            scaling.push(Scaling::Standardize { center: mean, scale: sd });
        }
        Ok(Self { names, scaling })
    }

    /// Names with no scaling at all.
    pub fn identity(names: Vec<String>) -> Self {
        let scaling = vec![Scaling::Identity; names.len()];
        Self { names, scaling }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "covariate row",
                expected: self.len(),
                actual: raw.len(),
            });
        }
        Ok(raw.iter().zip(&self.scaling).map(|(&v, s)| s.apply(v)).collect())
    }
}
