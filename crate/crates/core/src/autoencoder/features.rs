use nalgebra::DVector;

use super::AutoencoderModel;
use crate::cohort::{truncate_visits, Horizon, SubjectTrajectory};
use crate::Result;

/// Latent encoding of one subject's horizon-truncated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeatures {
    pub subject_id: String,
    pub horizon: Horizon,
    pub z: DVector<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct FeatureSet {
    pub features: Vec<LatentFeatures>,
    /// `(subject_id, reason)` for every subject that produced no features.
    pub excluded: Vec<(String, String)>,
}

/// Encodes every subject's visits up to `horizon` (after the truncation
/// rule). Expects measures already normalized with training statistics.
pub fn extract_features(model: &AutoencoderModel, cohort: &[SubjectTrajectory], horizon: Horizon) -> Result<FeatureSet> {
    let mut out = FeatureSet::default();
    for subject in cohort {
        let truncated = truncate_visits(subject, horizon);
        if truncated.visits.is_empty() {
            out.excluded
                .push((subject.subject_id.clone(), format!("no usable visits for the {horizon} horizon")));
            continue;
        }
        out.features.push(LatentFeatures {
            subject_id: subject.subject_id.clone(),
            horizon,
            z: model.encode(&truncated.sequence())?,
        });
    }
    Ok(out)
}
