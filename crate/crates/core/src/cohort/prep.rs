use rand::seq::SliceRandom;

use super::{Horizon, SubjectTrajectory, MEASURE_NAMES, NUM_MEASURES};
use crate::rng::rng_from;
use crate::{Error, Result};

/// Visits usable for a horizon model: months up to the horizon, and for
/// converters only months strictly before the conversion time. Absent visits
/// are simply not in the list. The baseline visit always survives because
/// conversion times are positive.
pub fn truncate_visits(subject: &SubjectTrajectory, horizon: Horizon) -> SubjectTrajectory {
    let limit = horizon.months();
    let mut out = subject.clone();
    out.visits.retain(|v| {
        v.visit_month <= limit && !(subject.outcome.event && f64::from(v.visit_month) >= subject.outcome.time_months)
    });
    out
}

/// Per-measure mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: [f64; NUM_MEASURES],
    pub sd: [f64; NUM_MEASURES],
}

impl NormStats {
    pub fn apply(&self, measures: &[f64; NUM_MEASURES]) -> [f64; NUM_MEASURES] {
        std::array::from_fn(|k| (measures[k] - self.mean[k]) / self.sd[k])
    }
}

/// Statistics over every visit of the given (training) subjects.
pub fn compute_norm_stats(train: &[SubjectTrajectory]) -> Result<NormStats> {
    if train.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "normalization needs at least 2 training subjects, got {}",
            train.len()
        )));
    }
    let visits = || train.iter().flat_map(|s| s.visits.iter());
    let n = visits().count() as f64;
    let mut mean = [0.0; NUM_MEASURES];
    for v in visits() {
        for k in 0..NUM_MEASURES {
            mean[k] += v.measures[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; NUM_MEASURES];
    for v in visits() {
        for k in 0..NUM_MEASURES {
            var[k] += (v.measures[k] - mean[k]).powi(2);
        }
    }
    let mut sd = [0.0; NUM_MEASURES];
    for k in 0..NUM_MEASURES {
        sd[k] = (var[k] / n).sqrt();
        if !(sd[k] > 1e-12 * mean[k].abs().max(1.0)) {
            return Err(Error::ZeroVariance(MEASURE_NAMES[k]));
        }
    }
    Ok(NormStats { mean, sd })
}

pub fn normalize(cohort: &[SubjectTrajectory], stats: &NormStats) -> Vec<SubjectTrajectory> {
    cohort
        .iter()
        .map(|s| {
            let mut s = s.clone();
            for v in &mut s.visits {
                v.measures = stats.apply(&v.measures);
            }
            s
        })
        .collect()
}

/// Splits a cohort into `(train, test)`.
///
/// If subjects carry cohort tags those are honored verbatim. Otherwise
/// events and non-events are shuffled separately and each contributes its
/// share to the training split, preserving the event fraction. Subjects keep
/// their input order within each split.
pub fn split_cohort(
    cohort: &[SubjectTrajectory],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<SubjectTrajectory>, Vec<SubjectTrajectory>)> {
    let tagged = cohort.iter().filter(|s| s.cohort_tag.is_some()).count();
    let mut in_train = vec![false; cohort.len()];
    if tagged > 0 {
        if tagged != cohort.len() {
            return Err(Error::Data(format!(
                "{tagged} of {} subjects carry a cohort_tag; tag all or none",
                cohort.len()
            )));
        }
        for (flag, s) in in_train.iter_mut().zip(cohort) {
            *flag = s.cohort_tag == Some(super::CohortTag::Train);
        }
    } else {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let mut rng = rng_from(seed);
        let n_train = (train_fraction * cohort.len() as f64).round() as usize;
        let (mut events, mut others): (Vec<usize>, Vec<usize>) =
            (0..cohort.len()).partition(|&i| cohort[i].outcome.event);
        events.shuffle(&mut rng);
        others.shuffle(&mut rng);
        let ev_train = ((train_fraction * events.len() as f64).round() as usize).min(n_train);
        let other_train = (n_train - ev_train).min(others.len());
        for &i in events[..ev_train].iter().chain(&others[..other_train]) {
            in_train[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, &flag) in cohort.iter().zip(&in_train) {
        if flag {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    for (name, part) in [("train", &train), ("test", &test)] {
        let events = part.iter().filter(|s| s.outcome.event).count();
        if events < 2 {
            return Err(Error::Data(format!("{name} split has {events} events; need at least 2")));
        }
    }
    Ok((train, test))
}
