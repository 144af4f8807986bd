use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ModelKind, Seeds};
use crate::autoencoder::{extract_features, train, AutoencoderModel, LossRecord};
use crate::cohort::{
    compute_norm_stats, normalize, split_cohort, truncate_visits, Horizon, NormStats, SubjectTrajectory,
    MEASURE_NAMES, NUM_MEASURES,
};
use crate::rng::derive_seed;
use crate::survival::{
    bootstrap_cindex_diff, concordance_index, fit_cox, BootstrapComparison, CovariateSpec, CoxModel, FitOptions,
    SurvivalRecord,
};
use crate::{Error, Result};

/// Train/test split with measures z-scored by training statistics.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub train: Vec<SubjectTrajectory>,
    pub test: Vec<SubjectTrajectory>,
    pub stats: NormStats,
}

pub fn prepare(cohort: &[SubjectTrajectory], cfg: &ExperimentConfig) -> Result<PreparedCohort> {
    let (train, test) =
        split_cohort(cohort, cfg.train_fraction, cfg.seeds().split).map_err(|e| e.in_stage("split"))?;
    let stats = compute_norm_stats(&train).map_err(|e| e.in_stage("normalize"))?;
    Ok(PreparedCohort {
        train: normalize(&train, &stats),
        test: normalize(&test, &stats),
        stats,
    })
}

/// Autoencoder training sequences: every training subject's trajectory
/// truncated at each horizon, with repeated sequences kept once.
pub fn autoencoder_corpus(train: &[SubjectTrajectory], horizons: &[Horizon]) -> Vec<Vec<DVector<f64>>> {
    let mut corpus = Vec::new();
    for s in train {
        let mut seen: Vec<Vec<u32>> = Vec::new();
        for &h in horizons {
            let t = truncate_visits(s, h);
            let months = t.visit_months();
            if !t.visits.is_empty() && !seen.contains(&months) {
                corpus.push(t.sequence());
                seen.push(months);
            }
        }
    }
    corpus
}

pub fn train_autoencoder(
    prepared: &PreparedCohort,
    cfg: &ExperimentConfig,
    hidden_dim: usize,
) -> Result<(AutoencoderModel, Vec<LossRecord>)> {
    let stage = |e: Error| e.in_stage("autoencoder");
    let corpus = autoencoder_corpus(&prepared.train, &cfg.horizon_list()?);
    let init = AutoencoderModel::init(NUM_MEASURES, hidden_dim, cfg.seeds().init)
        .map_err(stage)?
        .with_conditioning(cfg.conditioning()?);
    train(&init, &corpus, &cfg.train_config()).map_err(stage)
}

/// One subject's unscaled covariate row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub subject_id: String,
    pub time_months: f64,
    pub event: bool,
    pub raw: Vec<f64>,
}

/// Covariates of one (model, horizon) pair for both splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub kind: ModelKind,
    pub horizon: Horizon,
    pub names: Vec<String>,
    pub standardize: Vec<bool>,
    pub train: Vec<DesignRow>,
    pub test: Vec<DesignRow>,
}

fn design_rows(
    kind: ModelKind,
    horizon: Horizon,
    subjects: &[SubjectTrajectory],
    autoencoder: Option<&AutoencoderModel>,
) -> Result<Vec<DesignRow>> {
    let latent = match (kind.uses_latent(), autoencoder) {
        (true, Some(ae)) => {
            let set = extract_features(ae, subjects, horizon)?;
            if let Some((id, why)) = set.excluded.first() {
                return Err(Error::Data(format!("subject {id}: {why}")));
            }
            Some(set.features)
        }
        (true, None) => return Err(Error::InvalidArgument(format!("{kind} needs an autoencoder"))),
        _ => None,
    };
    subjects
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut raw = Vec::new();
            match kind {
                ModelKind::BaselineCognitive | ModelKind::BaselineCognitiveImaging => {
                    let v = s
                        .visit(0)
                        .ok_or_else(|| Error::Data(format!("subject {}: no baseline visit", s.subject_id)))?;
                    raw.extend(v.measures);
                }
                ModelKind::SingleVisit => {
                    let t = truncate_visits(s, horizon);
                    let v = t.visits.last().ok_or_else(|| {
                        Error::Data(format!("subject {}: no visit usable at {horizon}", s.subject_id))
                    })?;
                    raw.extend(v.measures);
                }
                ModelKind::Longitudinal | ModelKind::LongitudinalImaging => {
                    raw.extend(latent.as_ref().expect("latent features computed")[i].z.iter());
                }
            }
            let b = &s.baseline;
            raw.extend([b.age, f64::from(b.sex), b.education_years, f64::from(b.apoe4_count)]);
            if kind.uses_imaging() {
                raw.push(b.imaging_risk);
            }
            Ok(DesignRow {
                subject_id: s.subject_id.clone(),
                time_months: s.outcome.time_months,
                event: s.outcome.event,
                raw,
            })
        })
        .collect()
}

/// Builds the covariates of `kind` at `horizon`. Cognitive measures arrive
/// z-scored already; latent features and continuous demographics are
/// standardized on the training rows when the model is fitted.
pub fn build_design(
    kind: ModelKind,
    horizon: Horizon,
    prepared: &PreparedCohort,
    autoencoder: Option<&AutoencoderModel>,
) -> Result<Design> {
    let (mut names, mut standardize): (Vec<String>, Vec<bool>) = if kind.uses_latent() {
        let k = autoencoder.map_or(0, AutoencoderModel::hidden_dim);
        ((1..=k).map(|j| format!("z{j}")).collect(), vec![true; k])
    } else {
        (MEASURE_NAMES.iter().map(|m| m.to_string()).collect(), vec![false; NUM_MEASURES])
    };
    for (name, flag) in [("age", true), ("sex", false), ("education_years", true), ("apoe4_count", false)] {
        names.push(name.into());
        standardize.push(flag);
    }
    if kind.uses_imaging() {
        names.push("imaging_risk".into());
        standardize.push(true);
    }
    Ok(Design {
        kind,
        horizon,
        names,
        standardize,
        train: design_rows(kind, horizon, &prepared.train, autoencoder)?,
        test: design_rows(kind, horizon, &prepared.test, autoencoder)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub design: Design,
    pub cox: CoxModel,
    pub test_risk: Vec<f64>,
    pub c_index: f64,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        self.design.kind
    }

    pub fn horizon(&self) -> Horizon {
        self.design.horizon
    }

    pub fn n_events(&self) -> usize {
        self.design.test.iter().filter(|r| r.event).count()
    }

    pub fn test_times(&self) -> (Vec<f64>, Vec<bool>) {
        self.design.test.iter().map(|r| (r.time_months, r.event)).unzip()
    }
}

/// Fits Cox on the training rows and scores the test rows.
pub fn fit_design(design: Design) -> Result<FittedModel> {
    let stage = |e: Error| e.in_stage("cox");
    let raw: Vec<Vec<f64>> = design.train.iter().map(|r| r.raw.clone()).collect();
    let spec = CovariateSpec::fit(design.names.clone(), &design.standardize, &raw).map_err(stage)?;
    let records = design
        .train
        .iter()
        .map(|r| {
            Ok(SurvivalRecord {
                subject_id: r.subject_id.clone(),
                time_months: r.time_months,
                event: r.event,
                x: spec.apply(&r.raw)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(stage)?;
    let cox = fit_cox(&records, spec, FitOptions::default()).map_err(stage)?;
    let test_risk = design
        .test
        .iter()
        .map(|r| cox.risk_score_raw(&r.raw))
        .collect::<Result<Vec<_>>>()
        .map_err(stage)?;
    let (times, events): (Vec<f64>, Vec<bool>) = design.test.iter().map(|r| (r.time_months, r.event)).unzip();
    let c_index = concordance_index(&test_risk, &times, &events).map_err(|e| e.in_stage("evaluate"))?;
    Ok(FittedModel {
        design,
        cox,
        test_risk,
        c_index,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub horizon: Horizon,
    pub model_a: ModelKind,
    pub model_b: ModelKind,
    pub result: BootstrapComparison,
}

/// Everything a run produces, before anything is written.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub seeds: Seeds,
    pub prepared: PreparedCohort,
    pub autoencoder: AutoencoderModel,
    pub history: Vec<LossRecord>,
    /// Reported models first, then comparators, each in horizon order.
    pub fitted: Vec<FittedModel>,
    pub comparisons: Vec<Comparison>,
}

impl RunArtifacts {
    pub fn model(&self, kind: ModelKind, horizon: Horizon) -> Option<&FittedModel> {
        self.fitted.iter().find(|m| m.kind() == kind && m.horizon() == horizon)
    }

    pub fn c_index(&self, kind: ModelKind, horizon: Horizon) -> Option<f64> {
        self.model(kind, horizon).map(|m| m.c_index)
    }
}

const COMPARISONS: [(ModelKind, ModelKind); 2] = [
    (ModelKind::Longitudinal, ModelKind::BaselineCognitive),
    (ModelKind::LongitudinalImaging, ModelKind::BaselineCognitiveImaging),
];

/// Fits the configured model family on the train split of `cohort` and
/// evaluates it on the test split.
pub fn run_experiment(cohort: &[SubjectTrajectory], cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let horizons = cfg.horizon_list()?;
    let prepared = prepare(cohort, cfg)?;
    let (autoencoder, history) = train_autoencoder(&prepared, cfg, cfg.hidden_dim)?;

    let mut kinds: Vec<ModelKind> = ModelKind::REPORTED.into_iter().filter(|k| cfg.models.contains(k)).collect();
    for (a, b) in COMPARISONS {
        if kinds.contains(&a) && !kinds.contains(&b) {
            kinds.push(b);
        }
    }
    let jobs: Vec<(ModelKind, Horizon)> = kinds.iter().flat_map(|&k| horizons.iter().map(move |&h| (k, h))).collect();
    let fitted = jobs
        .par_iter()
        .map(|&(kind, h)| {
            let design = build_design(kind, h, &prepared, Some(&autoencoder)).map_err(|e| e.in_stage("features"))?;
            fit_design(design)
        })
        .collect::<Result<Vec<_>>>()?;

    let seeds = cfg.seeds();
    let mut comparisons = Vec::new();
    for &h in &horizons {
        for (a, b) in COMPARISONS {
            let (Some(ma), Some(mb)) = (
                fitted.iter().find(|m| m.kind() == a && m.horizon() == h),
                fitted.iter().find(|m| m.kind() == b && m.horizon() == h),
            ) else {
                continue;
            };
            let (times, events) = ma.test_times();
            let seed = derive_seed(seeds.bootstrap, &format!("{a}-{b}-{h}"));
            let result = bootstrap_cindex_diff(&ma.test_risk, &mb.test_risk, &times, &events, cfg.n_boot, seed)
                .map_err(|e| e.in_stage("bootstrap"))?;
            comparisons.push(Comparison {
                horizon: h,
                model_a: a,
                model_b: b,
                result,
            });
        }
    }

    Ok(RunArtifacts {
        seeds,
        prepared,
        autoencoder,
        history,
        fitted,
        comparisons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub hidden_dim: usize,
    pub horizon: Horizon,
    pub c_index: f64,
}

/// Retrains the autoencoder at each swept latent size and evaluates the
/// longitudinal-plus-imaging model.
pub fn run_sweep(cohort: &[SubjectTrajectory], cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let horizons = cfg.horizon_list()?;
    let prepared = prepare(cohort, cfg)?;
    let mut dims = cfg.sweep.clone();
    dims.sort_unstable();
    dims.dedup();
    let per_dim = dims
        .par_iter()
        .map(|&dim| {
            let (ae, _) = train_autoencoder(&prepared, cfg, dim)?;
            horizons
                .iter()
                .map(|&h| {
                    let design = build_design(ModelKind::LongitudinalImaging, h, &prepared, Some(&ae))
                        .map_err(|e| e.in_stage("features"))?;
                    Ok(SweepRow {
                        hidden_dim: dim,
                        horizon: h,
                        c_index: fit_design(design)?.c_index,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_dim.into_iter().flatten().collect())
}
