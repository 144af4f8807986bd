//! Synthetic MCI cohort with a known proportional-hazards structure.
//!
//! Each subject has a latent severity `s(t) = s0 + slope * t / 12 + noise`.
//! Cognitive measures are affine in severity (ADAS-Cog13 and FAQ rise,
//! RAVLT and MMSE fall) plus measurement noise. Conversion follows a Weibull
//! proportional-hazards model in `(s0, slope, apoe4_count, imaging factor)`;
//! the observable imaging risk is the imaging factor's log-hazard
//! contribution plus Gaussian noise. Recorded times live on a 6-month grid.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};

use super::{Baseline, Outcome, SubjectTrajectory, VisitRecord, MEASURE_BOUNDS, NUM_MEASURES, VISIT_MONTHS};
use crate::rng::rng_from;
use crate::{Error, Result};

/// Log-hazard coefficients of the generative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardCoefs {
    pub severity: f64,
    pub slope: f64,
    pub apoe4: f64,
    pub imaging: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_subjects: usize,
    /// Target fraction of converters; the Weibull scale is calibrated to it.
    pub event_fraction: f64,
    pub event_fraction_tol: f64,
    pub weibull_shape: f64,
    pub censor_mean_months: f64,
    pub censor_sd_months: f64,
    pub max_follow_up_months: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub male_fraction: f64,
    pub education_mean: f64,
    pub education_sd: f64,
    /// P(apoe4_count = 0, 1, 2)
    pub apoe4_probs: [f64; 3],
    pub slope_mean: f64,
    pub slope_sd: f64,
    /// Per-visit deviation of severity from its linear trend.
    pub state_noise_sd: f64,
    /// Measure value at zero severity, in measure order.
    pub measure_means: [f64; NUM_MEASURES],
    /// Change per unit severity.
    pub measure_loadings: [f64; NUM_MEASURES],
    pub measure_noise_sd: [f64; NUM_MEASURES],
    pub imaging_noise_sd: f64,
    pub missing_visit_prob: f64,
    pub hazard: HazardCoefs,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_subjects: 822,
            event_fraction: 315.0 / 822.0,
            event_fraction_tol: 0.02,
            weibull_shape: 1.6,
            censor_mean_months: 48.0,
            censor_sd_months: 30.0,
            max_follow_up_months: 120.0,
            age_mean: 73.6,
            age_sd: 7.3,
            male_fraction: 0.59,
            education_mean: 15.9,
            education_sd: 2.9,
            apoe4_probs: [0.47, 0.41, 0.12],
            slope_mean: 0.3,
            slope_sd: 0.8,
            state_noise_sd: 0.05,
            measure_means: [17.5, 32.0, 3.9, 3.5, 27.4],
            measure_loadings: [5.5, -7.5, -2.0, 3.5, -1.7],
            measure_noise_sd: [0.8, 1.1, 0.3, 0.5, 0.25],
            imaging_noise_sd: 0.35,
            missing_visit_prob: 0.1,
            hazard: HazardCoefs {
                severity: 0.5,
                slope: 1.5,
                apoe4: 0.3,
                imaging: 0.7,
            },
            seed: 1,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_subjects < 10 {
            return bad(format!("n_subjects must be at least 10, got {}", self.n_subjects));
        }
        for (name, p) in [
            ("event_fraction", self.event_fraction),
            ("male_fraction", self.male_fraction),
            ("missing_visit_prob", self.missing_visit_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.apoe4_probs.iter().any(|p| !(0.0..=1.0).contains(p))
            || (self.apoe4_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("apoe4_probs must be a probability vector".into());
        }
        let positives = [
            ("weibull_shape", self.weibull_shape),
            ("censor_mean_months", self.censor_mean_months),
            ("censor_sd_months", self.censor_sd_months),
            ("max_follow_up_months", self.max_follow_up_months),
            ("age_sd", self.age_sd),
            ("education_sd", self.education_sd),
            ("slope_sd", self.slope_sd),
            ("state_noise_sd", self.state_noise_sd),
            ("imaging_noise_sd", self.imaging_noise_sd),
            ("event_fraction_tol", self.event_fraction_tol),
        ];
        for (name, v) in positives.into_iter().chain(self.measure_noise_sd.iter().map(|&v| ("measure_noise_sd", v))) {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_follow_up_months < 12.0 {
            return bad("max_follow_up_months must cover the 12-month visit".into());
        }
        Ok(())
    }
}

/// Generative quantities hidden from the observed data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentTruth {
    pub severity: f64,
    pub slope: f64,
    pub imaging_factor: f64,
    pub apoe4_count: u8,
    pub linear_predictor: f64,
    /// Continuous conversion time before grid rounding.
    pub conversion_months: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub subjects: Vec<SubjectTrajectory>,
    pub truth: Vec<LatentTruth>,
    /// Calibrated Weibull scale in months.
    pub weibull_scale: f64,
}

struct Draw {
    baseline: Baseline,
    severity: f64,
    slope: f64,
    imaging_factor: f64,
    linear_predictor: f64,
    /// `-ln U` for the Weibull inversion.
    exp_draw: f64,
    censor: f64,
    visit_noise: [[f64; NUM_MEASURES]; 3],
    state_noise: [f64; 3],
    visit_missing: [bool; 3],
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

fn draw_subject<R: Rng>(cfg: &GenConfig, rng: &mut R) -> Draw {
    let std = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
    let age = round_to((cfg.age_mean + cfg.age_sd * std(rng)).clamp(55.0, 91.0), 1);
    let sex = u8::from(rng.random::<f64>() < cfg.male_fraction);
    let education_years = (cfg.education_mean + cfg.education_sd * std(rng)).round().clamp(6.0, 20.0);
    let u: f64 = rng.random();
    let apoe4_count = if u < cfg.apoe4_probs[0] {
        0
    } else if u < cfg.apoe4_probs[0] + cfg.apoe4_probs[1] {
        1
    } else {
        2
    };
    let severity = std(rng);
    let slope = cfg.slope_mean + cfg.slope_sd * std(rng);
    let imaging_factor = std(rng);
    let imaging_risk = round_to(cfg.hazard.imaging * imaging_factor + cfg.imaging_noise_sd * std(rng), 4);
    let h = &cfg.hazard;
    let linear_predictor =
        h.severity * severity + h.slope * slope + h.apoe4 * f64::from(apoe4_count) + h.imaging * imaging_factor;
    let exp_draw = -(1.0 - rng.random::<f64>()).ln();
    let shape = (cfg.censor_mean_months / cfg.censor_sd_months).powi(2);
    let scale = cfg.censor_sd_months.powi(2) / cfg.censor_mean_months;
    let censor = Gamma::new(shape, scale).expect("validated gamma").sample(rng);
    let mut visit_noise = [[0.0; NUM_MEASURES]; 3];
    let mut state_noise = [0.0; 3];
    let mut visit_missing = [false; 3];
    for k in 0..3 {
        state_noise[k] = cfg.state_noise_sd * std(rng);
        for j in 0..NUM_MEASURES {
            visit_noise[k][j] = Normal::new(0.0, cfg.measure_noise_sd[j]).expect("validated sd").sample(rng);
        }
        visit_missing[k] = k > 0 && rng.random::<f64>() < cfg.missing_visit_prob;
    }
    Draw {
        baseline: Baseline {
            age,
            sex,
            education_years,
            apoe4_count,
            imaging_risk,
        },
        severity,
        slope,
        imaging_factor,
        linear_predictor,
        exp_draw,
        censor,
        visit_noise,
        state_noise,
        visit_missing,
    }
}

fn conversion_time(cfg: &GenConfig, d: &Draw, scale: f64) -> f64 {
    scale * (d.exp_draw / d.linear_predictor.exp()).powf(1.0 / cfg.weibull_shape)
}

/// `(time, event)` on the 6-month grid: conversions round up to the visit
/// that detects them, censoring rounds down to the last attended visit.
fn observe(cfg: &GenConfig, d: &Draw, scale: f64) -> (f64, bool, f64) {
    let t = conversion_time(cfg, d, scale);
    let c = d.censor.min(cfg.max_follow_up_months);
    if t <= c {
        let grid = ((t / 6.0).ceil() * 6.0).max(6.0).min((cfg.max_follow_up_months / 6.0).floor() * 6.0);
        (grid, true, t)
    } else {
        (((c / 6.0).floor() * 6.0).max(6.0), false, t)
    }
}

fn event_fraction(cfg: &GenConfig, draws: &[Draw], scale: f64) -> f64 {
    draws.iter().filter(|d| observe(cfg, d, scale).1).count() as f64 / draws.len() as f64
}

pub fn generate_cohort_with_truth(cfg: &GenConfig) -> Result<SyntheticCohort> {
    cfg.validate()?;
    let mut rng = rng_from(cfg.seed);
    let draws: Vec<Draw> = (0..cfg.n_subjects).map(|_| draw_subject(cfg, &mut rng)).collect();

    // Bisection on log(scale); the event fraction falls as the scale grows.
    let (mut lo, mut hi) = (0.0f64, 12.0f64);
    let mut best = (f64::INFINITY, 1.0);
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        let frac = event_fraction(cfg, &draws, mid.exp());
        let gap = frac - cfg.event_fraction;
        if gap.abs() < best.0 {
            best = (gap.abs(), mid.exp());
        }
        if gap > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > cfg.event_fraction_tol {
        return Err(Error::InfeasibleConfig(format!(
            "event fraction {} unreachable within {} after 10 calibration attempts (closest miss {:.4})",
            cfg.event_fraction, cfg.event_fraction_tol, best.0
        )));
    }
    let scale = best.1;

    let mut subjects = Vec::with_capacity(draws.len());
    let mut truth = Vec::with_capacity(draws.len());
    for (i, d) in draws.iter().enumerate() {
        let (time_months, event, conversion_months) = observe(cfg, d, scale);
        let mut visits = Vec::new();
        for (k, &month) in VISIT_MONTHS.iter().enumerate() {
            if f64::from(month) > time_months || d.visit_missing[k] {
                continue;
            }
            let s = d.severity + d.slope * f64::from(month) / 12.0 + d.state_noise[k];
            let measures = std::array::from_fn(|j| {
                let (lo, hi) = MEASURE_BOUNDS[j];
                let raw = cfg.measure_means[j] + cfg.measure_loadings[j] * s + d.visit_noise[k][j];
                round_to(raw.clamp(lo, hi), 2)
            });
            visits.push(VisitRecord {
                visit_month: month,
                measures,
            });
        }
        subjects.push(SubjectTrajectory {
            subject_id: format!("S{:04}", i + 1),
            visits,
            baseline: d.baseline.clone(),
            outcome: Outcome { time_months, event },
            cohort_tag: None,
        });
        truth.push(LatentTruth {
            severity: d.severity,
            slope: d.slope,
            imaging_factor: d.imaging_factor,
            apoe4_count: d.baseline.apoe4_count,
            linear_predictor: d.linear_predictor,
            conversion_months,
        });
    }
    Ok(SyntheticCohort {
        subjects,
        truth,
        weibull_scale: scale,
    })
}

pub fn generate_cohort(cfg: &GenConfig) -> Result<Vec<SubjectTrajectory>> {
    Ok(generate_cohort_with_truth(cfg)?.subjects)
}

/// One row of a demographics table.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: &'static str,
    pub n: usize,
    pub male: usize,
    pub female: usize,
    pub age: (f64, f64),
    pub mmse: (f64, f64),
    pub time_months: (f64, f64),
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Demographics of stable (no event) and progressive (event) subjects.
pub fn summarize(cohort: &[SubjectTrajectory]) -> [GroupSummary; 2] {
    let group = |name: &'static str, event: bool| {
        let members: Vec<&SubjectTrajectory> = cohort.iter().filter(|s| s.outcome.event == event).collect();
        let male = members.iter().filter(|s| s.baseline.sex == 1).count();
        let col = |f: &dyn Fn(&SubjectTrajectory) -> Option<f64>| -> Vec<f64> {
            members.iter().filter_map(|s| f(s)).collect()
        };
        GroupSummary {
            group: name,
            n: members.len(),
            male,
            female: members.len() - male,
            age: mean_sd(&col(&|s| Some(s.baseline.age))),
            mmse: mean_sd(&col(&|s| s.visit(0).map(|v| v.measures[4]))),
            time_months: mean_sd(&col(&|s| Some(s.outcome.time_months))),
        }
    };
    [group("sMCI", false), group("pMCI", true)]
}
