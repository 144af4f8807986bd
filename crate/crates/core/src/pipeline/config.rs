use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{Conditioning, TrainConfig};
use crate::cohort::{GenConfig, Horizon};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Prognostic model families fitted per horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Month-0 measures plus demographics.
    BaselineCognitive,
    /// Latest usable visit within the horizon plus demographics.
    SingleVisit,
    /// Latent trajectory encoding plus demographics.
    Longitudinal,
    /// Latent encoding, demographics and imaging risk.
    LongitudinalImaging,
    /// Baseline comparator with imaging risk; used only in comparisons.
    BaselineCognitiveImaging,
}

impl ModelKind {
    pub const REPORTED: [ModelKind; 4] = [
        ModelKind::BaselineCognitive,
        ModelKind::SingleVisit,
        ModelKind::Longitudinal,
        ModelKind::LongitudinalImaging,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BaselineCognitive => "baseline_cognitive",
            ModelKind::SingleVisit => "single_visit",
            ModelKind::Longitudinal => "longitudinal",
            ModelKind::LongitudinalImaging => "longitudinal_imaging",
            ModelKind::BaselineCognitiveImaging => "baseline_cognitive_imaging",
        }
    }

    pub fn uses_latent(self) -> bool {
        matches!(self, ModelKind::Longitudinal | ModelKind::LongitudinalImaging)
    }

    pub fn uses_imaging(self) -> bool {
        matches!(self, ModelKind::LongitudinalImaging | ModelKind::BaselineCognitiveImaging)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Experiment settings, read from a flat TOML file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory.
    pub out: PathBuf,
    /// Defaults to `<out>/visits.csv`.
    pub visits: Option<PathBuf>,
    /// Defaults to `<out>/outcomes.csv`.
    pub outcomes: Option<PathBuf>,
    pub seed: u64,
    pub hidden_dim: usize,
    pub horizons: Vec<u32>,
    pub models: Vec<ModelKind>,
    pub sweep: Vec<usize>,
    pub n_boot: usize,
    pub train_fraction: f64,
    pub conditioning: String,
    pub base_lr: f64,
    pub max_iters: usize,
    pub batch_size: usize,
    pub lr_drop_every: usize,
    pub lr_drop_factor: f64,
    /// Synthetic cohort size for `generate`.
    pub n_subjects: usize,
    pub missing_visit_prob: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let cohort = GenConfig::default();
        Self {
            out: PathBuf::from("out"),
            visits: None,
            outcomes: None,
            seed: 1,
            hidden_dim: 5,
            horizons: vec![6, 12],
            models: ModelKind::REPORTED.to_vec(),
            sweep: vec![3, 5, 7, 9],
            n_boot: 2000,
            train_fraction: 383.0 / 822.0,
            conditioning: Conditioning::default().to_string(),
            base_lr: train.base_lr,
            max_iters: train.max_iters,
            batch_size: train.batch_size,
            lr_drop_every: train.lr_drop_every,
            lr_drop_factor: train.lr_drop_factor,
            n_subjects: cohort.n_subjects,
            missing_visit_prob: cohort.missing_visit_prob,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.horizon_list()?;
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1".into());
        }
        if self.sweep.contains(&0) {
            return bad("sweep values must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if self.n_boot < 100 {
            return bad(format!("n_boot must be at least 100, got {}", self.n_boot));
        }
        self.conditioning()?;
        self.train_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.gen_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Sorted, deduplicated horizons.
    pub fn horizon_list(&self) -> Result<Vec<Horizon>> {
        if self.horizons.is_empty() {
            return Err(Error::Config("horizons must not be empty".into()));
        }
        let mut hs = self
            .horizons
            .iter()
            .map(|&m| Horizon::try_from(m).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        hs.sort();
        hs.dedup();
        Ok(hs)
    }

    pub fn conditioning(&self) -> Result<Conditioning> {
        self.conditioning.parse().map_err(|e: Error| Error::Config(e.to_string()))
    }

    pub fn visits_path(&self) -> PathBuf {
        self.visits.clone().unwrap_or_else(|| self.out.join("visits.csv"))
    }

    pub fn outcomes_path(&self) -> PathBuf {
        self.outcomes.clone().unwrap_or_else(|| self.out.join("outcomes.csv"))
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            base_lr: self.base_lr,
            max_iters: self.max_iters,
            batch_size: self.batch_size,
            lr_drop_every: self.lr_drop_every,
            lr_drop_factor: self.lr_drop_factor,
            seed: self.seeds().train,
        }
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n_subjects: self.n_subjects,
            missing_visit_prob: self.missing_visit_prob,
            seed: self.seeds().cohort,
            ..GenConfig::default()
        }
    }
}

/// Per-stage seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub cohort: u64,
    pub split: u64,
    pub init: u64,
    pub train: u64,
    pub bootstrap: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            master,
            cohort: derive_seed(master, "cohort"),
            split: derive_seed(master, "split"),
            init: derive_seed(master, "autoencoder-init"),
            train: derive_seed(master, "autoencoder-train"),
            bootstrap: derive_seed(master, "bootstrap"),
        }
    }
}
