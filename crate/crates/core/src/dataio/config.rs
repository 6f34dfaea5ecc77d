use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::rnn::{LossWeights, RnnConfig};
use crate::sdelearn::{InitConfig, PackKind, SpamSource, TrainConfig};
use crate::sme::{ConstrainedParams, DatasetMeta, PhysicalModel, SmeError};

use super::DataioError;

pub const CONFIG_VERSION: &str = "1.0";

/// Experiment configuration shared by all commands. Every section and
/// field is optional; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub format_version: Option<String>,
    pub model: ModelSection,
    pub data: DataSection,
    pub train: TrainSection,
    pub loss: LossWeights,
    pub study: StudySection,
}

/// Generating model: the constrained parameters plus optional relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSpec {
    pub omega_r: f64,
    pub gamma_d: f64,
    pub eta: f64,
    pub gamma_up: f64,
    pub gamma_down: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let d = ConstrainedParams::DEVICE;
        Self { omega_r: d.omega_r, gamma_d: d.gamma_d, eta: d.eta, gamma_up: 0.0, gamma_down: 0.0 }
    }
}

impl GeneratorSpec {
    pub fn constrained(&self) -> ConstrainedParams {
        ConstrainedParams { omega_r: self.omega_r, gamma_d: self.gamma_d, eta: self.eta }
    }

    pub fn model(&self) -> Result<PhysicalModel, SmeError> {
        let mut m = PhysicalModel::constrained(self.constrained())?;
        m.gamma_up = self.gamma_up;
        m.gamma_down = self.gamma_down;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub pack: PackKindDefault,
    pub generator: GeneratorSpec,
    pub init: InitConfig,
}

/// [`PackKind`] defaulting to the constrained family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PackKindDefault(pub PackKind);

impl Default for PackKindDefault {
    fn default() -> Self {
        Self(PackKind::Constrained)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Dataset directory read by training and evaluation commands.
    pub input: Option<PathBuf>,
    /// Held-out dataset for `evaluate`; defaults to the test split of `input`.
    pub test_input: Option<PathBuf>,
    /// Trained SDE report (`train-sde` output) used by `evaluate`.
    pub sde_report: Option<PathBuf>,
    /// Trained GRU (`train-rnn` output) used by `distill` and `evaluate`.
    pub rnn_model: Option<PathBuf>,
    pub seed: u64,
    pub dt: f64,
    pub dt_fine: f64,
    /// Durations; defaults to `{0, dt, …, t_max}`.
    pub t_grid: Option<Vec<f64>>,
    pub t_max: f64,
    /// Shots per setup and duration; a single value or one per duration.
    pub counts: Vec<usize>,
    pub split_fractions: [f64; 3],
    pub store_truth: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            input: None,
            test_input: None,
            sde_report: None,
            rnn_model: None,
            seed: 0,
            dt: 0.04,
            dt_fine: 0.001,
            t_grid: None,
            t_max: 8.0,
            counts: vec![10],
            split_fractions: [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            store_truth: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub spam: SpamSource,
    pub fit_readout: bool,
    pub hidden: usize,
    pub zero_duration_in_loss: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        let t = TrainConfig::default();
        Self {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            batch_size: t.batch_size,
            epochs: t.epochs,
            patience: t.patience,
            ensemble: t.ensemble,
            seed: t.seed,
            spam: t.spam,
            fit_readout: t.fit_readout,
            hidden: 16,
            zero_duration_in_loss: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub k_list: Vec<usize>,
    pub delta: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        Self { k_list: vec![1, 2, 4, 10, 20, 40, 100, 200], delta: 0.04 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, DataioError> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DataioError> {
        if let Some(v) = &self.format_version {
            if super::files::major(v) != super::files::major(CONFIG_VERSION) {
                return Err(DataioError::VersionMismatch { found: v.clone(), expected: CONFIG_VERSION.into() });
            }
        }
        self.loss.validate().map_err(|e| DataioError::Invalid(e.to_string()))?;
        if !(self.study.delta > 0.0 && self.study.delta < 1.0) {
            return Err(DataioError::Invalid(format!("study.delta {} outside (0, 1)", self.study.delta)));
        }
        if self.study.k_list.contains(&0) {
            return Err(DataioError::Invalid("study.k_list entries must be positive".into()));
        }
        if self.train.lr <= 0.0 || self.train.batch_size == 0 {
            return Err(DataioError::Invalid("train.lr and train.batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.train.lr, beta1: self.train.beta1, beta2: self.train.beta2, eps: self.train.eps }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            adam: self.adam(),
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            patience: self.train.patience,
            ensemble: self.train.ensemble,
            seed: self.train.seed,
            init: self.model.init.clone(),
            spam: self.train.spam,
            fit_readout: self.train.fit_readout,
        }
    }

    pub fn rnn_config(&self) -> RnnConfig {
        RnnConfig {
            hidden: self.train.hidden,
            adam: self.adam(),
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            patience: self.train.patience,
            seed: self.train.seed,
            spam: self.train.spam,
            fit_readout: self.train.fit_readout,
            zero_duration_in_loss: self.train.zero_duration_in_loss,
        }
    }

    pub fn pack(&self) -> PackKind {
        self.model.pack.0
    }

    /// Dataset description for `generate`.
    pub fn dataset_meta(&self) -> Result<DatasetMeta, DataioError> {
        let d = &self.data;
        let grid = match &d.t_grid {
            Some(g) => g.clone(),
            None => DatasetMeta::uniform_grid(d.dt, d.t_max, 0)?.0,
        };
        let counts = match d.counts.len() {
            1 => vec![d.counts[0]; grid.len()],
            n if n == grid.len() => d.counts.clone(),
            n => return Err(DataioError::Invalid(format!("{n} counts for {} durations", grid.len()))),
        };
        let mut meta = DatasetMeta::new(self.model.generator.model()?, d.dt, d.dt_fine, grid, counts, d.seed);
        meta.split_fractions = d.split_fractions;
        meta.store_truth = d.store_truth;
        meta.validate()?;
        Ok(meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train_config().batch_size, 1024);
        assert_eq!(c.loss, LossWeights::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"train": {"learning_rate": 0.1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_json(
            r#"{"model": {"pack": "operator"}, "data": {"t_grid": [0.0, 0.4], "counts": [3, 5], "dt_fine": 0.004},
                "train": {"lr": 0.01, "ensemble": 2}, "loss": {"w_posit": 0.0}, "study": {"k_list": [1, 5]}}"#,
        )
        .unwrap();
        assert_eq!(c.pack(), PackKind::Operator);
        let m = c.dataset_meta().unwrap();
        assert_eq!(m.n_shots(), 18 * 8);
        assert_eq!(c.loss.w_prep, 1.7);
        assert!(RunConfig::from_json(r#"{"format_version": "2.0"}"#).is_err());
    }
}
