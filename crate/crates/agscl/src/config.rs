//! Declarative experiment configuration.
//!
//! Configs are JSON; every field not given takes its documented default, and
//! the fully resolved config (defaults filled) is echoed next to each run's
//! outputs and inside `summary.json`, so a results directory is always
//! self-describing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use agscl_core::nn::{InputShape, LayerSpec, NetSpec};
use agscl_core::optim::{Hyperparams, PlateauCfg};
use agscl_core::tasks::TaskStream;
use agscl_core::Error as CoreError;

use crate::error::{io_err, AppError, AppResult};
use crate::idx::load_idx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Agscl,
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerConfig {
    pub filters: usize,
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Conv stack (image inputs only), applied before the dense stack.
    #[serde(default)]
    pub conv: Vec<ConvLayerConfig>,
    /// Hidden dense widths, e.g. `[100, 100]`.
    pub dense: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Seeded Gaussian-cluster tasks; no files needed.
    Synthetic {
        tasks: usize,
        classes_per_task: usize,
        dim: usize,
        samples_per_class: usize,
        separation: f64,
    },
    /// Class-split of an IDX image dataset, one task per partition cell.
    SplitIdx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
        partition: Vec<Vec<u8>>,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
    },
    /// Fixed pixel permutation per task; task 0 is the identity.
    PermutedIdx {
        train_images: String,
        train_labels: String,
        test_images: String,
        test_labels: String,
        tasks: usize,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
    },
}

fn default_val_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    #[serde(default = "d_mu")]
    pub mu: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_rho")]
    pub rho: f64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// Grid knob: multiplies both mu and lambda.
    #[serde(default = "d_scale")]
    pub hp_scale: f64,
    #[serde(default = "d_patience")]
    pub plateau_patience: u32,
    #[serde(default = "d_factor")]
    pub plateau_factor: f64,
    #[serde(default = "d_lr_min")]
    pub lr_min: f64,
}

fn d_mu() -> f64 {
    10.0
}
fn d_lambda() -> f64 {
    400.0
}
fn d_rho() -> f64 {
    0.3
}
fn d_eta() -> f64 {
    0.9
}
fn d_alpha() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    20
}
fn d_batch() -> usize {
    256
}
fn d_scale() -> f64 {
    1.0
}
fn d_patience() -> u32 {
    5
}
fn d_factor() -> f64 {
    3.0
}
fn d_lr_min() -> f64 {
    1e-5
}

impl Default for HyperConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    /// Optimize the full penalized loss by gradient steps only.
    #[serde(default)]
    pub no_pgd: bool,
    /// Zero threshold for the no-PGD mode; defaults to 1e-4 when `no_pgd`.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub no_zero_init: bool,
    #[serde(default)]
    pub no_rand_init: bool,
    #[serde(default)]
    pub prox_per_minibatch: bool,
    /// Use the initial learning rate in the proximal threshold instead of the
    /// decayed one.
    #[serde(default)]
    pub prox_uses_initial_lr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub hp: HyperConfig,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_outdir")]
    pub output_dir: String,
    #[serde(default)]
    pub shuffle_task_order: bool,
    #[serde(default = "d_fractions")]
    pub aopc_fractions: Vec<f64>,
    /// Fine-tuning reference accuracies (per task) for plasticity.
    #[serde(default)]
    pub a_star: Option<Vec<f64>>,
}

fn d_seeds() -> Vec<u64> {
    vec![1]
}
fn d_outdir() -> String {
    "runs".into()
}
fn d_fractions() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| AppError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> AppResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| AppError::Json {
            path: "<embedded>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> AppResult<()> {
        self.hyperparams().validate()?;
        if self.seeds.is_empty() {
            return Err(CoreError::Config("at least one seed required".into()).into());
        }
        if self.ablation.no_pgd {
            if self.method != Method::Agscl {
                return Err(CoreError::Config("no_pgd requires the agscl method".into()).into());
            }
            if let Some(tau) = self.ablation.tau {
                if tau <= 0.0 {
                    return Err(CoreError::Config(format!("tau must be > 0, got {tau}")).into());
                }
            }
        } else if self.ablation.tau.is_some() {
            return Err(CoreError::Config("tau is only meaningful with no_pgd".into()).into());
        }
        if self.model.dense.is_empty() && self.model.conv.is_empty() {
            return Err(CoreError::Config("model needs at least one hidden layer".into()).into());
        }
        Ok(())
    }

    /// Effective tau for the no-PGD ablation.
    pub fn tau(&self) -> f64 {
        self.ablation.tau.unwrap_or(1e-4)
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            mu: self.hp.mu * self.hp.hp_scale,
            lambda: self.hp.lambda * self.hp.hp_scale,
            rho: self.hp.rho,
            eta: self.hp.eta,
            alpha: self.hp.alpha,
            epochs: self.hp.epochs,
            batch_size: self.hp.batch_size,
            plateau: PlateauCfg {
                patience: self.hp.plateau_patience,
                factor: self.hp.plateau_factor,
                lr_min: self.hp.lr_min,
            },
            prox_per_minibatch: self.ablation.prox_per_minibatch,
            prox_tracks_decayed_lr: !self.ablation.prox_uses_initial_lr,
        }
    }

    /// Build the task stream for one seed (pure function of config + seed).
    pub fn build_stream(&self, seed: u64) -> AppResult<TaskStream> {
        let mut stream = match &self.data {
            DataConfig::Synthetic { tasks, classes_per_task, dim, samples_per_class, separation } => {
                agscl_core::tasks::synth_tasks(
                    *tasks,
                    *classes_per_task,
                    *dim,
                    *samples_per_class,
                    *separation,
                    seed,
                )?
            }
            DataConfig::SplitIdx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                partition,
                val_fraction,
            } => {
                let train = load_idx(Path::new(train_images), Path::new(train_labels))?;
                let test = load_idx(Path::new(test_images), Path::new(test_labels))?;
                agscl_core::tasks::split_tasks(&train, &test, partition, *val_fraction, seed)?
            }
            DataConfig::PermutedIdx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                tasks,
                val_fraction,
            } => {
                let train = load_idx(Path::new(train_images), Path::new(train_labels))?;
                let test = load_idx(Path::new(test_images), Path::new(test_labels))?;
                agscl_core::tasks::permuted_tasks(&train, &test, *tasks, *val_fraction, seed)?
            }
        };
        if self.shuffle_task_order {
            let mut order: Vec<usize> =
                agscl_core::rng::Rng::substream(seed, "taskorder", &[]).permutation(stream.len());
            let mut tasks = Vec::with_capacity(stream.len());
            for &i in order.iter() {
                tasks.push(stream.tasks[i].clone());
            }
            stream.tasks = tasks;
            order.clear();
        }
        Ok(stream)
    }

    /// Build the network spec matching this config and stream.
    pub fn build_net_spec(&self, stream: &TaskStream) -> AppResult<NetSpec> {
        let mut layers = Vec::new();
        let input = if self.model.conv.is_empty() {
            InputShape::Flat(stream.dim)
        } else {
            let (h, w) = stream.image_hw.ok_or_else(|| {
                CoreError::Config("conv model requires image-shaped data".to_string())
            })?;
            InputShape::Image { channels: 1, height: h, width: w }
        };
        let mut channels = 1usize;
        let (mut ch, mut cw) = stream.image_hw.unwrap_or((1, stream.dim));
        for conv in &self.model.conv {
            layers.push(LayerSpec::conv2d(
                channels,
                conv.filters,
                conv.kernel,
                conv.kernel,
                conv.stride,
                conv.padding,
            ));
            ch = (ch + 2 * conv.padding - conv.kernel) / conv.stride + 1;
            cw = (cw + 2 * conv.padding - conv.kernel) / conv.stride + 1;
            channels = conv.filters;
        }
        let mut fan_in = if self.model.conv.is_empty() {
            stream.dim
        } else {
            channels * ch * cw
        };
        for &units in &self.model.dense {
            layers.push(LayerSpec::dense(fan_in, units));
            fan_in = units;
        }
        Ok(NetSpec::new(input, layers, stream.head_dims())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "model": { "dense": [8, 8] },
            "data": { "kind": "synthetic", "tasks": 2, "classes_per_task": 2,
                      "dim": 6, "samples_per_class": 30, "separation": 6.0 }
        }"#
    }

    #[test]
    fn defaults_are_filled() {
        let cfg = ExperimentConfig::from_json(minimal_json()).unwrap();
        assert_eq!(cfg.hp.mu, 10.0);
        assert_eq!(cfg.hp.lambda, 400.0);
        assert_eq!(cfg.hp.rho, 0.3);
        assert_eq!(cfg.hp.eta, 0.9);
        assert_eq!(cfg.hp.epochs, 20);
        assert_eq!(cfg.hp.batch_size, 256);
        assert_eq!(cfg.seeds, vec![1]);
        assert_eq!(cfg.method, Method::Agscl);
        assert_eq!(cfg.aopc_fractions.len(), 11);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{ "model": { "dense": [4] }, "data": { "kind": "synthetic",
            "tasks": 1, "classes_per_task": 2, "dim": 4, "samples_per_class": 10,
            "separation": 1.0 }, "banana": true }"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(AppError::Json { .. })));
    }

    #[test]
    fn tau_without_no_pgd_is_a_config_error() {
        let mut cfg = ExperimentConfig::from_json(minimal_json()).unwrap();
        cfg.ablation.tau = Some(1e-4);
        assert!(cfg.validate().is_err());
        cfg.ablation.no_pgd = true;
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.tau(), 1e-4);
    }

    #[test]
    fn stream_and_spec_are_consistent() {
        let cfg = ExperimentConfig::from_json(minimal_json()).unwrap();
        let stream = cfg.build_stream(3).unwrap();
        assert_eq!(stream.len(), 2);
        let spec = cfg.build_net_spec(&stream).unwrap();
        assert_eq!(spec.head_dims, vec![2, 2]);
        assert_eq!(spec.last_hidden_dim(), 8);
    }

    #[test]
    fn config_echo_round_trips() {
        let cfg = ExperimentConfig::from_json(minimal_json()).unwrap();
        let echoed = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&echoed).unwrap();
        assert_eq!(cfg, back);
    }
}
