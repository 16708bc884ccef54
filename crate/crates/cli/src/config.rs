use std::path::{Path, PathBuf};

use hhgnn_core::data::DEFAULT_RATIOS;
use hhgnn_core::model::{AdamConfig, HhgnnConfig, TrainOptions};
use hhgnn_core::{BuildOptions, Error, Result, Variant};
use serde::{Deserialize, Serialize};

use crate::synth::SyntheticSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw instance CSV read by `preprocess`.
    pub input: Option<PathBuf>,
    /// Label-cleaning rules (TOML). Without it all placements are mutually exclusive.
    pub rules: Option<PathBuf>,
    /// Working directory shared by all commands.
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            input: None,
            rules: None,
            out: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let c = HhgnnConfig::new(1);
        ModelSection {
            hidden_dim: c.hidden_dim,
            num_blocks: c.num_blocks,
            dropout_rate: c.dropout_rate,
            leaky_slope: c.leaky_slope,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub variant: Variant,
    pub max_epochs: usize,
    /// 0 trains full-batch.
    pub batch_size: usize,
    pub patience: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub argmax_pp: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        TrainSection {
            variant: Variant::Full,
            max_epochs: 200,
            batch_size: 64,
            patience: 0,
            lr: 5e-3,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            weight_decay: a.weight_decay,
            argmax_pp: false,
        }
    }
}

/// Values to try per hyperparameter. An absent list keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lr: Option<Vec<f64>>,
    pub hidden_dim: Option<Vec<usize>>,
    pub num_blocks: Option<Vec<usize>>,
    pub dropout_rate: Option<Vec<f64>>,
    pub weight_decay: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the split and the synthetic generator's output order.
    pub seed: u64,
    /// Seeds parameter initialisation, shuffling and dropout.
    pub model_seed: u64,
    pub split: [f64; 3],
    pub min_combo_count: usize,
    pub paths: Paths,
    pub model: ModelSection,
    pub train: TrainSection,
    pub grid: GridSection,
    pub synth: SyntheticSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            model_seed: 7,
            split: DEFAULT_RATIOS,
            min_combo_count: 1,
            paths: Paths::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            grid: GridSection::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

/// One point of the hyperparameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub lr: f64,
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub dropout_rate: f64,
    pub weight_decay: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let lens = [
            g.lr.as_ref().map(Vec::len),
            g.hidden_dim.as_ref().map(Vec::len),
            g.num_blocks.as_ref().map(Vec::len),
            g.dropout_rate.as_ref().map(Vec::len),
            g.weight_decay.as_ref().map(Vec::len),
        ];
        if lens.contains(&Some(0)) {
            return Err(Error::InvalidConfig("grid lists must not be empty".into()));
        }
        if self.train.max_epochs == 0 {
            return Err(Error::InvalidConfig("train.max_epochs must be at least 1".into()));
        }
        if !(self.train.lr >= 0.0) || !(self.train.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("lr and weight_decay must be non-negative".into()));
        }
        for t in self.trials() {
            self.model_config(&t, 1).validate()?;
        }
        self.synth.validate()
    }

    /// Cartesian product of the grid in a fixed nesting order.
    pub fn trials(&self) -> Vec<Trial> {
        let g = &self.grid;
        let lrs = g.lr.clone().unwrap_or_else(|| vec![self.train.lr]);
        let hs = g.hidden_dim.clone().unwrap_or_else(|| vec![self.model.hidden_dim]);
        let bs = g.num_blocks.clone().unwrap_or_else(|| vec![self.model.num_blocks]);
        let ds = g.dropout_rate.clone().unwrap_or_else(|| vec![self.model.dropout_rate]);
        let ws = g.weight_decay.clone().unwrap_or_else(|| vec![self.train.weight_decay]);
        let mut out = Vec::new();
        for &lr in &lrs {
            for &hidden_dim in &hs {
                for &num_blocks in &bs {
                    for &dropout_rate in &ds {
                        for &weight_decay in &ws {
                            out.push(Trial {
                                index: out.len(),
                                lr,
                                hidden_dim,
                                num_blocks,
                                dropout_rate,
                                weight_decay,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn model_config(&self, t: &Trial, feature_dim: usize) -> HhgnnConfig {
        HhgnnConfig {
            hidden_dim: t.hidden_dim,
            num_blocks: t.num_blocks,
            dropout_rate: t.dropout_rate,
            leaky_slope: self.model.leaky_slope,
            feature_dim,
        }
    }

    pub fn train_options(&self, t: &Trial) -> TrainOptions {
        TrainOptions {
            max_epochs: self.train.max_epochs,
            batch_size: self.train.batch_size,
            patience: self.train.patience,
            adam: AdamConfig {
                lr: t.lr,
                beta1: self.train.beta1,
                beta2: self.train.beta2,
                eps: self.train.eps,
                weight_decay: t.weight_decay,
            },
            argmax_pp: self.train.argmax_pp,
        }
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            min_combo_count: self.min_combo_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn grid_product_order() {
        let cfg = ExperimentConfig::from_toml(
            "[grid]\nlr = [0.1, 0.01]\nhidden_dim = [4, 8, 16]\n",
        )
        .unwrap();
        let t = cfg.trials();
        assert_eq!(t.len(), 6);
        assert_eq!((t[0].lr, t[0].hidden_dim), (0.1, 4));
        assert_eq!((t[5].lr, t[5].hidden_dim), (0.01, 16));
        assert!(t.iter().enumerate().all(|(i, x)| x.index == i));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("[grid]\nlr = []\n").is_err());
        assert!(ExperimentConfig::from_toml("[model]\ndropout_rate = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nvariant = \"nope\"\n").is_err());
    }

    #[test]
    fn example_config_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.train.variant, Variant::Full);
    }
}
