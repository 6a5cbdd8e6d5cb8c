//! Run configuration: one JSON document covering every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use silkforge::evalsuite::{DEFAULT_THRESHOLD, DEFAULT_WINDOW};
use silkforge::model::{LoraConfig, ModelConfig, SamplingConfig};
use silkforge::train::{DistillConfig, TrainConfig};
use silkforge::{Error, Result};

/// A model given either by preset name or by explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(String),
    Custom(ModelConfig),
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<ModelConfig> {
        let c = match self {
            ModelSpec::Preset(name) => ModelConfig::preset(name)?,
            ModelSpec::Custom(c) => *c,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// General corpus for the teacher and for distillation.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Repeat regions for level 1.
    #[serde(default)]
    pub repeats: Option<PathBuf>,
    /// Labeled properties TSV for level 2.
    #[serde(default)]
    pub properties: Option<PathBuf>,
    /// Sequences for the properties TSV when it has no sequence column.
    #[serde(default)]
    pub properties_fasta: Option<PathBuf>,
    /// Where checkpoints, logs and fold files are written.
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSection {
    /// Example length cap, further limited by the model context.
    pub max_len: usize,
}

impl Default for TokenizerSection {
    fn default() -> Self {
        Self { max_len: silkforge::tokenizer::DEFAULT_MAX_LEN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub student: ModelSpec,
    pub teacher: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSection {
    pub temperature: f64,
    /// Weight of the hard-label term.
    pub alpha: f64,
    /// Student training.
    pub train: TrainConfig,
    /// Local teacher training; ignored when a teacher checkpoint or logits file is given.
    pub teacher_train: TrainConfig,
    #[serde(default)]
    pub teacher_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub teacher_logits: Option<PathBuf>,
}

impl DistillSection {
    pub fn loss(&self) -> DistillConfig {
        DistillConfig { temperature: self.temperature, alpha: self.alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level1Section {
    pub lora: LoraConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level2Section {
    /// Targets not present in the level-1 adapter are added fresh.
    pub lora: LoraConfig,
    pub train: TrainConfig,
    pub folds: usize,
    pub select: usize,
    #[serde(default)]
    pub fold_seed: u64,
    #[serde(default)]
    pub reinit_adapter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub window: usize,
    pub threshold: f64,
    /// `"builtin"` or a path to a residue/probability TSV.
    pub background: String,
    /// Samples drawn per arm by `ablate`.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            background: "builtin".into(),
            n_samples: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub tokenizer: TokenizerSection,
    pub model: ModelSection,
    pub distill: DistillSection,
    pub level1: Level1Section,
    pub level2: Level2Section,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

fn train(lr: f64, batch_size: usize, max_steps: usize, patience: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr,
        batch_size,
        warmup_steps: 30,
        max_epochs: 30,
        weight_decay: 0.01,
        patience,
        seed,
        max_steps: Some(max_steps),
        ..TrainConfig::level1()
    }
}

impl RunConfig {
    /// Settings that run the whole pipeline on synthetic data in minutes on one CPU core.
    pub fn desk(out_dir: impl Into<PathBuf>) -> Self {
        let student = ModelConfig {
            n_embd: 48,
            n_layer: 2,
            n_heads: 4,
            hidden_dim: 192,
            vocab_size: silkforge::tokenizer::VOCAB_SIZE,
            context_len: 128,
            dropout: 0.0,
        };
        let teacher = ModelConfig { n_embd: 64, n_layer: 3, hidden_dim: 256, ..student };
        let attention = LoraConfig { rank: 8, alpha: 16.0, dropout: 0.0, ..LoraConfig::default() };
        let mut level2_lora = attention.clone();
        level2_lora.targets.insert(0, silkforge::model::LoraTarget::Wte);
        Self {
            data: DataSection {
                corpus: None,
                repeats: None,
                properties: None,
                properties_fasta: None,
                out_dir: out_dir.into(),
            },
            tokenizer: TokenizerSection { max_len: 128 },
            model: ModelSection { student: ModelSpec::Custom(student), teacher: ModelSpec::Custom(teacher) },
            distill: DistillSection {
                temperature: DistillConfig::default().temperature,
                alpha: DistillConfig::default().alpha,
                train: train(3e-3, 8, 1000, 3, 1),
                teacher_train: train(3e-3, 8, 1000, 3, 1),
                teacher_checkpoint: None,
                teacher_logits: None,
            },
            level1: Level1Section { lora: attention, train: train(5e-3, 8, 2000, 3, 1) },
            level2: Level2Section {
                lora: level2_lora,
                train: train(5e-3, 8, 2000, 100, 5),
                folds: 15,
                select: 5,
                fold_seed: 3,
                reinit_adapter: false,
            },
            eval: EvalSection::default(),
            sampling: SamplingConfig { max_new: 126, ..SamplingConfig::default() },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.model.student.resolve()?;
        self.model.teacher.resolve()?;
        self.distill.loss().validate()?;
        for t in [&self.distill.train, &self.distill.teacher_train, &self.level1.train, &self.level2.train] {
            t.validate()?;
        }
        self.level1.lora.validate()?;
        self.level2.lora.validate()?;
        if self.level2.select == 0 || self.level2.select > self.level2.folds {
            return Err(Error::Config(format!(
                "cannot select {} of {} folds",
                self.level2.select, self.level2.folds
            )));
        }
        if self.tokenizer.max_len == 0 {
            return Err(Error::Config("tokenizer.max_len must be positive".into()));
        }
        Ok(())
    }

    /// Relative data paths are taken relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        for p in [&mut d.corpus, &mut d.repeats, &mut d.properties, &mut d.properties_fasta].into_iter().flatten() {
            fix(p);
        }
        fix(&mut d.out_dir);
        for p in [&mut self.distill.teacher_checkpoint, &mut self.distill.teacher_logits].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.data.out_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = RunConfig::desk("runs");
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::desk("runs").to_json()).unwrap();
        v["level1"]["train"]["lr_typo"] = 1.into();
        assert!(matches!(RunConfig::from_json(&v.to_string()), Err(Error::Config(_))));
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::desk("runs").to_json()).unwrap();
        v["extra"] = 1.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn presets_resolve() {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::desk("runs").to_json()).unwrap();
        v["model"]["student"] = "desk-tiny".into();
        let c = RunConfig::from_json(&v.to_string()).unwrap();
        assert_eq!(c.model.student.resolve().unwrap(), ModelConfig::desk_tiny());
        v["model"]["student"] = "huge".into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
