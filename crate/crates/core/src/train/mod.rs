//! Optimization, distillation and the staged training pipeline.

mod distill;
mod optim;
mod schedule;
mod stages;
mod trainer;

pub use distill::{distill_loss, DistillConfig, DistillTerms, TeacherLogits, TeacherSource, LOGITS_MAGIC};
pub use optim::{clip_grad_norm, AdamW, OptimizerState, ADAM_EPS, BETA1, BETA2};
pub use schedule::{lr_at, EarlyStopState, Retention};
pub use stages::{
    bidirectional_examples, example_len, generate_sequence, generate_unconditional, lm_examples, predict_properties,
    split_indices, train_clm, train_distill, train_level1, train_level2, FoldRun, Level2Options, StageResult,
};
pub use trainer::{evaluate, fit, EpochStats, FitOutcome, FitReport, LogRecord, Objective, TrainConfig, Weights};
