//! Staged training and evaluation machinery for recipe generation: recipe
//! corpora, prompt curriculum, text normalization, metrics, metric-scaled
//! loss and a small multimodal language model.

pub mod corpus;
pub mod metrics;
pub mod oracle;
pub mod promptkit;
pub mod scaledloss;
pub mod synth;
pub mod textnorm;
pub mod toylm;

pub use corpus::{Partition, Recipe, RecipeSet};
pub use metrics::MetricReport;
pub use promptkit::{DialogRecord, InputKind, PromptTemplate, Stage, TargetKind};
pub use scaledloss::{ScaleConfig, ScaleMode};
pub use textnorm::{normalize, TokenSeq};
pub use toylm::{ModelParams, TrainConfig};
