//! A small autoregressive language model with a visual mapping layer.
//!
//! One causal self-attention block followed by a tanh feed-forward layer,
//! both residual, over token embeddings plus learned positions. The image
//! enters as a single sentinel position whose embedding is a linear map of
//! the visual vector. Gradients are written out by hand and checked against
//! finite differences in the tests.

mod checkpoint;
mod data;
mod decode;
mod gradcheck;
mod model;
mod train;
mod vocab;

#[cfg(test)]
mod tests;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedArray, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use data::{encode_dialog, Example, ASSISTANT_TAG, HUMAN_TAG};
pub use decode::{greedy_decode, teacher_forced_logprobs};
pub use gradcheck::{finite_difference_check, relative_error, GradCheckEntry, RELATIVE_ERROR_FLOOR};
pub use model::{init_model, Gradients, ModelConfig, ModelParams, PARAM_SPECS};
pub use train::{
    default_trainable, lr_at, loss_and_grads, mean_cross_entropy, train, BatchLoss, LrSchedule, TraceRecord,
    TrainConfig, TrainTrace,
};
pub use vocab::{Vocab, IMAGE, PAD, RESERVED, STOP, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    MapVisual,
    Embed,
    Core,
    Out,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [ParamGroup::MapVisual, ParamGroup::Embed, ParamGroup::Core, ParamGroup::Out];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::MapVisual => "map_visual",
            ParamGroup::Embed => "embed",
            ParamGroup::Core => "core",
            ParamGroup::Out => "out",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamGroup::ALL
            .into_iter()
            .find(|g| g.name() == s.trim())
            .ok_or_else(|| format!("unknown parameter group {s:?}"))
    }
}

pub type GroupSet = BTreeSet<ParamGroup>;

#[derive(Debug, thiserror::Error)]
pub enum ToyLmError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize, trace: Box<TrainTrace> },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Loss(#[from] crate::scaledloss::LossError),
}
