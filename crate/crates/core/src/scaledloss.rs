//! Token-level cross-entropy and the BLEU/ROUGE-L scaling factor applied to
//! it as a per-sample constant.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{rouge_l, sacrebleu};
use crate::textnorm::normalize;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_LAMBDA_BLEU: f64 = 1.01;
pub const DEFAULT_LAMBDA_ROUGE_L: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("position {position}: {reason}")]
    InvalidDistribution { position: usize, reason: String },
    #[error("prediction has {predicted} positions but target has {target}")]
    LengthMismatch { predicted: usize, target: usize },
    #[error("target id {id} at position {position} is outside the vocabulary of {vocab}")]
    TargetOutOfRange { position: usize, id: usize, vocab: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty batch")]
    EmptyBatch,
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<LossError>,
    },
    #[error("invalid scale config: {0}")]
    Config(String),
}

/// Per-position probability vectors over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistSeq {
    rows: Vec<Vec<f64>>,
}

impl TokenDistSeq {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, LossError> {
        let width = rows.first().map_or(0, Vec::len);
        for (position, row) in rows.iter().enumerate() {
            let bad = |reason: String| LossError::InvalidDistribution { position, reason };
            if row.len() != width || width == 0 {
                return Err(bad(format!("width {} differs from {width}", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(bad("negative or non-finite probability".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(bad(format!("sums to {sum}")));
            }
        }
        Ok(TokenDistSeq { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Per-position argmax; ties go to the lowest id.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                    .0
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// `λb·B + λr·R`, as the formula is printed.
    #[default]
    PaperLiteral,
    /// `λb·(1 − B) + λr·(1 − R)`.
    Penalty,
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::PaperLiteral => "paper_literal",
            ScaleMode::Penalty => "penalty",
        })
    }
}

impl FromStr for ScaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "paper_literal" => Ok(ScaleMode::PaperLiteral),
            "penalty" => Ok(ScaleMode::Penalty),
            _ => Err(format!("unknown scale mode {s:?} (expected paper-literal or penalty)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub lambda_bleu: f64,
    #[serde(rename = "lambda_rougeL")]
    pub lambda_rouge_l: f64,
    pub mode: ScaleMode,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            lambda_bleu: DEFAULT_LAMBDA_BLEU,
            lambda_rouge_l: DEFAULT_LAMBDA_ROUGE_L,
            mode: ScaleMode::PaperLiteral,
        }
    }
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        let ok = |l: f64| l.is_finite() && l >= 0.0;
        if !ok(self.lambda_bleu) || !ok(self.lambda_rouge_l) {
            return Err(LossError::Config("weights must be finite and non-negative".into()));
        }
        if self.lambda_bleu == 0.0 && self.lambda_rouge_l == 0.0 {
            return Err(LossError::Config("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Positions whose target probability fell below the floor.
    pub clamped: Vec<usize>,
}

/// Mean of `-ln p(target)` over positions.
pub fn cross_entropy(pred: &TokenDistSeq, target: &[usize]) -> Result<CrossEntropy, LossError> {
    if pred.len() != target.len() {
        return Err(LossError::LengthMismatch {
            predicted: pred.len(),
            target: target.len(),
        });
    }
    if target.is_empty() {
        return Err(LossError::EmptySequence);
    }
    let vocab = pred.vocab_size();
    let mut clamped = Vec::new();
    let mut total = 0.0;
    for (position, (row, &id)) in pred.rows().iter().zip(target).enumerate() {
        let p = *row.get(id).ok_or(LossError::TargetOutOfRange { position, id, vocab })?;
        if p < PROB_FLOOR {
            clamped.push(position);
        }
        total -= p.max(PROB_FLOOR).ln();
    }
    Ok(CrossEntropy {
        loss: total / target.len() as f64,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScale {
    pub bleu: f64,
    pub rouge_l: f64,
    pub l_bleu: f64,
    pub l_rouge_l: f64,
    pub l_br: f64,
}

pub fn metric_scale(y_pred: &str, y_label: &str, config: &ScaleConfig) -> MetricScale {
    let cand = normalize(y_pred);
    let reference = normalize(y_label);
    let bleu = sacrebleu(&cand, &reference);
    let rouge = rouge_l(&cand, &reference).f1;
    let l_bleu = 1.0 - bleu;
    let l_rouge_l = 1.0 - rouge;
    let l_br = match config.mode {
        ScaleMode::PaperLiteral => config.lambda_bleu * (1.0 - l_bleu) + config.lambda_rouge_l * (1.0 - l_rouge_l),
        ScaleMode::Penalty => config.lambda_bleu * l_bleu + config.lambda_rouge_l * l_rouge_l,
    };
    MetricScale {
        bleu,
        rouge_l: rouge,
        l_bleu,
        l_rouge_l,
        l_br,
    }
}

pub fn scaled_loss(l_ce: f64, l_br: f64) -> f64 {
    l_br * l_ce
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledLossValue {
    pub l_ce: f64,
    pub l_bleu: f64,
    #[serde(rename = "l_rougeL")]
    pub l_rouge_l: f64,
    pub l_br: f64,
    pub l_final: f64,
    pub y_label: String,
    pub y_pred: String,
}

impl ScaledLossValue {
    pub fn new(l_ce: f64, scale: &MetricScale, y_pred: String, y_label: String) -> Self {
        ScaledLossValue {
            l_ce,
            l_bleu: scale.l_bleu,
            l_rouge_l: scale.l_rouge_l,
            l_br: scale.l_br,
            l_final: scaled_loss(l_ce, scale.l_br),
            y_label,
            y_pred,
        }
    }
}

pub struct BatchItem<'a> {
    pub pred: &'a TokenDistSeq,
    pub target: &'a [usize],
    pub y_label: &'a str,
}

/// Scores each sample against the text of its per-position argmax, which
/// `detokenize` turns back into a string. Returns the mean final loss and
/// the per-sample values in batch order.
pub fn scaled_loss_batch<F>(
    batch: &[BatchItem<'_>],
    config: &ScaleConfig,
    detokenize: F,
) -> Result<(f64, Vec<ScaledLossValue>), LossError>
where
    F: Fn(&[usize]) -> String + Sync,
{
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    config.validate()?;
    let values = batch
        .par_iter()
        .enumerate()
        .map(|(index, item)| {
            let ce = cross_entropy(item.pred, item.target).map_err(|e| LossError::Sample {
                index,
                source: Box::new(e),
            })?;
            let y_pred = detokenize(&item.pred.argmax());
            let scale = metric_scale(&y_pred, item.y_label, config);
            Ok(ScaledLossValue::new(ce.loss, &scale, y_pred, item.y_label.to_owned()))
        })
        .collect::<Result<Vec<_>, LossError>>()?;
    let mean = values.iter().map(|v| v.l_final).sum::<f64>() / values.len() as f64;
    Ok((mean, values))
}
