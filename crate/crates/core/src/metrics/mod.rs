//! Text-generation metrics: BLEU-1..4, smoothed BLEU, METEOR, ROUGE-1/2/L,
//! CIDEr and perplexity, plus macro-averaged corpus reports.
//!
//! All scores are single-reference and computed over [`TokenSeq`]s produced
//! by [`crate::textnorm::normalize`].

mod bleu;
mod cider;
mod meteor;
mod rouge;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::textnorm::TokenSeq;

pub use bleu::{bleu_k, brevity_penalty, sacrebleu};
pub use cider::{build_idf, cider, IdfTable, CIDER_MAX_ORDER, CIDER_SCALE};
pub use meteor::{align as meteor_align, meteor, stem, Alignment, EXHAUSTIVE_LIMIT};
pub use rouge::{lcs_len, rouge_l, rouge_n};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("BLEU order must be in 1..=4, got {0}")]
    BleuOrder(usize),
    #[error("n-gram order must be positive")]
    ZeroOrder,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("log-probability list is empty")]
    EmptyLogprobs,
    #[error("log-probability at index {index} is not a finite value <= 0: {value}")]
    InvalidLogprob { index: usize, value: f64 },
    #[error("{pairs} pairs but {logprobs} log-probability lists")]
    LogprobCountMismatch { pairs: usize, logprobs: usize },
}

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// F1 is the harmonic mean, or 0 when `p + r == 0`.
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }

    /// Overlap over each side's size; an empty side contributes 0.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |d: usize| if d == 0 { 0.0 } else { overlap as f64 / d as f64 };
        Prf::new(ratio(candidate_total), ratio(reference_total))
    }
}

/// `exp(-mean(logprobs))` over natural-log token probabilities.
pub fn perplexity(token_logprobs: &[f64]) -> Result<f64, MetricError> {
    if token_logprobs.is_empty() {
        return Err(MetricError::EmptyLogprobs);
    }
    for (index, &value) in token_logprobs.iter().enumerate() {
        if !(value.is_finite() && value <= 0.0) {
            return Err(MetricError::InvalidLogprob { index, value });
        }
    }
    let mean = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok((-mean).exp())
}

/// Corpus-level scores. ROUGE entries hold the per-pair means of precision,
/// recall and F1 separately; the reported ROUGE value is the F1 mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub sacrebleu: f64,
    pub meteor: f64,
    pub rouge1: Prf,
    pub rouge2: Prf,
    #[serde(rename = "rougeL")]
    pub rouge_l: Prf,
    pub cider: f64,
    pub perplexity: Option<f64>,
}

/// Column headers in reporting order.
pub const REPORT_COLUMNS: [&str; 11] = [
    "BLEU-1",
    "BLEU-2",
    "BLEU-3",
    "BLEU-4",
    "SacreBLEU",
    "METEOR",
    "ROUGE-1",
    "ROUGE-2",
    "ROUGE-L",
    "CIDEr",
    "Perplexity",
];

impl MetricReport {
    /// Values in [`REPORT_COLUMNS`] order.
    pub fn columns(&self) -> [Option<f64>; 11] {
        [
            Some(self.bleu1),
            Some(self.bleu2),
            Some(self.bleu3),
            Some(self.bleu4),
            Some(self.sacrebleu),
            Some(self.meteor),
            Some(self.rouge1.f1),
            Some(self.rouge2.f1),
            Some(self.rouge_l.f1),
            Some(self.cider),
            self.perplexity,
        ]
    }

    /// Flat JSON object: one key per column plus ROUGE precision/recall.
    pub fn to_flat_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        let keys = [
            "bleu1", "bleu2", "bleu3", "bleu4", "sacrebleu", "meteor", "rouge1", "rouge2", "rougeL", "cider",
            "perplexity",
        ];
        for (key, value) in keys.iter().zip(self.columns()) {
            map.insert((*key).to_owned(), value.map_or(serde_json::Value::Null, Into::into));
        }
        for (name, prf) in [("rouge1", self.rouge1), ("rouge2", self.rouge2), ("rougeL", self.rouge_l)] {
            map.insert(format!("{name}_precision"), prf.precision.into());
            map.insert(format!("{name}_recall"), prf.recall.into());
        }
        serde_json::Value::Object(map)
    }

    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.columns().iter().map(|v| fmt_cell(*v, 6)).collect::<Vec<_>>().join(",")
    }

    pub fn markdown_header(label: &str) -> String {
        let sep = std::iter::repeat_n("---", REPORT_COLUMNS.len() + 1).collect::<Vec<_>>().join(" | ");
        format!("| {label} | {} |\n| {sep} |", REPORT_COLUMNS.join(" | "))
    }

    pub fn markdown_row(&self, label: &str) -> String {
        let cells = self.columns().iter().map(|v| fmt_cell(*v, 4)).collect::<Vec<_>>();
        format!("| {label} | {} |", cells.join(" | "))
    }
}

fn fmt_cell(value: Option<f64>, digits: usize) -> String {
    match value {
        Some(v) => format!("{v:.digits$}"),
        None => "-".to_owned(),
    }
}

/// Per-pair scores that feed the corpus macro-average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScores {
    pub bleu: [f64; 4],
    pub sacrebleu: f64,
    pub meteor: f64,
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub cider: f64,
}

pub fn score_pair(candidate: &TokenSeq, reference: &TokenSeq, idf: &IdfTable) -> PairScores {
    let bleu = std::array::from_fn(|i| bleu_k(candidate, reference, i + 1).expect("order in range"));
    PairScores {
        bleu,
        sacrebleu: sacrebleu(candidate, reference),
        meteor: meteor(candidate, reference),
        rouge1: rouge_n(candidate, reference, 1).expect("positive order"),
        rouge2: rouge_n(candidate, reference, 2).expect("positive order"),
        rouge_l: rouge_l(candidate, reference),
        cider: cider(candidate, reference, idf),
    }
}

/// Macro-averages per-pair scores over the corpus.
///
/// CIDEr document frequencies come from this corpus's references. Pairs are
/// scored in parallel (rayon's global pool) and reduced sequentially in input
/// order, so results do not depend on the thread count. Perplexity is taken
/// over the concatenation of all log-probability lists when given.
pub fn evaluate_corpus(
    pairs: &[(TokenSeq, TokenSeq)],
    logprobs: Option<&[Vec<f64>]>,
) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let perplexity = match logprobs {
        Some(lists) => {
            if lists.len() != pairs.len() {
                return Err(MetricError::LogprobCountMismatch {
                    pairs: pairs.len(),
                    logprobs: lists.len(),
                });
            }
            let all: Vec<f64> = lists.iter().flatten().copied().collect();
            Some(perplexity(&all)?)
        }
        None => None,
    };

    let references: Vec<TokenSeq> = pairs.iter().map(|(_, r)| r.clone()).collect();
    let idf = build_idf(&references)?;
    let scores: Vec<PairScores> = pairs.par_iter().map(|(c, r)| score_pair(c, r, &idf)).collect();

    let n = scores.len() as f64;
    let mean = |f: &dyn Fn(&PairScores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let mean_prf = |f: &dyn Fn(&PairScores) -> Prf| Prf {
        precision: mean(&|s| f(s).precision),
        recall: mean(&|s| f(s).recall),
        f1: mean(&|s| f(s).f1),
    };

    Ok(MetricReport {
        bleu1: mean(&|s| s.bleu[0]),
        bleu2: mean(&|s| s.bleu[1]),
        bleu3: mean(&|s| s.bleu[2]),
        bleu4: mean(&|s| s.bleu[3]),
        sacrebleu: mean(&|s| s.sacrebleu),
        meteor: mean(&|s| s.meteor),
        rouge1: mean_prf(&|s| s.rouge1),
        rouge2: mean_prf(&|s| s.rouge2),
        rouge_l: mean_prf(&|s| s.rouge_l),
        cider: mean(&|s| s.cider),
        perplexity,
    })
}
