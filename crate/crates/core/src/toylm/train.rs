use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use super::data::Example;
use super::decode::greedy_decode;
use super::model::{Gradients, ModelParams};
use super::{GroupSet, ParamGroup, ToyLmError};
use crate::metrics::rouge_l;
use crate::promptkit::Stage;
use crate::scaledloss::{scaled_loss_batch, BatchItem, ScaleConfig, ScaleMode, ScaledLossValue, TokenDistSeq};
use crate::textnorm::normalize;

pub fn default_trainable(stage: Stage) -> GroupSet {
    match stage {
        Stage::S0 => [ParamGroup::MapVisual].into(),
        _ => ParamGroup::ALL.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage: Stage,
    pub trainable: GroupSet,
    pub epochs: usize,
    pub lr: f64,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub scale: Option<ScaleConfig>,
    /// Stops after this many steps even if epochs remain; the schedule
    /// spans the shorter of the two.
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// When set, every step also greedy-decodes the batch (up to this many
    /// tokens, before the update) and records the mean ROUGE-L F1.
    #[serde(default)]
    pub decode_monitor: Option<usize>,
}

impl TrainConfig {
    pub fn for_stage(stage: Stage, lr: f64, seed: u64) -> Self {
        TrainConfig {
            stage,
            trainable: default_trainable(stage),
            epochs: 2,
            lr,
            warmup_ratio: 0.03,
            batch_size: 8,
            seed,
            scale: (stage == Stage::S3).then(ScaleConfig::default),
            max_steps: None,
            decode_monitor: None,
        }
    }

    pub fn validate(&self) -> Result<(), ToyLmError> {
        let bad = |m: String| Err(ToyLmError::Config(m));
        if self.epochs == 0 || self.batch_size == 0 || self.max_steps == Some(0) {
            return bad("epochs, batch size and step limit must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad(format!("warmup ratio must lie in [0, 1), got {}", self.warmup_ratio));
        }
        match self.stage {
            Stage::S0 if self.trainable != default_trainable(Stage::S0) => {
                return bad("stage S0 trains only the map_visual group".into())
            }
            Stage::S1 | Stage::S2 | Stage::S3
                if ![ParamGroup::Embed, ParamGroup::Core, ParamGroup::Out]
                    .iter()
                    .all(|g| self.trainable.contains(g)) =>
            {
                return bad(format!("stage {} must train embed, core and out", self.stage))
            }
            _ => {}
        }
        match (self.stage, &self.scale) {
            (Stage::S3, None) => bad("stage S3 needs a scale config".into()),
            (Stage::S3, Some(s)) => s.validate().map_err(|e| ToyLmError::Config(e.to_string())),
            (_, Some(_)) => bad(format!("stage {} does not use a scale config", self.stage)),
            _ => Ok(()),
        }
    }
}

/// Linear warmup then cosine decay to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LrSchedule {
    pub fn new(base: f64, warmup_ratio: f64, total_steps: usize) -> Self {
        LrSchedule {
            base,
            warmup_steps: (warmup_ratio * total_steps as f64).ceil() as usize,
            total_steps,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        lr_at(self.base, self.warmup_steps, self.total_steps, step)
    }
}

pub fn lr_at(base: f64, warmup: usize, total: usize, step: usize) -> f64 {
    if step < warmup {
        return base * step as f64 / warmup as f64;
    }
    let progress = (step - warmup) as f64 / (total.saturating_sub(warmup)).max(1) as f64;
    base * 0.5 * (1.0 + (PI * progress.min(1.0)).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub l_ce: f64,
    pub l_bleu: f64,
    #[serde(rename = "l_rougeL")]
    pub l_rouge_l: f64,
    /// Metric scale of the batch. It multiplies the loss only when `mode`
    /// is not `cross_entropy`; otherwise it is computed with the default
    /// scale config for monitoring.
    pub l_br: f64,
    pub l_final: f64,
    /// `paper_literal`, `penalty` or `cross_entropy`.
    pub mode: String,
    /// Mean ROUGE-L F1 of free-running greedy decodes of the batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_rouge_l: Option<f64>,
    pub params_hash: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.l_final).collect()
    }
}

/// Batch means plus the per-sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub l_ce: f64,
    pub l_bleu: f64,
    pub l_rouge_l: f64,
    pub l_br: f64,
    pub l_final: f64,
    pub samples: Vec<ScaledLossValue>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Loss over the answer tokens of `batch` and gradients for `trainable`.
///
/// Stages S0 to S2 use the mean per-sample cross-entropy. At S3 each
/// sample's cross-entropy is multiplied by its metric scale, computed from
/// the teacher-forced argmax and treated as a constant. BLEU and ROUGE-L of
/// the argmax are reported either way.
pub fn loss_and_grads(
    params: &ModelParams,
    batch: &[Example],
    stage: Stage,
    scale: Option<&ScaleConfig>,
    trainable: &GroupSet,
) -> Result<(BatchLoss, Gradients), ToyLmError> {
    match (stage, scale) {
        (Stage::S3, None) => return Err(ToyLmError::Config("stage S3 needs a scale config".into())),
        (Stage::S3, _) => {}
        (_, Some(_)) => return Err(ToyLmError::Config(format!("stage {stage} does not scale the loss"))),
        _ => {}
    }
    if batch.is_empty() {
        return Err(ToyLmError::Argument("empty batch".into()));
    }
    let mut caches = Vec::with_capacity(batch.len());
    let mut preds = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for (i, ex) in batch.iter().enumerate() {
        if ex.labels.len() != ex.inputs.len() {
            return Err(ToyLmError::Argument(format!("example {i}: labels and inputs differ in length")));
        }
        let cache = params.forward_cache(&ex.inputs, &ex.visual)?;
        let rows: Vec<Vec<f64>> = ex
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_some())
            .map(|(t, _)| cache.probs.row(t).to_vec())
            .collect();
        if rows.is_empty() {
            return Err(ToyLmError::Argument(format!("example {i} has no answer tokens")));
        }
        preds.push(TokenDistSeq::new(rows).map_err(|e| ToyLmError::Numerical(format!("example {i}: {e}")))?);
        targets.push(ex.target_ids());
        caches.push(cache);
    }

    let monitor = scale.copied().unwrap_or_default();
    let items: Vec<BatchItem> = (0..batch.len())
        .map(|i| BatchItem {
            pred: &preds[i],
            target: &targets[i],
            y_label: &batch[i].reference,
        })
        .collect();
    let vocab = &params.vocab;
    let (_, samples) = scaled_loss_batch(&items, &monitor, |ids| vocab.detokenize(ids))?;

    let n = batch.len() as f64;
    let mut grads = Gradients::zeros(&params.config, trainable);
    for ((ex, cache), value) in batch.iter().zip(&caches).zip(&samples) {
        let weight = if scale.is_some() { value.l_br } else { 1.0 };
        let answer_len = targets_len(ex) as f64;
        let mut dlogits = Array2::zeros(cache.probs.raw_dim());
        for (t, label) in ex.labels.iter().enumerate() {
            if let Some(y) = *label {
                let mut row = dlogits.row_mut(t);
                row.assign(&cache.probs.row(t));
                row[y] -= 1.0;
                row.mapv_inplace(|x| x * weight / (answer_len * n));
            }
        }
        params.backward(cache, dlogits.view(), &mut grads);
    }

    let l_ce = mean(samples.iter().map(|s| s.l_ce));
    let loss = BatchLoss {
        l_ce,
        l_bleu: mean(samples.iter().map(|s| s.l_bleu)),
        l_rouge_l: mean(samples.iter().map(|s| s.l_rouge_l)),
        l_br: mean(samples.iter().map(|s| s.l_br)),
        l_final: if scale.is_some() {
            mean(samples.iter().map(|s| s.l_final))
        } else {
            l_ce
        },
        samples,
    };
    Ok((loss, grads))
}

fn targets_len(ex: &Example) -> usize {
    ex.labels.iter().filter(|l| l.is_some()).count()
}

/// Mean per-example answer cross-entropy, without gradients.
pub fn mean_cross_entropy(params: &ModelParams, examples: &[Example]) -> Result<f64, ToyLmError> {
    if examples.is_empty() {
        return Err(ToyLmError::Argument("no examples".into()));
    }
    let mut total = 0.0;
    for ex in examples {
        let lp = super::decode::teacher_forced_logprobs(params, ex)?;
        total -= lp.iter().sum::<f64>() / lp.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

fn decode_rouge(params: &ModelParams, batch: &[Example], max_len: usize) -> Result<f64, ToyLmError> {
    let scores = batch
        .par_iter()
        .map(|ex| {
            let ids = greedy_decode(params, ex.prompt(), &ex.visual, max_len)?;
            let candidate = normalize(&params.vocab.detokenize(&ids));
            Ok(rouge_l(&candidate, &normalize(&ex.reference)).f1)
        })
        .collect::<Result<Vec<f64>, ToyLmError>>()?;
    Ok(mean(scores.into_iter()))
}

fn hashes(params: &ModelParams) -> BTreeMap<String, String> {
    ParamGroup::ALL
        .iter()
        .map(|g| (g.name().to_owned(), params.group_hash(*g)))
        .collect()
}

/// Mini-batch SGD over `dataset` with the warmup/cosine schedule. The
/// example order is reshuffled every epoch from `config.seed`.
pub fn train(
    mut params: ModelParams,
    dataset: &[Example],
    config: &TrainConfig,
) -> Result<(ModelParams, TrainTrace), ToyLmError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(ToyLmError::Argument("empty dataset".into()));
    }
    let steps_per_epoch = dataset.len().div_ceil(config.batch_size);
    let total = (steps_per_epoch * config.epochs).min(config.max_steps.unwrap_or(usize::MAX));
    let schedule = LrSchedule::new(config.lr, config.warmup_ratio, total);
    let mode = match config.scale {
        None => "cross_entropy".to_owned(),
        Some(s) => match s.mode {
            ScaleMode::PaperLiteral => "paper_literal".to_owned(),
            ScaleMode::Penalty => "penalty".to_owned(),
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = TrainTrace::default();
    let mut step = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if step == total {
                break;
            }
            let batch: Vec<Example> = chunk.iter().map(|&i| dataset[i].clone()).collect();
            let lr = schedule.at(step);
            let decode_rouge_l = match config.decode_monitor {
                Some(max_len) => Some(decode_rouge(&params, &batch, max_len)?),
                None => None,
            };
            let (loss, grads) =
                match loss_and_grads(&params, &batch, config.stage, config.scale.as_ref(), &config.trainable) {
                    Ok(v) => v,
                    Err(ToyLmError::Numerical(_)) => {
                        return Err(ToyLmError::NonFinite {
                            step,
                            trace: Box::new(trace),
                        })
                    }
                    Err(e) => return Err(e),
                };
            let finite = loss.l_final.is_finite() && grads.is_finite();
            if finite {
                params.sgd_step(&grads, lr);
            }
            trace.records.push(TraceRecord {
                step,
                epoch,
                lr,
                l_ce: loss.l_ce,
                l_bleu: loss.l_bleu,
                l_rouge_l: loss.l_rouge_l,
                l_br: loss.l_br,
                l_final: loss.l_final,
                mode: mode.clone(),
                decode_rouge_l,
                params_hash: hashes(&params),
            });
            if !finite || !params.is_finite() {
                return Err(ToyLmError::NonFinite {
                    step,
                    trace: Box::new(trace),
                });
            }
            step += 1;
        }
    }
    Ok((params, trace))
}
