use super::data::Example;
use super::model::ModelParams;
use super::vocab::{IMAGE, PAD, STOP};
use super::ToyLmError;

/// Argmax continuation of `prompt` until STOP, `max_len` tokens or the end
/// of the context. PAD and IMAGE are never emitted. The returned ids
/// exclude STOP.
pub fn greedy_decode(
    params: &ModelParams,
    prompt: &[usize],
    visual: &[f64],
    max_len: usize,
) -> Result<Vec<usize>, ToyLmError> {
    if max_len == 0 {
        return Err(ToyLmError::Argument("max_len must be at least 1".into()));
    }
    let mut seq = prompt.to_vec();
    let mut out = Vec::new();
    while out.len() < max_len {
        let cache = params.forward_cache(&seq, visual)?;
        let last = cache.probs.row(seq.len() - 1);
        let next = last
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != PAD && i != IMAGE)
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0;
        if next == STOP {
            break;
        }
        out.push(next);
        if seq.len() == params.config.context {
            break;
        }
        seq.push(next);
    }
    Ok(out)
}

/// Natural-log probability of each answer token under teacher forcing.
pub fn teacher_forced_logprobs(params: &ModelParams, example: &Example) -> Result<Vec<f64>, ToyLmError> {
    let cache = params.forward_cache(&example.inputs, &example.visual)?;
    Ok(example
        .labels
        .iter()
        .enumerate()
        .filter_map(|(t, l)| l.map(|y| cache.probs[[t, y]].max(crate::scaledloss::PROB_FLOOR).ln()))
        .collect())
}
