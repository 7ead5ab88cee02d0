use crate::textnorm::{ngrams, TokenSeq};

use super::MetricError;

/// Modified precision for order `n`: (clipped matches, candidate n-gram count).
pub(crate) fn clipped_counts(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> (usize, usize) {
    let cand = ngrams(candidate, n);
    let refs = ngrams(reference, n);
    (cand.clipped_overlap(&refs), cand.total())
}

/// `min(1, exp(1 - r/c))`; zero for an empty candidate.
pub fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        return 0.0;
    }
    let ratio = reference_len as f64 / candidate_len as f64;
    (1.0 - ratio).exp().min(1.0)
}

/// Unsmoothed sentence BLEU of order `k` (1..=4).
///
/// Geometric mean of clipped precisions for orders `1..=k` times the brevity
/// penalty. Any zero precision (including a candidate shorter than `k`) makes
/// the score zero.
pub fn bleu_k(candidate: &TokenSeq, reference: &TokenSeq, k: usize) -> Result<f64, MetricError> {
    if !(1..=4).contains(&k) {
        return Err(MetricError::BleuOrder(k));
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=k {
        let (matched, total) = clipped_counts(candidate, reference, n);
        if matched == 0 {
            return Ok(0.0);
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    Ok(brevity_penalty(candidate.len(), reference.len()) * (log_sum / k as f64).exp())
}

/// Sentence BLEU-4 with exponential smoothing of zero-match orders.
///
/// The j-th order (counting from 1, in order n = 1..4) whose clipped match
/// count is zero gets precision `1 / (2^j * total_n)`. An order with no
/// candidate n-grams at all (candidate shorter than n) has no defined
/// precision and drives the score to zero, as sacrebleu does without
/// effective-order. No unigram match at all also scores zero.
pub fn sacrebleu(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut smooth = 1.0;
    for n in 1..=4 {
        let (matched, total) = clipped_counts(candidate, reference, n);
        if total == 0 || (n == 1 && matched == 0) {
            return 0.0;
        }
        let precision = if matched == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total as f64)
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let score = brevity_penalty(candidate.len(), reference.len()) * (log_sum / 4.0).exp();
    score.clamp(0.0, 1.0)
}
