use crate::textnorm::{ngrams, TokenSeq};

use super::{MetricError, Prf};

/// ROUGE-N from clipped n-gram overlap.
pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> Result<Prf, MetricError> {
    if n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let cand = ngrams(candidate, n);
    let refs = ngrams(reference, n);
    let overlap = cand.clipped_overlap(&refs);
    Ok(Prf::from_counts(overlap, cand.total(), refs.total()))
}

/// ROUGE-L from the longest common subsequence.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> Prf {
    let lcs = lcs_len(candidate.tokens(), reference.tokens());
    Prf::from_counts(lcs, candidate.len(), reference.len())
}

/// Length of a longest common subsequence, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> TokenSeq {
        TokenSeq::from_words(s)
    }

    #[test]
    fn rouge_n_examples() {
        assert_eq!(rouge_n(&w("a b c"), &w("a b c"), 1).unwrap(), Prf::new(1.0, 1.0));
        assert_eq!(rouge_n(&w("a b c"), &w("x y z"), 1).unwrap(), Prf::new(0.0, 0.0));
        let prf = rouge_n(&w("a b c"), &w("a b d"), 2).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (0.5, 0.5, 0.5));
        assert!(rouge_n(&w("a"), &w("a"), 0).is_err());
    }

    #[test]
    fn rouge_l_examples() {
        assert_eq!(rouge_l(&w("a b c"), &w("a b c")).f1, 1.0);
        let prf = rouge_l(&w("a b c"), &w("a c b"));
        assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((prf.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rouge_l(&TokenSeq::default(), &w("a")), Prf::default());
        assert_eq!(rouge_l(&w("a"), &TokenSeq::default()), Prf::default());
    }

    #[test]
    fn lcs_small_cases() {
        assert_eq!(lcs_len(b"ABCBDAB", b"BDCABA"), 4);
        assert_eq!(lcs_len::<u8>(b"", b"abc"), 0);
        assert_eq!(lcs_len(b"abc", b"abc"), 3);
    }
}
