//! Brute-force reference implementations of the metrics and a runner that
//! compares them with the fast versions on random small instances and on a
//! handful of hand-computed points.
//!
//! Everything here is written for clarity over speed: n-grams are plain
//! vectors scanned linearly, the LCS is found by enumerating every
//! subsequence, and CIDEr uses dense vectors over an explicit vocabulary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{self, Prf};
use crate::textnorm::TokenSeq;

pub const ALPHABET: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
pub const MAX_LEN: usize = 8;
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub max_error: f64,
    pub detail: String,
}

impl OracleCheck {
    fn from_errors(name: &str, errors: &[f64], tolerance: f64) -> Self {
        let max_error = errors.iter().cloned().fold(0.0, f64::max);
        let bad = errors.iter().filter(|e| !(**e <= tolerance)).count();
        OracleCheck {
            name: name.to_owned(),
            passed: bad == 0,
            cases: errors.len(),
            max_error,
            detail: format!("{bad} of {} cases outside {tolerance:e}", errors.len()),
        }
    }

    fn point(name: &str, got: f64, expected: f64, tolerance: f64) -> Self {
        let err = (got - expected).abs();
        OracleCheck {
            name: name.to_owned(),
            passed: err <= tolerance,
            cases: 1,
            max_error: err,
            detail: format!("got {got:.12}, expected {expected:.12}"),
        }
    }
}

/// A candidate/reference pair plus a small reference corpus containing the
/// reference, for document frequencies.
#[derive(Debug, Clone)]
pub struct Instance {
    pub candidate: TokenSeq,
    pub reference: TokenSeq,
    pub corpus: Vec<TokenSeq>,
}

fn random_seq(rng: &mut ChaCha8Rng, min_len: usize) -> TokenSeq {
    let len = rng.gen_range(min_len..=MAX_LEN);
    TokenSeq::new((0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())])).expect("alphabet tokens are valid")
}

pub fn random_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let candidate = random_seq(&mut rng, 0);
            let reference = random_seq(&mut rng, 1);
            let others = rng.gen_range(1..=4);
            let mut corpus: Vec<TokenSeq> = (0..others).map(|_| random_seq(&mut rng, 1)).collect();
            corpus.push(reference.clone());
            corpus.shuffle(&mut rng);
            Instance {
                candidate,
                reference,
                corpus,
            }
        })
        .collect()
}

fn gram_list(seq: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= seq.len() {
        out.push(seq[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn occurrences(list: &[Vec<String>], gram: &[String]) -> usize {
    let mut c = 0;
    for g in list {
        if g.as_slice() == gram {
            c += 1;
        }
    }
    c
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// (clipped matches, candidate n-gram count)
pub fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = gram_list(candidate, n);
    let refs = gram_list(reference, n);
    let mut matched = 0;
    for g in distinct(&cand) {
        matched += occurrences(&cand, &g).min(occurrences(&refs, &g));
    }
    (matched, cand.len())
}

fn brevity(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

pub fn bleu_k(candidate: &[String], reference: &[String], k: usize) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=k {
        let (m, t) = clipped_matches(candidate, reference, n);
        if m == 0 {
            return 0.0;
        }
        product *= m as f64 / t as f64;
    }
    brevity(candidate.len(), reference.len()) * product.powf(1.0 / k as f64)
}

pub fn sacrebleu(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    let mut zero_orders = 0;
    for n in 1..=4 {
        let (m, t) = clipped_matches(candidate, reference, n);
        if t == 0 || (n == 1 && m == 0) {
            return 0.0;
        }
        if m == 0 {
            zero_orders += 1;
            product *= 1.0 / (2f64.powi(zero_orders) * t as f64);
        } else {
            product *= m as f64 / t as f64;
        }
    }
    (brevity(candidate.len(), reference.len()) * product.powf(0.25)).min(1.0)
}

fn prf(overlap: usize, c: usize, r: usize) -> (f64, f64, f64) {
    let p = if c == 0 { 0.0 } else { overlap as f64 / c as f64 };
    let r = if r == 0 { 0.0 } else { overlap as f64 / r as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn rouge_n(candidate: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
    let (m, t) = clipped_matches(candidate, reference, n);
    prf(m, t, gram_list(reference, n).len())
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// Longest common subsequence length by trying every subsequence of `a`.
pub fn lcs_exhaustive(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 20, "exhaustive enumeration is for short sequences");
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if is_subsequence(&sub, b) {
            best = size;
        }
    }
    best
}

pub fn rouge_l(candidate: &[String], reference: &[String]) -> (f64, f64, f64) {
    prf(lcs_exhaustive(candidate, reference), candidate.len(), reference.len())
}

/// Number of corpus documents containing `gram` anywhere.
pub fn doc_frequency(corpus: &[TokenSeq], gram: &[String]) -> usize {
    corpus
        .iter()
        .filter(|d| occurrences(&gram_list(d.tokens(), gram.len()), gram) > 0)
        .count()
}

pub fn cider(candidate: &[String], reference: &[String], corpus: &[TokenSeq]) -> f64 {
    let n_docs = corpus.len() as f64;
    let mut sum = 0.0;
    for n in 1..=4 {
        let cand = gram_list(candidate, n);
        let refs = gram_list(reference, n);
        let mut all = cand.clone();
        all.extend(refs.iter().cloned());
        let axes = distinct(&all);
        let mut u = vec![0.0; axes.len()];
        let mut v = vec![0.0; axes.len()];
        for (i, g) in axes.iter().enumerate() {
            let idf = (n_docs / doc_frequency(corpus, g).max(1) as f64).ln();
            u[i] = occurrences(&cand, g) as f64 * idf;
            v[i] = occurrences(&refs, g) as f64 * idf;
        }
        let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu > 0.0 && nv > 0.0 {
            sum += dot / (nu * nv);
        }
    }
    10.0 * sum / 4.0
}

fn prf_error(a: Prf, (p, r, f): (f64, f64, f64)) -> f64 {
    (a.precision - p).abs().max((a.recall - r).abs()).max((a.f1 - f).abs())
}

/// Compares the fast metrics with the brute-force versions on `count`
/// random instances.
pub fn randomized_checks(count: usize, seed: u64) -> Vec<OracleCheck> {
    let instances = random_instances(count, seed);
    let (mut lcs, mut rl, mut bleu, mut sacre, mut rn, mut cid, mut idf) =
        (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    for inst in &instances {
        let (c, r) = (inst.candidate.tokens(), inst.reference.tokens());
        lcs.push(if metrics::lcs_len(c, r) == lcs_exhaustive(c, r) { 0.0 } else { f64::INFINITY });
        let fast = metrics::rouge_l(&inst.candidate, &inst.reference);
        let slow = rouge_l(c, r);
        rl.push(if fast == Prf::new(slow.0, slow.1) && fast.f1 == slow.2 { 0.0 } else { f64::INFINITY });
        for k in 1..=4 {
            let fast = metrics::bleu_k(&inst.candidate, &inst.reference, k).expect("order in range");
            bleu.push((fast - bleu_k(c, r, k)).abs());
        }
        sacre.push((metrics::sacrebleu(&inst.candidate, &inst.reference) - sacrebleu(c, r)).abs());
        for n in 1..=4 {
            let fast = metrics::rouge_n(&inst.candidate, &inst.reference, n).expect("positive order");
            rn.push(prf_error(fast, rouge_n(c, r, n)));
        }
        let table = metrics::build_idf(&inst.corpus).expect("corpus is not empty");
        cid.push((metrics::cider(&inst.candidate, &inst.reference, &table) - cider(c, r, &inst.corpus)).abs());
        let mut mismatches = 0usize;
        for doc in &inst.corpus {
            for n in 1..=4 {
                for g in gram_list(doc.tokens(), n) {
                    if table.doc_count(&g) != doc_frequency(&inst.corpus, &g) {
                        mismatches += 1;
                    }
                }
            }
        }
        idf.push(if mismatches == 0 { 0.0 } else { f64::INFINITY });
    }
    vec![
        OracleCheck::from_errors("lcs_exhaustive", &lcs, 0.0),
        OracleCheck::from_errors("rouge_l_exact", &rl, 0.0),
        OracleCheck::from_errors("bleu_k", &bleu, TOLERANCE),
        OracleCheck::from_errors("sacrebleu", &sacre, TOLERANCE),
        OracleCheck::from_errors("rouge_n", &rn, TOLERANCE),
        OracleCheck::from_errors("cider", &cid, TOLERANCE),
        OracleCheck::from_errors("idf_doc_counts", &idf, 0.0),
    ]
}

fn seq(tokens: &[&str]) -> TokenSeq {
    TokenSeq::new(tokens.iter().copied()).expect("valid tokens")
}

/// Hand-computed metric values.
pub fn closed_form_checks() -> Vec<OracleCheck> {
    let mut out = Vec::new();
    let bleu1 = metrics::bleu_k(&seq(&["a", "a", "a", "a"]), &seq(&["a", "b", "c", "d"]), 1).unwrap_or(f64::NAN);
    out.push(OracleCheck::point("bleu1_clipped", bleu1, 0.25, 0.0));

    let short = metrics::bleu_k(&seq(&["a", "b"]), &seq(&["a", "b", "c", "d"]), 1).unwrap_or(f64::NAN);
    out.push(OracleCheck::point("brevity_penalty", short, (-1f64).exp(), TOLERANCE));

    // p1 = 4/5, p2 = 3/4, p3 = 2/3, p4 = 1/2, no smoothing needed.
    let sb = metrics::sacrebleu(&seq(&["a", "b", "c", "d", "e"]), &seq(&["a", "b", "c", "d", "f"]));
    let expected = (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
    out.push(OracleCheck::point("sacrebleu_near_match", sb, expected, 1e-12));

    let r2 = metrics::rouge_n(&seq(&["a", "b", "c"]), &seq(&["a", "b", "d"]), 2).unwrap_or_default();
    out.push(OracleCheck::point("rouge2_f1", r2.f1, 0.5, 0.0));

    let rl = metrics::rouge_l(&seq(&["a", "b", "c"]), &seq(&["a", "c", "b"]));
    out.push(OracleCheck::point("rouge_l_f1", rl.f1, 2.0 / 3.0, TOLERANCE));

    let the_cat = seq(&["the", "cat"]);
    out.push(OracleCheck::point("meteor_two_tokens", metrics::meteor(&the_cat, &the_cat), 0.9375, TOLERANCE));
    let a = seq(&["a"]);
    out.push(OracleCheck::point("meteor_one_token", metrics::meteor(&a, &a), 0.5, TOLERANCE));

    let uniform = vec![0.1f64.ln(); 7];
    out.push(OracleCheck::point(
        "perplexity_uniform",
        metrics::perplexity(&uniform).unwrap_or(f64::NAN),
        10.0,
        TOLERANCE,
    ));
    let halves = [0.5f64.ln(), 0.25f64.ln()];
    out.push(OracleCheck::point(
        "perplexity_mixed",
        metrics::perplexity(&halves).unwrap_or(f64::NAN),
        8f64.sqrt(),
        TOLERANCE,
    ));

    let corpus = vec![
        seq(&["mix", "the", "flour", "and", "water"]),
        seq(&["boil", "the", "pasta"]),
        seq(&["grill", "fish", "with", "lime"]),
    ];
    let table = metrics::build_idf(&corpus).expect("non-empty corpus");
    let c = metrics::cider(&corpus[0], &corpus[0], &table);
    out.push(OracleCheck::point("cider_self_match", c, 10.0, TOLERANCE));
    out
}

/// Randomized and closed-form checks together.
pub fn run_all(count: usize, seed: u64) -> Vec<OracleCheck> {
    let mut out = randomized_checks(count, seed);
    out.extend(closed_form_checks());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn brute_force_hand_values() {
        assert_eq!(lcs_exhaustive(&toks("a b c"), &toks("a c b")), 2);
        assert_eq!(lcs_exhaustive(&toks(""), &toks("a")), 0);
        assert_eq!(clipped_matches(&toks("a a a a"), &toks("a b c d"), 1), (1, 4));
        assert_eq!(rouge_n(&toks("a b c"), &toks("a b d"), 2), (0.5, 0.5, 0.5));
        assert!((bleu_k(&toks("a b"), &toks("a b c d"), 1) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn instances_respect_bounds() {
        let inst = random_instances(200, 3);
        assert!(inst.iter().all(|i| i.candidate.len() <= MAX_LEN && i.reference.len() <= MAX_LEN));
        assert!(inst.iter().all(|i| i.corpus.contains(&i.reference)));
        assert!(inst.iter().any(|i| i.candidate.is_empty()));
    }

    #[test]
    fn all_checks_pass() {
        for check in run_all(300, 11) {
            assert!(check.passed, "{check:?}");
        }
    }
}
