use std::collections::{BTreeMap, BTreeSet};

use crate::textnorm::{ngrams, NGramBag, TokenSeq};

use super::MetricError;

/// Highest n-gram order used by CIDEr.
pub const CIDER_MAX_ORDER: usize = 4;
/// CIDEr's conventional scale factor.
pub const CIDER_SCALE: f64 = 10.0;

/// Document frequencies of n-grams (orders 1..=4) over reference documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdfTable {
    max_order: usize,
    doc_counts: BTreeMap<Vec<String>, usize>,
    num_docs: usize,
}

impl IdfTable {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn doc_count(&self, gram: &[String]) -> usize {
        self.doc_counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], usize)> {
        self.doc_counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// `ln(num_docs / max(1, doc_count))`.
    pub fn idf(&self, gram: &[String]) -> f64 {
        (self.num_docs as f64 / self.doc_count(gram).max(1) as f64).ln()
    }
}

pub fn build_idf(references: &[TokenSeq]) -> Result<IdfTable, MetricError> {
    if references.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut doc_counts = BTreeMap::new();
    for doc in references {
        let mut seen = BTreeSet::new();
        for n in 1..=CIDER_MAX_ORDER {
            for window in doc.tokens().windows(n) {
                seen.insert(window);
            }
        }
        for gram in seen {
            *doc_counts.entry(gram.to_vec()).or_insert(0) += 1;
        }
    }
    Ok(IdfTable {
        max_order: CIDER_MAX_ORDER,
        doc_counts,
        num_docs: references.len(),
    })
}

/// CIDEr: 10 × mean over n = 1..4 of the cosine between TF-IDF vectors.
pub fn cider(candidate: &TokenSeq, reference: &TokenSeq, idf: &IdfTable) -> f64 {
    let total: f64 = (1..=CIDER_MAX_ORDER)
        .map(|n| cosine(&ngrams(candidate, n), &ngrams(reference, n), idf))
        .sum();
    CIDER_SCALE * total / CIDER_MAX_ORDER as f64
}

fn cosine(a: &NGramBag, b: &NGramBag, idf: &IdfTable) -> f64 {
    let weight = |gram: &[String], tf: usize| tf as f64 * idf.idf(gram);
    let norm = |bag: &NGramBag| bag.iter().map(|(g, c)| weight(g, c).powi(2)).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(g, c)| {
            let other = b.get(g);
            (other > 0).then(|| weight(g, c) * weight(g, other))
        })
        .sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
