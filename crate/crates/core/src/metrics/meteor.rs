//! METEOR with exact and stem matching.
//!
//! Alignment runs in two stages: exact token equality, then equality of
//! suffix-stripped stems among the tokens still unmatched. Each stage matches
//! as many tokens as possible (the count is fixed by per-type multiplicities).
//! Among those maximal alignments the one with the fewest chunks is chosen:
//! exhaustively when the number of alignments is at most
//! [`EXHAUSTIVE_LIMIT`], otherwise by greedy longest-run tiling.

use std::collections::BTreeMap;

use crate::textnorm::TokenSeq;

/// Recall weight in the harmonic mean (`Fmean = 10PR / (R + 9P)`).
pub const RECALL_WEIGHT: f64 = 9.0;
pub const PENALTY_GAMMA: f64 = 0.5;
pub const PENALTY_BETA: f64 = 3.0;

/// Upper bound on the number of alignments searched exhaustively.
pub const EXHAUSTIVE_LIMIT: u64 = 20_000;

const SUFFIXES: [&str; 4] = ["ing", "ed", "es", "s"];

/// Suffix-stripping stemmer: drops one of `ing`, `ed`, `es`, `s` (keeping at
/// least three characters), then a trailing `e` if four or more remain.
pub fn stem(word: &str) -> &str {
    let mut base = word;
    for suffix in SUFFIXES {
        if let Some(stripped) = word.strip_suffix(suffix) {
            if stripped.chars().count() >= 3 {
                base = stripped;
                break;
            }
        }
    }
    match base.strip_suffix('e') {
        Some(stripped) if stripped.chars().count() >= 3 => stripped,
        _ => base,
    }
}

/// Result of aligning a candidate against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

pub fn meteor(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let align = align(candidate, reference);
    meteor_from_alignment(align, candidate.len(), reference.len())
}

pub(crate) fn meteor_from_alignment(align: Alignment, cand_len: usize, ref_len: usize) -> f64 {
    if align.matches == 0 {
        return 0.0;
    }
    let m = align.matches as f64;
    let precision = m / cand_len as f64;
    let recall = m / ref_len as f64;
    let fmean = (1.0 + RECALL_WEIGHT) * precision * recall / (recall + RECALL_WEIGHT * precision);
    let penalty = PENALTY_GAMMA * (align.chunks as f64 / m).powf(PENALTY_BETA);
    fmean * (1.0 - penalty)
}

/// Aligns tokens, returning the match count and the minimal chunk count found.
pub fn align(candidate: &TokenSeq, reference: &TokenSeq) -> Alignment {
    let cand: Vec<&str> = candidate.iter().collect();
    let refs: Vec<&str> = reference.iter().collect();
    let cand_stems: Vec<&str> = cand.iter().map(|w| stem(w)).collect();
    let ref_stems: Vec<&str> = refs.iter().map(|w| stem(w)).collect();

    let exact_groups = shared_groups(&cand, &refs, &vec![false; cand.len()], &vec![false; refs.len()]);
    let exact_count = alignment_count(&exact_groups);

    // Stage-two multiplicities do not depend on which exact positions were
    // taken, so the search size is known up front.
    let stage_two_size = {
        let mut cand_left = BTreeMap::<&str, usize>::new();
        let mut ref_left = BTreeMap::<&str, usize>::new();
        for g in &exact_groups {
            let k = g.cand.len().min(g.refs.len());
            *cand_left.entry(stem(g.key)).or_default() += g.cand.len() - k;
            *ref_left.entry(stem(g.key)).or_default() += g.refs.len() - k;
        }
        stem_class_remainders(&cand, &refs, &mut cand_left, &mut ref_left);
        cand_left
            .iter()
            .map(|(s, &a)| permutations(a, ref_left.get(s).copied().unwrap_or(0)))
            .fold(1u64, u64::saturating_mul)
    };

    let mut search = Search {
        cand_stems: &cand_stems,
        ref_stems: &ref_stems,
        cand_used: vec![false; cand.len()],
        ref_used: vec![false; refs.len()],
        pairs: Vec::new(),
        best: None,
    };

    if exact_count.saturating_mul(stage_two_size) <= EXHAUSTIVE_LIMIT {
        search.exact_stage(&exact_groups, 0);
        search.best.unwrap_or(Alignment { matches: 0, chunks: 0 })
    } else {
        let mut pairs = Vec::new();
        let mut cand_used = vec![false; cand.len()];
        let mut ref_used = vec![false; refs.len()];
        tile(&cand, &refs, &mut cand_used, &mut ref_used, &mut pairs);
        tile(&cand_stems, &ref_stems, &mut cand_used, &mut ref_used, &mut pairs);
        Alignment {
            matches: pairs.len(),
            chunks: count_chunks(&mut pairs),
        }
    }
}

// Adds counts for tokens absent from the exact groups (present on one side only).
fn stem_class_remainders<'a>(
    cand: &[&'a str],
    refs: &[&'a str],
    cand_left: &mut BTreeMap<&'a str, usize>,
    ref_left: &mut BTreeMap<&'a str, usize>,
) {
    let in_refs = |w: &str| refs.contains(&w);
    let in_cand = |w: &str| cand.contains(&w);
    for w in cand.iter().filter(|w| !in_refs(w)) {
        *cand_left.entry(stem(w)).or_default() += 1;
    }
    for w in refs.iter().filter(|w| !in_cand(w)) {
        *ref_left.entry(stem(w)).or_default() += 1;
    }
}

struct Group<'a> {
    key: &'a str,
    cand: Vec<usize>,
    refs: Vec<usize>,
}

// Positions of each shared key among unused tokens.
fn shared_groups<'a>(cand: &[&'a str], refs: &[&'a str], cand_used: &[bool], ref_used: &[bool]) -> Vec<Group<'a>> {
    let mut map: BTreeMap<&str, Group> = BTreeMap::new();
    for (i, &w) in cand.iter().enumerate().filter(|(i, _)| !cand_used[*i]) {
        map.entry(w)
            .or_insert_with(|| Group {
                key: w,
                cand: Vec::new(),
                refs: Vec::new(),
            })
            .cand
            .push(i);
    }
    for (j, &w) in refs.iter().enumerate().filter(|(j, _)| !ref_used[*j]) {
        if let Some(g) = map.get_mut(w) {
            g.refs.push(j);
        }
    }
    map.into_values().filter(|g| !g.refs.is_empty()).collect()
}

fn permutations(a: usize, b: usize) -> u64 {
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    (0..small).fold(1u64, |acc, i| acc.saturating_mul((big - i) as u64))
}

fn alignment_count(groups: &[Group]) -> u64 {
    groups
        .iter()
        .map(|g| permutations(g.cand.len(), g.refs.len()))
        .fold(1u64, u64::saturating_mul)
}

fn count_chunks(pairs: &mut [(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    pairs.sort_unstable();
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

struct Search<'s, 'a> {
    cand_stems: &'s [&'a str],
    ref_stems: &'s [&'a str],
    cand_used: Vec<bool>,
    ref_used: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    best: Option<Alignment>,
}

impl Search<'_, '_> {
    fn exact_stage(&mut self, groups: &[Group], gi: usize) {
        if gi == groups.len() {
            let stem_groups = shared_groups(self.cand_stems, self.ref_stems, &self.cand_used, &self.ref_used);
            self.stem_stage(&stem_groups, 0);
            return;
        }
        let g = &groups[gi];
        self.assign(g, gi, groups, true);
    }

    fn stem_stage(&mut self, groups: &[Group], gi: usize) {
        if gi == groups.len() {
            let mut pairs = self.pairs.clone();
            let cand = Alignment {
                matches: pairs.len(),
                chunks: count_chunks(&mut pairs),
            };
            if self.best.is_none_or(|b| cand.chunks < b.chunks) {
                self.best = Some(cand);
            }
            return;
        }
        self.assign(&groups[gi], gi, groups, false);
    }

    // Enumerates every maximal injective assignment within one group.
    fn assign(&mut self, g: &Group, gi: usize, groups: &[Group], exact: bool) {
        let k = g.cand.len().min(g.refs.len());
        self.assign_rec(g, k, 0, gi, groups, exact);
    }

    fn assign_rec(&mut self, g: &Group, k: usize, placed: usize, gi: usize, groups: &[Group], exact: bool) {
        if placed == k {
            if exact {
                self.exact_stage(groups, gi + 1);
            } else {
                self.stem_stage(groups, gi + 1);
            }
            return;
        }
        // Every position on the shorter side is matched; try each free
        // partner on the longer side.
        let cand_short = g.cand.len() <= g.refs.len();
        let (short, long) = if cand_short { (&g.cand, &g.refs) } else { (&g.refs, &g.cand) };
        let s = short[placed];
        for &l in long {
            let (ci, rj) = if cand_short { (s, l) } else { (l, s) };
            if self.cand_used[ci] || self.ref_used[rj] {
                continue;
            }
            self.cand_used[ci] = true;
            self.ref_used[rj] = true;
            self.pairs.push((ci, rj));
            self.assign_rec(g, k, placed + 1, gi, groups, exact);
            self.pairs.pop();
            self.cand_used[ci] = false;
            self.ref_used[rj] = false;
        }
    }
}

// Greedy string tiling: repeatedly align the longest run of equal, unused
// tokens (earliest candidate then reference position on ties).
fn tile(cand: &[&str], refs: &[&str], cand_used: &mut [bool], ref_used: &mut [bool], pairs: &mut Vec<(usize, usize)>) {
    loop {
        let mut best = (0usize, 0usize, 0usize);
        let mut run = vec![0usize; refs.len() + 1];
        for i in (0..cand.len()).rev() {
            let mut next = vec![0usize; refs.len() + 1];
            for j in (0..refs.len()).rev() {
                if !cand_used[i] && !ref_used[j] && cand[i] == refs[j] {
                    next[j] = run[j + 1] + 1;
                    if next[j] >= best.2 {
                        best = (i, j, next[j]);
                    }
                }
            }
            run = next;
        }
        let (i, j, len) = best;
        if len == 0 {
            return;
        }
        for k in 0..len {
            cand_used[i + k] = true;
            ref_used[j + k] = true;
            pairs.push((i + k, j + k));
        }
    }
}
