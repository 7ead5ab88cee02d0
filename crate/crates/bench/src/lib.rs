//! Fixtures shared by the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recipe_forge::promptkit::{build_dialogs, default_bank, DialogExample, Stage};
use recipe_forge::synth::{generate, SynthConfig};
use recipe_forge::textnorm::{normalize, TokenSeq};
use recipe_forge::toylm::{encode_dialog, init_model, Example, ModelParams, Vocab, ASSISTANT_TAG, HUMAN_TAG};

pub const D_VIS: usize = 16;

pub fn dialogs(count: usize, stage: Stage, seed: u64) -> Vec<DialogExample> {
    let set = generate(&SynthConfig {
        count,
        d_vis: D_VIS,
        seed,
        image_rate: 0.7,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_dialogs(&set, &default_bank(), stage, &mut rng).expect("synthetic recipes build")
}

/// Candidate/reference pairs where each candidate is its reference with
/// every third token dropped and the first two swapped.
pub fn metric_pairs(count: usize) -> Vec<(TokenSeq, TokenSeq)> {
    dialogs(count, Stage::S1, 11)
        .iter()
        .map(|d| {
            let reference = normalize(&d.target);
            let mut words: Vec<&str> = reference
                .tokens()
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 3 != 2)
                .map(|(_, w)| w.as_str())
                .collect();
            if words.len() > 1 {
                words.swap(0, 1);
            }
            (TokenSeq::from_words(&words.join(" ")), reference)
        })
        .collect()
}

/// A fresh toy model and encoded S2 examples.
pub fn toy_setup(count: usize, d_model: usize, context: usize) -> (ModelParams, Vec<Example>) {
    let ds = dialogs(count, Stage::S2, 5);
    let mut texts: Vec<&str> = vec![HUMAN_TAG, ASSISTANT_TAG];
    for d in &ds {
        texts.push(&d.query);
        texts.push(&d.target);
    }
    let vocab = Vocab::build(texts, 512).expect("vocabulary");
    let examples = ds
        .iter()
        .map(|d| encode_dialog(&vocab, &d.query, &d.target, d.visual.clone(), context).expect("encodes"))
        .collect();
    let params = init_model(vocab, d_model, D_VIS, context, 2 * d_model, 1).expect("model");
    (params, examples)
}
