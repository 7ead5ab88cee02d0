use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{InputSet, PromptError, PromptTemplate, Stage, TargetSet};

pub const DEFAULT_DROPOUT_FRACTION: f64 = 0.5;

/// A drawn task: the template, the targets it asks for and which of its
/// inputs are actually shown.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSample {
    pub template: PromptTemplate,
    pub stage: Stage,
    pub target_kinds: TargetSet,
    pub input_mask: InputSet,
    /// Maximum fraction of ingredients hidden from the query.
    pub dropout: f64,
}

impl TaskSample {
    /// A sample that presents every required input of `template`, with the
    /// stage's default dropout.
    pub fn full(template: PromptTemplate, stage: Stage) -> TaskSample {
        TaskSample {
            target_kinds: template.targets.clone(),
            input_mask: template.required_inputs.clone(),
            template,
            stage,
            dropout: if stage.uses_dropout() { DEFAULT_DROPOUT_FRACTION } else { 0.0 },
        }
    }

    pub fn without_dropout(mut self) -> TaskSample {
        self.dropout = 0.0;
        self
    }

    /// Restricts the presented inputs; anything outside the template's
    /// requirements is dropped.
    pub fn with_mask(mut self, mask: &InputSet) -> TaskSample {
        self.input_mask = self.template.required_inputs.intersection(mask).copied().collect();
        self
    }
}

/// Draws a target set uniformly among those the stage offers, then a
/// template uniformly among the ones producing that set.
pub fn sample_task<R: Rng + ?Sized>(bank: &[PromptTemplate], stage: Stage, rng: &mut R) -> Result<TaskSample, PromptError> {
    let applicable: Vec<&PromptTemplate> = bank.iter().filter(|t| t.applies_to(stage)).collect();
    let mut target_sets: Vec<&TargetSet> = applicable.iter().map(|t| &t.targets).collect();
    target_sets.sort();
    target_sets.dedup();
    let targets = *target_sets.choose(rng).ok_or(PromptError::NoApplicableTemplate(stage))?;
    let candidates: Vec<&&PromptTemplate> = applicable.iter().filter(|t| &t.targets == targets).collect();
    let template = (**candidates.choose(rng).expect("target set came from a template")).clone();
    Ok(TaskSample::full(template, stage))
}

/// Removes k distinct ingredients, k uniform on 0..=floor(max_frac * n),
/// keeping the survivors in order.
pub fn ingredient_dropout<R: Rng + ?Sized>(ingredients: &[String], max_frac: f64, rng: &mut R) -> Vec<String> {
    assert!((0.0..1.0).contains(&max_frac), "max_frac must lie in [0, 1), got {max_frac}");
    let n = ingredients.len();
    let max_k = (max_frac * n as f64).floor() as usize;
    let k = rng.gen_range(0..=max_k);
    if k == 0 {
        return ingredients.to_vec();
    }
    let mut removed = vec![false; n];
    for i in sample(rng, n, k) {
        removed[i] = true;
    }
    ingredients
        .iter()
        .zip(removed)
        .filter_map(|(s, gone)| (!gone).then(|| s.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::super::{default_bank, InputKind, TargetKind};
    use super::*;

    fn tpl(id: &str, targets: &[TargetKind]) -> PromptTemplate {
        PromptTemplate {
            id: id.into(),
            stages: [Stage::S2, Stage::S3].into(),
            required_inputs: [InputKind::Image].into(),
            targets: targets.iter().copied().collect(),
            template: format!("prompt {id}"),
        }
    }

    #[test]
    fn early_stages_only_draw_instructions() {
        let bank = default_bank();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for stage in [Stage::S0, Stage::S1] {
            for _ in 0..200 {
                let s = sample_task(&bank, stage, &mut rng).unwrap();
                assert_eq!(s.target_kinds, [TargetKind::Instructions].into());
            }
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let bank = default_bank();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_task(&bank, Stage::S2, &mut rng).unwrap().template.id)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn no_template_is_an_error() {
        let bank = vec![tpl("a", &[TargetKind::Title])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_task(&bank, Stage::S1, &mut rng),
            Err(PromptError::NoApplicableTemplate(Stage::S1))
        ));
    }

    // Target sets are drawn uniformly even when template counts are skewed.
    // Frequencies are compared against an independent multinomial simulation
    // with a different generator.
    #[test]
    fn target_sets_are_uniform() {
        use TargetKind::*;
        let bank = vec![
            tpl("t1", &[Title]),
            tpl("t2", &[Title]),
            tpl("t3", &[Title]),
            tpl("g1", &[Ingredients]),
            tpl("s1", &[Instructions]),
            tpl("s2", &[Instructions]),
            tpl("f1", &[Title, Ingredients, Instructions]),
        ];
        let draws = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts: BTreeMap<TargetSet, usize> = BTreeMap::new();
        for _ in 0..draws {
            *counts.entry(sample_task(&bank, Stage::S2, &mut rng).unwrap().target_kinds).or_default() += 1;
        }
        assert_eq!(counts.len(), 4);

        let mut sim_rng = rand::rngs::StdRng::seed_from_u64(99);
        let mut simulated = [0usize; 4];
        for _ in 0..draws {
            simulated[sim_rng.gen_range(0..4)] += 1;
        }
        let p = 0.25;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let expected = draws as f64 * p;
        for (&c, &s) in counts.values().zip(&simulated) {
            assert!((c as f64 - expected).abs() < 3.0 * sd, "observed {c}");
            assert!((s as f64 - expected).abs() < 3.0 * sd, "simulated {s}");
            // Two independent draws of the same law differ by at most 3*sqrt(2)*sd.
            assert!((c as f64 - s as f64).abs() < 3.0 * 2f64.sqrt() * sd);
        }
    }

    #[test]
    fn dropout_identity_and_bounds() {
        let ing: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(ingredient_dropout(&ing, 0.0, &mut rng), ing);
            let out = ingredient_dropout(&ing, 0.5, &mut rng);
            assert!((2..=4).contains(&out.len()));
        }
    }

    // Chi-squared test of the output length against the two-stage model:
    // k uniform on {0..3} for six ingredients at half dropout.
    #[test]
    fn dropout_length_distribution() {
        let ing: Vec<String> = (0..6).map(|i| format!("i{i}")).collect();
        let trials = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut observed = [0usize; 4];
        for _ in 0..trials {
            observed[6 - ingredient_dropout(&ing, 0.5, &mut rng).len()] += 1;
        }
        let expected = trials as f64 / 4.0;
        let chi2: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-squared with 3 degrees of freedom.
        assert!(chi2 < 16.27, "chi2 = {chi2}, observed {observed:?}");
    }

    #[test]
    fn dropout_bound_is_exhaustive_for_small_lists() {
        for n in 0..=8usize {
            let ing: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
            for seed in 0..200 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let out = ingredient_dropout(&ing, 0.5, &mut rng);
                assert!(n - out.len() <= n / 2);
            }
        }
    }

    proptest! {
        #[test]
        fn dropout_preserves_order(n in 0usize..12, frac in 0.0f64..0.99, seed in any::<u64>()) {
            let ing: Vec<String> = (0..n).map(|i| format!("{i:02}")).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = ingredient_dropout(&ing, frac, &mut rng);
            prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(n - out.len() <= (frac * n as f64).floor() as usize);
        }
    }
}
