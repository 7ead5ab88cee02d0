use std::f64::consts::PI;

use super::*;
use crate::promptkit::Stage;
use crate::scaledloss::{ScaleConfig, ScaleMode};

const DIALOGS: [(&str, &str); 4] = [
    ("cook the leek soup", "boil water . add leek . serve hot"),
    ("make tomato pasta", "boil pasta . add tomato sauce"),
    ("bake bread", "mix flour and water . bake for 40 minutes"),
    ("grill fish", "oil the fish . grill it . serve with lime"),
];

fn vocab() -> Vocab {
    let mut texts = vec![HUMAN_TAG, ASSISTANT_TAG];
    for (q, a) in &DIALOGS {
        texts.push(q);
        texts.push(a);
    }
    Vocab::build(texts, 64).unwrap()
}

fn examples(vocab: &Vocab, d_vis: usize) -> Vec<Example> {
    DIALOGS
        .iter()
        .enumerate()
        .map(|(i, (q, a))| {
            let visual = (0..d_vis).map(|j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6).collect();
            encode_dialog(vocab, q, a, visual, 32).unwrap()
        })
        .collect()
}

fn model(seed: u64) -> (ModelParams, Vec<Example>) {
    let v = vocab();
    let ex = examples(&v, 4);
    (init_model(v, 12, 4, 32, 16, seed).unwrap(), ex)
}

fn all_groups() -> GroupSet {
    ParamGroup::ALL.into()
}

fn assert_gradcheck(entries: &[GradCheckEntry]) {
    for e in entries {
        assert!(e.relative_error < 1e-4, "{e:?}");
    }
}

#[test]
fn gradients_match_finite_differences_s1() {
    let (params, batch) = model(1);
    let entries = finite_difference_check(&params, &batch, Stage::S1, None, &all_groups(), 20, 1e-5, 3).unwrap();
    assert_eq!(entries.len(), 80);
    assert_gradcheck(&entries);
}

#[test]
fn gradients_match_finite_differences_s3() {
    let (params, batch) = model(2);
    for mode in [ScaleMode::PaperLiteral, ScaleMode::Penalty] {
        let scale = ScaleConfig {
            mode,
            ..ScaleConfig::default()
        };
        let entries =
            finite_difference_check(&params, &batch, Stage::S3, Some(&scale), &all_groups(), 20, 1e-5, 4).unwrap();
        assert_gradcheck(&entries);
    }
}

#[test]
fn stage_zero_only_touches_the_mapping() {
    let (params, batch) = model(3);
    let (_, grads) = loss_and_grads(&params, &batch, Stage::S0, None, &default_trainable(Stage::S0)).unwrap();
    assert_eq!(grads.groups(), GroupSet::from([ParamGroup::MapVisual]));
    assert!(grads.get("embed").is_none() && grads.get("wq").is_none() && grads.get("w_out").is_none());
    let entries =
        finite_difference_check(&params, &batch, Stage::S0, None, &default_trainable(Stage::S0), 20, 1e-5, 5).unwrap();
    assert_gradcheck(&entries);
}

#[test]
fn stage_three_needs_a_scale() {
    let (params, batch) = model(4);
    assert!(matches!(
        loss_and_grads(&params, &batch, Stage::S3, None, &all_groups()),
        Err(ToyLmError::Config(_))
    ));
    assert!(matches!(
        loss_and_grads(&params, &batch, Stage::S1, Some(&ScaleConfig::default()), &all_groups()),
        Err(ToyLmError::Config(_))
    ));
}

// The scaled gradient is the per-sample scale times the per-sample
// cross-entropy gradient, averaged over the batch.
#[test]
fn scaled_gradient_factors_out() {
    let (params, batch) = model(5);
    let scale = ScaleConfig {
        mode: ScaleMode::Penalty,
        ..ScaleConfig::default()
    };
    let (loss, scaled) = loss_and_grads(&params, &batch, Stage::S3, Some(&scale), &all_groups()).unwrap();
    let mut expected = Gradients::zeros(&params.config, &all_groups());
    for (ex, value) in batch.iter().zip(&loss.samples) {
        let (_, g) = loss_and_grads(&params, std::slice::from_ref(ex), Stage::S1, None, &all_groups()).unwrap();
        for (acc, t) in expected.tensors.iter_mut().zip(&g.tensors) {
            acc.as_mut().unwrap().scaled_add(value.l_br / batch.len() as f64, t.as_ref().unwrap());
        }
    }
    for (a, b) in scaled.tensors.iter().zip(&expected.tensors) {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }
}

// Memorize a small batch until the teacher-forced argmax is perfect, then
// the literal-mode gradient is exactly 2.01 times the plain one.
#[test]
fn perfect_batch_gradient_is_scaled_by_max_weight() {
    let (params, batch) = model(6);
    let batch = &batch[..2];
    let mut config = TrainConfig::for_stage(Stage::S1, 0.5, 0);
    config.epochs = 400;
    config.batch_size = 2;
    config.warmup_ratio = 0.0;
    let (trained, _) = train(params, batch, &config).unwrap();
    let scale = ScaleConfig::default();
    let (loss, scaled) = loss_and_grads(&trained, batch, Stage::S3, Some(&scale), &all_groups()).unwrap();
    for s in &loss.samples {
        assert_eq!(s.y_pred, s.y_label);
        assert!((s.l_br - 2.01).abs() < 1e-12);
    }
    let (_, plain) = loss_and_grads(&trained, batch, Stage::S1, None, &all_groups()).unwrap();
    for (a, b) in scaled.tensors.iter().zip(&plain.tensors) {
        for (x, y) in a.as_ref().unwrap().iter().zip(b.as_ref().unwrap()) {
            assert!((x - 2.01 * y).abs() < 1e-9);
        }
    }
}

// Only answer positions enter the loss: recomputing from the raw
// distributions over answer tokens alone reproduces it.
#[test]
fn loss_covers_answer_tokens_only() {
    let (params, batch) = model(7);
    let (loss, _) = loss_and_grads(&params, &batch, Stage::S1, None, &GroupSet::new()).unwrap();
    let mut expected = 0.0;
    for ex in &batch {
        let dist = params.forward(&ex.inputs, &ex.visual).unwrap();
        let answer: Vec<f64> = (ex.prompt_len - 1..ex.inputs.len())
            .map(|t| -dist.rows()[t][ex.labels[t].unwrap()].ln())
            .collect();
        expected += answer.iter().sum::<f64>() / answer.len() as f64;
    }
    assert!((loss.l_ce - expected / batch.len() as f64).abs() < 1e-12);

    let ex = &batch[0];
    assert!(ex.labels[..ex.prompt_len - 1].iter().all(Option::is_none));
}

#[test]
fn schedule_matches_closed_form() {
    let total = 200;
    let s = LrSchedule::new(0.1, 0.03, total);
    assert_eq!(s.warmup_steps, 6);
    assert_eq!(s.at(0), 0.0);
    assert!((s.at(3) - 0.05).abs() < 1e-15);
    assert_eq!(s.at(6), 0.1);
    for step in 6..total {
        let progress = (step - 6) as f64 / 194.0;
        let expected = 0.05 * (1.0 + (PI * progress).cos());
        assert!((s.at(step) - expected).abs() < 1e-15);
    }
    assert!(s.at(total - 1) < 1e-4);
    assert!(s.at(total) < 1e-20);
}

#[test]
fn stage_zero_training_freezes_the_rest() {
    let (params, batch) = model(8);
    let before = params.clone();
    let mut config = TrainConfig::for_stage(Stage::S0, 0.5, 1);
    config.epochs = 10;
    config.batch_size = 2;
    let (after, trace) = train(params, &batch, &config).unwrap();
    for g in [ParamGroup::Embed, ParamGroup::Core, ParamGroup::Out] {
        assert_eq!(after.group_hash(g), before.group_hash(g));
    }
    assert_ne!(after.group_hash(ParamGroup::MapVisual), before.group_hash(ParamGroup::MapVisual));
    assert_eq!(trace.records.len(), 20);
    assert!(trace.records.windows(2).all(|w| w[0].step < w[1].step));
}

#[test]
fn step_limit_caps_training() {
    let (params, batch) = model(13);
    let mut config = TrainConfig::for_stage(Stage::S1, 0.1, 0);
    config.epochs = 10;
    config.batch_size = 1;
    config.max_steps = Some(7);
    let (_, trace) = train(params, &batch, &config).unwrap();
    assert_eq!(trace.records.len(), 7);
    assert_eq!(trace.records[6].epoch, 1);
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let (params, batch) = model(9);
        let mut config = TrainConfig::for_stage(Stage::S1, 0.2, 5);
        config.batch_size = 3;
        config.epochs = 3;
        let (p, trace) = train(params, &batch, &config).unwrap();
        (ParamGroup::ALL.map(|g| p.group_hash(g)), trace)
    };
    assert_eq!(run(), run());
}

#[test]
fn stage_config_rules() {
    let mut c = TrainConfig::for_stage(Stage::S0, 0.1, 0);
    c.trainable.insert(ParamGroup::Core);
    assert!(c.validate().is_err());
    let mut c = TrainConfig::for_stage(Stage::S2, 0.1, 0);
    c.trainable.remove(&ParamGroup::Embed);
    assert!(c.validate().is_err());
    let mut c = TrainConfig::for_stage(Stage::S3, 0.1, 0);
    c.scale = None;
    assert!(c.validate().is_err());
    assert!(TrainConfig::for_stage(Stage::S3, 0.1, 0).validate().is_ok());
}

#[test]
fn divergence_aborts_with_trace() {
    let (params, batch) = model(10);
    let mut config = TrainConfig::for_stage(Stage::S1, 1e300, 0);
    config.warmup_ratio = 0.0;
    match train(params, &batch, &config) {
        Err(ToyLmError::NonFinite { step, trace }) => assert!(trace.records.len() <= step + 1 && step > 0),
        other => panic!("expected a numerical abort, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn decoding() {
    let (mut params, batch) = model(11);
    let ex = &batch[0];
    let a = greedy_decode(&params, ex.prompt(), &ex.visual, 5).unwrap();
    assert!(a.len() <= 5);
    assert_eq!(a, greedy_decode(&params, ex.prompt(), &ex.visual, 5).unwrap());
    assert!(greedy_decode(&params, ex.prompt(), &ex.visual, 0).is_err());
    params.tensors[13][[0, STOP]] = 1e6;
    assert!(greedy_decode(&params, ex.prompt(), &ex.visual, 5).unwrap().is_empty());
}

#[test]
fn mean_cross_entropy_matches_loss() {
    let (params, batch) = model(12);
    let (loss, _) = loss_and_grads(&params, &batch, Stage::S2, None, &GroupSet::new()).unwrap();
    assert!((mean_cross_entropy(&params, &batch).unwrap() - loss.l_ce).abs() < 1e-12);
}

#[test]
fn decode_monitor_records_rouge() {
    let (params, batch) = model(14);
    let mut config = TrainConfig::for_stage(Stage::S1, 0.1, 0);
    config.batch_size = 2;
    config.decode_monitor = Some(6);
    let (_, trace) = train(params.clone(), &batch, &config).unwrap();
    for r in &trace.records {
        let v = r.decode_rouge_l.unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    config.decode_monitor = None;
    let (_, plain) = train(params, &batch, &config).unwrap();
    assert!(plain.records.iter().all(|r| r.decode_rouge_l.is_none()));
    assert_eq!(plain.losses(), trace.losses());
}
