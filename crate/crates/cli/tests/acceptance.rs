//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. Exits
//! with status 1 if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use recipe_forge::corpus::{Partition, Recipe, RecipeSet};
use recipe_forge::metrics::{bleu_k, build_idf, cider, meteor, perplexity, rouge_l, rouge_n, sacrebleu};
use recipe_forge::oracle::randomized_checks;
use recipe_forge::promptkit::{
    build_dialogs, default_bank, ingredient_dropout, parse_dialog, sample_task, PromptTemplate, Stage, TargetSet,
};
use recipe_forge::scaledloss::{scaled_loss_batch, BatchItem, ScaleConfig, ScaleMode, TokenDistSeq};
use recipe_forge::synth::{generate, SynthConfig};
use recipe_forge::textnorm::TokenSeq;
use recipe_forge::toylm::{
    encode_dialog, finite_difference_check, init_model, load_checkpoint, loss_and_grads, Example, Gradients,
    GroupSet, ParamGroup, TraceRecord, Vocab, ASSISTANT_TAG, HUMAN_TAG,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn seq(s: &str) -> TokenSeq {
    TokenSeq::from_words(s)
}

// Criterion 1

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let count = 200;
    let checks = randomized_checks(count, 2024);
    let elapsed = start.elapsed();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    ensure(failed.is_empty(), || failed.join("; "))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    let worst = checks.iter().map(|c| c.max_error).fold(0.0, f64::max);
    Ok(format!(
        "{count} instances, {} checks, max deviation {worst:.1e}, {:.2}s",
        checks.len(),
        elapsed.as_secs_f64()
    ))
}

// Criterion 2

fn closed_form_points() -> Outcome {
    let tol = 1e-9;
    let mut notes = Vec::new();
    let mut check = |name: &str, got: f64, want: f64, exact: bool| -> Result<(), String> {
        let ok = if exact { got == want } else { (got - want).abs() <= tol };
        notes.push(name.to_owned());
        ensure(ok, || format!("{name}: got {got}, expected {want}"))
    };
    let b1 = bleu_k(&seq("a a a a"), &seq("a b c d"), 1).map_err(|e| e.to_string())?;
    check("bleu1 clipped", b1, 0.25, true)?;
    let bp = bleu_k(&seq("a b"), &seq("a b c d"), 1).map_err(|e| e.to_string())?;
    check("brevity", bp, (-1f64).exp(), false)?;
    let the_cat = seq("the cat");
    check("meteor", meteor(&the_cat, &the_cat), 0.9375, false)?;
    check("perplexity", perplexity(&[0.1f64.ln(); 12]).map_err(|e| e.to_string())?, 10.0, false)?;
    let docs = vec![seq("mix the flour and water"), seq("boil the pasta"), seq("grill fish with lime")];
    let idf = build_idf(&docs).map_err(|e| e.to_string())?;
    check("cider self", cider(&docs[0], &docs[0], &idf), 10.0, false)?;
    // Supplementary points from the same family.
    check("rouge2", rouge_n(&seq("a b c"), &seq("a b d"), 2).map_err(|e| e.to_string())?.f1, 0.5, true)?;
    check("rougeL", rouge_l(&seq("a b c"), &seq("a c b")).f1, 2.0 / 3.0, false)?;
    let sb = sacrebleu(&seq("a b c d e"), &seq("a b c d f"));
    check("sacrebleu", sb, (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25), false)?;
    Ok(format!("{} points: {}", notes.len(), notes.join(", ")))
}

// Criterion 3

fn small_batch(d_vis: usize, count: usize) -> (Vocab, Vec<Example>) {
    let set = generate(&SynthConfig {
        count,
        d_vis,
        seed: 3,
        image_rate: 0.7,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dialogs = build_dialogs(&set, &default_bank(), Stage::S2, &mut rng).expect("dialogs");
    let mut texts: Vec<&str> = vec![HUMAN_TAG, ASSISTANT_TAG];
    for d in &dialogs {
        texts.push(&d.query);
        texts.push(&d.target);
    }
    let vocab = Vocab::build(texts, 512).expect("vocab");
    let examples = dialogs
        .iter()
        .map(|d| encode_dialog(&vocab, &d.query, &d.target, d.visual.clone(), 128).expect("encode"))
        .collect();
    (vocab, examples)
}

fn gradient_contract() -> Outcome {
    let start = Instant::now();
    let (vocab, batch) = small_batch(6, 4);
    let params = init_model(vocab, 12, 6, 128, 16, 11).map_err(|e| e.to_string())?;
    let groups: GroupSet = ParamGroup::ALL.into();
    let literal = ScaleConfig::default();
    let penalty = ScaleConfig {
        mode: ScaleMode::Penalty,
        ..ScaleConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    for (stage, scale, seed) in [(Stage::S1, None, 1), (Stage::S3, Some(&literal), 2), (Stage::S3, Some(&penalty), 3)] {
        let entries =
            finite_difference_check(&params, &batch, stage, scale, &groups, 20, 1e-5, seed).map_err(|e| e.to_string())?;
        for g in &groups {
            let n = entries.iter().filter(|e| e.group == *g).count();
            ensure(n == 20, || format!("{g}: {n} coordinates checked"))?;
        }
        for e in &entries {
            ensure(e.relative_error < 1e-4, || format!("{stage}: {e:?}"))?;
            worst = worst.max(e.relative_error);
        }
        probes += entries.len();
    }

    // Scaled gradient against per-sample scale times the cross-entropy gradient.
    let mut factor_err: f64 = 0.0;
    for scale in [&literal, &penalty] {
        let (loss, scaled) =
            loss_and_grads(&params, &batch, Stage::S3, Some(scale), &groups).map_err(|e| e.to_string())?;
        let mut expected = Gradients::zeros(&params.config, &groups);
        for (ex, value) in batch.iter().zip(&loss.samples) {
            let (_, g) = loss_and_grads(&params, std::slice::from_ref(ex), Stage::S1, None, &groups)
                .map_err(|e| e.to_string())?;
            for (acc, t) in expected.tensors.iter_mut().zip(&g.tensors) {
                acc.as_mut().unwrap().scaled_add(value.l_br / batch.len() as f64, t.as_ref().unwrap());
            }
        }
        for (a, b) in scaled.tensors.iter().zip(&expected.tensors) {
            for (x, y) in a.as_ref().unwrap().iter().zip(b.as_ref().unwrap()) {
                factor_err = factor_err.max((x - y).abs());
            }
        }
    }
    ensure(factor_err <= 1e-9, || format!("scaled gradient deviates by {factor_err:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{probes} probes, max relative error {worst:.1e}; factorization error {factor_err:.1e}; {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// Shared staged pipeline for criteria 4 to 7.

struct Pipeline {
    dir: tempfile::TempDir,
    elapsed: Duration,
    summaries: BTreeMap<&'static str, Value>,
}

impl Pipeline {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn trace(&self, name: &str) -> Vec<TraceRecord> {
        let text = std::fs::read_to_string(self.path(name)).expect("trace file");
        text.lines().map(|l| serde_json::from_str(l).expect("trace record")).collect()
    }
}

fn cli(dir: &Path, args: &[&str]) -> Value {
    let mut argv = vec!["recipe-forge".to_owned()];
    argv.extend(args.iter().map(|a| {
        if a.ends_with(".json") || a.ends_with(".jsonl") {
            dir.join(a).display().to_string()
        } else {
            (*a).to_owned()
        }
    }));
    recipe_forge_cli::run(argv).unwrap_or_else(|e| panic!("{args:?} failed: {}", e.message))
}

fn pipeline() -> &'static Pipeline {
    static CELL: OnceLock<Pipeline> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let d = dir.path();
        let start = Instant::now();
        let mut summaries = BTreeMap::new();
        cli(d, &["synth", "--out", "recipes.jsonl", "--count", "600", "--seed", "7"]);
        let r = "recipes.jsonl";
        for (stage, part, seed, out) in [
            ("S0", "train", "1", "s0.jsonl"),
            ("S1", "train", "2", "s1.jsonl"),
            ("S2", "train", "3", "s2.jsonl"),
            ("S2", "val", "4", "val.jsonl"),
            ("S1", "test", "5", "test.jsonl"),
        ] {
            cli(d, &["build-data", "--stage", stage, "--recipes", r, "--partition", part, "--seed", seed, "--out", out]);
        }
        cli(d, &["init", "--data", "s2.jsonl", "--recipes", r, "--vocab-data", "s0.jsonl", "--seed", "1", "--out", "init.json"]);
        let common = ["--recipes", r, "--val", "val.jsonl", "--seed", "1"];
        let train = |extra: &[&str]| {
            let mut args = vec!["train"];
            args.extend(common);
            args.extend(extra);
            cli(d, &args)
        };
        summaries.insert(
            "s0",
            train(&["--stage", "S0", "--data", "s0.jsonl", "--init", "init.json", "--epochs", "4", "--max-steps", "200", "--out", "ck0.json"]),
        );
        summaries.insert("s1", train(&["--stage", "S1", "--data", "s1.jsonl", "--init", "ck0.json", "--out", "ck1.json"]));
        summaries.insert("s2", train(&["--stage", "S2", "--data", "s2.jsonl", "--init", "ck1.json", "--out", "ck2.json"]));
        summaries.insert(
            "s3",
            train(&["--stage", "S3", "--data", "s2.jsonl", "--init", "ck2.json", "--scale-mode", "penalty", "--decode-monitor", "48", "--out", "ck3.json"]),
        );
        summaries.insert(
            "s22",
            train(&["--stage", "S2", "--data", "s2.jsonl", "--init", "ck2.json", "--decode-monitor", "48", "--out", "ck22.json"]),
        );
        summaries.insert(
            "s3_literal",
            train(&["--stage", "S3", "--data", "s2.jsonl", "--init", "ck2.json", "--scale-mode", "paper-literal", "--out", "ck3lit.json"]),
        );
        for (ck, out) in [("ck3.json", "eval_s3.json"), ("ck22.json", "eval_s22.json")] {
            let s = cli(d, &["eval", "--checkpoint", ck, "--data", "test.jsonl", "--recipes", r, "--out", out]);
            summaries.insert(if ck == "ck3.json" { "eval_s3" } else { "eval_s22" }, s);
        }
        Pipeline {
            elapsed: start.elapsed(),
            dir,
            summaries,
        }
    })
}

// Criterion 4

fn stage_zero_freeze() -> Outcome {
    let p = pipeline();
    let (init, _) = load_checkpoint(&p.path("init.json")).map_err(|e| e.to_string())?;
    let (after, stage) = load_checkpoint(&p.path("ck0.json")).map_err(|e| e.to_string())?;
    ensure(stage == Some(Stage::S0), || format!("checkpoint stage {stage:?}"))?;
    for g in [ParamGroup::Embed, ParamGroup::Core, ParamGroup::Out] {
        ensure(init.group_hash(g) == after.group_hash(g), || format!("group {g} changed"))?;
    }
    ensure(init.group_hash(ParamGroup::MapVisual) != after.group_hash(ParamGroup::MapVisual), || {
        "map_visual did not change".into()
    })?;
    let losses: Vec<f64> = p.trace("ck0.trace.jsonl").iter().map(|r| r.l_final).collect();
    ensure(losses.len() == 200, || format!("{} steps", losses.len()))?;
    let window = 20;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let first = mean(&losses[..window]);
    let last = mean(&losses[losses.len() - window..]);
    let drop = 1.0 - last / first;
    ensure(drop >= 0.10, || format!("loss moving average fell only {:.1}% ({first:.4} to {last:.4})", 100.0 * drop))?;
    Ok(format!(
        "200 steps, frozen groups bit-identical, loss {first:.4} -> {last:.4} ({:.1}% drop, window {window})",
        100.0 * drop
    ))
}

// Criterion 5

fn staged_pipeline() -> Outcome {
    let p = pipeline();
    let ce = |k: &str| p.summaries[k]["val_ce_after"].as_f64().expect("validation loss");
    let (s0, s1, s2) = (ce("s0"), ce("s1"), ce("s2"));
    ensure(s0 > s1 && s1 > s2, || format!("validation CE S0 {s0:.4}, S1 {s1:.4}, S2 {s2:.4}"))?;
    ensure(p.elapsed < Duration::from_secs(600), || format!("pipeline took {:?}", p.elapsed))?;
    Ok(format!(
        "validation CE S0 {s0:.4} > S1 {s1:.4} > S2 {s2:.4}; pipeline {:.1}s",
        p.elapsed.as_secs_f64()
    ))
}

// Criterion 6

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            r[*k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn metric(summary: &Value, key: &str) -> f64 {
    summary["report"]["rows"][0]["metrics"][key].as_f64().unwrap_or(f64::NAN)
}

fn scaled_vs_control() -> Outcome {
    let p = pipeline();
    let s3 = p.trace("ck3.trace.jsonl");
    let s22 = p.trace("ck22.trace.jsonl");
    ensure(s3.len() >= 100, || format!("S3 ran {} steps", s3.len()))?;
    ensure(s22.len() == s3.len(), || format!("S22 ran {} steps, S3 {}", s22.len(), s3.len()))?;
    ensure(s3.iter().all(|r| r.mode == "penalty") && s22.iter().all(|r| r.mode == "cross_entropy"), || {
        "unexpected loss modes".into()
    })?;
    for (name, trace) in [("S3", &s3), ("S22", &s22)] {
        ensure(trace.iter().all(|r| r.l_br.is_finite() && r.l_br >= 0.0), || format!("{name} l_br not recorded"))?;
    }
    let l_br: Vec<f64> = s3.iter().map(|r| r.l_br).collect();
    let decoded: Vec<f64> = s3.iter().map(|r| r.decode_rouge_l.unwrap_or(f64::NAN)).collect();
    ensure(decoded.iter().all(|x| x.is_finite()), || "greedy-decode ROUGE-L missing".into())?;
    let rho = spearman(&l_br, &decoded);
    ensure(rho < 0.0, || format!("Spearman rho {rho:.3}"))?;
    let (e3, e22) = (&p.summaries["eval_s3"], &p.summaries["eval_s22"]);
    Ok(format!(
        "{} steps, Spearman rho {rho:.3}; S3 BLEU-1 {:.4} SacreBLEU {:.4} ROUGE-L {:.4}; S22 BLEU-1 {:.4} SacreBLEU {:.4} ROUGE-L {:.4}",
        s3.len(),
        metric(e3, "bleu1"),
        metric(e3, "sacrebleu"),
        metric(e3, "rougeL"),
        metric(e22, "bleu1"),
        metric(e22, "sacrebleu"),
        metric(e22, "rougeL"),
    ))
}

// Criterion 7

fn one_hot_rows(ids: &[usize], vocab: usize) -> TokenDistSeq {
    TokenDistSeq::new(
        ids.iter()
            .map(|&i| {
                let mut row = vec![0.0; vocab];
                row[i] = 1.0;
                row
            })
            .collect(),
    )
    .expect("valid rows")
}

fn literal_mode_range() -> Outcome {
    let p = pipeline();
    let trace = p.trace("ck3lit.trace.jsonl");
    ensure(trace.iter().all(|r| r.mode == "paper_literal"), || "wrong mode".into())?;
    let (lo, hi) = trace
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.l_br), hi.max(r.l_br)));
    ensure(lo >= 0.0 && hi <= 2.01, || format!("l_br range [{lo}, {hi}]"))?;

    let words = [
        "boil", "the", "pasta", "until", "soft", "serve", "it", "hot", "grill", "fish", "over", "coals", "lime",
    ];
    let vocab = Vocab::build(words, 64).map_err(|e| e.to_string())?;
    let ids = |s: &str| -> Vec<usize> { s.split(' ').map(|w| vocab.id(w).expect("known word")).collect() };
    let cfg = ScaleConfig::default();
    let detok = |x: &[usize]| vocab.detokenize(x);
    let labels = ["boil the pasta until soft", "serve the fish hot", "grill the fish over coals"];
    let targets: Vec<Vec<usize>> = labels.iter().map(|l| ids(l)).collect();
    let perfect: Vec<TokenDistSeq> = targets.iter().map(|t| one_hot_rows(t, vocab.len())).collect();
    let items: Vec<BatchItem> = (0..3)
        .map(|i| BatchItem {
            pred: &perfect[i],
            target: &targets[i],
            y_label: labels[i],
        })
        .collect();
    let (_, values) = scaled_loss_batch(&items, &cfg, detok).map_err(|e| e.to_string())?;
    for v in &values {
        ensure((v.l_br - 2.01).abs() <= 1e-9, || format!("perfect sample l_br {}", v.l_br))?;
    }
    let wrong: Vec<TokenDistSeq> = targets
        .iter()
        .map(|t| one_hot_rows(&vec![vocab.id("lime").unwrap(); t.len()], vocab.len()))
        .collect();
    let items: Vec<BatchItem> = (0..2)
        .map(|i| BatchItem {
            pred: &wrong[i],
            target: &targets[i],
            y_label: labels[i],
        })
        .collect();
    let (_, values) = scaled_loss_batch(&items, &cfg, detok).map_err(|e| e.to_string())?;
    for v in &values {
        ensure(v.l_br == 0.0 && v.l_final == 0.0, || format!("zero-overlap sample l_br {}", v.l_br))?;
    }
    Ok(format!(
        "{} logged steps with l_br in [{lo:.4}, {hi:.4}]; perfect batch 2.01; zero-overlap batch 0",
        trace.len()
    ))
}

// Criterion 8

fn data_engine() -> Outcome {
    let bank = default_bank();
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..draws {
        let s = sample_task(&bank, Stage::S2, &mut rng).map_err(|e| e.to_string())?;
        *counts.entry(s.template.id).or_default() += 1;
    }
    let applicable: Vec<&PromptTemplate> = bank.iter().filter(|t| t.applies_to(Stage::S2)).collect();
    let sets: BTreeSet<&TargetSet> = applicable.iter().map(|t| &t.targets).collect();
    let mut chi2 = 0.0;
    for t in &applicable {
        let same = applicable.iter().filter(|u| u.targets == t.targets).count();
        let expected = draws as f64 / (sets.len() * same) as f64;
        let observed = counts.get(&t.id).copied().unwrap_or(0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    let dof = (applicable.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(dof).map_err(|e| e.to_string())?.cdf(chi2);
    ensure(p_value > 0.01, || format!("chi2 {chi2:.1} on {dof} dof, p {p_value:.4}"))?;

    let mut sweeps = 0;
    for n in 1..=8usize {
        let items: Vec<String> = (0..n).map(|i| format!("item {i}")).collect();
        for seed in 0..2_000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kept = ingredient_dropout(&items, 0.5, &mut rng);
            ensure(items.len() - kept.len() <= n / 2, || format!("n {n} seed {seed}: {} removed", n - kept.len()))?;
            let mut it = items.iter();
            ensure(kept.iter().all(|k| it.any(|x| x == k)), || format!("n {n} seed {seed}: order changed"))?;
            sweeps += 1;
        }
    }

    let set = generate(&SynthConfig {
        count: 250,
        ..SynthConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut round_trips = 0;
    for stage in Stage::ALL {
        for d in build_dialogs(&set, &bank, stage, &mut rng).map_err(|e| e.to_string())? {
            let (q, t) = parse_dialog(&d.serialized).map_err(|e| e.to_string())?;
            ensure(q == d.query && t == d.target, || format!("round trip failed for {}", d.recipe_id))?;
            round_trips += 1;
        }
    }
    ensure(round_trips >= 1000, || format!("only {round_trips} round trips"))?;
    Ok(format!(
        "chi2 {chi2:.1} on {dof} dof (p {p_value:.3}); {sweeps} dropout sweeps; {round_trips} round trips"
    ))
}

// Criterion 9

fn split_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut flags = vec![true; 73];
    flags.extend(vec![false; 27]);
    flags.shuffle(&mut rng);
    let recipes: Vec<Recipe> = flags
        .iter()
        .enumerate()
        .map(|(i, &imaged)| Recipe {
            id: format!("t{i:03}"),
            title: format!("Dish {i}"),
            ingredients: vec!["salt".into()],
            instructions: vec!["Cook.".into()],
            image_features: imaged.then(|| vec![vec![rng.gen_range(-1.0..1.0); 4]]),
            cuisine: None,
            partition: Partition::Test,
        })
        .collect();
    let known: Vec<String> = (0..100).filter(|&i| flags[i]).map(|i| format!("t{i:03}")).collect();
    let set = RecipeSet::new(recipes, 4).map_err(|e| e.to_string())?;
    let got = set.filter_with_images().ids().into_iter().map(str::to_owned).collect::<Vec<_>>();
    ensure(got == known, || format!("{} returned, expected {}", got.len(), known.len()))?;

    let big = generate(&SynthConfig {
        count: 12_000,
        ..SynthConfig::default()
    })
    .partition(Partition::Test);
    let a = big.sample_subset(1000, 5).map_err(|e| e.to_string())?;
    let b = big.sample_subset(1000, 5).map_err(|e| e.to_string())?;
    let c = big.sample_subset(1000, 6).map_err(|e| e.to_string())?;
    ensure(a == b, || "same seed gave different subsets".into())?;
    ensure(a.ids() != c.ids(), || "different seeds gave the same subset".into())?;
    let distinct: BTreeSet<&str> = a.ids().into_iter().collect();
    ensure(distinct.len() == 1000, || "subset has repeats".into())?;
    let source: BTreeSet<&str> = big.ids().into_iter().collect();
    ensure(distinct.is_subset(&source), || "subset escapes the partition".into())?;
    Ok(format!(
        "{} of 100 imaged recipes returned exactly; 1000 of {} drawn deterministically",
        got.len(),
        big.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric oracle suite", metric_oracles),
        ("closed-form metric points", closed_form_points),
        ("gradient contract", gradient_contract),
        ("stage-0 freeze", stage_zero_freeze),
        ("staged pipeline", staged_pipeline),
        ("scaled loss vs cross-entropy control", scaled_vs_control),
        ("literal-mode scale range", literal_mode_range),
        ("data-engine invariants", data_engine),
        ("split construction", split_construction),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
