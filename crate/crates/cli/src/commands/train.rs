use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use recipe_forge::promptkit::Stage;
use recipe_forge::scaledloss::{ScaleConfig, ScaleMode};
use recipe_forge::toylm::{
    init_model, load_checkpoint, mean_cross_entropy, save_checkpoint, train as run_training, ModelConfig,
    ModelParams, ToyLmError, TrainConfig, Vocab, ASSISTANT_TAG, HUMAN_TAG,
};

use super::config_json;
use super::data::parse_stage;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::pipeline::{
    check_compatible, encode_items, load_clean_recipes, read_dialogs, resolve_dialogs, write_jsonl_file, DialogItem,
};

pub const CONFIG_VERSION: u32 = 1;
/// Stage 0 only moves the visual mapping and tolerates a far larger step.
pub const DEFAULT_LR_MAPPING: f64 = 50.0;
pub const DEFAULT_LR: f64 = 0.05;
pub const DEFAULT_D_MODEL: usize = 32;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_CONTEXT: usize = 128;
pub const DEFAULT_VOCAB: usize = 512;
pub const DEFAULT_D_VIS: usize = 16;

/// Training configuration file (TOML). Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub version: Option<u32>,
    pub stage: Option<Stage>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub warmup_ratio: Option<f64>,
    pub max_steps: Option<usize>,
    pub seed: Option<u64>,
    pub decode_monitor: Option<usize>,
    #[serde(default)]
    pub model: ModelFile,
    #[serde(default)]
    pub scale: ScaleFile,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub d_model: Option<usize>,
    pub hidden: Option<usize>,
    pub context: Option<usize>,
    pub vocab_size: Option<usize>,
    pub d_vis: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleFile {
    pub mode: Option<ScaleMode>,
    pub lambda_bleu: Option<f64>,
    #[serde(rename = "lambda_rougeL")]
    pub lambda_rouge_l: Option<f64>,
}

impl TrainFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: TrainFile =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        match file.version {
            Some(CONFIG_VERSION) | None => Ok(file),
            Some(v) => Err(CliError::usage(format!(
                "{}: config version {v} is not supported (expected {CONFIG_VERSION})",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_stage)]
    pub stage: Option<Stage>,
    /// Dialog file from build-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Recipe file the dialogs were built from (for image features).
    #[arg(long)]
    pub recipes: PathBuf,
    /// Checkpoint of the previous stage.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Trace JSONL; defaults to `<out>` with a `.trace.jsonl` extension.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Dialog file scored (mean answer cross-entropy) before and after training.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub warmup_ratio: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Greedy-decode each batch up to this many tokens and trace its ROUGE-L.
    #[arg(long)]
    pub decode_monitor: Option<usize>,
    /// `paper-literal` or `penalty` (stage 3 only).
    #[arg(long, value_parser = parse_scale_mode)]
    pub scale_mode: Option<ScaleMode>,
    #[arg(long)]
    pub lambda_bleu: Option<f64>,
    #[arg(long)]
    pub lambda_rouge: Option<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Skip the check that the checkpoint comes from the previous stage.
    #[arg(long)]
    pub allow_stage_skip: bool,
}

/// Shape of a freshly initialized model; ignored values come from the
/// config file or the defaults.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub d_vis: Option<usize>,
    /// Extra dialog files whose text joins the vocabulary of a fresh model.
    #[arg(long)]
    pub vocab_data: Vec<PathBuf>,
}

impl ModelArgs {
    fn any(&self) -> bool {
        self.d_model.is_some()
            || self.hidden.is_some()
            || self.context.is_some()
            || self.vocab_size.is_some()
            || self.d_vis.is_some()
            || !self.vocab_data.is_empty()
    }
}

/// A new model whose vocabulary covers `data` plus any extra dialog files.
fn fresh_model(
    data: &Path,
    recipes: &Path,
    dims: &ModelArgs,
    file: &ModelFile,
    seed: u64,
    manifest: &mut RunManifest,
) -> Result<(ModelParams, Vec<DialogItem>), CliError> {
    let d_vis = dims.d_vis.or(file.d_vis).unwrap_or(DEFAULT_D_VIS);
    let items = load_items(data, recipes, d_vis)?;
    let mut extra = Vec::new();
    for p in &dims.vocab_data {
        manifest.input(p)?;
        extra.extend(dialog_texts(p)?);
    }
    let vocab = fresh_vocab(&items, &extra, dims.vocab_size.or(file.vocab_size).unwrap_or(DEFAULT_VOCAB))?;
    let params = init_model(
        vocab,
        dims.d_model.or(file.d_model).unwrap_or(DEFAULT_D_MODEL),
        d_vis,
        dims.context.or(file.context).unwrap_or(DEFAULT_CONTEXT),
        dims.hidden.or(file.hidden).unwrap_or(DEFAULT_HIDDEN),
        seed,
    )?;
    Ok((params, items))
}

#[derive(Debug, Args, Serialize)]
pub struct InitArgs {
    /// Dialog file whose text defines the vocabulary.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub recipes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Writes an untrained, unstaged checkpoint.
pub fn init(args: InitArgs) -> Result<serde_json::Value, CliError> {
    let f = args.config.as_deref().map(TrainFile::load).transpose()?.unwrap_or_default();
    let seed = args.seed.or(f.seed).unwrap_or(0);
    let mut manifest = RunManifest::new("init", serde_json::Value::Null);
    manifest.seed("seed", seed);
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    manifest.input(&args.data)?;
    manifest.input(&args.recipes)?;
    let (params, _) = fresh_model(&args.data, &args.recipes, &args.model, &f.model, seed, &mut manifest)?;
    manifest.config = config_json(&serde_json::json!({ "args": &args, "model": &params.config }));
    save_checkpoint(&params, None, &args.out)?;
    manifest.output(&args.out)?;
    manifest.write_beside(&args.out)?;
    Ok(serde_json::json!({
        "vocab_size": params.vocab.len(),
        "params": params.num_params(),
        "out": args.out,
    }))
}

pub(crate) fn parse_scale_mode(s: &str) -> Result<ScaleMode, String> {
    s.parse()
}

/// The configuration actually used, as recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
struct Effective<'a> {
    args: &'a TrainArgs,
    file: Option<&'a TrainFile>,
    train: &'a TrainConfig,
    model: &'a ModelConfig,
    init_stage: Option<Stage>,
}

/// Checkpoint stage must be the previous one, or the same one when
/// continuing a stage.
pub fn check_stage_order(stage: Stage, init: Option<Option<Stage>>) -> Result<(), String> {
    match (stage, init) {
        (Stage::S0, None) => Ok(()),
        (Stage::S0, Some(None | Some(Stage::S0))) => Ok(()),
        (s, None) => Err(format!("stage {s} needs the stage {} checkpoint (--init)", s.previous().unwrap())),
        (s, Some(Some(prev))) if Some(prev) == s.previous() || prev == s => Ok(()),
        (s, Some(found)) => Err(format!(
            "stage {s} must start from a stage {} checkpoint, got {}",
            s.previous().map_or("-".into(), |p| p.to_string()),
            found.map_or("an unstaged checkpoint".into(), |p| format!("a stage {p} checkpoint"))
        )),
    }
}

fn dialog_texts(path: &Path) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for rec in read_dialogs(path)? {
        let (q, t) = rec.query_and_target()?;
        out.push(q);
        out.push(t);
    }
    Ok(out)
}

fn fresh_vocab(items: &[DialogItem], extra: &[String], max_size: usize) -> Result<Vocab, CliError> {
    let mut texts: Vec<&str> = vec![HUMAN_TAG, ASSISTANT_TAG];
    for it in items {
        texts.push(&it.query);
        texts.push(&it.target);
    }
    texts.extend(extra.iter().map(String::as_str));
    Ok(Vocab::build(texts, max_size)?)
}

fn load_items(data: &Path, recipes: &Path, d_vis: usize) -> Result<Vec<DialogItem>, CliError> {
    let set = load_clean_recipes(recipes, d_vis)?;
    resolve_dialogs(&read_dialogs(data)?, &set)
}

pub fn train(args: TrainArgs) -> Result<serde_json::Value, CliError> {
    let file = args.config.as_deref().map(TrainFile::load).transpose()?;
    let f = file.clone().unwrap_or_default();
    let stage = args
        .stage
        .or(f.stage)
        .ok_or_else(|| CliError::usage("no stage given (--stage or the config file)"))?;
    let seed = args.seed.or(f.seed).unwrap_or(0);

    let mut manifest = RunManifest::new("train", serde_json::Value::Null);
    manifest.seed("seed", seed);
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }

    let init = match &args.init {
        Some(p) => {
            manifest.input(p)?;
            Some(load_checkpoint(p)?)
        }
        None => None,
    };
    let init_stage = init.as_ref().map(|(_, s)| *s);
    if let Err(msg) = check_stage_order(stage, init_stage) {
        if !args.allow_stage_skip {
            return Err(CliError::usage(format!("{msg}; pass --allow-stage-skip to override")));
        }
        eprintln!("warning: {msg}");
    }

    manifest.input(&args.data)?;
    manifest.input(&args.recipes)?;
    let (params, items) = match init {
        Some((params, _)) => {
            if args.model.any() {
                return Err(CliError::usage("model dimensions and vocabulary come from the --init checkpoint"));
            }
            let items = load_items(&args.data, &args.recipes, params.config.d_vis)?;
            (params, items)
        }
        None => fresh_model(&args.data, &args.recipes, &args.model, &f.model, seed, &mut manifest)?,
    };
    let (examples, stats) = encode_items(&params.vocab, &items, params.config.context)?;
    check_compatible(&params, &items, &stats)?;

    let scale_given = args.scale_mode.is_some()
        || args.lambda_bleu.is_some()
        || args.lambda_rouge.is_some()
        || f.scale != ScaleFile::default();
    if scale_given && stage != Stage::S3 {
        return Err(CliError::usage(format!("loss scaling only applies at stage S3, not {stage}")));
    }
    let default_lr = if stage == Stage::S0 { DEFAULT_LR_MAPPING } else { DEFAULT_LR };
    let mut config = TrainConfig::for_stage(stage, args.lr.or(f.lr).unwrap_or(default_lr), seed);
    if let Some(v) = args.epochs.or(f.epochs) {
        config.epochs = v;
    }
    if let Some(v) = args.batch_size.or(f.batch_size) {
        config.batch_size = v;
    }
    if let Some(v) = args.warmup_ratio.or(f.warmup_ratio) {
        config.warmup_ratio = v;
    }
    config.max_steps = args.max_steps.or(f.max_steps);
    config.decode_monitor = args.decode_monitor.or(f.decode_monitor);
    if stage == Stage::S3 {
        let d = ScaleConfig::default();
        let scale = ScaleConfig {
            lambda_bleu: args.lambda_bleu.or(f.scale.lambda_bleu).unwrap_or(d.lambda_bleu),
            lambda_rouge_l: args.lambda_rouge.or(f.scale.lambda_rouge_l).unwrap_or(d.lambda_rouge_l),
            mode: args.scale_mode.or(f.scale.mode).unwrap_or(d.mode),
        };
        scale.validate().map_err(|e| CliError::usage(e.to_string()))?;
        config.scale = Some(scale);
    }
    config.validate()?;

    let val = match &args.val {
        Some(p) => {
            manifest.input(p)?;
            let val_items = load_items(p, &args.recipes, params.config.d_vis)?;
            Some(encode_items(&params.vocab, &val_items, params.config.context)?.0)
        }
        None => None,
    };
    let val_ce = |p: &ModelParams| -> Result<Option<f64>, CliError> {
        Ok(match &val {
            Some(v) => Some(mean_cross_entropy(p, v)?),
            None => None,
        })
    };
    let val_before = val_ce(&params)?;

    manifest.config = config_json(&Effective {
        args: &args,
        file: file.as_ref(),
        train: &config,
        model: &params.config,
        init_stage: init_stage.flatten(),
    });
    let trace_path = args.trace.clone().unwrap_or_else(|| args.out.with_extension("trace.jsonl"));
    let (trained, trace) = match run_training(params, &examples, &config) {
        Ok(v) => v,
        Err(ToyLmError::NonFinite { step, trace }) => {
            write_jsonl_file(&trace_path, &trace.records)?;
            return Err(CliError::numerical(format!(
                "non-finite loss at step {step}; trace written to {}",
                trace_path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let val_after = val_ce(&trained)?;

    save_checkpoint(&trained, Some(stage), &args.out)?;
    write_jsonl_file(&trace_path, &trace.records)?;
    manifest.output(&args.out)?;
    manifest.output(&trace_path)?;
    manifest.write_beside(&args.out)?;

    let losses = trace.losses();
    Ok(serde_json::json!({
        "stage": stage,
        "steps": trace.records.len(),
        "examples": examples.len(),
        "truncated": stats.truncated,
        "first_loss": losses.first(),
        "last_loss": losses.last(),
        "val_ce_before": val_before,
        "val_ce_after": val_after,
        "out": args.out,
        "trace": trace_path,
    }))
}
