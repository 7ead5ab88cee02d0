use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use recipe_forge::corpus::Partition;
use recipe_forge::promptkit::{instantiate, templates_for_inputs, InputKind, InputSet, Stage, TaskSample};
use recipe_forge::toylm::{load_checkpoint, ModelParams};

use super::data::{parse_partition, select};
use super::{config_json, load_bank};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::pipeline::{
    check_compatible, encode_items, generate, load_clean_recipes, read_dialogs, report_rows, resolve_dialogs, score,
    write_jsonl_file, write_reports, DialogItem, Generation, ReportRow,
};

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dialog file from build-data.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub recipes: PathBuf,
    /// JSON report; `.md` and `.csv` versions are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Add one row per cuisine after the overall row.
    #[arg(long)]
    pub cuisines: bool,
    /// Score the references against themselves instead of decoding.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    /// Also write every decoded answer to this JSONL file.
    #[arg(long)]
    pub generations: Option<PathBuf>,
}

fn decode_and_check(
    params: &ModelParams,
    items: &[DialogItem],
    max_len: usize,
    oracle: bool,
) -> Result<Vec<Generation>, CliError> {
    if max_len == 0 {
        return Err(CliError::usage("--max-len must be positive"));
    }
    let (examples, stats) = encode_items(&params.vocab, items, params.config.context)?;
    check_compatible(params, items, &stats)?;
    generate(params, items, &examples, max_len, oracle)
}

pub fn eval(args: EvalArgs) -> Result<serde_json::Value, CliError> {
    let mut manifest = RunManifest::new("eval", config_json(&args));
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.data)?;
    manifest.input(&args.recipes)?;
    let (params, stage) = load_checkpoint(&args.checkpoint)?;
    let recipes = load_clean_recipes(&args.recipes, params.config.d_vis)?;
    let items = resolve_dialogs(&read_dialogs(&args.data)?, &recipes)?;
    let gens = decode_and_check(&params, &items, args.max_len, args.oracle)?;
    let rows = report_rows(&gens, args.cuisines)?;
    let mut outputs = write_reports(&args.out, &rows, "Model")?;
    if let Some(p) = &args.generations {
        write_jsonl_file(p, &gens)?;
        outputs.push(p.clone());
    }
    for p in &outputs {
        manifest.output(p)?;
    }
    manifest.write_beside(&args.out)?;
    Ok(serde_json::json!({
        "checkpoint_stage": stage,
        "examples": gens.len(),
        "report": crate::pipeline::report_json(&rows),
        "out": args.out,
    }))
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub recipes: PathBuf,
    /// Comma-separated input combinations, each joined with '+', e.g.
    /// `image,title,image+title+ingredients` (short forms i, t, ing).
    #[arg(long)]
    pub masks: String,
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long, value_parser = parse_partition, default_value = "test")]
    pub partition: Partition,
    /// Also use recipes without images (their image input is a zero vector).
    #[arg(long)]
    pub include_imageless: bool,
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses and deduplicates masks, keeping first-seen order.
pub fn parse_masks(raw: &str) -> Result<Vec<InputSet>, CliError> {
    let mut out: Vec<InputSet> = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let mask = part
            .split('+')
            .map(|k| k.parse::<InputKind>())
            .collect::<Result<InputSet, String>>()
            .map_err(CliError::usage)?;
        if !out.contains(&mask) {
            out.push(mask);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("no input masks given"));
    }
    Ok(out)
}

pub fn mask_label(mask: &InputSet) -> String {
    mask.iter()
        .map(|k| match k {
            InputKind::Image => "image",
            InputKind::Title => "title",
            InputKind::Ingredients => "ingredients",
        })
        .collect::<Vec<_>>()
        .join("+")
}

pub fn ablate(args: AblateArgs) -> Result<serde_json::Value, CliError> {
    let masks = parse_masks(&args.masks)?;
    let mut manifest = RunManifest::new("ablate-inputs", config_json(&args));
    manifest.seed("seed", args.seed);
    let bank = load_bank(args.bank.as_deref(), &mut manifest)?;
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.recipes)?;
    let (params, _) = load_checkpoint(&args.checkpoint)?;
    let recipes = load_clean_recipes(&args.recipes, params.config.d_vis)?;
    let set = select(
        recipes,
        Some(args.partition),
        None,
        !args.include_imageless,
        args.subset,
        args.seed,
    )?;

    let mut rows = Vec::new();
    for mask in &masks {
        let label = mask_label(mask);
        let templates = templates_for_inputs(&bank, mask);
        if templates.is_empty() {
            rows.push(ReportRow {
                label,
                count: 0,
                metrics: None,
            });
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut items = Vec::with_capacity(set.len());
        for recipe in &set {
            let template = templates[rng.gen_range(0..templates.len())].clone();
            let mut sample = TaskSample::full(template, Stage::S1).without_dropout();
            sample.input_mask = mask.clone();
            let ex = instantiate(&sample, recipe, set.d_vis(), &mut rng)?;
            items.push(DialogItem {
                recipe_id: ex.recipe_id,
                query: ex.query,
                target: ex.target,
                visual: ex.visual,
                cuisine: recipe.cuisine.as_ref().map(|c| c.to_lowercase()),
            });
        }
        let gens = decode_and_check(&params, &items, args.max_len, false)?;
        let all: Vec<&Generation> = gens.iter().collect();
        rows.push(score(&label, &all)?);
    }

    let outputs = write_reports(&args.out, &rows, "Inputs")?;
    for p in &outputs {
        manifest.output(p)?;
    }
    manifest.write_beside(&args.out)?;
    Ok(serde_json::json!({
        "recipes": set.len(),
        "report": crate::pipeline::report_json(&rows),
        "out": args.out,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_parse_and_dedupe() {
        let m = parse_masks("i, t, i+t, t+i, i+ing, t+ing, i+t+ing").unwrap();
        assert_eq!(m.len(), 6);
        assert_eq!(mask_label(&m[2]), "image+title");
        assert_eq!(parse_masks(" , ").unwrap_err().code, crate::EXIT_USAGE);
        assert!(parse_masks("i+wings").is_err());
    }
}
