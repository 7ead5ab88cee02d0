use std::path::{Path, PathBuf};

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use recipe_forge::corpus::{load_recipes, load_visual_sidecar, Partition, RecipeSet};
use recipe_forge::promptkit::{build_dialogs, DialogRecord, Stage};
use recipe_forge::synth::{generate, SynthConfig};

use super::{config_json, load_bank, parse_list};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::pipeline::{write_atomic, write_jsonl_file};

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 600)]
    pub count: usize,
    #[arg(long, default_value_t = 16)]
    pub d_vis: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Share of recipes that carry image features.
    #[arg(long, default_value_t = 0.7)]
    pub image_rate: f64,
}

pub fn synth(args: SynthArgs) -> Result<serde_json::Value, CliError> {
    if args.count == 0 || args.d_vis == 0 {
        return Err(CliError::usage("count and visual dimension must be positive"));
    }
    if !(0.0..=1.0).contains(&args.image_rate) {
        return Err(CliError::usage("image rate must lie in [0, 1]"));
    }
    let set = generate(&SynthConfig {
        count: args.count,
        d_vis: args.d_vis,
        seed: args.seed,
        image_rate: args.image_rate,
    });
    let mut bytes = Vec::new();
    set.write_jsonl(&mut bytes).map_err(|e| CliError::io(&args.out, e))?;
    write_atomic(&args.out, &bytes)?;

    let mut manifest = RunManifest::new("synth", config_json(&args));
    manifest.seed("seed", args.seed);
    manifest.output(&args.out)?;
    manifest.write_beside(&args.out)?;
    Ok(serde_json::json!({
        "recipes": set.len(),
        "with_images": set.filter_with_images().len(),
        "out": args.out,
    }))
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub recipes: PathBuf,
    /// Sidecar file of pre-extracted image features, joined on id.
    #[arg(long)]
    pub visuals: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub d_vis: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Rejection report; defaults to `<out>` with a `.rejects.jsonl` extension.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RejectLine<'a> {
    source: &'a str,
    line: usize,
    id: Option<&'a str>,
    reason: &'a str,
}

pub fn ingest(args: IngestArgs) -> Result<serde_json::Value, CliError> {
    if args.d_vis == 0 {
        return Err(CliError::usage("visual dimension must be positive"));
    }
    // Everything is read and checked before anything is written.
    let loaded = load_recipes(&args.recipes, args.d_vis)?;
    let sidecar = match &args.visuals {
        Some(p) => Some(load_visual_sidecar(p, args.d_vis)?),
        None => None,
    };
    let (set, warnings) = match &sidecar {
        Some(s) => loaded.set.attach_visuals(&s.entries),
        None => (loaded.set.clone(), Vec::new()),
    };
    if set.is_empty() {
        return Err(CliError::data(format!("{}: no valid recipes", args.recipes.display())));
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let mut rejects: Vec<RejectLine> = loaded
        .rejections
        .iter()
        .map(|r| RejectLine {
            source: "recipes",
            line: r.line,
            id: r.id.as_deref(),
            reason: &r.reason,
        })
        .collect();
    if let Some(s) = &sidecar {
        rejects.extend(s.rejections.iter().map(|r| RejectLine {
            source: "visuals",
            line: r.line,
            id: r.id.as_deref(),
            reason: &r.reason,
        }));
    }

    let rejects_path = args.rejects.clone().unwrap_or_else(|| args.out.with_extension("rejects.jsonl"));
    let mut bytes = Vec::new();
    set.write_jsonl(&mut bytes).map_err(|e| CliError::io(&args.out, e))?;
    write_atomic(&args.out, &bytes)?;
    write_jsonl_file(&rejects_path, &rejects)?;

    let mut manifest = RunManifest::new("ingest", config_json(&args));
    manifest.input(&args.recipes)?;
    if let Some(v) = &args.visuals {
        manifest.input(v)?;
    }
    manifest.output(&args.out)?;
    manifest.output(&rejects_path)?;
    manifest.write_beside(&args.out)?;
    Ok(serde_json::json!({
        "accepted": set.len(),
        "rejected": loaded.rejections.len(),
        "sidecar_rejected": sidecar.as_ref().map_or(0, |s| s.rejections.len()),
        "sidecar_warnings": warnings,
        "with_images": set.filter_with_images().len(),
        "out": args.out,
        "rejects": rejects_path,
    }))
}

#[derive(Debug, Args, Serialize)]
pub struct BuildDataArgs {
    #[arg(long, value_parser = parse_stage)]
    pub stage: Stage,
    #[arg(long)]
    pub recipes: PathBuf,
    /// Prompt bank JSONL; the bundled bank when omitted.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long, value_parser = parse_partition)]
    pub partition: Option<Partition>,
    /// Keep only recipes with at least one image.
    #[arg(long)]
    pub images_only: bool,
    /// Draw this many recipes (after the other filters) without replacement.
    #[arg(long)]
    pub subset: Option<usize>,
    /// Comma-separated cuisine labels to keep.
    #[arg(long)]
    pub cuisines: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub d_vis: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub(crate) fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

pub(crate) fn parse_partition(s: &str) -> Result<Partition, String> {
    match s.trim().to_lowercase().as_str() {
        "train" => Ok(Partition::Train),
        "val" => Ok(Partition::Val),
        "test" => Ok(Partition::Test),
        _ => Err(format!("unknown partition {s:?}; expected train, val or test")),
    }
}

/// Partition, cuisine, image and subset filters, in that order.
pub(crate) fn select(
    set: RecipeSet,
    partition: Option<Partition>,
    cuisines: Option<&str>,
    images_only: bool,
    subset: Option<usize>,
    seed: u64,
) -> Result<RecipeSet, CliError> {
    let mut set = match partition {
        Some(p) => set.partition(p),
        None => set,
    };
    if let Some(list) = cuisines {
        let wanted: Vec<String> = parse_list(list).iter().map(|c| c.to_lowercase()).collect();
        if wanted.is_empty() {
            return Err(CliError::usage("empty cuisine list"));
        }
        let keep: Vec<_> = set
            .iter()
            .filter(|r| r.cuisine.as_ref().is_some_and(|c| wanted.contains(&c.to_lowercase())))
            .cloned()
            .collect();
        set = RecipeSet::new(keep, set.d_vis())?;
    }
    if images_only {
        set = set.filter_with_images();
    }
    if let Some(n) = subset {
        set = set.sample_subset(n, seed)?;
    }
    if set.is_empty() {
        return Err(CliError::data("no recipes left after filtering"));
    }
    Ok(set)
}

pub fn build_data(args: BuildDataArgs) -> Result<serde_json::Value, CliError> {
    let mut manifest = RunManifest::new("build-data", config_json(&args));
    manifest.seed("seed", args.seed);
    let bank = load_bank(args.bank.as_deref(), &mut manifest)?;
    manifest.input(&args.recipes)?;
    let recipes = crate::pipeline::load_clean_recipes(&args.recipes, args.d_vis)?;
    let set = select(
        recipes,
        args.partition,
        args.cuisines.as_deref(),
        args.images_only,
        args.subset,
        args.seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dialogs = build_dialogs(&set, &bank, args.stage, &mut rng)?;
    let records: Vec<DialogRecord> = dialogs.iter().map(DialogRecord::from).collect();
    write_jsonl_file(&args.out, &records)?;
    manifest.output(&args.out)?;
    manifest.write_beside(&args.out)?;
    Ok(summary(&args.out, args.stage, &records))
}

fn summary(out: &Path, stage: Stage, records: &[DialogRecord]) -> serde_json::Value {
    let with_visual = records.iter().filter(|r| r.visual_index.is_some()).count();
    serde_json::json!({
        "stage": stage,
        "records": records.len(),
        "with_visual": with_visual,
        "zero_visual": records.len() - with_visual,
        "out": out,
    })
}
