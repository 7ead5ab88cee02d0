//! File plumbing shared by the commands: dialog files, recipe lookups,
//! encoding for the toy model, scoring and report emission.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use recipe_forge::corpus::{load_recipes, RecipeSet};
use recipe_forge::metrics::{evaluate_corpus, MetricReport};
use recipe_forge::promptkit::DialogRecord;
use recipe_forge::textnorm::{normalize, TokenSeq};
use recipe_forge::toylm::{
    encode_dialog, greedy_decode, teacher_forced_logprobs, Example, ModelParams, Vocab,
};

use crate::error::CliError;

/// Share of out-of-vocabulary tokens above which a checkpoint and a data
/// file are considered mismatched.
pub const MAX_OOV_RATE: f64 = 0.25;

/// Writes through a temporary sibling and renames, so a failed run never
/// leaves a truncated file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

/// Loads a recipe file that is expected to be clean (the output of
/// `ingest` or `synth`); any rejected line is a data error.
pub fn load_clean_recipes(path: &Path, d_vis: usize) -> Result<RecipeSet, CliError> {
    let loaded = load_recipes(path, d_vis)?;
    if let Some(r) = loaded.rejections.first() {
        return Err(CliError::data(format!(
            "{}: {} invalid line(s), first at line {}: {}",
            path.display(),
            loaded.rejections.len(),
            r.line,
            r.reason
        )));
    }
    Ok(loaded.set)
}

pub fn read_dialogs(path: &Path) -> Result<Vec<DialogRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DialogRecord = serde_json::from_str(line)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(CliError::data(format!("{}: no dialog records", path.display())));
    }
    Ok(out)
}

/// A dialog with its text split out and its visual vector resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogItem {
    pub recipe_id: String,
    pub query: String,
    pub target: String,
    pub visual: Vec<f64>,
    pub cuisine: Option<String>,
}

pub fn resolve_dialogs(records: &[DialogRecord], recipes: &RecipeSet) -> Result<Vec<DialogItem>, CliError> {
    let index = recipes.index();
    records
        .iter()
        .map(|rec| {
            let recipe = index.get(rec.id.as_str()).copied();
            let (query, target) = rec.query_and_target()?;
            Ok(DialogItem {
                recipe_id: rec.id.clone(),
                query,
                target,
                visual: rec.visual(recipe, recipes.d_vis())?,
                cuisine: recipe.and_then(|r| r.cuisine.as_ref()).map(|c| c.to_lowercase()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodeStats {
    pub examples: usize,
    pub tokens: usize,
    pub oov: usize,
    pub truncated: usize,
}

impl EncodeStats {
    pub fn oov_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.oov as f64 / self.tokens as f64
        }
    }
}

pub fn encode_items(vocab: &Vocab, items: &[DialogItem], context: usize) -> Result<(Vec<Example>, EncodeStats), CliError> {
    let mut stats = EncodeStats::default();
    let mut out = Vec::with_capacity(items.len());
    for it in items {
        let ex = encode_dialog(vocab, &it.query, &it.target, it.visual.clone(), context)?;
        stats.examples += 1;
        stats.tokens += ex.num_tokens();
        stats.oov += ex.oov;
        stats.truncated += usize::from(ex.truncated);
        out.push(ex);
    }
    Ok((out, stats))
}

/// Fails with a data error when the data does not fit the checkpoint.
pub fn check_compatible(params: &ModelParams, items: &[DialogItem], stats: &EncodeStats) -> Result<(), CliError> {
    if let Some(it) = items.iter().find(|it| it.visual.len() != params.config.d_vis) {
        return Err(CliError::data(format!(
            "vocabulary mismatch: recipe {} has visual dimension {}, checkpoint expects {}",
            it.recipe_id,
            it.visual.len(),
            params.config.d_vis
        )));
    }
    if stats.oov_rate() > MAX_OOV_RATE {
        return Err(CliError::data(format!(
            "vocabulary mismatch: {:.1}% of tokens are unknown to the checkpoint",
            100.0 * stats.oov_rate()
        )));
    }
    Ok(())
}

/// One generated answer next to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub id: String,
    pub cuisine: Option<String>,
    pub candidate: String,
    pub reference: String,
    pub logprobs: Vec<f64>,
}

/// Greedy-decodes every example (or copies the reference in oracle mode)
/// and collects teacher-forced log-probabilities.
pub fn generate(
    params: &ModelParams,
    items: &[DialogItem],
    examples: &[Example],
    max_len: usize,
    oracle: bool,
) -> Result<Vec<Generation>, CliError> {
    items
        .par_iter()
        .zip(examples.par_iter())
        .map(|(it, ex)| {
            let candidate = if oracle {
                it.target.clone()
            } else {
                params.vocab.detokenize(&greedy_decode(params, ex.prompt(), &ex.visual, max_len)?)
            };
            Ok(Generation {
                id: it.recipe_id.clone(),
                cuisine: it.cuisine.clone(),
                candidate,
                reference: it.target.clone(),
                logprobs: teacher_forced_logprobs(params, ex)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub count: usize,
    /// `None` when no example could be built for this row.
    pub metrics: Option<MetricReport>,
}

pub fn score(label: &str, gens: &[&Generation]) -> Result<ReportRow, CliError> {
    let pairs: Vec<(TokenSeq, TokenSeq)> =
        gens.iter().map(|g| (normalize(&g.candidate), normalize(&g.reference))).collect();
    let logprobs: Vec<Vec<f64>> = gens.iter().map(|g| g.logprobs.clone()).collect();
    Ok(ReportRow {
        label: label.to_owned(),
        count: gens.len(),
        metrics: Some(evaluate_corpus(&pairs, Some(&logprobs))?),
    })
}

/// An `overall` row, then one per cuisine (sorted) when asked.
pub fn report_rows(gens: &[Generation], by_cuisine: bool) -> Result<Vec<ReportRow>, CliError> {
    let all: Vec<&Generation> = gens.iter().collect();
    let mut rows = vec![score("overall", &all)?];
    if by_cuisine {
        let mut groups: HashMap<&str, Vec<&Generation>> = HashMap::new();
        for g in gens {
            if let Some(c) = &g.cuisine {
                groups.entry(c).or_default().push(g);
            }
        }
        let mut labels: Vec<&str> = groups.keys().copied().collect();
        labels.sort();
        for label in labels {
            rows.push(score(label, &groups[label])?);
        }
    }
    Ok(rows)
}

pub fn markdown(rows: &[ReportRow], label_header: &str) -> String {
    let mut out = MetricReport::markdown_header(label_header);
    out.push('\n');
    for row in rows {
        match &row.metrics {
            Some(m) => out.push_str(&m.markdown_row(&row.label)),
            None => {
                let cells = vec!["n/a"; recipe_forge::metrics::REPORT_COLUMNS.len()];
                out.push_str(&format!("| {} | {} |", row.label, cells.join(" | ")));
            }
        }
        out.push('\n');
    }
    out
}

pub fn csv(rows: &[ReportRow]) -> String {
    let mut out = format!("label,count,{}\n", MetricReport::csv_header());
    for row in rows {
        let cells = match &row.metrics {
            Some(m) => m.csv_row(),
            None => vec![""; recipe_forge::metrics::REPORT_COLUMNS.len()].join(","),
        };
        out.push_str(&format!("{},{},{}\n", row.label, row.count, cells));
    }
    out
}

pub fn report_json(rows: &[ReportRow]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "label": r.label,
                "count": r.count,
                "available": r.metrics.is_some(),
                "metrics": r.metrics.as_ref().map(MetricReport::to_flat_json),
            })
        })
        .collect();
    serde_json::json!({ "rows": rows })
}

/// Writes `<out>` (JSON) plus `.md` and `.csv` siblings; returns all paths.
pub fn write_reports(out: &Path, rows: &[ReportRow], label_header: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut json = serde_json::to_string_pretty(&report_json(rows)).expect("report serializes");
    json.push('\n');
    write_atomic(out, json.as_bytes())?;
    let md = out.with_extension("md");
    write_atomic(&md, markdown(rows, label_header).as_bytes())?;
    let csv_path = out.with_extension("csv");
    write_atomic(&csv_path, csv(rows).as_bytes())?;
    Ok(vec![out.to_owned(), md, csv_path])
}

pub fn read_report(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    write_atomic(path, &jsonl(items))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut bytes = Vec::with_capacity(text.len() + 1);
    bytes.write_all(text.as_bytes()).expect("in-memory write");
    write_atomic(path, &bytes)
}
