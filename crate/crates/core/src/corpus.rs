//! Recipe records, JSONL ingestion with per-line rejection, and split helpers.
//!
//! Recipe file: one JSON object per line with `id`, `title`, `ingredients`,
//! `instructions`, `partition` and optional `cuisine` / `image_features`.
//! Visual sidecar file: one `{"id": ..., "vectors": [[...], ...]}` per line,
//! joined on `id`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("visual dimension must be positive")]
    ZeroDim,
    #[error("subset size must be positive")]
    EmptySubset,
    #[error("requested {requested} recipes but only {available} are available")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("duplicate recipe id {0:?}")]
    DuplicateId(String),
    #[error("recipe {id:?}: {reason}")]
    Invalid { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    pub title: String,
    pub ingredients: Vec<String>,
    pub instructions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuisine: Option<String>,
    pub partition: Partition,
}

impl Recipe {
    pub fn has_image(&self) -> bool {
        self.image_features.as_ref().is_some_and(|v| !v.is_empty())
    }

    /// The first image vector, if any.
    pub fn first_image(&self) -> Option<&[f64]> {
        self.image_features.as_ref()?.first().map(Vec::as_slice)
    }

    // Normalizes the title in place and checks the record invariants.
    fn validate(&mut self, d_vis: usize) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        self.title = self.title.split_whitespace().collect::<Vec<_>>().join(" ");
        if self.title.is_empty() {
            return Err("empty title".into());
        }
        if self.ingredients.is_empty() {
            return Err("no ingredients".into());
        }
        if self.instructions.is_empty() {
            return Err("no instructions".into());
        }
        for (i, v) in self.image_features.iter().flatten().enumerate() {
            if v.len() != d_vis {
                return Err(format!("image vector {i} has dimension {}, expected {d_vis}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(format!("image vector {i} has a non-finite entry"));
            }
        }
        Ok(())
    }
}

/// A collection of recipes with unique ids and a common visual dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeSet {
    recipes: Vec<Recipe>,
    d_vis: usize,
}

impl RecipeSet {
    /// Validates every recipe and id uniqueness.
    pub fn new(recipes: Vec<Recipe>, d_vis: usize) -> Result<Self, CorpusError> {
        if d_vis == 0 {
            return Err(CorpusError::ZeroDim);
        }
        let mut seen = HashSet::new();
        let mut checked = Vec::with_capacity(recipes.len());
        for mut r in recipes {
            r.validate(d_vis).map_err(|reason| CorpusError::Invalid {
                id: r.id.clone(),
                reason,
            })?;
            if !seen.insert(r.id.clone()) {
                return Err(CorpusError::DuplicateId(r.id));
            }
            checked.push(r);
        }
        Ok(RecipeSet { recipes: checked, d_vis })
    }

    pub fn empty(d_vis: usize) -> Self {
        RecipeSet { recipes: Vec::new(), d_vis }
    }

    // Subsets of a valid set stay valid.
    fn subset(&self, recipes: Vec<Recipe>) -> Self {
        RecipeSet {
            recipes,
            d_vis: self.d_vis,
        }
    }

    pub fn d_vis(&self) -> usize {
        self.d_vis
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Recipe> {
        self.recipes.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.recipes.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Recipe> {
        self.recipes.iter().find(|r| r.id == id)
    }

    /// Id → recipe lookup table.
    pub fn index(&self) -> HashMap<&str, &Recipe> {
        self.recipes.iter().map(|r| (r.id.as_str(), r)).collect()
    }

    pub fn partition(&self, partition: Partition) -> RecipeSet {
        self.subset(self.recipes.iter().filter(|r| r.partition == partition).cloned().collect())
    }

    /// Recipes with at least one image vector, in order.
    pub fn filter_with_images(&self) -> RecipeSet {
        self.subset(self.recipes.iter().filter(|r| r.has_image()).cloned().collect())
    }

    /// `n` distinct recipes drawn uniformly without replacement, in draw order.
    pub fn sample_subset(&self, n: usize, seed: u64) -> Result<RecipeSet, CorpusError> {
        if n == 0 {
            return Err(CorpusError::EmptySubset);
        }
        if n > self.len() {
            return Err(CorpusError::SubsetTooLarge {
                requested: n,
                available: self.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = self.recipes.choose_multiple(&mut rng, n).cloned().collect();
        Ok(self.subset(picked))
    }

    /// Recipes whose cuisine equals `label`, ignoring case.
    pub fn cuisine_slice(&self, label: &str) -> RecipeSet {
        let label = label.to_lowercase();
        self.subset(
            self.recipes
                .iter()
                .filter(|r| r.cuisine.as_ref().is_some_and(|c| c.to_lowercase() == label))
                .cloned()
                .collect(),
        )
    }

    /// Distinct cuisine labels (case-folded), sorted.
    pub fn cuisines(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .recipes
            .iter()
            .filter_map(|r| r.cuisine.as_ref().map(|c| c.to_lowercase()))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        labels.sort();
        labels
    }

    /// Attaches sidecar vectors by id. Entries for unknown ids are dropped
    /// and reported; vectors append to any the recipe already has.
    pub fn attach_visuals(&self, entries: &[VisualEntry]) -> (RecipeSet, Vec<String>) {
        let mut recipes = self.recipes.clone();
        let position: HashMap<String, usize> = recipes.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let mut warnings = Vec::new();
        for entry in entries {
            match position.get(&entry.id) {
                Some(&i) if !entry.vectors.is_empty() => recipes[i]
                    .image_features
                    .get_or_insert_with(Vec::new)
                    .extend(entry.vectors.iter().cloned()),
                Some(_) => {}
                None => warnings.push(format!("sidecar id {:?} has no matching recipe; vectors dropped", entry.id)),
            }
        }
        (self.subset(recipes), warnings)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.recipes {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a RecipeSet {
    type Item = &'a Recipe;
    type IntoIter = std::slice::Iter<'a, Recipe>;

    fn into_iter(self) -> Self::IntoIter {
        self.recipes.iter()
    }
}

/// A line that failed to parse or validate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number.
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedRecipes {
    pub set: RecipeSet,
    pub rejections: Vec<Rejection>,
}

/// Reads a recipe JSONL file. Only an unreadable file is an error; bad lines
/// are collected as rejections.
pub fn load_recipes(path: &Path, d_vis: usize) -> Result<LoadedRecipes, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_recipes(BufReader::new(file), d_vis).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn parse_recipes<R: BufRead>(reader: R, d_vis: usize) -> io::Result<LoadedRecipes> {
    if d_vis == 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "visual dimension must be positive"));
    }
    let mut recipes = Vec::new();
    let mut rejections = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reject = |id: Option<String>, reason: String| Rejection { line: i + 1, id, reason };
        let mut recipe: Recipe = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id")?.as_str().map(str::to_owned));
                rejections.push(reject(id, format!("parse error: {e}")));
                continue;
            }
        };
        if let Err(reason) = recipe.validate(d_vis) {
            rejections.push(reject(Some(recipe.id), reason));
            continue;
        }
        if !seen.insert(recipe.id.clone()) {
            rejections.push(reject(Some(recipe.id), "duplicate id".into()));
            continue;
        }
        recipes.push(recipe);
    }
    Ok(LoadedRecipes {
        set: RecipeSet { recipes, d_vis },
        rejections,
    })
}

/// One sidecar record of pre-extracted visual features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualEntry {
    pub id: String,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LoadedVisuals {
    pub entries: Vec<VisualEntry>,
    pub rejections: Vec<Rejection>,
}

pub fn load_visual_sidecar(path: &Path, d_vis: usize) -> Result<LoadedVisuals, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut entries = Vec::new();
    let mut rejections = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VisualEntry>(&line) {
            Ok(e) if e.vectors.iter().all(|v| v.len() == d_vis && v.iter().all(|x| x.is_finite())) => entries.push(e),
            Ok(e) => rejections.push(Rejection {
                line: i + 1,
                id: Some(e.id),
                reason: format!("vectors must have dimension {d_vis} and finite entries"),
            }),
            Err(e) => rejections.push(Rejection {
                line: i + 1,
                id: None,
                reason: format!("parse error: {e}"),
            }),
        }
    }
    Ok(LoadedVisuals { entries, rejections })
}
