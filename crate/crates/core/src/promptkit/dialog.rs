use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{ingredient_dropout, sample_task, TaskSample};
use super::{InputKind, PromptError, PromptTemplate, Stage, TargetKind, TargetSet, INGREDIENTS_PLACEHOLDER, NAME_PLACEHOLDER};
use crate::corpus::{Recipe, RecipeSet};

pub const IMAGE_SENTINEL: &str = "<image>";
pub const STOP_SENTINEL: &str = "<STOP>";

const HUMAN_PREFIX: &str = "Human : ";
const ASSISTANT_PREFIX: &str = "Assistant : ";
const HUMAN_SUFFIX: &str = " <image> <STOP>\n";
const ASSISTANT_SUFFIX: &str = " <STOP>\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogExample {
    pub recipe_id: String,
    pub template_id: String,
    pub stage: Stage,
    pub targets: TargetSet,
    pub query: String,
    pub target: String,
    pub visual: Vec<f64>,
    /// Which of the recipe's image vectors fills `visual`; `None` means the
    /// zero vector stands in for a missing or masked image.
    pub visual_index: Option<usize>,
    pub serialized: String,
}

/// One line of emitted training data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogRecord {
    pub id: String,
    pub stage: Stage,
    pub serialized: String,
    pub visual_index: Option<usize>,
    pub template: String,
    pub targets: TargetSet,
}

impl From<&DialogExample> for DialogRecord {
    fn from(e: &DialogExample) -> Self {
        DialogRecord {
            id: e.recipe_id.clone(),
            stage: e.stage,
            serialized: e.serialized.clone(),
            visual_index: e.visual_index,
            template: e.template_id.clone(),
            targets: e.targets.clone(),
        }
    }
}

impl DialogRecord {
    pub fn query_and_target(&self) -> Result<(String, String), PromptError> {
        parse_dialog(&self.serialized)
    }

    /// Resolves the visual vector against the recipe it was built from.
    pub fn visual(&self, recipe: Option<&Recipe>, d_vis: usize) -> Result<Vec<f64>, PromptError> {
        let Some(i) = self.visual_index else {
            return Ok(vec![0.0; d_vis]);
        };
        let v = recipe
            .and_then(|r| r.image_features.as_ref())
            .and_then(|f| f.get(i))
            .ok_or_else(|| PromptError::MissingAttribute {
                recipe: self.id.clone(),
                attribute: "image_features",
            })?;
        if v.len() != d_vis {
            return Err(PromptError::VisualDim {
                recipe: self.id.clone(),
                got: v.len(),
                expected: d_vis,
            });
        }
        Ok(v.clone())
    }
}

fn numbered(steps: &[String]) -> String {
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Target text for the selected attributes. A single attribute is emitted
/// bare; several are labelled and ordered title, ingredients, instructions.
pub fn format_target(recipe: &Recipe, targets: &TargetSet) -> String {
    let part = |kind: TargetKind| match kind {
        TargetKind::Title => recipe.title.clone(),
        TargetKind::Ingredients => recipe.ingredients.join(", "),
        TargetKind::Instructions => numbered(&recipe.instructions),
    };
    if targets.len() == 1 {
        return part(*targets.iter().next().unwrap());
    }
    targets
        .iter()
        .map(|&kind| match kind {
            TargetKind::Title => format!("Title: {}", part(kind)),
            TargetKind::Ingredients => format!("Ingredients: {}", part(kind)),
            TargetKind::Instructions => format!("Instructions:\n{}", part(kind)),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn require(recipe: &Recipe, ok: bool, attribute: &'static str) -> Result<(), PromptError> {
    if ok {
        Ok(())
    } else {
        Err(PromptError::MissingAttribute {
            recipe: recipe.id.clone(),
            attribute,
        })
    }
}

/// Fills the template's placeholders from `recipe` and serializes the dialog.
pub fn instantiate<R: Rng + ?Sized>(
    sample: &TaskSample,
    recipe: &Recipe,
    d_vis: usize,
    rng: &mut R,
) -> Result<DialogExample, PromptError> {
    let template = &sample.template;
    let mut query = template.template.clone();
    if query.contains(NAME_PLACEHOLDER) {
        if !sample.input_mask.contains(&InputKind::Title) {
            return Err(PromptError::MaskedPlaceholder {
                template: template.id.clone(),
                placeholder: NAME_PLACEHOLDER,
            });
        }
        require(recipe, !recipe.title.trim().is_empty(), "title")?;
        query = query.replace(NAME_PLACEHOLDER, &recipe.title);
    }
    if query.contains(INGREDIENTS_PLACEHOLDER) {
        if !sample.input_mask.contains(&InputKind::Ingredients) {
            return Err(PromptError::MaskedPlaceholder {
                template: template.id.clone(),
                placeholder: INGREDIENTS_PLACEHOLDER,
            });
        }
        require(recipe, !recipe.ingredients.is_empty(), "ingredients")?;
        let shown = if sample.dropout > 0.0 {
            ingredient_dropout(&recipe.ingredients, sample.dropout, rng)
        } else {
            recipe.ingredients.clone()
        };
        query = query.replace(INGREDIENTS_PLACEHOLDER, &shown.join(", "));
    }

    for kind in &sample.target_kinds {
        match kind {
            TargetKind::Title => require(recipe, !recipe.title.trim().is_empty(), "title")?,
            TargetKind::Ingredients => require(recipe, !recipe.ingredients.is_empty(), "ingredients")?,
            TargetKind::Instructions => require(recipe, !recipe.instructions.is_empty(), "instructions")?,
        }
    }
    let target = format_target(recipe, &sample.target_kinds);

    let image = if sample.input_mask.contains(&InputKind::Image) {
        recipe.first_image()
    } else {
        None
    };
    let (visual, visual_index) = match image {
        Some(v) if v.len() != d_vis => {
            return Err(PromptError::VisualDim {
                recipe: recipe.id.clone(),
                got: v.len(),
                expected: d_vis,
            })
        }
        Some(v) => (v.to_vec(), Some(0)),
        None => (vec![0.0; d_vis], None),
    };

    let serialized = serialize_dialog(&query, &target)?;
    Ok(DialogExample {
        recipe_id: recipe.id.clone(),
        template_id: template.id.clone(),
        stage: sample.stage,
        targets: sample.target_kinds.clone(),
        query,
        target,
        visual,
        visual_index,
        serialized,
    })
}

/// `Human : <query> <image> <STOP>\nAssistant : <target> <STOP>\n`
pub fn serialize_dialog(query: &str, target: &str) -> Result<String, PromptError> {
    if target.trim().is_empty() {
        return Err(PromptError::Dialog("empty target".into()));
    }
    Ok(format!("{HUMAN_PREFIX}{query}{HUMAN_SUFFIX}{ASSISTANT_PREFIX}{target}{ASSISTANT_SUFFIX}"))
}

/// Inverse of [`serialize_dialog`]: recovers (query, target).
pub fn parse_dialog(text: &str) -> Result<(String, String), PromptError> {
    let bad = |why: &str| PromptError::Dialog(why.to_owned());
    let body = text.strip_prefix(HUMAN_PREFIX).ok_or_else(|| bad("missing human turn"))?;
    let body = body.strip_suffix(ASSISTANT_SUFFIX).ok_or_else(|| bad("missing final stop"))?;
    let separator = format!("{HUMAN_SUFFIX}{ASSISTANT_PREFIX}");
    let (query, target) = body.split_once(&separator).ok_or_else(|| bad("missing assistant turn"))?;
    if target.contains(&separator) {
        return Err(bad("more than one assistant turn"));
    }
    Ok((query.to_owned(), target.to_owned()))
}

/// Draws one task per recipe and instantiates it.
pub fn build_dialogs<R: Rng + ?Sized>(
    recipes: &RecipeSet,
    bank: &[PromptTemplate],
    stage: Stage,
    rng: &mut R,
) -> Result<Vec<DialogExample>, PromptError> {
    recipes
        .iter()
        .map(|recipe| {
            let sample = sample_task(bank, stage, rng)?;
            instantiate(&sample, recipe, recipes.d_vis(), rng)
        })
        .collect()
}
