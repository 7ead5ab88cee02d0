//! Prompt bank, stage-aware task sampling, placeholder substitution,
//! ingredient dropout and single-round dialog serialization.

mod bank;
mod dialog;
mod sampling;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bank::{default_bank, load_prompt_bank, parse_prompt_bank, templates_for_inputs, TemplateIssue, DEFAULT_BANK};
pub use dialog::{
    build_dialogs, format_target, instantiate, parse_dialog, serialize_dialog, DialogExample, DialogRecord,
    IMAGE_SENTINEL, STOP_SENTINEL,
};
pub use sampling::{ingredient_dropout, sample_task, TaskSample, DEFAULT_DROPOUT_FRACTION};

/// Training stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    S0,
    S1,
    S2,
    S3,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::S0, Stage::S1, Stage::S2, Stage::S3];

    /// Ingredient dropout is only applied from stage 2 on.
    pub fn uses_dropout(self) -> bool {
        matches!(self, Stage::S2 | Stage::S3)
    }

    pub fn previous(self) -> Option<Stage> {
        match self {
            Stage::S0 => None,
            Stage::S1 => Some(Stage::S0),
            Stage::S2 => Some(Stage::S1),
            Stage::S3 => Some(Stage::S2),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", *self as u8)
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().trim_start_matches('S') {
            "0" => Ok(Stage::S0),
            "1" => Ok(Stage::S1),
            "2" => Ok(Stage::S2),
            "3" => Ok(Stage::S3),
            _ => Err(format!("unknown stage {s:?} (expected S0..S3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Image,
    Title,
    Ingredients,
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "image" | "i" | "x_i" => Ok(InputKind::Image),
            "title" | "t" | "name" | "x_t" => Ok(InputKind::Title),
            "ingredients" | "ing" | "x_ing" => Ok(InputKind::Ingredients),
            _ => Err(format!("unknown input {s:?}")),
        }
    }
}

/// Target attributes; the declaration order is the serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Title,
    Ingredients,
    Instructions,
}

pub type InputSet = BTreeSet<InputKind>;
pub type TargetSet = BTreeSet<TargetKind>;

pub const NAME_PLACEHOLDER: &str = "<name>";
pub const INGREDIENTS_PLACEHOLDER: &str = "<ingredients>";

/// A prompt with placeholders, its declared inputs and outputs, and the
/// stages that may draw it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub stages: BTreeSet<Stage>,
    pub required_inputs: InputSet,
    pub targets: TargetSet,
    pub template: String,
}

impl PromptTemplate {
    /// Checks the placeholder and stage rules, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.stages.is_empty() {
            return Err("no stages".into());
        }
        if self.targets.is_empty() {
            return Err("no targets".into());
        }
        if self.template.trim().is_empty() {
            return Err("empty template text".into());
        }
        let has_name = self.template.contains(NAME_PLACEHOLDER);
        let wants_title = self.required_inputs.contains(&InputKind::Title);
        if has_name != wants_title {
            return Err(format!(
                "template {} {NAME_PLACEHOLDER} but title is {}a required input",
                if has_name { "contains" } else { "lacks" },
                if wants_title { "" } else { "not " }
            ));
        }
        let has_ing = self.template.contains(INGREDIENTS_PLACEHOLDER);
        let wants_ing = self.required_inputs.contains(&InputKind::Ingredients);
        if has_ing != wants_ing {
            return Err(format!(
                "template {} {INGREDIENTS_PLACEHOLDER} but ingredients are {}a required input",
                if has_ing { "contains" } else { "lacks" },
                if wants_ing { "" } else { "not " }
            ));
        }
        if self.template.contains(IMAGE_SENTINEL) || self.template.contains(STOP_SENTINEL) {
            return Err("template text contains a dialog sentinel".into());
        }
        if self.stages.contains(&Stage::S0) || self.stages.contains(&Stage::S1) {
            let all_inputs: InputSet = [InputKind::Image, InputKind::Title, InputKind::Ingredients].into();
            if self.targets != TargetSet::from([TargetKind::Instructions]) || self.required_inputs != all_inputs {
                return Err("stage 0/1 templates must map image+title+ingredients to instructions".into());
            }
        }
        let leaked = (self.targets.contains(&TargetKind::Title) && wants_title)
            || (self.targets.contains(&TargetKind::Ingredients) && wants_ing);
        if leaked {
            return Err("a target attribute is also a required input".into());
        }
        Ok(())
    }

    pub fn applies_to(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("cannot read prompt bank {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("invalid prompt bank: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidBank(Vec<TemplateIssue>),
    #[error("no template in the bank applies to stage {0}")]
    NoApplicableTemplate(Stage),
    #[error("recipe {recipe}: missing required attribute {attribute}")]
    MissingAttribute { recipe: String, attribute: &'static str },
    #[error("template {template} uses {placeholder} but that input is masked out")]
    MaskedPlaceholder { template: String, placeholder: &'static str },
    #[error("recipe {recipe}: image vector has dimension {got}, expected {expected}")]
    VisualDim { recipe: String, got: usize, expected: usize },
    #[error("dialog error: {0}")]
    Dialog(String),
}
