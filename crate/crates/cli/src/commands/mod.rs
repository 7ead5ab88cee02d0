pub mod data;
pub mod eval;
pub mod oracle;
pub mod train;

use std::path::Path;

use recipe_forge::promptkit::{default_bank, load_prompt_bank, PromptTemplate};

use crate::error::CliError;
use crate::manifest::RunManifest;

pub(crate) fn config_json<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("configuration serializes")
}

pub(crate) fn load_bank(path: Option<&Path>, manifest: &mut RunManifest) -> Result<Vec<PromptTemplate>, CliError> {
    match path {
        Some(p) => {
            manifest.input(p)?;
            Ok(load_prompt_bank(p)?)
        }
        None => Ok(default_bank()),
    }
}

pub(crate) fn parse_list(raw: &str) -> Vec<String> {
    raw.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect()
}
