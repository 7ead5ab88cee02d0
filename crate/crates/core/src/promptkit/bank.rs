use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use super::{InputSet, PromptError, PromptTemplate, TargetKind};

/// The bundled bank: 35 stage-0/1 instruction prompts and 67 stage-2/3 prompts.
pub const DEFAULT_BANK: &str = include_str!("../../data/prompt_bank.jsonl");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateIssue {
    pub line: usize,
    pub id: Option<String>,
    pub reason: String,
}

impl fmt::Display for TemplateIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} ({id}): {}", self.line, self.reason),
            None => write!(f, "line {}: {}", self.line, self.reason),
        }
    }
}

pub fn load_prompt_bank(path: &Path) -> Result<Vec<PromptTemplate>, PromptError> {
    let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_prompt_bank(&text)
}

/// Parses and validates a JSONL bank. Every invalid or duplicate template is
/// reported; any issue fails the whole bank.
pub fn parse_prompt_bank(text: &str) -> Result<Vec<PromptTemplate>, PromptError> {
    let mut templates = Vec::new();
    let mut issues = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let issue = |id: Option<String>, reason: String| TemplateIssue { line: i + 1, id, reason };
        let template: PromptTemplate = match serde_json::from_str(line) {
            Ok(t) => t,
            Err(e) => {
                issues.push(issue(None, format!("parse error: {e}")));
                continue;
            }
        };
        if let Err(reason) = template.validate() {
            issues.push(issue(Some(template.id), reason));
            continue;
        }
        if !ids.insert(template.id.clone()) {
            issues.push(issue(Some(template.id), "duplicate id".into()));
            continue;
        }
        templates.push(template);
    }
    if issues.is_empty() {
        Ok(templates)
    } else {
        Err(PromptError::InvalidBank(issues))
    }
}

pub fn default_bank() -> Vec<PromptTemplate> {
    parse_prompt_bank(DEFAULT_BANK).expect("bundled prompt bank is valid")
}

/// Instruction-generation templates whose text inputs (title, ingredients)
/// are exactly those of `inputs`. Templates whose image requirement also
/// matches come first.
pub fn templates_for_inputs<'a>(bank: &'a [PromptTemplate], inputs: &InputSet) -> Vec<&'a PromptTemplate> {
    use super::InputKind::Image;
    let text_part = |s: &InputSet| s.iter().copied().filter(|k| *k != Image).collect::<InputSet>();
    let wanted = text_part(inputs);
    let mut hits: Vec<&PromptTemplate> = bank
        .iter()
        .filter(|t| t.targets.len() == 1 && t.targets.contains(&TargetKind::Instructions))
        .filter(|t| text_part(&t.required_inputs) == wanted)
        .collect();
    let image_wanted = inputs.contains(&Image);
    hits.sort_by_key(|t| t.required_inputs.contains(&Image) != image_wanted);
    let exact = hits.iter().filter(|t| t.required_inputs.contains(&Image) == image_wanted).count();
    if exact > 0 {
        hits.truncate(exact);
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::super::{InputKind, Stage};
    use super::*;

    #[test]
    fn bundled_bank_shape() {
        let bank = default_bank();
        assert_eq!(bank.len(), 102);
        assert_eq!(bank.iter().filter(|t| t.applies_to(Stage::S1)).count(), 35);
        assert_eq!(bank.iter().filter(|t| t.applies_to(Stage::S2)).count(), 102);
        let table_one = bank
            .iter()
            .find(|t| t.template == "Generate cooking instructions for <name>:")
            .unwrap();
        assert_eq!(table_one.required_inputs, InputSet::from([InputKind::Title]));
        assert_eq!(table_one.targets, [TargetKind::Instructions].into());
    }

    #[test]
    fn rejects_placeholder_mismatch_with_id() {
        let text = r#"{"id":"bad","stages":["S2"],"required_inputs":["title"],"targets":["instructions"],"template":"Cook it"}"#;
        match parse_prompt_bank(text) {
            Err(PromptError::InvalidBank(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].id.as_deref(), Some("bad"));
            }
            other => panic!("expected invalid bank, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates() {
        let line = r#"{"id":"a","stages":["S2"],"required_inputs":["image"],"targets":["title"],"template":"What dish?"}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(parse_prompt_bank(&text), Err(PromptError::InvalidBank(v)) if v[0].line == 2));
    }

    #[test]
    fn empty_bank_is_empty() {
        assert!(parse_prompt_bank("").unwrap().is_empty());
        assert!(parse_prompt_bank("\n\n").unwrap().is_empty());
    }

    #[test]
    fn mask_lookup() {
        let bank = default_bank();
        let title_only = templates_for_inputs(&bank, &InputSet::from([InputKind::Title]));
        assert!(!title_only.is_empty());
        assert!(title_only.iter().all(|t| t.required_inputs == InputSet::from([InputKind::Title])));
        let text_both = templates_for_inputs(&bank, &InputSet::from([InputKind::Title, InputKind::Ingredients]));
        assert!(text_both.iter().all(|t| !t.required_inputs.contains(&InputKind::Image)));
    }
}
