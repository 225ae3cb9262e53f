use std::collections::BTreeMap;

use crate::corpus::TaskId;

use super::PromptError;

/// Paraphrased instruction sentences for one task; variant 0 is canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTemplate {
    pub task_id: TaskId,
    pub variants: Vec<String>,
}

impl InstructionTemplate {
    pub fn new(task_id: TaskId, variants: Vec<String>) -> Result<Self, PromptError> {
        if variants.is_empty() {
            return Err(PromptError::Template(format!("{task_id}: no instruction variants")));
        }
        for v in &variants {
            if v.trim().is_empty() || v.contains('\n') || v.contains('\r') {
                return Err(PromptError::Template(format!(
                    "{task_id}: variant {v:?} must be a single non-empty line"
                )));
            }
        }
        Ok(InstructionTemplate { task_id, variants })
    }

    pub fn canonical(&self) -> &str {
        &self.variants[0]
    }
}

pub type TemplateSet = BTreeMap<TaskId, InstructionTemplate>;

/// Parse `{"A2S": ["variant", ...], ...}`.
pub fn parse_templates(json: &str) -> Result<TemplateSet, PromptError> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_str(json).map_err(|e| PromptError::Template(e.to_string()))?;
    raw.into_iter()
        .map(|(task, variants)| {
            let task_id: TaskId = task.parse().map_err(|e: crate::corpus::CorpusError| {
                PromptError::Template(e.to_string())
            })?;
            Ok((task_id, InstructionTemplate::new(task_id, variants)?))
        })
        .collect()
}
