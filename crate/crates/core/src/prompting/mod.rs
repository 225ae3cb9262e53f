//! Instruction-templated rendering of queries and documents, and the
//! one-sentence entity descriptions used to augment queries.

mod context;
mod descriptions;
mod render;
mod template;

pub use context::PromptContext;
pub use descriptions::{
    audit_descriptions, describable_entities, description_prompt, fetch_description, AuditReport,
    DescriptionStore, EntityDescription, EntityRef,
};
pub use render::{parse_document, render_document, render_query, AugmentationPolicy};
pub use template::{parse_templates, InstructionTemplate, TemplateSet};

use crate::agent::ClientError;

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid description: {0}")]
    Description(String),
    #[error("empty description")]
    EmptyDescription,
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
