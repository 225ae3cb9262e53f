use rand::Rng;

use crate::corpus::{FieldMap, TaskSpec};

use super::descriptions::DescriptionStore;
use super::template::InstructionTemplate;

/// Probability of appending each available entity description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationPolicy {
    pub p_desc: f64,
    pub seed: u64,
}

impl AugmentationPolicy {
    pub fn new(p_desc: f64, seed: u64) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&p_desc) {
            return Err(format!("p_desc {p_desc} outside [0, 1]"));
        }
        Ok(AugmentationPolicy { p_desc, seed })
    }
}

/// `Instruct: <variant>. Query: F1: v1, F2: v2` followed by zero or more
/// `<Field> description: <sentence>` lines.
///
/// One uniform draw is consumed per describable field of `spec`, in field
/// order, whether or not a description is stored; a description is only
/// ever copied from `store`.
pub fn render_query<R: Rng + ?Sized>(
    query: &FieldMap,
    spec: &TaskSpec,
    template: &InstructionTemplate,
    variant_index: usize,
    store: &DescriptionStore,
    p_desc: f64,
    rng: &mut R,
) -> String {
    let variant = template.variants[variant_index].trim();
    let mut text = String::with_capacity(128);
    text.push_str("Instruct: ");
    text.push_str(variant);
    if !variant.ends_with(['.', '?', '!']) {
        text.push('.');
    }
    text.push_str(" Query: ");
    let mut first = true;
    for field in &spec.required_query_fields {
        if let Some(value) = query.get(field) {
            if !first {
                text.push_str(", ");
            }
            first = false;
            text.push_str(field);
            text.push_str(": ");
            text.push_str(value);
        }
    }
    for field in &spec.required_query_fields {
        let Some(kind) = spec.described_kind(field) else {
            continue;
        };
        let draw: f64 = rng.gen();
        if draw >= p_desc {
            continue;
        }
        if let Some(desc) = query.get(field).and_then(|v| store.get(kind, v)) {
            text.push('\n');
            text.push_str(field);
            text.push_str(" description: ");
            text.push_str(&desc.sentence);
        }
    }
    text
}

/// `<output tag>: <item>`.
pub fn render_document(item: &str, spec: &TaskSpec) -> String {
    format!("{}: {}", spec.output_tag, item)
}

/// Inverse of [`render_document`] for items without `": "`.
pub fn parse_document(text: &str) -> Option<(&str, &str)> {
    text.split_once(": ")
}
