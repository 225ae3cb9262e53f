//! The nine-task corpus shipped with the crate, together with its task
//! specs, instruction templates and entity descriptions.
//!
//! The relations are synthetic but shaped like the ISO 14224 tables the
//! toolkit targets: query, item and edge counts per task are fixed.

use std::collections::BTreeMap;

use crate::corpus::{
    build_task_dataset, parse_relations, parse_task_specs, split_all, RelationFormat, RelationRecord,
    SplitRatios, TaskDataset, TaskId, TaskSpec,
};
use crate::prompting::{parse_templates, DescriptionStore, PromptContext, TemplateSet};

pub const RELATIONS_CSV: &str = include_str!("../data/relations.csv");
pub const TASK_SPECS_JSON: &str = include_str!("../data/task_specs.json");
pub const TEMPLATES_JSON: &str = include_str!("../data/templates.json");
pub const DESCRIPTIONS_JSONL: &str = include_str!("../data/descriptions.jsonl");
pub const AGENT_EXEMPLARS: &str = include_str!("../data/agent_exemplars.txt");
/// Scripted model replies for the "high temperature in the compressor" session.
pub const COMPRESSOR_SCRIPT_JSONL: &str = include_str!("../data/compressor_script.jsonl");
pub const COMPRESSOR_QUESTION: &str = "I am observing high temperature in my compressor. What should I monitor?";

/// `(queries, items, mean positives per query)` per task.
pub const TABLE_STATS: [(TaskId, usize, usize, f64); 9] = [
    (TaskId::A2S, 10, 53, 12.6),
    (TaskId::C2FM, 44, 6, 1.0),
    (TaskId::E2CAT, 10, 107, 10.7),
    (TaskId::E2CLT, 42, 156, 4.5),
    (TaskId::EU2SU, 43, 1191, 33.1),
    (TaskId::FM2CLS, 140, 62, 1.0),
    (TaskId::FM2CMP, 254, 44, 2.7),
    (TaskId::FM2S, 111, 53, 4.5),
    (TaskId::S2FM, 485, 55, 1.0),
];

pub fn task_specs() -> Vec<TaskSpec> {
    parse_task_specs(TASK_SPECS_JSON).expect("bundled task specs are valid")
}

pub fn spec_map() -> BTreeMap<TaskId, TaskSpec> {
    task_specs().into_iter().map(|s| (s.task_id, s)).collect()
}

pub fn templates() -> TemplateSet {
    parse_templates(TEMPLATES_JSON).expect("bundled templates are valid")
}

pub fn descriptions() -> DescriptionStore {
    DescriptionStore::from_jsonl(DESCRIPTIONS_JSONL.as_bytes()).expect("bundled descriptions are valid")
}

pub fn relations() -> Vec<RelationRecord> {
    parse_relations(RELATIONS_CSV.as_bytes(), RelationFormat::DelimitedTable).expect("bundled relations parse")
}

/// Unsplit datasets in [`TaskId::ALL`] order.
pub fn datasets() -> Vec<TaskDataset> {
    let records = relations();
    let specs = spec_map();
    TaskId::ALL
        .iter()
        .map(|task| {
            let recs: Vec<RelationRecord> = records.iter().filter(|r| r.task_id == *task).cloned().collect();
            build_task_dataset(&recs, &specs[task]).expect("bundled relations match their specs")
        })
        .collect()
}

pub fn prompt_context() -> PromptContext {
    PromptContext::new(task_specs(), templates(), descriptions()).expect("every bundled task has templates")
}

/// Datasets split with `seed` and the default 70/15/15 ratios, plus the
/// matching prompt context.
pub fn load(seed: u64) -> (Vec<TaskDataset>, PromptContext) {
    let ctx = prompt_context();
    let mut ds = datasets();
    split_all(&mut ds, &ctx.specs, SplitRatios::default(), seed).expect("bundled datasets split");
    (ds, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_statistics() {
        for (ds, (task, queries, items, mean)) in datasets().iter().zip(TABLE_STATS) {
            assert_eq!(ds.task_id, task);
            assert_eq!(ds.examples.len(), queries, "{task}");
            assert_eq!(ds.items.len(), items, "{task}");
            let edges: usize = ds.examples.iter().map(|e| e.positives.len()).sum();
            let avg = edges as f64 / queries as f64;
            assert!((avg - mean).abs() < 0.05, "{task}: {avg}");
        }
    }

    #[test]
    fn templates_cover_tasks() {
        let t = templates();
        for task in TaskId::ALL {
            assert!(t[&task].variants.len() >= 3);
        }
    }
}
