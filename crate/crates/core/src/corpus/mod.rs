//! Relation ingestion and the nine task datasets.
//!
//! A task is a bipartite graph between queries (ordered field maps such as
//! `Asset`, `Category`, `Fault`) and items (sensors, failure modes,
//! components, ...). Edges are positives; every missing edge to an item of
//! the task's universe is a negative, derived on demand.

mod dataset;
mod fields;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{
    build_task_dataset, enumerate_pairs, read_dataset, split_all, split_dataset, write_dataset, LabeledRef,
    SplitRatios,
};
pub use fields::FieldMap;
pub use parse::{parse_relations, RelationFormat};

/// The nine retrieval tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    A2S,
    C2FM,
    E2CAT,
    E2CLT,
    EU2SU,
    FM2CLS,
    FM2CMP,
    FM2S,
    S2FM,
}

impl TaskId {
    pub const ALL: [TaskId; 9] = [
        TaskId::A2S,
        TaskId::C2FM,
        TaskId::E2CAT,
        TaskId::E2CLT,
        TaskId::EU2SU,
        TaskId::FM2CLS,
        TaskId::FM2CMP,
        TaskId::FM2S,
        TaskId::S2FM,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::A2S => "A2S",
            TaskId::C2FM => "C2FM",
            TaskId::E2CAT => "E2CAT",
            TaskId::E2CLT => "E2CLT",
            TaskId::EU2SU => "EU2SU",
            TaskId::FM2CLS => "FM2CLS",
            TaskId::FM2CMP => "FM2CMP",
            TaskId::FM2S => "FM2S",
            TaskId::S2FM => "S2FM",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| CorpusError::Validation(format!("unknown task '{s}'")))
    }
}

/// One edge of the bipartite relation graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationRecord {
    pub task_id: TaskId,
    pub query_fields: FieldMap,
    pub item: String,
}

/// Entity kinds that can carry a one-sentence description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Asset,
    Sensor,
    FailureMode,
    Component,
    EquipmentCategory,
    EquipmentType,
    EquipmentClass,
    Subunit,
    Unit,
}

impl EntityKind {
    pub const ALL: [EntityKind; 9] = [
        EntityKind::Asset,
        EntityKind::Sensor,
        EntityKind::FailureMode,
        EntityKind::Component,
        EntityKind::EquipmentCategory,
        EntityKind::EquipmentType,
        EntityKind::EquipmentClass,
        EntityKind::Subunit,
        EntityKind::Unit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Asset => "asset",
            EntityKind::Sensor => "sensor",
            EntityKind::FailureMode => "failure_mode",
            EntityKind::Component => "component",
            EntityKind::EquipmentCategory => "equipment_category",
            EntityKind::EquipmentType => "equipment_type",
            EntityKind::EquipmentClass => "equipment_class",
            EntityKind::Subunit => "subunit",
            EntityKind::Unit => "unit",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| CorpusError::Validation(format!("unknown entity kind '{s}'")))
    }
}

/// A query field whose value names a describable entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribedField {
    pub field: String,
    pub kind: EntityKind,
}

/// Static configuration of one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: TaskId,
    pub required_query_fields: Vec<String>,
    pub item_kind: String,
    #[serde(default)]
    pub asset_field: Option<String>,
    pub output_tag: String,
    #[serde(default)]
    pub described_fields: Vec<DescribedField>,
    pub tool_name: String,
    pub tool_description: String,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.required_query_fields.is_empty() {
            return Err(CorpusError::Validation(format!(
                "{}: no required query fields",
                self.task_id
            )));
        }
        if self.output_tag.trim().is_empty() {
            return Err(CorpusError::Validation(format!("{}: empty output tag", self.task_id)));
        }
        if let Some(asset) = &self.asset_field {
            if !self.required_query_fields.contains(asset) {
                return Err(CorpusError::Validation(format!(
                    "{}: asset field '{asset}' is not a required query field",
                    self.task_id
                )));
            }
        }
        for d in &self.described_fields {
            if !self.required_query_fields.contains(&d.field) {
                return Err(CorpusError::Validation(format!(
                    "{}: described field '{}' is not a required query field",
                    self.task_id, d.field
                )));
            }
        }
        Ok(())
    }

    /// Kind of entity named by `field`, when that field is describable.
    pub fn described_kind(&self, field: &str) -> Option<EntityKind> {
        self.described_fields
            .iter()
            .find(|d| d.field == field)
            .map(|d| d.kind)
    }
}

/// Parse and validate a task-spec configuration file (JSON array).
pub fn parse_task_specs(json: &str) -> Result<Vec<TaskSpec>, CorpusError> {
    let specs: Vec<TaskSpec> =
        serde_json::from_str(json).map_err(|e| CorpusError::Parse { line: e.line() as u64, message: e.to_string() })?;
    let mut seen = std::collections::BTreeSet::new();
    for spec in &specs {
        spec.validate()?;
        if !seen.insert(spec.task_id) {
            return Err(CorpusError::Validation(format!("duplicate spec for {}", spec.task_id)));
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(CorpusError::Validation(format!("unknown split '{other}'"))),
        }
    }
}

/// A distinct query of a task with its relevant items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryExample {
    pub task_id: TaskId,
    pub query_fields: FieldMap,
    /// Relevant items, in universe order.
    pub positives: Vec<String>,
    pub split: Split,
}

/// All queries of one task over an explicit item universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDataset {
    pub task_id: TaskId,
    pub items: Vec<String>,
    pub examples: Vec<QueryExample>,
    /// Case-folded asset identifiers; empty when the task has no asset field.
    pub assets: std::collections::BTreeSet<String>,
}

impl TaskDataset {
    pub fn item_index(&self, item: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item)
    }

    /// Positive item indices of example `idx`, ascending.
    pub fn positive_indices(&self, idx: usize) -> Vec<usize> {
        let lookup: std::collections::HashMap<&str, usize> =
            self.items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut out: Vec<usize> = self.examples[idx]
            .positives
            .iter()
            .filter_map(|p| lookup.get(p.as_str()).copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Items of the universe that are not positives of example `idx`.
    pub fn negatives(&self, idx: usize) -> Vec<&str> {
        let pos: std::collections::HashSet<&str> =
            self.examples[idx].positives.iter().map(String::as_str).collect();
        self.items
            .iter()
            .map(String::as_str)
            .filter(|i| !pos.contains(i))
            .collect()
    }

    pub fn examples_in(&self, split: Split) -> impl Iterator<Item = (usize, &QueryExample)> {
        self.examples
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.split == split)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Case-fold and trim a value for identity comparisons.
pub fn fold(value: &str) -> String {
    value.trim().to_lowercase()
}
