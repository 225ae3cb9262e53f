use serde::{Deserialize, Serialize};

use crate::corpus::{build_task_dataset, CorpusError, FieldMap, RelationRecord, TaskDataset, TaskId, TaskSpec};

const GROUP_NAMES: [&str; 12] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima",
];

/// Shape of the shared-positive relation graph: every asset is related to
/// one common block of items plus the block of its own group, so distinct
/// queries in a batch very often share positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedPositiveConfig {
    pub groups: usize,
    pub assets_per_group: usize,
    pub common_items: usize,
    pub group_items: usize,
    pub distractors: usize,
}

impl Default for SharedPositiveConfig {
    fn default() -> Self {
        SharedPositiveConfig {
            groups: 4,
            assets_per_group: 20,
            common_items: 16,
            group_items: 6,
            distractors: 40,
        }
    }
}

/// A2S-shaped records (`Asset`, `Category` -> sensor) for the graph of
/// `cfg`, without the distractors.
pub fn shared_positive_records(cfg: &SharedPositiveConfig) -> Vec<RelationRecord> {
    assert!(cfg.groups >= 1 && cfg.groups <= GROUP_NAMES.len(), "1..=12 groups supported");
    let mut out = Vec::new();
    let record = |asset: String, category: &str, item: String| {
        let mut q = FieldMap::new();
        q.insert("Asset", asset);
        q.insert("Category", category);
        RelationRecord { task_id: TaskId::A2S, query_fields: q, item }
    };
    for (g, group) in GROUP_NAMES.iter().take(cfg.groups).enumerate() {
        for a in 0..cfg.assets_per_group {
            let asset = format!("{group} unit {}", g * cfg.assets_per_group + a + 1);
            for c in 0..cfg.common_items {
                out.push(record(asset.clone(), group, format!("common reading {}", c + 1)));
            }
            for k in 0..cfg.group_items {
                out.push(record(asset.clone(), group, format!("{group} channel {}", k + 1)));
            }
        }
    }
    out
}

/// The shared-positive task over `spec` (which must be A2S-shaped); the
/// distractor items join the universe without any edge.
pub fn shared_positive_dataset(
    cfg: &SharedPositiveConfig,
    spec: &TaskSpec,
) -> Result<TaskDataset, CorpusError> {
    let mut ds = build_task_dataset(&shared_positive_records(cfg), spec)?;
    ds.items.extend((0..cfg.distractors).map(|d| format!("spare gauge {}", d + 1)));
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let cfg = SharedPositiveConfig::default();
        let recs = shared_positive_records(&cfg);
        assert_eq!(recs.len(), 4 * 20 * (16 + 6));
        let items: std::collections::BTreeSet<_> = recs.iter().map(|r| r.item.as_str()).collect();
        assert_eq!(items.len(), 16 + 4 * 6);
    }
}
