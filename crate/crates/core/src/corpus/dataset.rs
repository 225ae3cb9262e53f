use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fold, CorpusError, FieldMap, QueryExample, RelationRecord, Split, TaskDataset, TaskId, TaskSpec};

/// Group `records` (all of `spec.task_id`) into distinct queries over the
/// task's item universe. Duplicate edges collapse.
pub fn build_task_dataset(
    records: &[RelationRecord],
    spec: &TaskSpec,
) -> Result<TaskDataset, CorpusError> {
    let mut items: Vec<String> = Vec::new();
    let mut item_ids: HashMap<String, usize> = HashMap::new();
    let mut examples: Vec<(FieldMap, BTreeSet<usize>)> = Vec::new();
    let mut query_ids: HashMap<Vec<(String, String)>, usize> = HashMap::new();

    for (idx, rec) in records.iter().enumerate() {
        if rec.task_id != spec.task_id {
            return Err(CorpusError::Validation(format!(
                "record {idx} belongs to {} but the spec is for {}",
                rec.task_id, spec.task_id
            )));
        }
        let mut query = FieldMap::new();
        for field in &spec.required_query_fields {
            let value = rec.query_fields.get(field).ok_or_else(|| {
                CorpusError::Validation(format!(
                    "record {idx}: missing required field '{field}'"
                ))
            })?;
            query.insert(field.clone(), value.trim());
        }
        let item = rec.item.trim();
        if item.is_empty() {
            return Err(CorpusError::Validation(format!("record {idx}: empty item")));
        }
        let item_id = *item_ids.entry(item.to_string()).or_insert_with(|| {
            items.push(item.to_string());
            items.len() - 1
        });
        let qid = *query_ids.entry(query.identity()).or_insert_with(|| {
            examples.push((query, BTreeSet::new()));
            examples.len() - 1
        });
        examples[qid].1.insert(item_id);
    }

    let assets = match &spec.asset_field {
        Some(field) => examples
            .iter()
            .filter_map(|(q, _)| q.get(field).map(fold))
            .collect(),
        None => BTreeSet::new(),
    };
    let examples = examples
        .into_iter()
        .map(|(query_fields, pos)| QueryExample {
            task_id: spec.task_id,
            query_fields,
            positives: pos.into_iter().map(|i| items[i].clone()).collect(),
            split: Split::Unassigned,
        })
        .collect();
    Ok(TaskDataset {
        task_id: spec.task_id,
        items,
        examples,
        assets,
    })
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, CorpusError> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CorpusError::Split(format!("invalid ratios {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CorpusError::Split(format!("ratios {parts:?} do not sum to 1")));
        }
        Ok(())
    }

    /// Split sizes for `n` units: floor for val and test, remainder to train.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon keeps products like 0.29 * 100 from flooring to 28.
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let val = floor(self.val);
        let test = floor(self.test);
        (n - val - test, val, test)
    }

    fn nonzero(&self) -> usize {
        [self.train, self.val, self.test].iter().filter(|r| **r > 0.0).count()
    }
}

/// Assign every example of `dataset` to a split, deterministically for a
/// given seed. With an asset field, whole assets move together.
pub fn split_dataset(
    dataset: &mut TaskDataset,
    spec: &TaskSpec,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(), CorpusError> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match &spec.asset_field {
        Some(field) => {
            let assets: Vec<String> = dataset
                .examples
                .iter()
                .filter_map(|e| e.query_fields.get(field).map(fold))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if assets.len() < ratios.nonzero() {
                return Err(CorpusError::Split(format!(
                    "{}: only {} assets for {} non-empty splits; use random splitting instead",
                    dataset.task_id,
                    assets.len(),
                    ratios.nonzero()
                )));
            }
            let assignment = assign(assets, ratios, &mut rng);
            for ex in &mut dataset.examples {
                let key = ex.query_fields.get(field).map(fold).unwrap_or_default();
                ex.split = assignment[&key];
            }
        }
        None => {
            let n = dataset.examples.len();
            if n < ratios.nonzero() {
                return Err(CorpusError::Split(format!(
                    "{}: only {n} queries for {} non-empty splits",
                    dataset.task_id,
                    ratios.nonzero()
                )));
            }
            let assignment = assign((0..n).collect(), ratios, &mut rng);
            for (i, ex) in dataset.examples.iter_mut().enumerate() {
                ex.split = assignment[&i];
            }
        }
    }
    Ok(())
}

/// Split every dataset with its own stream `corpus.split/<TASK>` of `seed`.
pub fn split_all(
    datasets: &mut [TaskDataset],
    specs: &std::collections::BTreeMap<TaskId, TaskSpec>,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(), CorpusError> {
    for ds in datasets {
        let spec = specs
            .get(&ds.task_id)
            .ok_or_else(|| CorpusError::Validation(format!("no task spec for {}", ds.task_id)))?;
        let task_seed = crate::rng::derive_seed(seed, &format!("corpus.split/{}", ds.task_id));
        split_dataset(ds, spec, ratios, task_seed)?;
    }
    Ok(())
}

fn assign<K: std::hash::Hash + Eq>(
    mut units: Vec<K>,
    ratios: SplitRatios,
    rng: &mut ChaCha8Rng,
) -> HashMap<K, Split> {
    units.shuffle(rng);
    let (train, val, _) = ratios.counts(units.len());
    units
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            (k, split)
        })
        .collect()
}

/// A (query, item, label) triple by index into a [`TaskDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledRef {
    pub example: usize,
    pub item: usize,
    pub label: u8,
}

/// Every (query, item) pair of `split`: label 1 for positives, 0 for the
/// rest of the universe.
pub fn enumerate_pairs(dataset: &TaskDataset, split: Split) -> Vec<LabeledRef> {
    let lookup: HashMap<&str, usize> = dataset
        .items
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut out = Vec::new();
    for (ex_idx, ex) in dataset.examples_in(split) {
        let mut relevant = vec![false; dataset.items.len()];
        for p in &ex.positives {
            if let Some(&i) = lookup.get(p.as_str()) {
                relevant[i] = true;
            }
        }
        out.extend(relevant.iter().enumerate().map(|(item, &rel)| LabeledRef {
            example: ex_idx,
            item,
            label: u8::from(rel),
        }));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    task: TaskId,
    items: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ExampleLine {
    task: TaskId,
    query: FieldMap,
    positives: Vec<String>,
    split: Split,
}

/// Write the JSON-lines dataset file: one header object, then one object
/// per example.
pub fn write_dataset<W: Write>(dataset: &TaskDataset, mut out: W) -> Result<(), CorpusError> {
    let to_io = |e: serde_json::Error| CorpusError::Io(e.into());
    serde_json::to_writer(
        &mut out,
        &HeaderLine {
            task: dataset.task_id,
            items: dataset.items.clone(),
        },
    )
    .map_err(to_io)?;
    out.write_all(b"\n")?;
    for ex in &dataset.examples {
        serde_json::to_writer(
            &mut out,
            &ExampleLine {
                task: ex.task_id,
                query: ex.query_fields.clone(),
                positives: ex.positives.clone(),
                split: ex.split,
            },
        )
        .map_err(to_io)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a dataset file written by [`write_dataset`], checking the
/// universe invariants.
pub fn read_dataset<R: Read>(input: R, spec: &TaskSpec) -> Result<TaskDataset, CorpusError> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CorpusError::Parse {
        line: 1,
        message: "empty dataset file".into(),
    })?;
    let header: HeaderLine = serde_json::from_str(&header?).map_err(|e| CorpusError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.task != spec.task_id {
        return Err(CorpusError::Validation(format!(
            "dataset is for {} but the spec is for {}",
            header.task, spec.task_id
        )));
    }
    let universe: HashMap<&str, usize> = header
        .items
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    if universe.len() != header.items.len() {
        return Err(CorpusError::Validation("duplicate items in universe".into()));
    }
    let mut examples = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx as u64 + 1;
        let ex: ExampleLine = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if ex.positives.is_empty() {
            return Err(CorpusError::Validation(format!("line {line_no}: no positives")));
        }
        let mut pos = Vec::with_capacity(ex.positives.len());
        for p in &ex.positives {
            let i = universe.get(p.as_str()).copied().ok_or_else(|| {
                CorpusError::Validation(format!("line {line_no}: positive '{p}' not in universe"))
            })?;
            pos.push(i);
        }
        pos.sort_unstable();
        pos.dedup();
        for field in &spec.required_query_fields {
            if ex.query.get(field).is_none() {
                return Err(CorpusError::Validation(format!(
                    "line {line_no}: missing required field '{field}'"
                )));
            }
        }
        examples.push(QueryExample {
            task_id: ex.task,
            query_fields: ex.query,
            positives: pos.into_iter().map(|i| header.items[i].clone()).collect(),
            split: ex.split,
        });
    }
    let assets = match &spec.asset_field {
        Some(field) => examples
            .iter()
            .filter_map(|e| e.query_fields.get(field).map(fold))
            .collect(),
        None => BTreeSet::new(),
    };
    Ok(TaskDataset {
        task_id: header.task,
        items: header.items,
        examples,
        assets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_relations, RelationFormat};

    fn a2s_spec(asset: bool) -> TaskSpec {
        TaskSpec {
            task_id: TaskId::A2S,
            required_query_fields: vec!["Asset".into()],
            item_kind: "sensor".into(),
            asset_field: asset.then(|| "Asset".into()),
            output_tag: "Sensor".into(),
            described_fields: vec![],
            tool_name: "asset_to_sensors".into(),
            tool_description: "".into(),
        }
    }

    fn figure_two() -> Vec<RelationRecord> {
        let text = "task,Asset,item\n\
            A2S,Transformer,Vibration\nA2S,Transformer,Temperature\nA2S,Transformer,Resistance\n\
            A2S,Pump,Vibration\nA2S,Pump,Temperature\n\
            A2S,Fan,Vibration\nA2S,Fan,Temperature\n";
        parse_relations(text.as_bytes(), RelationFormat::DelimitedTable).unwrap()
    }

    #[test]
    fn figure_two_positives_and_implied_negatives() {
        let ds = build_task_dataset(&figure_two(), &a2s_spec(true)).unwrap();
        assert_eq!(ds.items, ["Vibration", "Temperature", "Resistance"]);
        assert_eq!(ds.examples.len(), 3);
        let fan = ds
            .examples
            .iter()
            .position(|e| e.query_fields.get("Asset") == Some("Fan"))
            .unwrap();
        assert_eq!(ds.examples[fan].positives, ["Vibration", "Temperature"]);
        assert_eq!(ds.negatives(fan), ["Resistance"]);
    }

    #[test]
    fn single_record_is_degenerate_dataset() {
        let recs = &figure_two()[..1];
        let ds = build_task_dataset(recs, &a2s_spec(true)).unwrap();
        assert_eq!(ds.examples.len(), 1);
        assert_eq!(ds.items.len(), 1);
        assert!(ds.negatives(0).is_empty());
    }

    #[test]
    fn duplicate_edges_and_case_variants_collapse() {
        let text = "task,Asset,item\nA2S,Pump,flow\nA2S, pump ,flow\nA2S,PUMP,speed\n";
        let recs = parse_relations(text.as_bytes(), RelationFormat::DelimitedTable).unwrap();
        let ds = build_task_dataset(&recs, &a2s_spec(true)).unwrap();
        assert_eq!(ds.examples.len(), 1);
        assert_eq!(ds.examples[0].positives, ["flow", "speed"]);
        assert_eq!(ds.examples[0].query_fields.get("Asset"), Some("Pump"));
    }

    #[test]
    fn missing_required_field_names_field_and_record() {
        let mut spec = a2s_spec(false);
        spec.required_query_fields.push("Category".into());
        let err = build_task_dataset(&figure_two(), &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("record 0") && msg.contains("Category"), "{msg}");
    }

    fn ten_asset_dataset() -> TaskDataset {
        let mut text = String::from("task,Asset,item\n");
        for a in 0..10 {
            for s in 0..3 {
                text.push_str(&format!("A2S,asset{a},sensor{}\n", (a + s) % 7));
            }
        }
        let recs = parse_relations(text.as_bytes(), RelationFormat::DelimitedTable).unwrap();
        build_task_dataset(&recs, &a2s_spec(true)).unwrap()
    }

    #[test]
    fn floor_remainder_sizes() {
        let mut ds = ten_asset_dataset();
        split_dataset(&mut ds, &a2s_spec(true), SplitRatios::default(), 7).unwrap();
        let count = |s| ds.examples.iter().filter(|e| e.split == s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (8, 1, 1));
        assert_eq!(SplitRatios::default().counts(10), (8, 1, 1));
        assert_eq!(SplitRatios::default().counts(43), (31, 6, 6));
    }

    #[test]
    fn split_is_deterministic() {
        let mut a = ten_asset_dataset();
        let mut b = ten_asset_dataset();
        split_dataset(&mut a, &a2s_spec(true), SplitRatios::default(), 7).unwrap();
        split_dataset(&mut b, &a2s_spec(true), SplitRatios::default(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_assets_suggests_random_split() {
        let mut ds = build_task_dataset(&figure_two()[..5], &a2s_spec(true)).unwrap();
        assert_eq!(ds.assets.len(), 2);
        let err = split_dataset(&mut ds, &a2s_spec(true), SplitRatios::default(), 1).unwrap_err();
        assert!(err.to_string().contains("random"), "{err}");
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitRatios::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitRatios::new(1.2, -0.1, -0.1).is_err());
        assert!(SplitRatios::new(0.8, 0.1, 0.1).is_ok());
    }

    #[test]
    fn pairs_cover_universe_per_example() {
        let mut ds = build_task_dataset(&figure_two(), &a2s_spec(true)).unwrap();
        for ex in &mut ds.examples {
            ex.split = Split::Train;
        }
        let pairs = enumerate_pairs(&ds, Split::Train);
        assert_eq!(pairs.len(), 9);
        let fan = ds
            .examples
            .iter()
            .position(|e| e.query_fields.get("Asset") == Some("Fan"))
            .unwrap();
        let fan_pairs: Vec<_> = pairs
            .iter()
            .filter(|p| p.example == fan)
            .map(|p| (ds.items[p.item].as_str(), p.label))
            .collect();
        assert_eq!(
            fan_pairs,
            [("Vibration", 1), ("Temperature", 1), ("Resistance", 0)]
        );
        // Transformer is related to every item: no negatives.
        let tr = ds
            .examples
            .iter()
            .position(|e| e.query_fields.get("Asset") == Some("Transformer"))
            .unwrap();
        assert!(pairs.iter().filter(|p| p.example == tr).all(|p| p.label == 1));
        assert!(enumerate_pairs(&ds, Split::Test).is_empty());
    }

    #[test]
    fn dataset_file_round_trip_is_byte_stable() {
        let mut ds = ten_asset_dataset();
        split_dataset(&mut ds, &a2s_spec(true), SplitRatios::default(), 3).unwrap();
        let mut first = Vec::new();
        write_dataset(&ds, &mut first).unwrap();
        let back = read_dataset(first.as_slice(), &a2s_spec(true)).unwrap();
        assert_eq!(back, ds);
        let mut second = Vec::new();
        write_dataset(&back, &mut second).unwrap();
        assert_eq!(first, second);
        let header = std::str::from_utf8(&first).unwrap().lines().next().unwrap();
        assert!(header.starts_with("{\"task\":\"A2S\",\"items\":["), "{header}");
    }
}
