//! Ranking, retrieval metrics, the BM25 baseline, and ablation runs.

mod ablation;
mod bm25;
mod metrics;
mod synthetic;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Split, TaskDataset, TaskId};
use crate::embedder::EmbeddingModel;
use crate::prompting::PromptContext;
use crate::rng::stream;

pub use ablation::{
    ablation_summary, parse_grid, run_ablation, write_ablation_csv, AblationError, AblationInput,
    AblationKind, AblationRow, AblationSummary, GridPoint,
};
pub use bm25::Bm25Index;
pub use metrics::{average_precision_at_k, hit_at_1, mean, ndcg_at_k, std_dev, MAP_K, NDCG_K};
pub use synthetic::{shared_positive_dataset, shared_positive_records, SharedPositiveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Euclidean,
    Cosine,
    Bm25,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Euclidean => "euclidean",
            EvalMode::Cosine => "cosine",
            EvalMode::Bm25 => "bm25",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(EvalMode::Euclidean),
            "cosine" => Ok(EvalMode::Cosine),
            "bm25" => Ok(EvalMode::Bm25),
            other => Err(format!("unknown eval mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("empty item index")]
    EmptyIndex,
    #[error("dimension mismatch: query {query}, index {index}")]
    Dimension { query: usize, index: usize },
    #[error("{task}: no queries in the {split} split")]
    EmptySplit { task: TaskId, split: Split },
}

/// `(item index, score)` pairs, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub entries: Vec<(usize, f64)>,
}

impl Ranking {
    /// Ascending score (distances), ties by ascending index.
    pub fn ascending(scores: &[f64]) -> Self {
        Self::sorted(scores, |a, b| a.total_cmp(b))
    }

    /// Descending score (similarities), ties by ascending index.
    pub fn descending(scores: &[f64]) -> Self {
        Self::sorted(scores, |a, b| b.total_cmp(a))
    }

    fn sorted(scores: &[f64], cmp: impl Fn(&f64, &f64) -> Ordering) -> Self {
        let mut entries: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        entries.sort_by(|x, y| cmp(&x.1, &y.1).then(x.0.cmp(&y.0)));
        Ranking { entries }
    }

    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

/// Embedded documents of one task's item universe.
#[derive(Debug, Clone)]
pub struct ItemIndex {
    pub task_id: TaskId,
    pub items: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl ItemIndex {
    pub fn build(model: &EmbeddingModel, dataset: &TaskDataset, ctx: &PromptContext) -> Self {
        let vectors = dataset
            .items
            .par_iter()
            .map(|i| model.embed(&ctx.render_document(dataset.task_id, i)))
            .collect();
        ItemIndex { task_id: dataset.task_id, items: dataset.items.clone(), vectors }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rank the whole index against `query` (`Bm25` is not a vector mode and
/// ranks like `Cosine`).
pub fn rank(query: &[f64], index: &ItemIndex, mode: EvalMode) -> Result<Ranking, EvalError> {
    if index.is_empty() {
        return Err(EvalError::EmptyIndex);
    }
    if index.vectors[0].len() != query.len() {
        return Err(EvalError::Dimension { query: query.len(), index: index.vectors[0].len() });
    }
    Ok(match mode {
        EvalMode::Euclidean => {
            let d: Vec<f64> = index
                .vectors
                .iter()
                .map(|v| v.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect();
            Ranking::ascending(&d)
        }
        EvalMode::Cosine | EvalMode::Bm25 => {
            let qn = norm(query);
            let s: Vec<f64> = index
                .vectors
                .iter()
                .map(|v| {
                    let denom = qn * norm(v);
                    if denom == 0.0 {
                        0.0
                    } else {
                        v.iter().zip(query).map(|(a, b)| a * b).sum::<f64>() / denom
                    }
                })
                .collect();
            Ranking::descending(&s)
        }
    })
}

/// Metrics of one task on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub hit1: f64,
    pub map100: f64,
    pub ndcg10: f64,
    pub n_queries: usize,
    pub mode: EvalMode,
}

/// Per-task reports and their unweighted mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tasks: Vec<TaskReport>,
    #[serde(rename = "macro")]
    pub macro_avg: TaskReport,
}

impl MetricReport {
    pub fn from_tasks(tasks: Vec<TaskReport>, mode: EvalMode) -> Self {
        let col = |f: fn(&TaskReport) -> f64| mean(&tasks.iter().map(f).collect::<Vec<_>>());
        let macro_avg = TaskReport {
            task: "macro".into(),
            hit1: col(|t| t.hit1),
            map100: col(|t| t.map100),
            ndcg10: col(|t| t.ndcg10),
            n_queries: tasks.iter().map(|t| t.n_queries).sum(),
            mode,
        };
        MetricReport { tasks, macro_avg }
    }

    pub fn task(&self, task: TaskId) -> Option<&TaskReport> {
        self.tasks.iter().find(|t| t.task == task.as_str())
    }

    /// One JSON object per task, then the macro line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for t in self.tasks.iter().chain(std::iter::once(&self.macro_avg)) {
            out.push_str(&serde_json::to_string(t).expect("report serializes"));
            out.push('\n');
        }
        out
    }
}

/// How queries are rendered and ranked at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub p_desc: f64,
    pub seed: u64,
}

/// Variant-0 renders of the split's queries, with descriptions drawn from
/// a per-task stream, and their positive sets.
fn rendered_queries(
    dataset: &TaskDataset,
    split: Split,
    ctx: &PromptContext,
    opts: &EvalOptions,
) -> Vec<(String, HashSet<usize>)> {
    let mut rng = stream(opts.seed, &format!("prompting.augment/{}", dataset.task_id));
    dataset
        .examples_in(split)
        .map(|(idx, ex)| {
            let text = ctx.render_query(dataset.task_id, &ex.query_fields, 0, opts.p_desc, &mut rng);
            (text, dataset.positive_indices(idx).into_iter().collect())
        })
        .collect()
}

fn aggregate(
    task: TaskId,
    mode: EvalMode,
    per_query: Vec<(f64, f64, f64)>,
) -> TaskReport {
    let n = per_query.len();
    let col = |f: fn(&(f64, f64, f64)) -> f64| mean(&per_query.iter().map(f).collect::<Vec<_>>());
    TaskReport {
        task: task.as_str().into(),
        hit1: col(|m| m.0),
        map100: col(|m| m.1),
        ndcg10: col(|m| m.2),
        n_queries: n,
        mode,
    }
}

fn query_metrics(order: &[usize], positives: &HashSet<usize>) -> (f64, f64, f64) {
    (
        hit_at_1(order, positives),
        average_precision_at_k(order, positives, MAP_K),
        ndcg_at_k(order, positives, NDCG_K),
    )
}

/// HIT@1, MAP@100 and NDCG@10 of `model` on one split of one task. With
/// `EvalMode::Bm25` the model is ignored and the BM25 baseline is scored.
pub fn evaluate(
    model: &EmbeddingModel,
    dataset: &TaskDataset,
    split: Split,
    ctx: &PromptContext,
    opts: &EvalOptions,
) -> Result<TaskReport, EvalError> {
    if opts.mode == EvalMode::Bm25 {
        return evaluate_bm25(dataset, split, ctx, opts);
    }
    let queries = rendered_queries(dataset, split, ctx, opts);
    if queries.is_empty() {
        return Err(EvalError::EmptySplit { task: dataset.task_id, split });
    }
    let index = ItemIndex::build(model, dataset, ctx);
    let per_query = queries
        .par_iter()
        .map(|(text, pos)| {
            let r = rank(&model.embed(text), &index, opts.mode)?;
            Ok(query_metrics(&r.order(), pos))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(aggregate(dataset.task_id, opts.mode, per_query))
}

/// BM25 over rendered documents, queried with rendered queries.
pub fn evaluate_bm25(
    dataset: &TaskDataset,
    split: Split,
    ctx: &PromptContext,
    opts: &EvalOptions,
) -> Result<TaskReport, EvalError> {
    let queries = rendered_queries(dataset, split, ctx, opts);
    if queries.is_empty() {
        return Err(EvalError::EmptySplit { task: dataset.task_id, split });
    }
    let docs: Vec<String> = dataset
        .items
        .iter()
        .map(|i| ctx.render_document(dataset.task_id, i))
        .collect();
    let index = Bm25Index::new(&docs);
    if index.is_empty() {
        return Err(EvalError::EmptyIndex);
    }
    let per_query = queries
        .par_iter()
        .map(|(text, pos)| query_metrics(&index.rank(text).order(), pos))
        .collect();
    Ok(aggregate(dataset.task_id, EvalMode::Bm25, per_query))
}

/// Evaluate every dataset that has queries in `split`.
pub fn evaluate_all(
    model: &EmbeddingModel,
    datasets: &[TaskDataset],
    split: Split,
    ctx: &PromptContext,
    opts: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    let mut tasks = Vec::new();
    for ds in datasets {
        match evaluate(model, ds, split, ctx, opts) {
            Ok(r) => tasks.push(r),
            Err(EvalError::EmptySplit { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(MetricReport::from_tasks(tasks, opts.mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(vectors: Vec<Vec<f64>>) -> ItemIndex {
        ItemIndex {
            task_id: TaskId::A2S,
            items: (0..vectors.len()).map(|i| i.to_string()).collect(),
            vectors,
        }
    }

    #[test]
    fn euclidean_sorts_by_distance() {
        let idx = index(vec![vec![2.0], vec![1.0], vec![3.0]]);
        let r = rank(&[0.0], &idx, EvalMode::Euclidean).unwrap();
        assert_eq!(r.order(), vec![1, 0, 2]);
        let r = rank(&[3.0], &idx, EvalMode::Euclidean).unwrap();
        assert_eq!(r.entries[0], (2, 0.0));
    }

    #[test]
    fn identical_items_keep_index_order() {
        let idx = index(vec![vec![1.0, 1.0]; 4]);
        for mode in [EvalMode::Euclidean, EvalMode::Cosine] {
            assert_eq!(rank(&[0.3, 0.1], &idx, mode).unwrap().order(), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn empty_index_and_dimension_errors() {
        assert_eq!(rank(&[1.0], &index(vec![]), EvalMode::Cosine), Err(EvalError::EmptyIndex));
        assert!(rank(&[1.0, 2.0], &index(vec![vec![1.0]]), EvalMode::Cosine).is_err());
    }

    #[test]
    fn metrics_depend_only_on_order() {
        let scores = [0.3, 0.9, 0.1, 0.5];
        let moved: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
        assert_eq!(Ranking::descending(&scores).order(), Ranking::descending(&moved).order());
        assert_eq!(Ranking::ascending(&scores).order(), Ranking::ascending(&moved).order());
    }

    #[test]
    fn macro_is_unweighted() {
        let t = |task: &str, m: f64, n| TaskReport {
            task: task.into(),
            hit1: m,
            map100: m,
            ndcg10: m,
            n_queries: n,
            mode: EvalMode::Cosine,
        };
        let r = MetricReport::from_tasks(vec![t("A2S", 1.0, 1), t("S2FM", 0.0, 99)], EvalMode::Cosine);
        assert_eq!(r.macro_avg.map100, 0.5);
        assert_eq!(r.macro_avg.n_queries, 100);
        assert!(r.to_json_lines().lines().last().unwrap().contains("\"task\":\"macro\""));
    }
}
