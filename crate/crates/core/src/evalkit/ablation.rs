use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Split, TaskDataset};
use crate::embedder::{EmbeddingModel, Pooling, Vocabulary};
use crate::prompting::PromptContext;
use crate::rng::{derive_seed, stream};
use crate::training::{train, LossKind, TrainConfig, TrainError};

use super::{evaluate_all, mean, std_dev, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationKind {
    PDesc,
    Ratio,
    Loss,
}

impl AblationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationKind::PDesc => "p_desc",
            AblationKind::Ratio => "ratio",
            AblationKind::Loss => "loss",
        }
    }

    pub fn default_grid(self) -> Vec<GridPoint> {
        match self {
            AblationKind::PDesc => parse_grid(self, "0:1:0.2").unwrap(),
            AblationKind::Ratio => parse_grid(self, "0:1:0.125").unwrap(),
            AblationKind::Loss => parse_grid(self, "contrastive,mnrl").unwrap(),
        }
    }
}

impl fmt::Display for AblationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "p_desc" | "pdesc" => Ok(AblationKind::PDesc),
            "ratio" => Ok(AblationKind::Ratio),
            "loss" => Ok(AblationKind::Loss),
            other => Err(format!("unknown ablation '{other}' (expected p_desc, ratio or loss)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPoint {
    Value(f64),
    Loss(LossKind),
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridPoint::Value(v) => write!(f, "{v}"),
            GridPoint::Loss(l) => f.write_str(l.as_str()),
        }
    }
}

/// `start:stop:step` or a comma list; loss grids list loss names.
pub fn parse_grid(kind: AblationKind, text: &str) -> Result<Vec<GridPoint>, String> {
    if kind == AblationKind::Loss {
        return text
            .split(',')
            .map(|s| s.parse::<LossKind>().map(GridPoint::Loss))
            .collect();
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad grid number '{s}': {e}"));
    let values: Vec<f64> = if let [a, b, c] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
        if !(step > 0.0) || stop < start {
            return Err(format!("bad grid range '{text}'"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(format!("grid value {v} outside [0, 1]"));
    }
    Ok(values.into_iter().map(GridPoint::Value).collect())
}

/// Fixed inputs shared by every run of an ablation.
#[derive(Debug, Clone, Copy)]
pub struct AblationInput<'a> {
    pub datasets: &'a [TaskDataset],
    pub ctx: &'a PromptContext,
    pub vocab: &'a Vocabulary,
    pub dim: usize,
    pub pooling: Pooling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub task: String,
    pub grid_value: String,
    pub seed: u64,
    pub map100: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AblationError {
    #[error("run {grid_value} / seed {seed}: {source}")]
    Train {
        grid_value: String,
        seed: u64,
        #[source]
        source: TrainError,
    },
    #[error("run {grid_value} / seed {seed}: {source}")]
    Eval {
        grid_value: String,
        seed: u64,
        #[source]
        source: EvalError,
    },
}

fn run_config(kind: AblationKind, point: GridPoint, base: &TrainConfig, seed: u64) -> TrainConfig {
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.validate = false;
    match (kind, point) {
        (AblationKind::PDesc, GridPoint::Value(v)) => cfg.p_desc = v,
        (AblationKind::Ratio, GridPoint::Value(v)) => {
            cfg.pos_ratio = v;
            cfg.p_desc = 0.0;
        }
        (AblationKind::Loss, GridPoint::Loss(l)) => cfg.loss = l,
        (k, p) => panic!("grid point {p} does not fit ablation {k}"),
    }
    cfg
}

/// One train + test evaluation per (grid point, seed). Seed `s` of the
/// table is `base.seed + s`; runs of the same seed share model
/// initialization across grid points.
pub fn run_ablation(
    kind: AblationKind,
    grid: &[GridPoint],
    seeds: usize,
    base: &TrainConfig,
    input: AblationInput<'_>,
) -> Result<Vec<AblationRow>, AblationError> {
    let runs: Vec<(GridPoint, u64)> = grid
        .iter()
        .flat_map(|&p| (0..seeds as u64).map(move |s| (p, base.seed + s)))
        .collect();
    let label = format!("ablate.{}", kind.as_str());
    let results: Vec<Vec<AblationRow>> = runs
        .par_iter()
        .map(|&(point, seed)| {
            let run_seed = derive_seed(seed, &label);
            let cfg = run_config(kind, point, base, run_seed);
            let mut model = EmbeddingModel::random(
                input.vocab.clone(),
                input.dim,
                input.pooling,
                &mut stream(run_seed, "embedder.init"),
            );
            let grid_value = point.to_string();
            train(&mut model, input.datasets, input.ctx, &cfg).map_err(|source| {
                AblationError::Train { grid_value: grid_value.clone(), seed, source }
            })?;
            let report = evaluate_all(&model, input.datasets, Split::Test, input.ctx, &cfg.eval_options(run_seed))
                .map_err(|source| AblationError::Eval { grid_value: grid_value.clone(), seed, source })?;
            Ok(report
                .tasks
                .into_iter()
                .map(|t| AblationRow { task: t.task, grid_value: grid_value.clone(), seed, map100: t.map100 })
                .collect())
        })
        .collect::<Result<_, AblationError>>()?;
    Ok(results.into_iter().flatten().collect())
}

/// CSV with header `task,grid_value,seed,map100`.
pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard deviation of MAP@100 across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSummary {
    pub task: String,
    pub grid_value: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

/// Per (task, grid value) summaries plus a `macro` task holding, per
/// seed, the unweighted mean over tasks.
pub fn ablation_summary(rows: &[AblationRow]) -> Vec<AblationSummary> {
    let mut grid_order: Vec<String> = Vec::new();
    let mut by_key: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut macro_by_seed: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if !grid_order.contains(&r.grid_value) {
            grid_order.push(r.grid_value.clone());
        }
        by_key.entry((r.task.clone(), r.grid_value.clone())).or_default().push(r.map100);
        macro_by_seed.entry((r.grid_value.clone(), r.seed)).or_default().push(r.map100);
    }
    for ((grid, _), vals) in macro_by_seed {
        by_key.entry(("macro".into(), grid)).or_default().push(mean(&vals));
    }
    let mut out: Vec<AblationSummary> = by_key
        .into_iter()
        .map(|((task, grid_value), vals)| AblationSummary {
            task,
            grid_value,
            mean: mean(&vals),
            std: std_dev(&vals),
            seeds: vals.len(),
        })
        .collect();
    out.sort_by_key(|s| {
        (s.task == "macro", s.task.clone(), grid_order.iter().position(|g| *g == s.grid_value))
    });
    out
}
