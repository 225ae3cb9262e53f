//! Losses with exact gradients, ratio-controlled batching, and the
//! multi-task training loop.

mod gradcheck;
mod loss;
mod optim;
mod sampler;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{enumerate_pairs, Split, TaskDataset, TaskId};
use crate::embedder::{build_vocabulary, EmbeddingModel, Vocabulary};
use crate::evalkit::{evaluate, EvalMode, EvalOptions};
use crate::prompting::PromptContext;
use crate::rng::stream;

pub use gradcheck::{finite_diff_check, LossInstance};
pub use loss::{contrastive_loss, mnrl_loss, ContrastiveParams, LossError, MnrlOutput, MnrlParams};
pub use optim::Adam;
pub use sampler::{positive_count, Batch, BatchSampler, PairRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Contrastive,
    Mnrl,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Contrastive => "contrastive",
            LossKind::Mnrl => "mnrl",
        }
    }

    /// Ranking geometry matching the training objective.
    pub fn eval_mode(self) -> EvalMode {
        match self {
            LossKind::Contrastive => EvalMode::Euclidean,
            LossKind::Mnrl => EvalMode::Cosine,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "contrastive" => Ok(LossKind::Contrastive),
            "mnrl" => Ok(LossKind::Mnrl),
            other => Err(format!("unknown loss '{other}' (expected contrastive or mnrl)")),
        }
    }
}

/// A rendered training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub query: String,
    pub document: String,
    pub label: u8,
    pub task_id: TaskId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub pos_ratio: f64,
    pub epochs: usize,
    pub p_desc: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub margin: f64,
    pub scale: f64,
    pub seed: u64,
    /// Record per-task validation MAP@100 after every epoch.
    pub validate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Contrastive,
            batch_size: 32,
            pos_ratio: 0.5,
            epochs: 3,
            p_desc: 0.5,
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            margin: 1.0,
            scale: 20.0,
            seed: 42,
            validate: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(0.0..=1.0).contains(&self.pos_ratio) {
            return bad(format!("pos_ratio {} outside [0, 1]", self.pos_ratio));
        }
        if !(0.0..=1.0).contains(&self.p_desc) {
            return bad(format!("p_desc {} outside [0, 1]", self.p_desc));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive".into());
        }
        ContrastiveParams::new(self.margin).map_err(TrainError::Config)?;
        MnrlParams::new(self.scale).map_err(TrainError::Config)?;
        Ok(())
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions { mode: self.loss.eval_mode(), p_desc: self.p_desc, seed }
    }
}

/// Validation MAP@100 of one task after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub task: TaskId,
    pub val_map100: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at step {step} ({task}): query {query:?}, document {document:?}")]
    NonFinite {
        step: usize,
        task: TaskId,
        query: String,
        document: String,
    },
    #[error("step {step}: {source}")]
    Loss {
        step: usize,
        #[source]
        source: LossError,
    },
    #[error("no training pairs for the configured ratio")]
    NoPairs,
}

/// Vocabulary over every text the encoder can be shown for `datasets`.
pub fn corpus_vocabulary(datasets: &[TaskDataset], ctx: &PromptContext) -> Vocabulary {
    let queries = datasets
        .iter()
        .flat_map(|ds| ds.examples.iter().map(move |e| (ds.task_id, &e.query_fields)));
    let items = datasets
        .iter()
        .flat_map(|ds| ds.items.iter().map(move |i| (ds.task_id, i.as_str())));
    build_vocabulary(ctx.vocabulary_texts(queries, items), 1)
}

/// Train one model on the train splits of all `datasets`.
///
/// Positive and negative pairs of every task are pooled, shuffled each
/// epoch and drawn in batches of `pos_ratio` positives (MNRL draws
/// positives only). Every draw renders a random instruction variant with
/// descriptions appended at probability `p_desc`.
pub fn train(
    model: &mut EmbeddingModel,
    datasets: &[TaskDataset],
    ctx: &PromptContext,
    config: &TrainConfig,
) -> Result<Vec<HistoryRecord>, TrainError> {
    config.validate()?;
    let mut history = Vec::new();
    if config.epochs == 0 {
        return Ok(history);
    }

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (t, ds) in datasets.iter().enumerate() {
        for p in enumerate_pairs(ds, Split::Train) {
            let r = PairRef { task: t, example: p.example, item: p.item, label: p.label };
            if p.label == 1 {
                positives.push(r);
            } else if config.loss == LossKind::Contrastive {
                negatives.push(r);
            }
        }
    }
    let ratio = match config.loss {
        LossKind::Contrastive => config.pos_ratio,
        LossKind::Mnrl => 1.0,
    };
    let needs_pos = positive_count(config.batch_size, ratio) > 0;
    let needs_neg = positive_count(config.batch_size, ratio) < config.batch_size;
    if (needs_pos && positives.is_empty()) || (needs_neg && negatives.is_empty()) {
        return Err(TrainError::NoPairs);
    }

    let doc_ids: Vec<Vec<Vec<u32>>> = datasets
        .iter()
        .map(|ds| {
            ds.items
                .iter()
                .map(|i| model.tokenize(&ctx.render_document(ds.task_id, i)))
                .collect()
        })
        .collect();

    let mut sampler = BatchSampler::new(
        positives,
        negatives,
        config.batch_size,
        ratio,
        stream(config.seed, "train.sampler"),
    );
    let mut render_rng = stream(config.seed, "prompting.augment");
    let mut adam = Adam::new(
        model.matrix().len(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_epsilon,
    );
    let mut grad = vec![0.0f64; model.matrix().len()];
    let dim = model.dim();
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        if epoch > 1 {
            sampler.start_epoch();
        }
        for batch in sampler.by_ref() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let rendered: Vec<(Vec<u32>, &Vec<u32>, LabeledPair)> = batch
                .pairs
                .iter()
                .map(|p| {
                    let ds = &datasets[p.task];
                    let variant = render_rng.gen_range(0..ctx.variant_count(ds.task_id));
                    let query = ctx.render_query(
                        ds.task_id,
                        &ds.examples[p.example].query_fields,
                        variant,
                        config.p_desc,
                        &mut render_rng,
                    );
                    let q_ids = model.tokenize(&query);
                    let pair = LabeledPair {
                        query,
                        document: ctx.render_document(ds.task_id, &ds.items[p.item]),
                        label: p.label,
                        task_id: ds.task_id,
                    };
                    (q_ids, &doc_ids[p.task][p.item], pair)
                })
                .collect();
            let q_vecs: Vec<Vec<f64>> = rendered.iter().map(|(q, _, _)| model.embed_ids(q)).collect();
            let d_vecs: Vec<Vec<f64>> = rendered.iter().map(|(_, d, _)| model.embed_ids(d)).collect();
            let n = rendered.len() as f64;

            let mut per_pair_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(rendered.len());
            match config.loss {
                LossKind::Contrastive => {
                    let params = ContrastiveParams { margin: config.margin };
                    for (i, (_, _, pair)) in rendered.iter().enumerate() {
                        let (l, gq, gd) = contrastive_loss(&q_vecs[i], &d_vecs[i], pair.label, params);
                        if !l.is_finite() {
                            return Err(non_finite(step, pair));
                        }
                        per_pair_grads.push((
                            gq.into_iter().map(|g| g / n).collect(),
                            gd.into_iter().map(|g| g / n).collect(),
                        ));
                    }
                }
                LossKind::Mnrl => {
                    if rendered.len() < 2 {
                        continue;
                    }
                    let out = mnrl_loss(&q_vecs, &d_vecs, MnrlParams { scale: config.scale })
                        .map_err(|source| TrainError::Loss { step, source })?;
                    if !out.loss.is_finite() {
                        return Err(non_finite(step, &rendered[0].2));
                    }
                    per_pair_grads.extend(out.grad_queries.into_iter().zip(out.grad_docs));
                }
            }

            for ((q_ids, d_ids, _), (gq, gd)) in rendered.iter().zip(&per_pair_grads) {
                for (ids, g) in [(q_ids, gq), (*d_ids, gd)] {
                    for (id, w) in model.pooling_weights(ids) {
                        let row = &mut grad[id as usize * dim..(id as usize + 1) * dim];
                        for (r, gk) in row.iter_mut().zip(g) {
                            *r += w * gk;
                        }
                    }
                }
            }
            adam.step(model.matrix_mut(), &grad);
            step += 1;
        }

        if config.validate {
            let opts = config.eval_options(config.seed);
            for ds in datasets {
                if ds.examples_in(Split::Val).next().is_none() {
                    continue;
                }
                if let Ok(report) = evaluate(model, ds, Split::Val, ctx, &opts) {
                    history.push(HistoryRecord {
                        epoch,
                        task: ds.task_id,
                        val_map100: report.map100,
                    });
                }
            }
        }
    }
    Ok(history)
}

fn non_finite(step: usize, pair: &LabeledPair) -> TrainError {
    TrainError::NonFinite {
        step,
        task: pair.task_id,
        query: pair.query.clone(),
        document: pair.document.clone(),
    }
}

/// Write history as JSON lines.
pub fn write_history<W: std::io::Write>(history: &[HistoryRecord], mut out: W) -> std::io::Result<()> {
    for h in history {
        serde_json::to_writer(&mut out, h)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
