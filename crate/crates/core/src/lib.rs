//! Multi-task retrieval toolkit for industrial asset maintenance.
//!
//! The crate covers the whole pipeline: bipartite relation ingestion into
//! nine retrieval tasks, instruction-templated rendering with optional entity
//! descriptions, a trainable embedding-bag encoder, contrastive and
//! in-batch-softmax training, retrieval metrics with a BM25 baseline,
//! ablation protocols, and a ReAct-style agent that exposes the per-task
//! retrievers as tools.

pub mod agent;
pub mod bundled;
pub mod corpus;
pub mod embedder;
pub mod evalkit;
pub mod prompting;
pub mod rng;
pub mod training;

pub use corpus::{Split, TaskDataset, TaskId, TaskSpec};
pub use embedder::{EmbeddingModel, Pooling};
