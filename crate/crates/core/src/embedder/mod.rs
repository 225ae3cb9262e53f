//! Token-bag text encoder: the map from text to a point in `R^d`.

mod checkpoint;
mod model;
mod vocab;

pub use checkpoint::{
    from_bytes, load_checkpoint, save_checkpoint, to_bytes, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{EmbeddingModel, Pooling, DEFAULT_DIM, INIT_RANGE};
pub use vocab::{build_vocabulary, pieces, Vocabulary, EOS, EOS_ID, UNK, UNK_ID};
