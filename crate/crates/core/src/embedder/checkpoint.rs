//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic "IEM1" | version u32 | d u32 | V u32 | pooling u8
//! V x (len u32, UTF-8 token bytes)      -- id order
//! V x d f32                             -- row-major
//! ```

use std::fs;
use std::path::Path;

use super::model::{EmbeddingModel, Pooling};
use super::vocab::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IEM1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("bad pooling code {0}")]
    BadPooling(u8),
    #[error("truncated header: {0}")]
    TruncatedHeader(&'static str),
    #[error("truncated payload: expected {expected} parameter bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("invalid vocabulary: {0}")]
    BadVocabulary(String),
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn to_bytes(model: &EmbeddingModel) -> Vec<u8> {
    let vocab = model.vocab();
    let mut out = Vec::with_capacity(17 + vocab.len() * 8 + model.matrix().len() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
    out.push(model.pooling().code());
    for token in vocab.tokens() {
        out.extend_from_slice(&(token.len() as u32).to_le_bytes());
        out.extend_from_slice(token.as_bytes());
    }
    for v in model.matrix() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::TruncatedHeader(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<EmbeddingModel, CheckpointError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let dim = cur.u32("dim")? as usize;
    let vocab_len = cur.u32("vocabulary size")? as usize;
    let pooling_code = cur.take(1, "pooling")?[0];
    let pooling = Pooling::from_code(pooling_code).ok_or(CheckpointError::BadPooling(pooling_code))?;

    let mut tokens = Vec::with_capacity(vocab_len.min(1 << 20));
    for _ in 0..vocab_len {
        let len = cur.u32("token length")? as usize;
        let raw = cur.take(len, "token bytes")?;
        let token = std::str::from_utf8(raw)
            .map_err(|e| CheckpointError::BadVocabulary(e.to_string()))?;
        tokens.push(token.to_string());
    }
    let vocab = Vocabulary::from_tokens(tokens).map_err(CheckpointError::BadVocabulary)?;

    let payload = &bytes[cur.pos..];
    let expected = vocab_len
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or(CheckpointError::TruncatedPayload { expected: usize::MAX, found: payload.len() })?;
    if payload.len() != expected {
        return Err(CheckpointError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let matrix = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingModel::from_parts(vocab, dim, matrix, pooling).map_err(CheckpointError::BadModel)
}

pub fn save_checkpoint(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EmbeddingModel, CheckpointError> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::build_vocabulary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> EmbeddingModel {
        let vocab = build_vocabulary(["oil leakage pump vibration é"], 1);
        EmbeddingModel::random(vocab, 5, Pooling::LastToken, &mut ChaCha8Rng::seed_from_u64(9))
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.iem");
        let m = sample();
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = to_bytes(&sample());
        bytes[..4].copy_from_slice(b"XXXX");
        let err = from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn dim_disagreeing_with_payload() {
        let mut bytes = to_bytes(&sample());
        bytes[8..12].copy_from_slice(&6u32.to_le_bytes());
        let err = from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
        let mut bytes = to_bytes(&sample());
        bytes.pop();
        assert!(matches!(from_bytes(&bytes), Err(CheckpointError::TruncatedPayload { .. })));
    }

    #[test]
    fn other_header_defects() {
        let good = to_bytes(&sample());
        let mut v = good.clone();
        v[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(from_bytes(&v), Err(CheckpointError::UnsupportedVersion(2))));
        let mut v = good.clone();
        v[16] = 7;
        assert!(matches!(from_bytes(&v), Err(CheckpointError::BadPooling(7))));
        assert!(matches!(from_bytes(&good[..10]), Err(CheckpointError::TruncatedHeader(_))));
    }
}
