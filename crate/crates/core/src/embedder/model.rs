use rand::Rng;

use super::vocab::{Vocabulary, EOS_ID};

pub const DEFAULT_DIM: usize = 64;
pub const INIT_RANGE: f32 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Arithmetic mean of the token rows, `<eos>` included.
    Mean,
    /// The row of the final `<eos>` token.
    LastToken,
}

impl Pooling {
    pub fn code(self) -> u8 {
        match self {
            Pooling::Mean => 0,
            Pooling::LastToken => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Pooling::Mean),
            1 => Some(Pooling::LastToken),
            _ => None,
        }
    }
}

/// Vocabulary plus a `V x d` parameter matrix (row-major, `f32` storage).
/// Pooling arithmetic runs in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    vocab: Vocabulary,
    dim: usize,
    matrix: Vec<f32>,
    pooling: Pooling,
}

impl EmbeddingModel {
    pub fn from_parts(
        vocab: Vocabulary,
        dim: usize,
        matrix: Vec<f32>,
        pooling: Pooling,
    ) -> Result<Self, String> {
        if dim == 0 {
            return Err("dimension must be positive".into());
        }
        if matrix.len() != vocab.len() * dim {
            return Err(format!(
                "matrix has {} values, expected {} x {}",
                matrix.len(),
                vocab.len(),
                dim
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err("non-finite parameter".into());
        }
        Ok(EmbeddingModel {
            vocab,
            dim,
            matrix,
            pooling,
        })
    }

    /// Parameters drawn uniformly from `[-INIT_RANGE, INIT_RANGE]`.
    pub fn random<R: Rng>(vocab: Vocabulary, dim: usize, pooling: Pooling, rng: &mut R) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let matrix = (0..vocab.len() * dim)
            .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        EmbeddingModel {
            vocab,
            dim,
            matrix,
            pooling,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut [f32] {
        &mut self.matrix
    }

    pub fn row(&self, id: u32) -> &[f32] {
        let start = id as usize * self.dim;
        &self.matrix[start..start + self.dim]
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        self.vocab.tokenize(text)
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        self.embed_ids(&self.tokenize(text))
    }

    pub fn embed_ids(&self, ids: &[u32]) -> Vec<f64> {
        match self.pooling {
            Pooling::LastToken => self.row(EOS_ID).iter().map(|&v| f64::from(v)).collect(),
            Pooling::Mean => {
                let mut out = vec![0.0f64; self.dim];
                if ids.is_empty() {
                    return out;
                }
                // Summing in id order makes the bag exactly order-invariant.
                let mut sorted = ids.to_vec();
                sorted.sort_unstable();
                for &id in &sorted {
                    for (o, &v) in out.iter_mut().zip(self.row(id)) {
                        *o += f64::from(v);
                    }
                }
                let n = ids.len() as f64;
                out.iter_mut().for_each(|o| *o /= n);
                out
            }
        }
    }

    /// Per-token weights of the pooled output: the pooled vector is
    /// `sum_k weight_k * row(id_k)`.
    pub fn pooling_weights(&self, ids: &[u32]) -> Vec<(u32, f64)> {
        match self.pooling {
            Pooling::LastToken => vec![(EOS_ID, 1.0)],
            Pooling::Mean => {
                let w = 1.0 / ids.len().max(1) as f64;
                ids.iter().map(|&id| (id, w)).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::build_vocabulary;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(pooling: Pooling, seed: u64) -> EmbeddingModel {
        let vocab = build_vocabulary(["x y z oil leakage pump"], 1);
        EmbeddingModel::random(vocab, 8, pooling, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn mean_of_token_and_eos() {
        let m = model(Pooling::Mean, 1);
        let x = m.vocab().id("x").unwrap();
        let v = m.embed("x");
        for k in 0..m.dim() {
            let expect = (f64::from(m.row(x)[k]) + f64::from(m.row(EOS_ID)[k])) / 2.0;
            assert_eq!(v[k], expect);
        }
    }

    #[test]
    fn last_token_is_eos_row() {
        let m = model(Pooling::LastToken, 2);
        let eos: Vec<f64> = m.row(EOS_ID).iter().map(|&v| f64::from(v)).collect();
        assert_eq!(m.embed("pump oil leakage"), eos);
        assert_eq!(m.embed(""), eos);
    }

    #[test]
    fn parameters_within_init_range() {
        let m = model(Pooling::Mean, 3);
        assert!(m.matrix().iter().all(|v| v.abs() <= INIT_RANGE));
        assert_eq!(m.embed("oil pump"), m.embed("oil pump"));
    }

    #[test]
    fn from_parts_rejects_bad_shapes() {
        let vocab = build_vocabulary(["a"], 1);
        assert!(EmbeddingModel::from_parts(vocab.clone(), 2, vec![0.0; 5], Pooling::Mean).is_err());
        assert!(EmbeddingModel::from_parts(vocab.clone(), 2, vec![f32::NAN; 6], Pooling::Mean).is_err());
        assert!(EmbeddingModel::from_parts(vocab, 2, vec![0.5; 6], Pooling::Mean).is_ok());
    }

    // Dyadic grid values keep `a + b` exact in f32, so the sum matrix is the
    // true sum and linearity can be checked at double precision.
    fn grid_matrix(len: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec((-1024i32..=1024).prop_map(|k| k as f32 / 1024.0), len)
    }

    proptest! {
        #[test]
        fn mean_pooling_is_linear_in_matrix(
            m1 in grid_matrix(8 * 4),
            m2 in grid_matrix(8 * 4),
            text in "(x|y|z|oil|leakage|pump|other)( (x|y|z|oil|leakage|pump|other)){0,6}",
        ) {
            let vocab = build_vocabulary(["x y z oil leakage pump"], 1);
            let sum: Vec<f32> = m1.iter().zip(&m2).map(|(a, b)| a + b).collect();
            let a = EmbeddingModel::from_parts(vocab.clone(), 4, m1, Pooling::Mean).unwrap();
            let b = EmbeddingModel::from_parts(vocab.clone(), 4, m2, Pooling::Mean).unwrap();
            let s = EmbeddingModel::from_parts(vocab, 4, sum, Pooling::Mean).unwrap();
            let (ea, eb, es) = (a.embed(&text), b.embed(&text), s.embed(&text));
            for k in 0..4 {
                let expect = ea[k] + eb[k];
                prop_assert!((es[k] - expect).abs() <= 1e-12 * expect.abs().max(1e-300) || es[k] == expect);
            }
        }

        #[test]
        fn mean_pooling_ignores_token_order(seed in 0u64..1000, perm_seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let m = model(Pooling::Mean, seed);
            let mut words = vec!["x", "y", "z", "oil", "leakage", "pump", "x"];
            let forward = m.embed(&words.join(" "));
            words.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            let shuffled = m.embed(&words.join(" "));
            prop_assert_eq!(forward, shuffled);
        }
    }
}
