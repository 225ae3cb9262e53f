use rand::Rng;

use super::loss::{contrastive_loss, mnrl_loss, ContrastiveParams, MnrlParams};
use super::LossKind;

/// One input of a loss, for gradient checking.
#[derive(Debug, Clone, PartialEq)]
pub enum LossInstance {
    Contrastive {
        q: Vec<f64>,
        d: Vec<f64>,
        label: u8,
        params: ContrastiveParams,
    },
    Mnrl {
        queries: Vec<Vec<f64>>,
        docs: Vec<Vec<f64>>,
        params: MnrlParams,
    },
}

impl LossInstance {
    /// A random instance away from the contrastive kinks (`dist = margin`
    /// and `dist = 0`); MNRL instances have `n = 4`, `d = 8`.
    pub fn random<R: Rng + ?Sized>(kind: LossKind, rng: &mut R) -> Self {
        match kind {
            LossKind::Contrastive => loop {
                let q: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.6..0.6)).collect();
                let d: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.6..0.6)).collect();
                let label = rng.gen_range(0..2u8);
                let params = ContrastiveParams::new(rng.gen_range(0.5..2.0)).unwrap();
                let dist = q.iter().zip(&d).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if (dist - params.margin).abs() > 1e-2 && dist > 1e-2 {
                    break LossInstance::Contrastive { q, d, label, params };
                }
            },
            LossKind::Mnrl => {
                let mut rows = || -> Vec<Vec<f64>> {
                    (0..4)
                        .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
                        .collect()
                };
                let queries = rows();
                let docs = rows();
                let params = MnrlParams::new(rng.gen_range(1.0..20.0)).unwrap();
                LossInstance::Mnrl { queries, docs, params }
            }
        }
    }

    /// Loss value and gradient flattened over all input vectors.
    fn evaluate(&self) -> (f64, Vec<f64>) {
        match self {
            LossInstance::Contrastive { q, d, label, params } => {
                let (l, gq, gd) = contrastive_loss(q, d, *label, *params);
                (l, gq.into_iter().chain(gd).collect())
            }
            LossInstance::Mnrl { queries, docs, params } => {
                let out = mnrl_loss(queries, docs, *params).expect("valid instance");
                let grad = out
                    .grad_queries
                    .into_iter()
                    .chain(out.grad_docs)
                    .flatten()
                    .collect();
                (out.loss, grad)
            }
        }
    }

    fn coords(&self) -> Vec<f64> {
        match self {
            LossInstance::Contrastive { q, d, .. } => q.iter().chain(d).copied().collect(),
            LossInstance::Mnrl { queries, docs, .. } => {
                queries.iter().chain(docs).flatten().copied().collect()
            }
        }
    }

    fn with_coords(&self, x: &[f64]) -> Self {
        let mut out = self.clone();
        match &mut out {
            LossInstance::Contrastive { q, d, .. } => {
                let n = q.len();
                q.copy_from_slice(&x[..n]);
                d.copy_from_slice(&x[n..]);
            }
            LossInstance::Mnrl { queries, docs, .. } => {
                let dim = queries[0].len();
                for (v, chunk) in queries.iter_mut().chain(docs.iter_mut()).zip(x.chunks(dim)) {
                    v.copy_from_slice(chunk);
                }
            }
        }
        out
    }
}

/// Largest `|analytic - numeric| / max(1, |numeric|)` over all coordinates,
/// with central differences of step `h`.
pub fn finite_diff_check(instance: &LossInstance, h: f64) -> Result<f64, String> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(format!("step {h} outside [1e-7, 1e-3]"));
    }
    let (_, analytic) = instance.evaluate();
    let x = instance.coords();
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        let mut plus = x.clone();
        plus[k] += h;
        let mut minus = x.clone();
        minus[k] -= h;
        let lp = instance.with_coords(&plus).evaluate().0;
        let lm = instance.with_coords(&minus).evaluate().0;
        let numeric = (lp - lm) / (2.0 * h);
        worst = worst.max((analytic[k] - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn both_losses_agree_with_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [LossKind::Contrastive, LossKind::Mnrl] {
            for _ in 0..20 {
                let inst = LossInstance::random(kind, &mut rng);
                assert!(finite_diff_check(&inst, 1e-5).unwrap() < 1e-4);
            }
        }
    }

    #[test]
    fn flat_region_is_flat() {
        let inst = LossInstance::Contrastive {
            q: vec![0.0, 0.0],
            d: vec![2.0, 0.0],
            label: 0,
            params: ContrastiveParams::default(),
        };
        assert!(finite_diff_check(&inst, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn step_out_of_range() {
        let inst = LossInstance::random(LossKind::Mnrl, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(finite_diff_check(&inst, 0.1).is_err());
    }
}
