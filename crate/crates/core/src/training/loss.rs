use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveParams {
    pub margin: f64,
}

impl ContrastiveParams {
    pub fn new(margin: f64) -> Result<Self, String> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(format!("margin must be positive, got {margin}"));
        }
        Ok(ContrastiveParams { margin })
    }
}

impl Default for ContrastiveParams {
    fn default() -> Self {
        ContrastiveParams { margin: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnrlParams {
    pub scale: f64,
}

impl MnrlParams {
    pub fn new(scale: f64) -> Result<Self, String> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(format!("scale must be positive, got {scale}"));
        }
        Ok(MnrlParams { scale })
    }
}

impl Default for MnrlParams {
    fn default() -> Self {
        MnrlParams { scale: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("undefined cosine: zero-norm vector")]
    UndefinedCosine,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Margin contrastive loss on the Euclidean distance, with gradients
/// `(dL/dq, dL/dd)`.
pub fn contrastive_loss(
    q: &[f64],
    d: &[f64],
    label: u8,
    params: ContrastiveParams,
) -> (f64, Vec<f64>, Vec<f64>) {
    assert_eq!(q.len(), d.len(), "vector dimensions differ");
    let diff: Vec<f64> = q.iter().zip(d).map(|(a, b)| a - b).collect();
    let sq: f64 = diff.iter().map(|x| x * x).sum();
    let dist = sq.sqrt();
    let eps = params.margin;
    let (loss, coef) = if label == 1 {
        (sq, 2.0)
    } else if dist < eps {
        let gap = eps - dist;
        let coef = if dist > 0.0 { -2.0 * gap / dist } else { 0.0 };
        (gap * gap, coef)
    } else {
        (0.0, 0.0)
    };
    let gq: Vec<f64> = diff.iter().map(|x| coef * x).collect();
    let gd: Vec<f64> = gq.iter().map(|x| -x).collect();
    (loss, gq, gd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnrlOutput {
    /// Mean of `row_losses`.
    pub loss: f64,
    pub row_losses: Vec<f64>,
    pub grad_queries: Vec<Vec<f64>>,
    pub grad_docs: Vec<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// In-batch softmax loss: row `i` scores `exp(s cos(q_i, d_j))` over all
/// documents of the batch and is penalized by `-log` of the share of its
/// own document.
pub fn mnrl_loss(
    queries: &[Vec<f64>],
    docs: &[Vec<f64>],
    params: MnrlParams,
) -> Result<MnrlOutput, LossError> {
    let n = queries.len();
    if n != docs.len() {
        return Err(LossError::Dimension(format!("{n} queries vs {} documents", docs.len())));
    }
    if n < 2 {
        return Err(LossError::Dimension("need at least two rows".into()));
    }
    let dim = queries[0].len();
    if queries.iter().chain(docs).any(|v| v.len() != dim) {
        return Err(LossError::Dimension("vector dimensions differ".into()));
    }
    let unit = |v: &Vec<f64>| -> Result<(Vec<f64>, f64), LossError> {
        let n = norm(v);
        if n == 0.0 || !n.is_finite() {
            return Err(LossError::UndefinedCosine);
        }
        Ok((v.iter().map(|x| x / n).collect(), n))
    };
    let qu: Vec<(Vec<f64>, f64)> = queries.iter().map(unit).collect::<Result<_, _>>()?;
    let du: Vec<(Vec<f64>, f64)> = docs.iter().map(unit).collect::<Result<_, _>>()?;
    let s = params.scale;

    let cos: Vec<Vec<f64>> = qu
        .iter()
        .map(|(a, _)| du.iter().map(|(b, _)| dot(a, b)).collect())
        .collect();

    let mut row_losses = Vec::with_capacity(n);
    let mut grad_queries = vec![vec![0.0; dim]; n];
    let mut grad_docs = vec![vec![0.0; dim]; n];
    for i in 0..n {
        let z: Vec<f64> = cos[i].iter().map(|c| s * c).collect();
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
        let lse = zmax + sum.ln();
        row_losses.push(lse - z[i]);
        for j in 0..n {
            let p = (z[j] - lse).exp();
            let dz = (p - if i == j { 1.0 } else { 0.0 }) / n as f64;
            let g = dz * s;
            let c = cos[i][j];
            let (qa, qn) = &qu[i];
            let (db, dn) = &du[j];
            for k in 0..dim {
                grad_queries[i][k] += g * (db[k] - c * qa[k]) / qn;
                grad_docs[j][k] += g * (qa[k] - c * db[k]) / dn;
            }
        }
    }
    let loss = row_losses.iter().sum::<f64>() / n as f64;
    Ok(MnrlOutput { loss, row_losses, grad_queries, grad_docs })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
