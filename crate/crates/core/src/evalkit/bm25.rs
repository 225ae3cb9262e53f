use std::collections::HashMap;

use crate::embedder::pieces;

use super::Ranking;

/// Okapi BM25 over a fixed document list.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    term_freqs: Vec<HashMap<String, usize>>,
    doc_lens: Vec<usize>,
    doc_freqs: HashMap<String, usize>,
    avgdl: f64,
    pub k1: f64,
    pub b: f64,
}

impl Bm25Index {
    pub fn new<S: AsRef<str>>(docs: &[S]) -> Self {
        Self::with_params(docs, 1.2, 0.75)
    }

    pub fn with_params<S: AsRef<str>>(docs: &[S], k1: f64, b: f64) -> Self {
        let mut term_freqs = Vec::with_capacity(docs.len());
        let mut doc_lens = Vec::with_capacity(docs.len());
        let mut doc_freqs: HashMap<String, usize> = HashMap::new();
        for d in docs {
            let toks = pieces(d.as_ref());
            doc_lens.push(toks.len());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freqs.entry(t.clone()).or_default() += 1;
            }
            term_freqs.push(tf);
        }
        let total: usize = doc_lens.iter().sum();
        let avgdl = if docs.is_empty() { 1.0 } else { (total as f64 / docs.len() as f64).max(1e-9) };
        Bm25Index { term_freqs, doc_lens, doc_freqs, avgdl, k1, b }
    }

    pub fn len(&self) -> usize {
        self.doc_lens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_lens.is_empty()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freqs.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn score(&self, query_tokens: &[String], doc: usize) -> f64 {
        let tf = &self.term_freqs[doc];
        let dl = self.doc_lens[doc] as f64;
        query_tokens
            .iter()
            .filter_map(|t| tf.get(t).map(|&f| (t, f as f64)))
            .map(|(t, f)| {
                self.idf(t) * f * (self.k1 + 1.0)
                    / (f + self.k1 * (1.0 - self.b + self.b * dl / self.avgdl))
            })
            .sum()
    }

    /// Descending score, ties by ascending document index.
    pub fn rank(&self, query: &str) -> Ranking {
        let toks = pieces(query);
        let scores: Vec<f64> = (0..self.len()).map(|i| self.score(&toks, i)).collect();
        Ranking::descending(&scores)
    }
}
