//! Trains on the bundled corpus with default settings and prints test
//! MAP@100 per task for the random-init model, the trained model and BM25.
//!
//!     cargo run --release -p iem-core --example train_bundled [seed] [epochs]

use std::time::Instant;

use iem_core::bundled;
use iem_core::embedder::{EmbeddingModel, Pooling, DEFAULT_DIM};
use iem_core::evalkit::{evaluate_all, EvalMode};
use iem_core::rng::stream;
use iem_core::training::{corpus_vocabulary, train, TrainConfig};
use iem_core::Split;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let (datasets, ctx) = bundled::load(seed);
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let mut model = EmbeddingModel::random(vocab, DEFAULT_DIM, Pooling::Mean, &mut stream(seed, "embedder.init"));
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = TrainConfig { seed, epochs, ..TrainConfig::default() };
    let opts = cfg.eval_options(seed);
    let before = evaluate_all(&model, &datasets, Split::Test, &ctx, &opts).unwrap();
    let bm25 = evaluate_all(&model, &datasets, Split::Test, &ctx, &{ let mut o = opts; o.mode = EvalMode::Bm25; o }).unwrap();
    let t = Instant::now();
    let history = train(&mut model, &datasets, &ctx, &cfg).unwrap();
    let elapsed = t.elapsed();
    let after = evaluate_all(&model, &datasets, Split::Test, &ctx, &opts).unwrap();
    println!("{:<8} {:>8} {:>8} {:>8}", "task", "random", "trained", "bm25");
    for ((r, a), b) in before.tasks.iter().zip(&after.tasks).zip(&bm25.tasks) {
        println!("{:<8} {:>8.3} {:>8.3} {:>8.3}", r.task, r.map100, a.map100, b.map100);
    }
    println!("{:<8} {:>8.3} {:>8.3} {:>8.3}", "macro", before.macro_avg.map100, after.macro_avg.map100, bm25.macro_avg.map100);
    for h in history.iter().filter(|h| h.task == iem_core::TaskId::A2S) {
        println!("epoch {} A2S val {:.3}", h.epoch, h.val_map100);
    }
    println!("trained in {elapsed:.1?}");
}
