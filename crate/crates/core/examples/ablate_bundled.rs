//! Runs the loss ablation on the shared-positive graph and the ratio
//! ablation on the bundled corpus, printing macro MAP@100 per grid point.
//!
//!     cargo run --release -p iem-core --example ablate_bundled [seeds]

use iem_core::bundled;
use iem_core::corpus::{split_dataset, SplitRatios};
use iem_core::embedder::{Pooling, DEFAULT_DIM};
use iem_core::evalkit::{ablation_summary, run_ablation, shared_positive_dataset, AblationInput, AblationKind, SharedPositiveConfig};
use iem_core::training::{corpus_vocabulary, TrainConfig};
use iem_core::TaskId;

fn main() {
    let seeds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let base = TrainConfig::default();
    let (_, ctx) = bundled::load(base.seed);
    let spec = bundled::spec_map()[&TaskId::A2S].clone();
    let mut synth = shared_positive_dataset(&SharedPositiveConfig::default(), &spec).unwrap();
    split_dataset(&mut synth, &spec, SplitRatios::default(), base.seed).unwrap();
    let synth = vec![synth];
    for (kind, datasets) in [(AblationKind::Loss, synth), (AblationKind::Ratio, bundled::load(base.seed).0)] {
        let vocab = corpus_vocabulary(&datasets, &ctx);
        let input = AblationInput { datasets: &datasets, ctx: &ctx, vocab: &vocab, dim: DEFAULT_DIM, pooling: Pooling::Mean };
        let t = std::time::Instant::now();
        let rows = run_ablation(kind, &kind.default_grid(), seeds, &base, input).unwrap();
        for s in ablation_summary(&rows).iter().filter(|s| s.task == "macro") {
            println!("{kind} {:>12} {:.4} ± {:.4}", s.grid_value, s.mean, s.std);
        }
        println!("{kind} took {:.1?}", t.elapsed());
    }
}
