//! Acceptance checks, one pass/fail line per criterion.
//!
//!     cargo test --release -p iem-core --test acceptance

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use iem_core::agent::{
    register_tools, run_agent, AgentOptions, ScriptedClient, TerminationReason, ToolCall, ToolRegistry,
};
use iem_core::bundled;
use iem_core::corpus::{split_dataset, SplitRatios};
use iem_core::embedder::{from_bytes, to_bytes, EmbeddingModel, Pooling, Vocabulary, DEFAULT_DIM};
use iem_core::evalkit::{
    ablation_summary, average_precision_at_k, evaluate_all, hit_at_1, ndcg_at_k, run_ablation,
    shared_positive_dataset, AblationInput, AblationKind, Bm25Index, EvalMode, SharedPositiveConfig,
};
use iem_core::rng::stream;
use iem_core::training::{
    corpus_vocabulary, finite_diff_check, positive_count, train, BatchSampler, LossInstance, LossKind, PairRef,
    TrainConfig,
};
use iem_core::{Split, TaskId};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// Reference metrics, written straight from the formulas.

fn ref_hit1(order: &[usize], pos: &HashSet<usize>) -> f64 {
    if pos.contains(&order[0]) { 1.0 } else { 0.0 }
}

fn ref_ap(order: &[usize], pos: &HashSet<usize>, k: usize) -> f64 {
    let mut total = 0.0;
    for i in 1..=k.min(order.len()) {
        if pos.contains(&order[i - 1]) {
            let hits = order[..i].iter().filter(|x| pos.contains(x)).count();
            total += hits as f64 / i as f64;
        }
    }
    total / pos.len().min(k) as f64
}

fn ref_ndcg(order: &[usize], pos: &HashSet<usize>, k: usize) -> f64 {
    let gain = |i: usize| 1.0 / ((i + 1) as f64).log2();
    let dcg: f64 = (1..=k.min(order.len())).filter(|&i| pos.contains(&order[i - 1])).map(gain).sum();
    let idcg: f64 = (1..=pos.len().min(k)).map(gain).sum();
    dcg / idcg
}

fn metric_oracle() -> Outcome {
    let mut rng = stream(1, "acceptance.metrics");
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let n = rng.gen_range(1..=250);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let r = rng.gen_range(1..=n);
        let pos: HashSet<usize> = order.choose_multiple(&mut rng, r).copied().collect();
        worst[0] = worst[0].max((hit_at_1(&order, &pos) - ref_hit1(&order, &pos)).abs());
        worst[1] = worst[1].max((average_precision_at_k(&order, &pos, 100) - ref_ap(&order, &pos, 100)).abs());
        worst[2] = worst[2].max((ndcg_at_k(&order, &pos, 10) - ref_ndcg(&order, &pos, 10)).abs());
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(max <= 1e-9, format!("max |diff| HIT@1 {:.1e}, AP@100 {:.1e}, NDCG@10 {:.1e}", worst[0], worst[1], worst[2]))
}

fn gradients() -> Outcome {
    let mut rng = stream(2, "acceptance.gradients");
    let mut worst = BTreeMap::new();
    for kind in [LossKind::Contrastive, LossKind::Mnrl] {
        let mut w = 0.0f64;
        for _ in 0..50 {
            w = w.max(finite_diff_check(&LossInstance::random(kind, &mut rng), 1e-5).unwrap());
        }
        worst.insert(kind.as_str(), w);
    }
    let pass = worst.values().all(|w| *w < 1e-4);
    outcome(pass, format!("max rel err contrastive {:.1e}, mnrl {:.1e}", worst["contrastive"], worst["mnrl"]))
}

fn training_improves() -> Outcome {
    let seed = 42;
    let (datasets, ctx) = bundled::load(seed);
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let mut model = EmbeddingModel::random(vocab, DEFAULT_DIM, Pooling::Mean, &mut stream(seed, "embedder.init"));
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let opts = cfg.eval_options(seed);
    let before = evaluate_all(&model, &datasets, Split::Test, &ctx, &opts).unwrap();
    let bm25 = evaluate_all(&model, &datasets, Split::Test, &ctx, &{
        let mut o = opts;
        o.mode = EvalMode::Bm25;
        o
    })
    .unwrap();
    train(&mut model, &datasets, &ctx, &cfg).unwrap();
    let after = evaluate_all(&model, &datasets, Split::Test, &ctx, &opts).unwrap();
    let gain = after.macro_avg.map100 - before.macro_avg.map100;
    let wins: Vec<&str> = after
        .tasks
        .iter()
        .zip(&bm25.tasks)
        .filter(|(a, b)| a.map100 > b.map100)
        .map(|(a, _)| a.task.as_str())
        .collect();
    outcome(
        gain >= 0.15 && wins.len() >= 6,
        format!(
            "macro MAP@100 {:.3} -> {:.3} (+{gain:.3}, need 0.15); beats BM25 on {}/9 ({})",
            before.macro_avg.map100,
            after.macro_avg.map100,
            wins.len(),
            wins.join(" ")
        ),
    )
}

fn macro_means(rows: &[iem_core::evalkit::AblationRow]) -> BTreeMap<String, f64> {
    ablation_summary(rows).into_iter().filter(|s| s.task == "macro").map(|s| (s.grid_value, s.mean)).collect()
}

fn loss_ablation() -> Outcome {
    let base = TrainConfig::default();
    let ctx = bundled::prompt_context();
    let spec = ctx.spec(TaskId::A2S).clone();
    let mut ds = shared_positive_dataset(&SharedPositiveConfig::default(), &spec).unwrap();
    split_dataset(&mut ds, &spec, SplitRatios::default(), base.seed).unwrap();
    let datasets = vec![ds];
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let input = AblationInput { datasets: &datasets, ctx: &ctx, vocab: &vocab, dim: DEFAULT_DIM, pooling: Pooling::Mean };
    let kind = AblationKind::Loss;
    let rows = run_ablation(kind, &kind.default_grid(), 5, &base, input).unwrap();
    let m = macro_means(&rows);
    let gap = m["contrastive"] - m["mnrl"];
    outcome(gap > 0.0, format!("MAP@100 contrastive {:.4} vs mnrl {:.4} (gap {gap:+.4}) over 5 seeds", m["contrastive"], m["mnrl"]))
}

fn ratio_ablation() -> Outcome {
    let base = TrainConfig::default();
    let (datasets, ctx) = bundled::load(base.seed);
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let input = AblationInput { datasets: &datasets, ctx: &ctx, vocab: &vocab, dim: DEFAULT_DIM, pooling: Pooling::Mean };
    let kind = AblationKind::Ratio;
    let grid = kind.default_grid();
    let rows = run_ablation(kind, &grid, 5, &base, input).unwrap();
    assert_eq!(rows.len(), 9 * 5 * datasets.len());
    let m = macro_means(&rows);
    let (r0, r5, r1) = (m["0"], m["0.5"], m["1"]);
    let table: Vec<String> = grid.iter().map(|g| format!("{g}:{:.3}", m[&g.to_string()])).collect();
    outcome(r5 > r0 && r5 > r1, format!("macro MAP@100 by ratio {}", table.join(" ")))
}

fn batch_composition() -> Outcome {
    let pool = |label: u8, n: usize| -> Vec<PairRef> {
        (0..n).map(|i| PairRef { task: 0, example: i, item: i, label }).collect()
    };
    let mut checked = 0;
    for b in [8usize, 16, 32, 64] {
        for step in 0..=8 {
            let r = step as f64 * 0.125;
            let want_pos = (r * b as f64).round() as usize;
            let make = || BatchSampler::new(pool(1, 300), pool(0, 300), b, r, stream(7, "acceptance.sampler"));
            let batches: Vec<_> = make().collect();
            let again: Vec<_> = make().collect();
            if batches != again {
                return outcome(false, format!("B={b} r={r}: not deterministic"));
            }
            for batch in batches.iter().filter(|x| x.pairs.len() == b) {
                let pos = batch.pairs.iter().filter(|p| p.label == 1).count();
                if pos != want_pos || batch.pairs.len() - pos != b - want_pos || positive_count(b, r) != want_pos {
                    return outcome(false, format!("B={b} r={r}: got {pos} positives, want {want_pos}"));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{checked} full batches over 4 sizes x 9 ratios, reruns identical"))
}

fn augmentation() -> Outcome {
    let ctx = bundled::prompt_context();
    let ds = bundled::datasets().into_iter().find(|d| d.task_id == TaskId::A2S).unwrap();
    let q = ds.examples.iter().find(|e| e.query_fields.get("Asset") == Some("electric motor")).unwrap();
    let frac = |p: f64| {
        let mut rng = stream(3, "acceptance.augment");
        let hits = (0..10_000)
            .filter(|_| ctx.render_query(TaskId::A2S, &q.query_fields, 0, p, &mut rng).contains("Asset description: "))
            .count();
        hits as f64 / 10_000.0
    };
    let (f0, f5, f1) = (frac(0.0), frac(0.5), frac(1.0));
    outcome(f0 == 0.0 && f1 == 1.0 && (0.48..=0.52).contains(&f5), format!("appended fraction p=0: {f0}, p=0.5: {f5:.4}, p=1: {f1}"))
}

fn split_soundness() -> Outcome {
    let table1: [(&str, usize, usize, f64); 9] = [
        ("A2S", 10, 53, 12.6),
        ("C2FM", 44, 6, 1.0),
        ("E2CAT", 10, 107, 10.7),
        ("E2CLT", 42, 156, 4.5),
        ("EU2SU", 43, 1191, 33.1),
        ("FM2CLS", 140, 62, 1.0),
        ("FM2CMP", 254, 44, 2.7),
        ("FM2S", 111, 53, 4.5),
        ("S2FM", 485, 55, 1.0),
    ];
    let specs = bundled::spec_map();
    let base = bundled::datasets();
    for (ds, (name, q, i, mean)) in base.iter().zip(table1) {
        let edges: usize = ds.examples.iter().map(|e| e.positives.len()).sum();
        let m = (edges as f64 / ds.examples.len() as f64 * 10.0).round() / 10.0;
        if ds.task_id.as_str() != name || ds.examples.len() != q || ds.items.len() != i || m != mean {
            return outcome(false, format!("{name}: {} queries, {} items, mean {m}", ds.examples.len(), ds.items.len()));
        }
    }
    let mut keyed = 0;
    for ds in &base {
        let spec = &specs[&ds.task_id];
        let Some(field) = &spec.asset_field else { continue };
        keyed += 1;
        for seed in 0..100u64 {
            let mut d = ds.clone();
            split_dataset(&mut d, spec, SplitRatios::default(), seed).unwrap();
            let assets = |s: Split| -> BTreeSet<String> {
                d.examples_in(s).map(|(_, e)| e.query_fields.get(field).unwrap().trim().to_lowercase()).collect()
            };
            let (tr, va, te) = (assets(Split::Train), assets(Split::Val), assets(Split::Test));
            if !tr.is_disjoint(&va) || !tr.is_disjoint(&te) || !va.is_disjoint(&te) {
                return outcome(false, format!("{}: assets shared across splits at seed {seed}", ds.task_id));
            }
        }
    }
    outcome(true, format!("Table 1 counts exact for 9 tasks; {keyed} asset-keyed tasks disjoint over 100 seeds"))
}

fn bm25_hand_check() -> Outcome {
    let idx = Bm25Index::new(&["oil leak", "oil debris"]);
    let s = idx.score(&["leak".to_string()], 0);
    let hand = (1.0f64 + 1.5 / 1.5).ln() * (1.0 * 2.2) / (1.0 + 1.2 * (1.0 - 0.75 + 0.75 * 2.0 / 2.0));
    let disjoint = idx.rank("temperature humidity");
    let zero = disjoint.entries.iter().all(|&(_, s)| s == 0.0) && disjoint.order() == [0, 1];
    outcome(
        (s - 0.69315).abs() <= 1e-5 && (s - hand).abs() < 1e-12 && zero,
        format!("score {s:.5} (hand {hand:.5}); disjoint query all zero: {zero}"),
    )
}

fn agent_registry() -> ToolRegistry {
    let (datasets, ctx) = bundled::load(42);
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let model = EmbeddingModel::random(vocab, DEFAULT_DIM, Pooling::Mean, &mut stream(42, "embedder.init"));
    register_tools(Arc::new(model), &datasets, Arc::new(ctx), EvalMode::Euclidean).unwrap()
}

fn agent_replay() -> Outcome {
    let reg = agent_registry();
    let replay = || {
        let client = ScriptedClient::from_jsonl(bundled::COMPRESSOR_SCRIPT_JSONL.as_bytes()).unwrap();
        let t = run_agent(bundled::COMPRESSOR_QUESTION, &client, &reg, &AgentOptions::default());
        let log: Vec<String> = t.steps.iter().map(|s| serde_json::to_string(s).unwrap()).collect();
        (t, log.join("\n"))
    };
    let (t, log) = replay();
    let (t2, log2) = replay();
    let stable = t.render() == t2.render() && log == log2;
    let first = t.steps.first().and_then(|s| s.action.as_ref()).map(|c| c.name.clone()).unwrap_or_default();
    let sensors = reg.universe("failure_mode_to_sensor").unwrap();
    let answer = t.final_answer().unwrap_or("");
    let names_sensor = sensors.iter().any(|s| answer.contains(s.as_str()));

    let action = "Action: asset_to_sensors{\"asset\": \"pump\", \"category\": \"fluid\"}";
    let mut bounded = true;
    for max_steps in 1..=8 {
        let scripts: [Vec<&str>; 3] = [vec![action; 20], (0..20).flat_map(|_| ["nonsense", action]).collect(), vec!["Action: bogus{}"; 20]];
        for script in scripts {
            let client = ScriptedClient::new(script);
            let t = run_agent("q", &client, &reg, &AgentOptions { max_steps, ..AgentOptions::default() });
            bounded &= t.steps.len() <= max_steps && t.termination == TerminationReason::MaxSteps;
        }
    }

    let mut rng = stream(4, "acceptance.candidates");
    let mut subset = true;
    for name in reg.names() {
        let desc = reg.descriptor(&name).unwrap().clone();
        let universe = reg.universe(&name).unwrap().to_vec();
        for _ in 0..5 {
            let k = rng.gen_range(1..=universe.len().min(10));
            let mut cands: Vec<String> = universe.choose_multiple(&mut rng, k).cloned().collect();
            cands.push("definitely not an item".into());
            let mut args = serde_json::Map::new();
            for a in &desc.required_args {
                args.insert(a.name.clone(), json!("electric motor"));
            }
            args.insert("candidate_items".into(), Value::from(cands.clone()));
            args.insert("top_k".into(), json!(rng.gen_range(1..15)));
            let out = reg.execute(&ToolCall::new(name.clone(), args)).unwrap();
            subset &= out.iter().all(|o| cands.contains(o) && universe.contains(o));
        }
    }
    outcome(
        stable && first == "failure_mode_to_components" && t.termination == TerminationReason::FinalAnswer
            && names_sensor && bounded && subset,
        format!(
            "byte-stable {stable}; first tool {first}; {} steps ending {}; names a sensor {names_sensor}; max_steps respected {bounded}; candidate subsets {subset}",
            t.steps.len(),
            t.termination
        ),
    )
}

fn checkpoint_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = stream(5, "acceptance.checkpoint");
    for m in 0..20 {
        let extra = rng.gen_range(0..40);
        let mut tokens = vec!["<unk>".to_string(), "<eos>".to_string()];
        tokens.extend((0..extra).map(|i| format!("tok{i}-{}", ['ä', 'z', '°', '漢'][i % 4])));
        let dim = rng.gen_range(1..=32);
        let matrix: Vec<f32> = (0..tokens.len() * dim).map(|_| rng.gen_range(-3.0f32..3.0)).collect();
        let pooling = if rng.gen_bool(0.5) { Pooling::Mean } else { Pooling::LastToken };
        let model = EmbeddingModel::from_parts(Vocabulary::from_tokens(tokens).unwrap(), dim, matrix, pooling).unwrap();
        let (a, b) = (dir.path().join(format!("{m}a.iem")), dir.path().join(format!("{m}b.iem")));
        iem_core::embedder::save_checkpoint(&model, &a).unwrap();
        let loaded = iem_core::embedder::load_checkpoint(&a).unwrap();
        iem_core::embedder::save_checkpoint(&loaded, &b).unwrap();
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        if ba != bb || loaded != model || to_bytes(&from_bytes(&ba).unwrap()) != ba {
            return outcome(false, format!("model {m} differs after round trip"));
        }
    }
    outcome(true, "20 random models byte-identical after save, load, save")
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("metric oracle equivalence", metric_oracle, Duration::from_secs(1)),
        ("gradient correctness", gradients, Duration::from_secs(5)),
        ("training improves retrieval", training_improves, Duration::from_secs(300)),
        ("loss ablation", loss_ablation, Duration::from_secs(600)),
        ("ratio ablation", ratio_ablation, Duration::from_secs(1800)),
        ("batch composition", batch_composition, Duration::from_secs(60)),
        ("augmentation statistics", augmentation, Duration::from_secs(60)),
        ("split soundness", split_soundness, Duration::from_secs(60)),
        ("BM25 hand-check", bm25_hand_check, Duration::from_secs(1)),
        ("agent replay", agent_replay, Duration::from_secs(60)),
        ("checkpoint round-trip", checkpoint_round_trip, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = check();
        let took = start.elapsed();
        if took > *budget {
            o.pass = false;
            o.detail.push_str(&format!("; over the {budget:?} budget"));
        }
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<28} {}  {} [{:.2?}]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            took
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
