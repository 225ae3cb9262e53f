//! `iem`: ingest, split, describe, train, eval, ablate and chat.

mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Arg, ArgMatches, Command};
use iem_core::agent::{
    chat_repl, register_tools, AgentOptions, ChatClient, ChatClientConfig, ClientError, HttpChatClient,
    ScriptedClient, SessionLog,
};
use iem_core::bundled;
use iem_core::corpus::{
    build_task_dataset, parse_relations, parse_task_specs, read_dataset, split_all, write_dataset, CorpusError,
    RelationFormat, RelationRecord, TaskDataset, TaskSpec,
};
use iem_core::embedder::{load_checkpoint, save_checkpoint, CheckpointError, EmbeddingModel};
use iem_core::evalkit::{
    ablation_summary, evaluate_all, parse_grid, run_ablation, shared_positive_dataset, write_ablation_csv,
    AblationInput, EvalMode, SharedPositiveConfig,
};
use iem_core::prompting::{
    describable_entities, fetch_description, parse_templates, DescriptionStore, PromptContext, PromptError,
};
use iem_core::rng::stream;
use iem_core::training::{corpus_vocabulary, train, write_history};
use iem_core::{Split, TaskId};

use config::{RunConfig, KEYS};

/// Exit 1: bad input or configuration. Exit 2: I/O or chat client failure.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn io_err(context: impl std::fmt::Display) -> impl FnOnce(io::Error) -> Failure {
    move |e| Failure::Io(format!("{context}: {e}"))
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<PromptError> for Failure {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Io(_) | PromptError::Client(_) => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn checkpoint_err(path: &Path) -> impl FnOnce(CheckpointError) -> Failure + '_ {
    move |e| match e {
        CheckpointError::Io(_) => Failure::Io(format!("{}: {e}", path.display())),
        _ => Failure::Invalid(format!("{}: {e}", path.display())),
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Config(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("ingest", "Build per-task dataset files from a relation table"),
    ("split", "Assign train/val/test splits to the dataset files in place"),
    ("describe", "Fill the description cache through the chat client"),
    ("train", "Train an embedder and write the checkpoint and history"),
    ("eval", "Print per-task retrieval metrics as JSON"),
    ("ablate", "Run an ablation grid and write a CSV table"),
    ("chat", "Ask the tool-calling agent questions"),
];

fn flag_name(key: &str) -> &'static str {
    Box::leak(key.replace('_', "-").into_boxed_str())
}

fn cli() -> Command {
    let mut cmd = Command::new("iem")
        .about("Multi-task retrieval for industrial asset maintenance")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("key = value file applied before the flags"),
        );
    for (key, help) in KEYS {
        cmd = cmd.arg(Arg::new(*key).long(flag_name(key)).value_name("VALUE").global(true).help(*help));
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

fn resolve_config(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        cfg.apply_file(&text).map_err(|e| Failure::Invalid(format!("{path}: {e}")))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v).map_err(Failure::Invalid)?;
        }
    }
    cfg.validate().map_err(Failure::Invalid)?;
    Ok(cfg)
}

fn read_text(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn load_specs(cfg: &RunConfig) -> Result<Vec<TaskSpec>> {
    if cfg.specs.is_empty() {
        return Ok(bundled::task_specs());
    }
    Ok(parse_task_specs(&read_text(&cfg.specs)?)?)
}

fn load_context(cfg: &RunConfig, specs: Vec<TaskSpec>) -> Result<PromptContext> {
    let templates = if cfg.templates.is_empty() {
        bundled::templates()
    } else {
        parse_templates(&read_text(&cfg.templates)?)?
    };
    let descriptions = if cfg.cache.is_empty() {
        bundled::descriptions()
    } else {
        DescriptionStore::open(&cfg.cache)?
    };
    Ok(PromptContext::new(specs, templates, descriptions)?)
}

fn load_relations(cfg: &RunConfig) -> Result<Vec<RelationRecord>> {
    if cfg.relations.is_empty() {
        return Ok(bundled::relations());
    }
    let format = if cfg.relations.ends_with(".jsonl") || cfg.relations.ends_with(".json") {
        RelationFormat::JsonLines
    } else {
        RelationFormat::DelimitedTable
    };
    let file = File::open(&cfg.relations).map_err(io_err(&cfg.relations))?;
    Ok(parse_relations(BufReader::new(file), format)?)
}

fn build_datasets(records: &[RelationRecord], specs: &[TaskSpec]) -> Result<Vec<TaskDataset>> {
    let mut out = Vec::new();
    for spec in specs {
        let recs: Vec<RelationRecord> = records.iter().filter(|r| r.task_id == spec.task_id).cloned().collect();
        if !recs.is_empty() {
            out.push(build_task_dataset(&recs, spec)?);
        }
    }
    if out.is_empty() {
        return Err(Failure::Invalid("no relations for any configured task".into()));
    }
    Ok(out)
}

fn dataset_path(dir: &Path, task: TaskId) -> PathBuf {
    dir.join(format!("{task}.jsonl"))
}

fn read_datasets(dir: &str, specs: &[TaskSpec]) -> Result<Vec<TaskDataset>> {
    let dir = Path::new(dir);
    let mut out = Vec::new();
    for spec in specs {
        let path = dataset_path(dir, spec.task_id);
        if !path.exists() {
            continue;
        }
        let file = File::open(&path).map_err(io_err(path.display()))?;
        out.push(read_dataset(BufReader::new(file), spec)?);
    }
    if out.is_empty() {
        return Err(Failure::Io(format!("no dataset files in {}", dir.display())));
    }
    Ok(out)
}

/// Datasets from `dataset_dir` as stored, or built from the relations and
/// split with the run seed.
fn load_data(cfg: &RunConfig) -> Result<(Vec<TaskDataset>, PromptContext)> {
    let specs = load_specs(cfg)?;
    let datasets = if cfg.dataset_dir.is_empty() {
        let mut ds = build_datasets(&load_relations(cfg)?, &specs)?;
        let map = specs.iter().map(|s| (s.task_id, s.clone())).collect();
        split_all(&mut ds, &map, cfg.ratios, cfg.train.seed)?;
        ds
    } else {
        read_datasets(&cfg.dataset_dir, &specs)?
    };
    Ok((datasets, load_context(cfg, specs)?))
}

fn write_datasets(dir: &str, datasets: &[TaskDataset]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for ds in datasets {
        let path = dataset_path(Path::new(dir), ds.task_id);
        let file = File::create(&path).map_err(io_err(path.display()))?;
        let mut w = io::BufWriter::new(file);
        write_dataset(ds, &mut w)?;
        w.flush().map_err(io_err(path.display()))?;
    }
    Ok(())
}

fn split_counts(ds: &TaskDataset) -> String {
    let n = |s| ds.examples_in(s).count();
    format!("{} train / {} val / {} test", n(Split::Train), n(Split::Val), n(Split::Test))
}

fn chat_client(cfg: &RunConfig) -> Result<Box<dyn ChatClient>> {
    if !cfg.script.is_empty() {
        let file = File::open(&cfg.script).map_err(io_err(&cfg.script))?;
        return Ok(Box::new(ScriptedClient::from_jsonl(file)?));
    }
    let base = (!cfg.base_url.is_empty()).then_some(cfg.base_url.as_str());
    let client_cfg = ChatClientConfig {
        model: cfg.model_name.clone(),
        timeout: Duration::from_secs_f64(cfg.timeout_secs),
        max_retries: cfg.max_retries,
        ..ChatClientConfig::from_env(base)
    };
    Ok(Box::new(HttpChatClient::new(client_cfg)?))
}

fn require_dir(cfg: &RunConfig, cmd: &str) -> Result<()> {
    if cfg.dataset_dir.is_empty() {
        return Err(Failure::Invalid(format!("{cmd} needs --dataset-dir")));
    }
    Ok(())
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    require_dir(cfg, "ingest")?;
    let specs = load_specs(cfg)?;
    let datasets = build_datasets(&load_relations(cfg)?, &specs)?;
    write_datasets(&cfg.dataset_dir, &datasets)?;
    for ds in &datasets {
        eprintln!("{}: {} queries, {} items", ds.task_id, ds.examples.len(), ds.items.len());
    }
    Ok(())
}

fn split(cfg: &RunConfig) -> Result<()> {
    require_dir(cfg, "split")?;
    let specs = load_specs(cfg)?;
    let mut datasets = read_datasets(&cfg.dataset_dir, &specs)?;
    let map = specs.iter().map(|s| (s.task_id, s.clone())).collect();
    split_all(&mut datasets, &map, cfg.ratios, cfg.train.seed)?;
    write_datasets(&cfg.dataset_dir, &datasets)?;
    for ds in &datasets {
        eprintln!("{}: {}", ds.task_id, split_counts(ds));
    }
    Ok(())
}

fn describe(cfg: &RunConfig) -> Result<()> {
    if cfg.cache.is_empty() {
        return Err(Failure::Invalid("describe needs --cache".into()));
    }
    let (datasets, mut ctx) = load_data(cfg)?;
    let client = chat_client(cfg)?;
    let wanted = describable_entities(datasets.iter().map(|d| (d, ctx.spec(d.task_id))));
    let missing: Vec<_> = wanted.iter().filter(|e| ctx.descriptions.get(e.kind, &e.name).is_none()).collect();
    for e in &missing {
        fetch_description(e.kind, &e.name, client.as_ref(), &mut ctx.descriptions)?;
    }
    eprintln!("{} entities, {} newly described", wanted.len(), missing.len());
    Ok(())
}

fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let (datasets, ctx) = load_data(cfg)?;
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let seed = cfg.train.seed;
    let mut model = EmbeddingModel::random(vocab, cfg.dim, cfg.pooling, &mut stream(seed, "embedder.init"));
    let history = train(&mut model, &datasets, &ctx, &cfg.train).map_err(|e| Failure::Invalid(e.to_string()))?;
    save_checkpoint(&model, &cfg.checkpoint).map_err(checkpoint_err(&cfg.checkpoint))?;
    let file = File::create(&cfg.history).map_err(io_err(cfg.history.display()))?;
    write_history(&history, io::BufWriter::new(file)).map_err(io_err(cfg.history.display()))?;
    for epoch in 0..=cfg.train.epochs {
        let vals: Vec<f64> = history.iter().filter(|h| h.epoch == epoch).map(|h| h.val_map100).collect();
        if !vals.is_empty() {
            eprintln!("epoch {epoch}: mean val MAP@100 {:.4}", vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    eprintln!("wrote {} and {}", cfg.checkpoint.display(), cfg.history.display());
    Ok(())
}

fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let (datasets, ctx) = load_data(cfg)?;
    let mode = cfg.eval_mode();
    let model = if mode == EvalMode::Bm25 && !cfg.checkpoint.exists() {
        EmbeddingModel::random(corpus_vocabulary(&datasets, &ctx), 1, cfg.pooling, &mut stream(0, "unused"))
    } else {
        load_checkpoint(&cfg.checkpoint).map_err(checkpoint_err(&cfg.checkpoint))?
    };
    let mut opts = cfg.train.eval_options(cfg.train.seed);
    opts.mode = mode;
    let report =
        evaluate_all(&model, &datasets, cfg.split, &ctx, &opts).map_err(|e| Failure::Invalid(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    Ok(())
}

fn ablate(cfg: &RunConfig) -> Result<()> {
    let kind = cfg.kind;
    let grid = if cfg.grid.is_empty() {
        kind.default_grid()
    } else {
        parse_grid(kind, &cfg.grid).map_err(Failure::Invalid)?
    };
    let (mut datasets, ctx) = load_data(cfg)?;
    if cfg.shared_positive {
        let spec = ctx.spec(TaskId::A2S).clone();
        let mut ds = shared_positive_dataset(&SharedPositiveConfig::default(), &spec)?;
        let map = [(TaskId::A2S, spec)].into_iter().collect();
        split_all(std::slice::from_mut(&mut ds), &map, cfg.ratios, cfg.train.seed)?;
        datasets = vec![ds];
    }
    let vocab = corpus_vocabulary(&datasets, &ctx);
    let input = AblationInput { datasets: &datasets, ctx: &ctx, vocab: &vocab, dim: cfg.dim, pooling: cfg.pooling };
    let rows =
        run_ablation(kind, &grid, cfg.seeds, &cfg.train, input).map_err(|e| Failure::Invalid(e.to_string()))?;
    if cfg.output.is_empty() {
        write_ablation_csv(&rows, io::stdout().lock()).map_err(|e| Failure::Io(e.to_string()))?;
    } else {
        let file = File::create(&cfg.output).map_err(io_err(&cfg.output))?;
        write_ablation_csv(&rows, file).map_err(|e| Failure::Io(e.to_string()))?;
    }
    for s in ablation_summary(&rows).iter().filter(|s| s.task == "macro") {
        eprintln!("{kind} = {}: macro MAP@100 {:.4} ± {:.4} over {} seeds", s.grid_value, s.mean, s.std, s.seeds);
    }
    Ok(())
}

fn chat(cfg: &RunConfig) -> Result<()> {
    let (datasets, ctx) = load_data(cfg)?;
    let model = load_checkpoint(&cfg.checkpoint).map_err(checkpoint_err(&cfg.checkpoint))?;
    let registry = register_tools(Arc::new(model), &datasets, Arc::new(ctx), cfg.eval_mode())
        .map_err(Failure::Invalid)?;
    let client = chat_client(cfg)?;
    let exemplars =
        if cfg.exemplars.is_empty() { bundled::AGENT_EXEMPLARS.to_string() } else { read_text(&cfg.exemplars)? };
    let options = AgentOptions { max_steps: cfg.max_steps, exemplars };
    let session_path = cfg.session.display().to_string();
    let file = OpenOptions::new().create(true).append(true).open(&cfg.session).map_err(io_err(&session_path))?;
    let mut log = SessionLog::new(file);
    // Steps are flushed as they happen, so an interrupt loses nothing.
    ctrlc::set_handler(|| {
        eprintln!("\ninterrupted");
        std::process::exit(0);
    })
    .map_err(|e| Failure::Io(e.to_string()))?;
    let stdin = io::stdin();
    let transcripts = chat_repl(stdin.lock(), &mut io::stdout(), client.as_ref(), &registry, &options, Some(&mut log))
        .map_err(io_err("chat"))?;
    eprintln!("{} questions answered, session in {session_path}", transcripts.len());
    if transcripts.iter().any(|t| t.termination == iem_core::agent::TerminationReason::ClientError) {
        return Err(Failure::Io("chat client failed".into()));
    }
    Ok(())
}

fn run(m: &ArgMatches) -> Result<()> {
    let (name, _) = m.subcommand().expect("subcommand is required");
    let cfg = resolve_config(m)?;
    eprintln!("# iem {name}, seed {}", cfg.train.seed);
    eprint!("{}", cfg.to_file());
    match name {
        "ingest" => ingest(&cfg),
        "split" => split(&cfg),
        "describe" => describe(&cfg),
        "train" => train_cmd(&cfg),
        "eval" => eval_cmd(&cfg),
        "ablate" => ablate(&cfg),
        "chat" => chat(&cfg),
        other => Err(Failure::Invalid(format!("unknown subcommand '{other}'"))),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(msg) | Failure::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
