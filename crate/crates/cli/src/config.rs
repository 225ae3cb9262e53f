//! Run configuration: defaults, then a `key = value` file, then flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use iem_core::corpus::SplitRatios;
use iem_core::evalkit::{AblationKind, EvalMode};
use iem_core::training::TrainConfig;
use iem_core::{Pooling, Split};

/// Every configurable key, in the order the effective config is printed.
pub const KEYS: &[(&str, &str)] = &[
    ("relations", "relation table to ingest (.csv or .jsonl); empty = bundled corpus"),
    ("specs", "task spec JSON; empty = bundled specs"),
    ("templates", "instruction template JSON; empty = bundled templates"),
    ("cache", "description cache (JSON lines); empty = bundled descriptions"),
    ("dataset_dir", "directory of per-task dataset files; empty = build from relations"),
    ("checkpoint", "model checkpoint path"),
    ("history", "training history output (JSON lines)"),
    ("seed", "run seed"),
    ("train_ratio", "train share of queries or assets"),
    ("val_ratio", "validation share"),
    ("test_ratio", "test share"),
    ("loss", "contrastive or mnrl"),
    ("batch_size", "pairs per batch"),
    ("pos_ratio", "positive share of each batch"),
    ("epochs", "training epochs"),
    ("p_desc", "probability of appending each entity description"),
    ("learning_rate", "Adam step size"),
    ("margin", "contrastive margin"),
    ("scale", "MNRL similarity scale"),
    ("dim", "embedding dimension"),
    ("pooling", "mean or last_token"),
    ("validate", "record validation MAP@100 per epoch (true/false)"),
    ("split", "split to evaluate"),
    ("eval_mode", "auto, euclidean, cosine or bm25"),
    ("kind", "ablation: p_desc, ratio or loss"),
    ("grid", "ablation grid, start:stop:step or a comma list; empty = default"),
    ("seeds", "ablation seeds per grid point"),
    ("shared_positive", "ablate on the synthetic shared-positive graph instead of the corpus (true/false)"),
    ("output", "ablation CSV path; empty = stdout"),
    ("base_url", "chat completion base URL; empty = $LLM_BASE_URL or localhost"),
    ("model_name", "chat model identifier"),
    ("timeout_secs", "chat request timeout in seconds"),
    ("max_retries", "chat request retries"),
    ("script", "JSON-lines file of scripted chat replies; replaces the HTTP client"),
    ("exemplars", "in-context example file; empty = bundled examples"),
    ("max_steps", "agent steps per question"),
    ("session", "chat session log (JSON lines, appended)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub relations: String,
    pub specs: String,
    pub templates: String,
    pub cache: String,
    pub dataset_dir: String,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub ratios: SplitRatios,
    pub train: TrainConfig,
    pub dim: usize,
    pub pooling: Pooling,
    pub split: Split,
    pub eval_mode: Option<EvalMode>,
    pub kind: AblationKind,
    pub grid: String,
    pub seeds: usize,
    pub shared_positive: bool,
    pub output: String,
    pub base_url: String,
    pub model_name: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub script: String,
    pub exemplars: String,
    pub max_steps: usize,
    pub session: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            relations: String::new(),
            specs: String::new(),
            templates: String::new(),
            cache: String::new(),
            dataset_dir: String::new(),
            checkpoint: "model.iem".into(),
            history: "history.jsonl".into(),
            ratios: SplitRatios::default(),
            train: TrainConfig::default(),
            dim: iem_core::embedder::DEFAULT_DIM,
            pooling: Pooling::Mean,
            split: Split::Test,
            eval_mode: None,
            kind: AblationKind::Ratio,
            grid: String::new(),
            seeds: 5,
            shared_positive: false,
            output: String::new(),
            base_url: String::new(),
            model_name: "default".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            script: String::new(),
            exemplars: String::new(),
            max_steps: iem_core::agent::DEFAULT_MAX_STEPS,
            session: "session.jsonl".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| format!("{key}: {e}"))
}

fn pooling_name(p: Pooling) -> &'static str {
    match p {
        Pooling::Mean => "mean",
        Pooling::LastToken => "last_token",
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "relations" => self.relations = v.into(),
            "specs" => self.specs = v.into(),
            "templates" => self.templates = v.into(),
            "cache" => self.cache = v.into(),
            "dataset_dir" => self.dataset_dir = v.into(),
            "checkpoint" => self.checkpoint = v.into(),
            "history" => self.history = v.into(),
            "seed" => t.seed = parse(key, v)?,
            "train_ratio" => self.ratios.train = parse(key, v)?,
            "val_ratio" => self.ratios.val = parse(key, v)?,
            "test_ratio" => self.ratios.test = parse(key, v)?,
            "loss" => t.loss = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "pos_ratio" => t.pos_ratio = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "p_desc" => t.p_desc = parse(key, v)?,
            "learning_rate" => t.learning_rate = parse(key, v)?,
            "margin" => t.margin = parse(key, v)?,
            "scale" => t.scale = parse(key, v)?,
            "validate" => t.validate = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "pooling" => {
                self.pooling = match v.to_ascii_lowercase().as_str() {
                    "mean" => Pooling::Mean,
                    "last_token" | "last-token" | "eos" => Pooling::LastToken,
                    other => return Err(format!("pooling: unknown pooling '{other}'")),
                }
            }
            "split" => self.split = parse(key, v)?,
            "eval_mode" => {
                self.eval_mode = if v.eq_ignore_ascii_case("auto") || v.is_empty() {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "kind" => self.kind = parse(key, v)?,
            "grid" => self.grid = v.into(),
            "seeds" => self.seeds = parse(key, v)?,
            "shared_positive" => self.shared_positive = parse(key, v)?,
            "output" => self.output = v.into(),
            "base_url" => self.base_url = v.into(),
            "model_name" => self.model_name = v.into(),
            "timeout_secs" => self.timeout_secs = parse(key, v)?,
            "max_retries" => self.max_retries = parse(key, v)?,
            "script" => self.script = v.into(),
            "exemplars" => self.exemplars = v.into(),
            "max_steps" => self.max_steps = parse(key, v)?,
            "session" => self.session = v.into(),
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        let t = &self.train;
        match key {
            "relations" => self.relations.clone(),
            "specs" => self.specs.clone(),
            "templates" => self.templates.clone(),
            "cache" => self.cache.clone(),
            "dataset_dir" => self.dataset_dir.clone(),
            "checkpoint" => self.checkpoint.display().to_string(),
            "history" => self.history.display().to_string(),
            "seed" => t.seed.to_string(),
            "train_ratio" => self.ratios.train.to_string(),
            "val_ratio" => self.ratios.val.to_string(),
            "test_ratio" => self.ratios.test.to_string(),
            "loss" => t.loss.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "pos_ratio" => t.pos_ratio.to_string(),
            "epochs" => t.epochs.to_string(),
            "p_desc" => t.p_desc.to_string(),
            "learning_rate" => t.learning_rate.to_string(),
            "margin" => t.margin.to_string(),
            "scale" => t.scale.to_string(),
            "validate" => t.validate.to_string(),
            "dim" => self.dim.to_string(),
            "pooling" => pooling_name(self.pooling).into(),
            "split" => self.split.to_string(),
            "eval_mode" => self.eval_mode.map_or("auto".into(), |m| m.to_string()),
            "kind" => self.kind.to_string(),
            "grid" => self.grid.clone(),
            "seeds" => self.seeds.to_string(),
            "shared_positive" => self.shared_positive.to_string(),
            "output" => self.output.clone(),
            "base_url" => self.base_url.clone(),
            "model_name" => self.model_name.clone(),
            "timeout_secs" => self.timeout_secs.to_string(),
            "max_retries" => self.max_retries.to_string(),
            "script" => self.script.clone(),
            "exemplars" => self.exemplars.clone(),
            "max_steps" => self.max_steps.to_string(),
            "session" => self.session.display().to_string(),
            other => panic!("unknown config key '{other}'"),
        }
    }

    /// Apply a `key = value` file; `#` starts a comment line.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected 'key = value'", i + 1))?;
            let key = k.trim().replace('-', "_");
            self.set(&key, v).map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// The effective config as a loadable `key = value` file.
    pub fn to_file(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn eval_mode(&self) -> EvalMode {
        self.eval_mode.unwrap_or(self.train.loss.eval_mode())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.ratios.validate().map_err(|e| e.to_string())?;
        self.train.validate().map_err(|e| e.to_string())?;
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        if self.seeds == 0 {
            return Err("seeds must be positive".into());
        }
        if self.max_steps == 0 {
            return Err("max_steps must be positive".into());
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err("timeout_secs must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("seed", "7").unwrap();
        cfg.set("loss", "mnrl").unwrap();
        cfg.set("pooling", "last_token").unwrap();
        cfg.set("eval_mode", "bm25").unwrap();
        let mut back = RunConfig::default();
        back.apply_file(&cfg.to_file()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.to_file().lines().count(), KEYS.len());
    }

    #[test]
    fn file_syntax() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# comment\n\nbatch-size = 16\n").unwrap();
        assert_eq!(cfg.train.batch_size, 16);
        assert!(cfg.apply_file("nonsense").is_err());
        assert!(cfg.apply_file("colour = red").is_err());
        assert!(cfg.apply_file("epochs = many").is_err());
    }
}
