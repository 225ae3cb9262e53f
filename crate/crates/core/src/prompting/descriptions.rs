use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{ChatClient, ChatMessage};
use crate::corpus::{fold, EntityKind, TaskDataset, TaskSpec};
use crate::embedder::pieces;

use super::PromptError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDescription {
    pub kind: EntityKind,
    pub name: String,
    pub sentence: String,
}

impl EntityDescription {
    pub fn new(
        kind: EntityKind,
        name: impl Into<String>,
        sentence: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let name = name.into();
        let sentence = sentence.into().trim().to_string();
        if name.trim().is_empty() {
            return Err(PromptError::Description("empty entity name".into()));
        }
        if sentence.is_empty() {
            return Err(PromptError::EmptyDescription);
        }
        if sentence.contains(['\n', '\r']) {
            return Err(PromptError::Description(format!(
                "description of '{name}' spans several lines"
            )));
        }
        Ok(EntityDescription { kind, name, sentence })
    }
}

/// A describable entity referenced by some query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EntityRef {
    pub kind: EntityKind,
    pub name: String,
}

/// Description cache keyed by `(kind, case-folded name)`. When attached to
/// a file, every insert is appended to it as a JSON line.
#[derive(Debug, Default)]
pub struct DescriptionStore {
    entries: BTreeMap<(EntityKind, String), EntityDescription>,
    file: Option<PathBuf>,
}

impl DescriptionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse a JSON-lines cache. Later lines win on duplicate keys.
    pub fn from_jsonl<R: Read>(input: R) -> Result<Self, PromptError> {
        let mut store = DescriptionStore::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: EntityDescription = serde_json::from_str(&line)
                .map_err(|e| PromptError::Description(format!("line {}: {e}", i + 1)))?;
            store.insert(EntityDescription::new(raw.kind, raw.name, raw.sentence)?);
        }
        Ok(store)
    }

    /// Open (or create) a cache file and attach it for write-through.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let mut store = if path.exists() {
            Self::from_jsonl(std::fs::File::open(path)?)?
        } else {
            DescriptionStore::new()
        };
        store.file = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn get(&self, kind: EntityKind, name: &str) -> Option<&EntityDescription> {
        self.entries.get(&(kind, fold(name)))
    }

    pub fn insert(&mut self, desc: EntityDescription) {
        self.entries.insert((desc.kind, fold(&desc.name)), desc);
    }

    fn insert_persistent(&mut self, desc: EntityDescription) -> Result<(), PromptError> {
        if let Some(path) = &self.file {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&desc).map_err(|e| PromptError::Io(e.into()))?;
            writeln!(f, "{line}")?;
        }
        self.insert(desc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityDescription> {
        self.entries.values()
    }

    /// Serialize every entry, in key order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), PromptError> {
        for d in self.entries.values() {
            let line = serde_json::to_string(d).map_err(|e| PromptError::Io(e.into()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// The instruction sent to the chat model for one entity kind.
pub fn description_prompt(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::EquipmentCategory => "Provide a one sentence description for the equipment category",
        EntityKind::EquipmentType => "Provide a one sentence description for the equipment type",
        EntityKind::Component => "Provide a one sentence description for the industrial component",
        EntityKind::FailureMode => "Provide a one sentence description for the industrial failure mode",
        EntityKind::Asset => "Provide a one sentence description for the industrial asset",
        EntityKind::Sensor => "Provide a one sentence description for the industrial sensor",
        EntityKind::EquipmentClass => "Provide a one sentence description for the equipment class",
        EntityKind::Subunit => "Provide a one sentence description for the equipment subunit",
        EntityKind::Unit => "Provide a one sentence description for the equipment unit",
    }
}

/// Cached description of `(kind, name)`, asking `client` on a miss and
/// storing the first non-blank line of its reply.
pub fn fetch_description(
    kind: EntityKind,
    name: &str,
    client: &dyn ChatClient,
    store: &mut DescriptionStore,
) -> Result<EntityDescription, PromptError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(PromptError::Description("empty entity name".into()));
    }
    if let Some(hit) = store.get(kind, name) {
        return Ok(hit.clone());
    }
    let prompt = format!("{}: {name}", description_prompt(kind));
    let reply = client.complete(&[ChatMessage::user(prompt)])?;
    let first = reply
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(PromptError::EmptyDescription)?;
    let desc = EntityDescription::new(kind, name, first)?;
    store.insert_persistent(desc.clone())?;
    Ok(desc)
}

/// Every describable entity named by some query of `datasets`, by kind and
/// case-folded name.
pub fn describable_entities<'a>(
    datasets: impl IntoIterator<Item = (&'a TaskDataset, &'a TaskSpec)>,
) -> BTreeSet<EntityRef> {
    let mut out = BTreeSet::new();
    for (ds, spec) in datasets {
        for ex in &ds.examples {
            for d in &spec.described_fields {
                if let Some(v) = ex.query_fields.get(&d.field) {
                    out.insert(EntityRef { kind: d.kind, name: fold(v) });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub entity_count: usize,
    pub mean_tokens: f64,
    pub max_tokens: usize,
    pub missing: Vec<EntityRef>,
}

/// Size statistics of the cache (whitespace tokens per sentence) and the
/// `required` entities it lacks.
pub fn audit_descriptions(store: &DescriptionStore, required: &BTreeSet<EntityRef>) -> AuditReport {
    let lengths: Vec<usize> = store.iter().map(|d| pieces(&d.sentence).len()).collect();
    let mean_tokens = if lengths.is_empty() {
        0.0
    } else {
        lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
    };
    let missing = required
        .iter()
        .filter(|r| store.get(r.kind, &r.name).is_none())
        .cloned()
        .collect();
    AuditReport {
        entity_count: store.len(),
        mean_tokens,
        max_tokens: lengths.into_iter().max().unwrap_or(0),
        missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{ClientError, ScriptedClient};

    struct FailingClient;

    impl ChatClient for FailingClient {
        fn complete(&self, _: &[ChatMessage]) -> Result<String, ClientError> {
            Err(ClientError::Transport { attempts: 4, message: "refused".into() })
        }
    }

    #[test]
    fn cache_hit_makes_no_call() {
        let mut store = DescriptionStore::new();
        store.insert(EntityDescription::new(EntityKind::FailureMode, "Stator Windings Fault", "Stored.").unwrap());
        let client = ScriptedClient::new(Vec::<String>::new());
        let d = fetch_description(EntityKind::FailureMode, "stator windings fault", &client, &mut store).unwrap();
        assert_eq!(d.sentence, "Stored.");
        assert!(client.requests().is_empty());
    }

    #[test]
    fn miss_stores_reply_and_sends_kind_prompt() {
        let mut store = DescriptionStore::new();
        let reply = "Converts electrical energy into mechanical energy to power various industrial machinery.";
        let client = ScriptedClient::new([reply]);
        let d = fetch_description(EntityKind::Asset, "electric motor", &client, &mut store).unwrap();
        assert_eq!(d.sentence, reply);
        assert_eq!(store.get(EntityKind::Asset, "Electric Motor").unwrap().sentence, reply);
        let sent = &client.requests()[0][0].content;
        assert_eq!(sent, "Provide a one sentence description for the industrial asset: electric motor");
    }

    #[test]
    fn only_first_line_is_kept() {
        let mut store = DescriptionStore::new();
        let client = ScriptedClient::new(["First line.\nSecond line."]);
        let d = fetch_description(EntityKind::Sensor, "current", &client, &mut store).unwrap();
        assert_eq!(d.sentence, "First line.");
    }

    #[test]
    fn empty_reply_and_transport_failure_leave_cache_untouched() {
        let mut store = DescriptionStore::new();
        let client = ScriptedClient::new(["  \n "]);
        let err = fetch_description(EntityKind::Sensor, "current", &client, &mut store).unwrap_err();
        assert_eq!(err.to_string(), "empty description");
        assert!(fetch_description(EntityKind::Sensor, "current", &FailingClient, &mut store).is_err());
        assert!(store.is_empty());
    }

    #[test]
    fn write_through_file_and_last_writer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut store = DescriptionStore::open(&path).unwrap();
            let client = ScriptedClient::new(["Measures flow."]);
            fetch_description(EntityKind::Sensor, "flow", &client, &mut store).unwrap();
        }
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"{\"kind\":\"sensor\",\"name\":\"FLOW\",\"sentence\":\"Newer.\"}\n")
            .unwrap();
        let store = DescriptionStore::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.get(EntityKind::Sensor, "flow").unwrap().sentence, "Newer.");
    }

    #[test]
    fn audit_counts() {
        let empty = audit_descriptions(&DescriptionStore::new(), &BTreeSet::new());
        assert_eq!((empty.entity_count, empty.mean_tokens, empty.max_tokens), (0, 0.0, 0));

        let mut store = DescriptionStore::new();
        store.insert(EntityDescription::new(EntityKind::Sensor, "a", "one two three four five").unwrap());
        store.insert(EntityDescription::new(EntityKind::Sensor, "b", "one two three four five six seven").unwrap());
        let required: BTreeSet<EntityRef> = [
            EntityRef { kind: EntityKind::Sensor, name: "a".into() },
            EntityRef { kind: EntityKind::Asset, name: "pump".into() },
        ]
        .into_iter()
        .collect();
        let r = audit_descriptions(&store, &required);
        assert_eq!(r.entity_count, 2);
        assert_eq!(r.mean_tokens, 6.0);
        assert_eq!(r.max_tokens, 7);
        assert_eq!(r.missing, [EntityRef { kind: EntityKind::Asset, name: "pump".into() }]);
    }

    #[test]
    fn multi_line_sentence_rejected() {
        assert!(EntityDescription::new(EntityKind::Unit, "x", "a\nb").is_err());
    }
}
