//! Per-task retrievers exposed as agent tools.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{FieldMap, TaskDataset, TaskId};
use crate::embedder::EmbeddingModel;
use crate::evalkit::{rank, EvalError, EvalMode, ItemIndex};
use crate::prompting::PromptContext;

pub const DEFAULT_TOP_K: usize = 5;

/// `"Failure mode class"` -> `failure_mode_class`.
pub fn arg_name(field: &str) -> String {
    normalize_key(field)
}

fn normalize_key(key: &str) -> String {
    key.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    /// Query field the argument fills.
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub task_id: TaskId,
    pub description: String,
    pub required_args: Vec<ArgSpec>,
    pub optional_args: Vec<String>,
    pub returns: String,
}

impl ToolDescriptor {
    /// One block of the agent's system prompt.
    pub fn prompt_entry(&self) -> String {
        let required: Vec<&str> = self.required_args.iter().map(|a| a.name.as_str()).collect();
        format!(
            "{}: {}\n  required: {}\n  optional: candidate_items (list of strings), top_k (integer, default {DEFAULT_TOP_K})\n  returns: {}",
            self.name,
            self.description,
            required.join(", "),
            self.returns
        )
    }
}

/// A tool invocation. Argument order is kept as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub args: Map<String, Value>,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, args: Map<String, Value>) -> Self {
        ToolCall { name: name.into(), args }
    }

    /// Look an argument up by normalized name (`Asset Name` == `asset_name`).
    pub fn arg(&self, name: &str) -> Option<&Value> {
        let want = normalize_key(name);
        self.args.iter().find(|(k, _)| normalize_key(k) == want).map(|(_, v)| v)
    }

    /// `name{json}` on one line.
    pub fn render(&self) -> String {
        format!("{}{}", self.name, Value::Object(self.args.clone()))
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("unknown tool '{name}'; valid tools: {}", valid.join(", "))]
    UnknownTool { name: String, valid: Vec<String> },
    #[error("{tool}: missing required argument '{arg}'")]
    MissingArg { tool: String, arg: String },
    #[error("{tool}: bad argument '{arg}': {message}")]
    BadArg { tool: String, arg: String, message: String },
    #[error("{tool}: {source}")]
    Retrieval {
        tool: String,
        #[source]
        source: EvalError,
    },
}

struct Tool {
    descriptor: ToolDescriptor,
    index: ItemIndex,
}

/// The nine retrievers, sharing one model and prompt context.
pub struct ToolRegistry {
    tools: Vec<Tool>,
    model: Arc<EmbeddingModel>,
    ctx: Arc<PromptContext>,
    mode: EvalMode,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToolRegistry")
            .field("tools", &self.names())
            .field("mode", &self.mode)
            .finish()
    }
}

/// One tool per dataset, described by its task spec; item indices are
/// embedded with `model`.
pub fn register_tools(
    model: Arc<EmbeddingModel>,
    datasets: &[TaskDataset],
    ctx: Arc<PromptContext>,
    mode: EvalMode,
) -> Result<ToolRegistry, String> {
    let mut tools: Vec<Tool> = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let spec = ctx
            .specs
            .get(&ds.task_id)
            .ok_or_else(|| format!("no task spec for {}", ds.task_id))?;
        if tools.iter().any(|t| t.descriptor.name == spec.tool_name) {
            return Err(format!("duplicate tool name '{}'", spec.tool_name));
        }
        let descriptor = ToolDescriptor {
            name: spec.tool_name.clone(),
            task_id: ds.task_id,
            description: spec.tool_description.clone(),
            required_args: spec
                .required_query_fields
                .iter()
                .map(|f| ArgSpec { name: arg_name(f), field: f.clone() })
                .collect(),
            optional_args: vec!["candidate_items".into(), "top_k".into()],
            returns: format!("JSON list of {} names, best first", spec.item_kind),
        };
        tools.push(Tool { descriptor, index: ItemIndex::build(&model, ds, &ctx) });
    }
    Ok(ToolRegistry { tools, model, ctx, mode })
}

fn string_arg(tool: &str, arg: &str, v: &Value) -> Result<String, ToolError> {
    let s = match v {
        Value::String(s) => s.trim().to_string(),
        Value::Number(n) => n.to_string(),
        other => {
            return Err(ToolError::BadArg {
                tool: tool.into(),
                arg: arg.into(),
                message: format!("expected a string, got {other}"),
            })
        }
    };
    if s.is_empty() {
        return Err(ToolError::MissingArg { tool: tool.into(), arg: arg.into() });
    }
    Ok(s)
}

impl ToolRegistry {
    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.tools.iter().map(|t| t.descriptor.name.clone()).collect()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ToolDescriptor> {
        self.tools.iter().map(|t| &t.descriptor)
    }

    pub fn descriptor(&self, name: &str) -> Option<&ToolDescriptor> {
        self.find(name).map(|t| &t.descriptor)
    }

    /// Item universe of the named tool.
    pub fn universe(&self, name: &str) -> Option<&[String]> {
        self.find(name).map(|t| t.index.items.as_slice())
    }

    fn find(&self, name: &str) -> Option<&Tool> {
        let want = normalize_key(name);
        self.tools.iter().find(|t| t.descriptor.name == want)
    }

    /// Render the query from the arguments (descriptions appended whenever
    /// the store has them), rank the universe, keep `candidate_items` when
    /// given and return the first `top_k` items.
    pub fn execute(&self, call: &ToolCall) -> Result<Vec<String>, ToolError> {
        let tool = self.find(&call.name).ok_or_else(|| ToolError::UnknownTool {
            name: call.name.clone(),
            valid: self.names(),
        })?;
        let name = &tool.descriptor.name;
        let mut query = FieldMap::new();
        for a in &tool.descriptor.required_args {
            let v = call
                .arg(&a.name)
                .ok_or_else(|| ToolError::MissingArg { tool: name.clone(), arg: a.name.clone() })?;
            query.insert(a.field.clone(), string_arg(name, &a.name, v)?);
        }
        let top_k = match call.arg("top_k") {
            None | Some(Value::Null) => DEFAULT_TOP_K,
            Some(v) => match v.as_u64() {
                Some(k) if k > 0 => k as usize,
                _ => {
                    return Err(ToolError::BadArg {
                        tool: name.clone(),
                        arg: "top_k".into(),
                        message: format!("expected a positive integer, got {v}"),
                    })
                }
            },
        };
        let candidates: Option<Vec<String>> = match call.arg("candidate_items") {
            None | Some(Value::Null) => None,
            Some(Value::Array(xs)) => Some(
                xs.iter()
                    .map(|x| string_arg(name, "candidate_items", x).map(|s| s.to_lowercase()))
                    .collect::<Result<_, _>>()?,
            ),
            Some(v) => {
                return Err(ToolError::BadArg {
                    tool: name.clone(),
                    arg: "candidate_items".into(),
                    message: format!("expected a list of strings, got {v}"),
                })
            }
        };

        let task = tool.descriptor.task_id;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let text = self.ctx.render_query(task, &query, 0, 1.0, &mut rng);
        let ranking = rank(&self.model.embed(&text), &tool.index, self.mode)
            .map_err(|source| ToolError::Retrieval { tool: name.clone(), source })?;
        Ok(ranking
            .order()
            .into_iter()
            .map(|i| &tool.index.items[i])
            .filter(|item| {
                candidates.as_ref().map_or(true, |c| c.contains(&item.to_lowercase()))
            })
            .take(top_k)
            .cloned()
            .collect())
    }

    /// Observation text for the agent: a JSON list, or `Error: ...`.
    pub fn observe(&self, call: &ToolCall) -> String {
        match self.execute(call) {
            Ok(items) => Value::from(items).to_string(),
            Err(e) => format!("Error: {e}"),
        }
    }
}
