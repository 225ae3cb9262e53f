//! The thought / action / observation loop.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::client::{ChatClient, ChatMessage};
use super::tools::{ToolCall, ToolRegistry};

pub const DEFAULT_MAX_STEPS: usize = 8;
const ACTION: &str = "Action:";
const FINAL: &str = "Final Answer:";
const THOUGHT: &str = "Thought:";

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Action(ToolCall),
    FinalAnswer(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ParseError(pub String);

/// `Action: <name>{<json>}` line, or `Final Answer: <text>` (the rest of
/// the reply). The first directive line wins.
pub fn parse_action(reply: &str) -> Result<Directive, ParseError> {
    let lines: Vec<&str> = reply.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix(ACTION) {
            return parse_call(rest.trim()).map(Directive::Action);
        }
        if let Some(rest) = line.strip_prefix(FINAL) {
            let mut answer = rest.trim().to_string();
            for more in &lines[i + 1..] {
                answer.push('\n');
                answer.push_str(more);
            }
            return Ok(Directive::FinalAnswer(answer.trim().to_string()));
        }
    }
    Err(ParseError(format!(
        "no directive found; expected a line starting with '{ACTION}' or '{FINAL}'"
    )))
}

fn parse_call(text: &str) -> Result<ToolCall, ParseError> {
    let brace = text
        .find('{')
        .ok_or_else(|| ParseError(format!("bad arguments: no JSON object after '{text}'")))?;
    let name = text[..brace].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ParseError(format!("bad tool name '{name}'")));
    }
    match serde_json::from_str::<Value>(&text[brace..]) {
        Ok(Value::Object(args)) => Ok(ToolCall::new(name, args)),
        Ok(other) => Err(ParseError(format!("bad arguments: expected an object, got {other}"))),
        Err(e) => Err(ParseError(format!("bad arguments: {e}"))),
    }
}

/// Text before the directive line, without a leading `Thought:`.
pub fn extract_thought(reply: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for line in reply.lines() {
        let t = line.trim();
        if t.starts_with(ACTION) || t.starts_with(FINAL) {
            break;
        }
        out.push(t.strip_prefix(THOUGHT).map(str::trim).unwrap_or(t));
    }
    out.join("\n").trim().to_string()
}

/// `Action: name{json}` as the model should write it.
pub fn format_action(call: &ToolCall) -> String {
    format!("{ACTION} {}", call.render())
}

/// One reasoning step: a tool call with its observation, or the final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub thought: String,
    pub action: Option<ToolCall>,
    pub observation: Option<String>,
    #[serde(rename = "final")]
    pub final_answer: Option<String>,
}

impl AgentStep {
    pub fn tool(thought: String, call: ToolCall, observation: String) -> Self {
        AgentStep { thought, action: Some(call), observation: Some(observation), final_answer: None }
    }

    pub fn answer(thought: String, answer: String) -> Self {
        AgentStep { thought, action: None, observation: None, final_answer: Some(answer) }
    }

    /// Printed form, one `Thought:` / `Action:` / `Observation:` /
    /// `Final Answer:` line each.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.thought.is_empty() {
            out.push_str(&format!("{THOUGHT} {}\n", self.thought));
        }
        if let Some(call) = &self.action {
            out.push_str(&format_action(call));
            out.push('\n');
        }
        if let Some(obs) = &self.observation {
            out.push_str(&format!("Observation: {obs}\n"));
        }
        if let Some(ans) = &self.final_answer {
            out.push_str(&format!("{FINAL} {ans}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    FinalAnswer,
    MaxSteps,
    ClientError,
    ParseFailuresExhausted,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::FinalAnswer => "final_answer",
            TerminationReason::MaxSteps => "max_steps",
            TerminationReason::ClientError => "client_error",
            TerminationReason::ParseFailuresExhausted => "parse_failures_exhausted",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub query: String,
    pub steps: Vec<AgentStep>,
    pub termination: TerminationReason,
    /// Client or parse diagnostic for abnormal endings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Transcript {
    pub fn final_answer(&self) -> Option<&str> {
        self.steps.last().and_then(|s| s.final_answer.as_deref())
    }

    pub fn render(&self) -> String {
        let mut out = format!("Question: {}\n", self.query);
        for s in &self.steps {
            out.push_str(&s.render());
        }
        out.push_str(&format!("[{}", self.termination));
        if let Some(e) = &self.error {
            out.push_str(&format!(": {e}"));
        }
        out.push_str("]\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOptions {
    pub max_steps: usize,
    /// In-context examples appended to the system prompt.
    pub exemplars: String,
}

impl Default for AgentOptions {
    fn default() -> Self {
        AgentOptions {
            max_steps: DEFAULT_MAX_STEPS,
            exemplars: crate::bundled::AGENT_EXEMPLARS.to_string(),
        }
    }
}

pub fn system_prompt(registry: &ToolRegistry, exemplars: &str) -> String {
    let mut p = String::from(
        "You are a maintenance assistant for industrial assets. Answer the user's question by \
         calling the tools below, one tool per reply.\n\nTools:\n",
    );
    for d in registry.descriptors() {
        p.push_str(&d.prompt_entry());
        p.push('\n');
    }
    p.push_str(
        "\nEvery reply starts with \"Thought: <your reasoning>\" and ends with exactly one of:\n\
         Action: <tool name>{<JSON object of arguments>}\n\
         Final Answer: <answer for the user>\n\
         After an Action you receive \"Observation: <result>\".\n",
    );
    let ex = exemplars.trim();
    if !ex.is_empty() {
        p.push_str("\nExamples:\n\n");
        p.push_str(ex);
        p.push('\n');
    }
    p
}

fn corrective(diagnostic: &str) -> String {
    format!(
        "Your reply could not be parsed ({diagnostic}). Reply with a Thought line followed by \
         either \"Action: <tool name>{{<JSON arguments>}}\" or \"Final Answer: <answer>\"."
    )
}

pub fn run_agent(
    query: &str,
    client: &dyn ChatClient,
    registry: &ToolRegistry,
    options: &AgentOptions,
) -> Transcript {
    run_agent_observed(query, client, registry, options, &mut |_| {})
}

/// Like [`run_agent`], calling `on_step` as each step completes.
pub fn run_agent_observed(
    query: &str,
    client: &dyn ChatClient,
    registry: &ToolRegistry,
    options: &AgentOptions,
    on_step: &mut dyn FnMut(&AgentStep),
) -> Transcript {
    let mut messages = vec![
        ChatMessage::system(system_prompt(registry, &options.exemplars)),
        ChatMessage::user(format!("Question: {query}")),
    ];
    let mut steps: Vec<AgentStep> = Vec::new();
    let mut failures = 0;
    let end = |steps, termination, error| Transcript { query: query.to_string(), steps, termination, error };
    while steps.len() < options.max_steps {
        let reply = match client.complete(&messages) {
            Ok(r) => r,
            Err(e) => return end(steps, TerminationReason::ClientError, Some(e.to_string())),
        };
        messages.push(ChatMessage::assistant(reply.clone()));
        let directive = match parse_action(&reply) {
            Ok(d) => d,
            Err(ParseError(diag)) => {
                failures += 1;
                if failures >= 2 {
                    return end(steps, TerminationReason::ParseFailuresExhausted, Some(diag));
                }
                messages.push(ChatMessage::user(corrective(&diag)));
                continue;
            }
        };
        failures = 0;
        let thought = extract_thought(&reply);
        match directive {
            Directive::FinalAnswer(answer) => {
                let step = AgentStep::answer(thought, answer);
                on_step(&step);
                steps.push(step);
                return end(steps, TerminationReason::FinalAnswer, None);
            }
            Directive::Action(call) => {
                let observation = registry.observe(&call);
                messages.push(ChatMessage::user(format!("Observation: {observation}")));
                let step = AgentStep::tool(thought, call, observation);
                on_step(&step);
                steps.push(step);
            }
        }
    }
    end(steps, TerminationReason::MaxSteps, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let d = parse_action(
            "Thought: look it up\nAction: failure_mode_to_components{\"failure_mode\": \"high temperature\", \"asset\": \"compressor\"}",
        )
        .unwrap();
        let Directive::Action(call) = d else { panic!("expected action") };
        assert_eq!(call.name, "failure_mode_to_components");
        assert_eq!(call.arg("Asset").unwrap(), "compressor");

        assert_eq!(
            parse_action("Final Answer: check bearing temperature sensor").unwrap(),
            Directive::FinalAnswer("check bearing temperature sensor".into())
        );
        assert!(parse_action("I think we should look around").is_err());
        let bad = parse_action("Action: asset_to_sensors{\"asset\": }").unwrap_err();
        assert!(bad.0.starts_with("bad arguments"), "{bad}");
    }

    #[test]
    fn first_directive_wins() {
        let d = parse_action("Final Answer: done\nAction: x{}").unwrap();
        assert_eq!(d, Directive::FinalAnswer("done\nAction: x{}".into()));
        let d = parse_action("Action: x{}\nFinal Answer: done").unwrap();
        assert!(matches!(d, Directive::Action(_)));
    }

    #[test]
    fn thought_extraction() {
        assert_eq!(extract_thought("Thought: a\nb\nAction: x{}"), "a\nb");
        assert_eq!(extract_thought("Final Answer: y"), "");
    }

    #[test]
    fn step_serializes_with_final_key() {
        let s = AgentStep::answer("t".into(), "done".into());
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v, serde_json::json!({"thought": "t", "action": null, "observation": null, "final": "done"}));
    }
}
