//! Line-oriented chat front end for the agent.

use std::io::{self, BufRead, Write};

use super::client::ChatClient;
use super::react::{run_agent_observed, AgentOptions, AgentStep, Transcript};
use super::tools::ToolRegistry;

pub const PROMPT: &str = "> ";

/// Appends each step of a session as one JSON line, flushing per step.
pub struct SessionLog<W: Write> {
    out: W,
}

impl<W: Write> SessionLog<W> {
    pub fn new(out: W) -> Self {
        SessionLog { out }
    }

    pub fn record(&mut self, step: &AgentStep) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, step)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Reads questions from `input` until EOF, `exit` or `quit`, running the
/// agent on each and printing steps to `output` as they arrive. Blank
/// lines re-prompt. Returns the transcripts in order.
pub fn chat_repl<R: BufRead, W: Write, L: Write>(
    input: R,
    output: &mut W,
    client: &dyn ChatClient,
    registry: &ToolRegistry,
    options: &AgentOptions,
    mut session: Option<&mut SessionLog<L>>,
) -> io::Result<Vec<Transcript>> {
    let mut transcripts = Vec::new();
    let mut lines = input.lines();
    loop {
        output.write_all(PROMPT.as_bytes())?;
        output.flush()?;
        let Some(line) = lines.next() else {
            output.write_all(b"\n")?;
            break;
        };
        let line = line?;
        let question = line.trim();
        if question.is_empty() {
            continue;
        }
        if question.eq_ignore_ascii_case("exit") || question.eq_ignore_ascii_case("quit") {
            break;
        }
        let mut failure: Option<io::Error> = None;
        let transcript = run_agent_observed(question, client, registry, options, &mut |step| {
            if failure.is_some() {
                return;
            }
            let res = output.write_all(step.render().as_bytes()).and_then(|_| output.flush());
            let res = res.and_then(|_| match session.as_deref_mut() {
                Some(log) => log.record(step),
                None => Ok(()),
            });
            failure = res.err();
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if transcript.final_answer().is_none() {
            let mut note = format!("[stopped: {}", transcript.termination);
            if let Some(e) = &transcript.error {
                note.push_str(&format!(": {e}"));
            }
            writeln!(output, "{note}]")?;
        }
        transcripts.push(transcript);
    }
    output.flush()?;
    Ok(transcripts)
}
