//! Keyword protocol over a transcript stream.
//!
//! `STOP` halts from any mode and has priority over everything else.
//! While stopped, only `OKAY` does anything. Otherwise text accumulates
//! until a line ends with `execute`, and the accumulated text minus the
//! keyword is forwarded as an instruction.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    #[default]
    Listening,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateState {
    pub mode: GateMode,
    pub buffer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateConfig {
    /// Keep lines without the keyword until one ends with it. When off,
    /// such lines are dropped.
    pub buffering: bool,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { buffering: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum GateEvent {
    Forward { instruction: String },
    EmergencyStop,
    Resume,
    Buffered,
    Ignored,
}

fn word(w: &str) -> Regex {
    Regex::new(&format!(r"(?i)\b{w}\b")).unwrap()
}

fn stop_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| word("stop"))
}

fn okay_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| word("okay"))
}

fn execute_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| word("execute"))
}

// `_` is a word character, so it stays.
fn trim_tail(s: &str) -> &str {
    s.trim_end_matches(|c: char| (c.is_ascii_punctuation() && c != '_') || c.is_whitespace())
}

/// Whether `line` contains the standalone stop token, in any case.
pub fn is_stop(line: &str) -> bool {
    stop_re().is_match(line)
}

/// One transition. Exactly one event per line.
pub fn process_line(state: &GateState, line: &str, cfg: &GateConfig) -> (GateState, GateEvent) {
    if is_stop(line) {
        return (
            GateState {
                mode: GateMode::Stopped,
                buffer: String::new(),
            },
            GateEvent::EmergencyStop,
        );
    }
    if state.mode == GateMode::Stopped {
        return if okay_re().is_match(line) {
            (GateState::default(), GateEvent::Resume)
        } else {
            (state.clone(), GateEvent::Ignored)
        };
    }
    let text = format!("{} {}", state.buffer, line.trim());
    let text = text.trim();
    let tail = trim_tail(text);
    let ends_with_keyword = execute_re().find_iter(tail).last().is_some_and(|m| m.end() == tail.len());
    if ends_with_keyword {
        let stripped = execute_re().replace_all(tail, "");
        let instruction = trim_tail(&stripped.split_whitespace().collect::<Vec<_>>().join(" ")).to_string();
        let event = if instruction.is_empty() {
            GateEvent::Ignored
        } else {
            GateEvent::Forward { instruction }
        };
        return (GateState::default(), event);
    }
    if cfg.buffering && !text.is_empty() {
        (
            GateState {
                mode: GateMode::Listening,
                buffer: text.to_string(),
            },
            GateEvent::Buffered,
        )
    } else {
        (GateState::default(), GateEvent::Ignored)
    }
}

/// Stateful wrapper around [`process_line`].
#[derive(Debug, Clone, Default)]
pub struct CommandGate {
    pub state: GateState,
    pub config: GateConfig,
}

impl CommandGate {
    pub fn new(config: GateConfig) -> Self {
        Self {
            state: GateState::default(),
            config,
        }
    }

    pub fn feed(&mut self, line: &str) -> GateEvent {
        let (next, ev) = process_line(&self.state, line, &self.config);
        self.state = next;
        ev
    }
}

/// The 29 spoken commands used to exercise the gate, in order.
pub const GATE_SCRIPT: &str = include_str!("../data/gate/script.txt");
