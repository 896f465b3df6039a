//! Reference model of the command gate built on plain character scanning.

use symwrap::gate::GateEvent;

// A keyword is a maximal run of ASCII word
// characters equal to it, ignoring case.
pub fn runs(s: &str) -> Vec<(usize, usize)> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_alphanumeric() || b[i] == b'_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

pub fn has_word(s: &str, w: &str) -> bool {
    runs(s).iter().any(|&(a, b)| s[a..b].eq_ignore_ascii_case(w))
}

pub fn strip_word(s: &str, w: &str) -> String {
    let mut out = String::new();
    let mut last = 0;
    for (a, b) in runs(s) {
        if s[a..b].eq_ignore_ascii_case(w) {
            out.push_str(&s[last..a]);
            last = b;
        }
    }
    out.push_str(&s[last..]);
    out
}

pub fn trimmed(s: &str) -> &str {
    s.trim_end_matches(|c: char| (c.is_ascii_punctuation() && c != '_') || c.is_whitespace())
}

#[derive(Default)]
pub struct Model {
    stopped: bool,
    buffer: String,
}

impl Model {
    pub fn feed(&mut self, line: &str, buffering: bool) -> GateEvent {
        if has_word(line, "stop") {
            *self = Model { stopped: true, buffer: String::new() };
            return GateEvent::EmergencyStop;
        }
        if self.stopped {
            if has_word(line, "okay") {
                self.stopped = false;
                return GateEvent::Resume;
            }
            return GateEvent::Ignored;
        }
        let text = format!("{} {}", self.buffer, line.trim()).trim().to_string();
        let tail = trimmed(&text);
        let ends = runs(tail).last().is_some_and(|&(a, b)| b == tail.len() && tail[a..b].eq_ignore_ascii_case("execute"));
        if ends {
            self.buffer.clear();
            let rest = strip_word(tail, "execute");
            let instruction = trimmed(&rest.split_whitespace().collect::<Vec<_>>().join(" ")).to_string();
            return if instruction.is_empty() {
                GateEvent::Ignored
            } else {
                GateEvent::Forward { instruction }
            };
        }
        if buffering && !text.is_empty() {
            self.buffer = text;
            GateEvent::Buffered
        } else {
            self.buffer.clear();
            GateEvent::Ignored
        }
    }
}

