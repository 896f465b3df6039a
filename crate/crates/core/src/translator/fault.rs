use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Artifact;

/// How an injected fault corrupted a translator output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    UnbalancedParens,
    UnknownPredicate,
    UnknownObject,
    ImpossibleGoal,
    TruncatedJson,
    UnknownTool,
    DroppedGrasp,
}

/// Corrupts translator output with probability `rate`, using one seeded
/// draw per translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub rate: f64,
    pub seed: u64,
}

impl FaultSpec {
    pub fn new(rate: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&rate), "fault rate must lie in [0, 1]");
        Self { rate, seed }
    }

    pub(super) fn apply(&self, artifact: Artifact, text: &str) -> Option<(String, FaultKind)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        if rng.random::<f64>() >= self.rate {
            return None;
        }
        let mode = rng.random_range(0..4);
        Some(match artifact {
            Artifact::Problem => corrupt_problem(text, mode),
            Artifact::Subtasks => corrupt_subtasks(text, mode),
        })
    }
}

fn drop_last_paren(text: &str) -> (String, FaultKind) {
    let mut s = text.to_string();
    match s.rfind(')') {
        Some(i) => {
            s.remove(i);
        }
        None => s.push('('),
    }
    (s, FaultKind::UnbalancedParens)
}

fn corrupt_problem(text: &str, mode: u32) -> (String, FaultKind) {
    let goal = Regex::new(r"\(:goal\s*\(and\s*\(([a-z][a-z0-9_-]*)\s+([a-z][a-z0-9_-]*)").unwrap();
    let Some(c) = goal.captures(text) else {
        return drop_last_paren(text);
    };
    let (pred, arg) = (c.get(1).unwrap(), c.get(2).unwrap());
    let splice = |m: regex::Match, with: &str| format!("{}{}{}", &text[..m.start()], with, &text[m.end()..]);
    match mode {
        0 => drop_last_paren(text),
        1 => (splice(pred, "levitating"), FaultKind::UnknownPredicate),
        2 => (splice(arg, "ghost_object"), FaultKind::UnknownObject),
        _ => {
            let start = c.get(0).unwrap().start();
            let x = arg.as_str();
            (format!("{}(:goal (and (on {x} {x})))\n", &text[..start]), FaultKind::ImpossibleGoal)
        }
    }
}

fn truncate(text: &str) -> (String, FaultKind) {
    let t = text.trim_end();
    (t[..t.len().saturating_sub(1)].to_string(), FaultKind::TruncatedJson)
}

fn corrupt_subtasks(text: &str, mode: u32) -> (String, FaultKind) {
    let Ok(Value::Array(mut steps)) = serde_json::from_str::<Value>(text) else {
        return truncate(text);
    };
    if steps.is_empty() {
        return truncate(text);
    }
    let render = |steps: Vec<Value>| serde_json::to_string_pretty(&steps).unwrap();
    match mode {
        1 => {
            steps[0]["tool"] = Value::from("teleport");
            (render(steps), FaultKind::UnknownTool)
        }
        2 => {
            let slot = steps.iter_mut().find_map(|s| {
                s.get_mut("args")?.as_object_mut()?.iter_mut().find_map(|(_, v)| match v {
                    Value::String(n) if n != "table" => Some(v),
                    _ => None,
                })
            });
            match slot {
                Some(v) => {
                    *v = Value::from("ghost_object");
                    (render(steps), FaultKind::UnknownObject)
                }
                None => truncate(text),
            }
        }
        3 => {
            let tool = |s: &Value| s["tool"].as_str().unwrap_or_default().to_string();
            let grasp = steps.iter().position(|s| tool(s) == "pick").filter(|&i| {
                steps[i + 1..].iter().any(|s| tool(s).starts_with("place_"))
            });
            match grasp {
                Some(i) => {
                    steps.remove(i);
                    (render(steps), FaultKind::DroppedGrasp)
                }
                None => truncate(text),
            }
        }
        _ => truncate(text),
    }
}
