use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Artifact, SceneFacts, Subtask, TranslationError, TranslationErrorKind as K};
use crate::pddl::{fragment_text, Atom, Literal};
use crate::tools::ArgValue;

const ARTICLES: [&str; 3] = ["the", "a", "an"];
const FILLERS: [&str; 4] = ["object", "slot", "one", "thing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntentKind {
    PlaceOnTable,
    Stack,
    PlaceIn,
    Hold,
    Home,
    MoveTo,
}

#[derive(Debug, Clone, Deserialize)]
struct RuleEntry {
    id: String,
    pattern: String,
    intent: IntentKind,
    #[serde(default)]
    location: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RuleFile {
    version: u32,
    rule: Vec<RuleEntry>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub id: String,
    pub pattern: Regex,
    pub intent: IntentKind,
    pub location: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: u32,
    pub rules: Vec<Rule>,
}

/// What an instruction asks for, with descriptors resolved to scene names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "intent", rename_all = "kebab-case")]
pub enum Intent {
    PlaceOnTable { object: String },
    Stack { object: String, target: String },
    PlaceIn { object: String, container: String },
    Hold { object: String },
    Home,
    MoveTo { location: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Table,
    Object(String),
}

pub const BUNDLED_RULES: &str = include_str!("../../data/templates.toml");

impl RuleSet {
    pub fn parse(text: &str) -> Result<Self, String> {
        let file: RuleFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let rules = file
            .rule
            .into_iter()
            .map(|r| {
                let pattern = Regex::new(&r.pattern).map_err(|e| format!("rule {}: {e}", r.id))?;
                if r.intent == IntentKind::MoveTo && r.location.is_none() {
                    return Err(format!("rule {}: move-to needs a location", r.id));
                }
                Ok(Rule {
                    id: r.id,
                    pattern,
                    intent: r.intent,
                    location: r.location,
                })
            })
            .collect::<Result<_, String>>()?;
        Ok(Self {
            version: file.version,
            rules,
        })
    }

    pub fn bundled() -> &'static RuleSet {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES.get_or_init(|| RuleSet::parse(BUNDLED_RULES).expect("bundled rules parse"))
    }

    /// First rule that matches and resolves against `scene`.
    pub fn resolve(&self, instruction: &str, scene: &SceneFacts) -> Result<(&Rule, Intent), TranslationError> {
        let text = normalize(instruction);
        let mut first_err = None;
        for rule in &self.rules {
            let Some(caps) = rule.pattern.captures(&text) else { continue };
            let desc = |k: &str| caps.name(k).map(|m| m.as_str()).unwrap_or_default();
            match intent_for(rule, desc("object"), desc("target"), scene) {
                Ok(Some(intent)) => return Ok((rule, intent)),
                Ok(None) => {}
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.unwrap_or_else(|| TranslationError::new(K::NoMatch, format!("no rule matches {text:?}"))))
    }
}

/// Lowercases, drops a trailing `execute` and punctuation, removes commas
/// and collapses whitespace.
pub fn normalize(instruction: &str) -> String {
    let trim = |s: &str| s.trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace()).to_string();
    let mut s = trim(&instruction.to_lowercase());
    if let Some(rest) = s.strip_suffix("execute") {
        s = trim(rest);
    }
    s.replace(',', " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn words(o: &super::ObjectFact) -> Vec<&str> {
    let mut w: Vec<&str> = o.name.split(['_', '-']).collect();
    w.push(&o.class);
    w.push(&o.color);
    w
}

/// Resolves a descriptor such as "the yellow object" to a scene object.
pub fn resolve_descriptor(desc: &str, scene: &SceneFacts) -> Result<Target, TranslationError> {
    let tokens: Vec<&str> = desc
        .split_whitespace()
        .filter(|t| !ARTICLES.contains(t) && !FILLERS.contains(t))
        .collect();
    if tokens == ["table"] {
        return Ok(Target::Table);
    }
    if tokens.is_empty() {
        return match &scene.robot.held {
            Some(h) => Ok(Target::Object(h.clone())),
            None => Err(TranslationError::new(K::Ambiguous, format!("{desc:?} does not name an object"))),
        };
    }
    let mut found: Vec<&super::ObjectFact> = scene
        .objects
        .iter()
        .filter(|o| {
            let w = words(o);
            tokens.iter().all(|t| w.contains(t))
        })
        .collect();
    if found.len() > 1 {
        let joined = tokens.join("_");
        let last = *tokens.last().unwrap();
        if let Some(o) = found.iter().find(|o| o.name == joined) {
            found = vec![*o];
        } else {
            found.retain(|o| o.class == last);
        }
    }
    match found.as_slice() {
        [o] => Ok(Target::Object(o.name.clone())),
        [] => Err(TranslationError::new(K::UnknownObject, format!("no object matches {desc:?}"))),
        many => {
            let names: Vec<_> = many.iter().map(|o| o.name.as_str()).collect();
            Err(TranslationError::new(K::Ambiguous, format!("{desc:?} matches {}", names.join(", "))))
        }
    }
}

fn intent_for(rule: &Rule, object: &str, target: &str, scene: &SceneFacts) -> Result<Option<Intent>, TranslationError> {
    let item = |d: &str| -> Result<Option<String>, TranslationError> {
        match resolve_descriptor(d, scene)? {
            Target::Object(n) if !scene.object(&n).is_some_and(|o| o.is_container()) => Ok(Some(n)),
            _ => Ok(None),
        }
    };
    let intent = match rule.intent {
        IntentKind::Home => Some(Intent::Home),
        IntentKind::MoveTo => Some(Intent::MoveTo {
            location: rule.location.clone().unwrap_or_default(),
        }),
        IntentKind::PlaceOnTable => item(object)?.map(|object| Intent::PlaceOnTable { object }),
        IntentKind::Hold => item(object)?.map(|object| Intent::Hold { object }),
        IntentKind::Stack => match (item(object)?, item(target)?) {
            (Some(o), Some(t)) => Some(Intent::Stack { object: o, target: t }),
            _ => None,
        },
        IntentKind::PlaceIn => {
            let o = item(object)?;
            let c = match resolve_descriptor(target, scene)? {
                Target::Object(c) if scene.object(&c).is_some_and(|f| f.is_container()) => Some(c),
                _ => None,
            };
            o.zip(c).map(|(object, container)| Intent::PlaceIn { object, container })
        }
    };
    Ok(intent)
}

impl Intent {
    /// The goal literal for the planner, if the intent has one.
    pub fn goal(&self) -> Option<Literal> {
        let atom = match self {
            Intent::PlaceOnTable { object } => Atom::new("on-table", [object]),
            Intent::Stack { object, target } => Atom::new("on", [object, target]),
            Intent::PlaceIn { object, container } => Atom::new("in", [object, container]),
            Intent::Hold { object } => Atom::new("holding", [object]),
            Intent::Home | Intent::MoveTo { .. } => return None,
        };
        Some(Literal::pos(atom))
    }

    fn object(&self) -> Option<&str> {
        match self {
            Intent::PlaceOnTable { object }
            | Intent::Stack { object, .. }
            | Intent::PlaceIn { object, .. }
            | Intent::Hold { object } => Some(object),
            _ => None,
        }
    }

    /// Tool steps achieving the intent from the scene as described: free
    /// the gripper, clear whatever sits on the object (and target), then
    /// grasp and place.
    pub fn subtasks(&self, scene: &SceneFacts) -> Vec<Subtask> {
        let step = |tool: &str, args: &[(&str, &str)], why: String| Subtask {
            tool: tool.into(),
            args: args.iter().map(|(k, v)| (k.to_string(), ArgValue::from(*v))).collect(),
            rationale: why,
        };
        let mut out = Vec::new();
        match self {
            Intent::Home => out.push(step("home", &[], "return the arm to its home pose".into())),
            Intent::MoveTo { location } => out.push(step(
                "move_to",
                &[("location", location)],
                format!("move the arm to the {location}"),
            )),
            _ => {}
        }
        let Some(object) = self.object() else { return out };
        let held = scene.robot.held.as_deref();
        if held.is_some_and(|h| h != object) {
            let h = held.unwrap();
            out.push(step("place_on", &[("target", "table")], format!("free the gripper by setting {h} down")));
        }
        let mut moved: Vec<String> = Vec::new();
        let mut to_clear = vec![object];
        if let Intent::Stack { target, .. } = self {
            to_clear.push(target);
        }
        for x in to_clear {
            for b in scene.blockers(x) {
                if moved.contains(&b) || b == object {
                    continue;
                }
                out.push(step("detect", &[("object", &b)], format!("locate {b}, which sits on {x}")));
                out.push(step("pick", &[("object", &b)], format!("lift {b} off {x}")));
                out.push(step("place_on", &[("target", "table")], format!("set {b} aside on the table")));
                moved.push(b);
            }
        }
        if held != Some(object) {
            out.push(step("detect", &[("object", object)], format!("locate {object}")));
            out.push(step("pick", &[("object", object)], format!("grasp {object}")));
        }
        match self {
            Intent::PlaceOnTable { .. } => {
                out.push(step("place_on", &[("target", "table")], format!("put {object} on the table")))
            }
            Intent::Stack { target, .. } => {
                out.push(step("place_on", &[("target", target)], format!("stack {object} on {target}")))
            }
            Intent::PlaceIn { container, .. } => {
                out.push(step("place_in", &[("container", container)], format!("put {object} in {container}")))
            }
            _ => {}
        }
        out
    }
}

pub(super) fn translate(artifact: Artifact, instruction: &str, scene: &SceneFacts) -> Result<String, TranslationError> {
    let (_, intent) = RuleSet::bundled().resolve(instruction, scene)?;
    match artifact {
        Artifact::Problem => {
            let goal = intent
                .goal()
                .ok_or_else(|| TranslationError::new(K::Unsupported, format!("{intent:?} has no symbolic goal")))?;
            Ok(fragment_text(&[], &[], &[goal]))
        }
        Artifact::Subtasks => Ok(serde_json::to_string_pretty(&intent.subtasks(scene)).expect("subtasks serialize")),
    }
}
