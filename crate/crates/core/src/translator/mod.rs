//! Instruction translation: natural-language command plus scene facts in,
//! a symbolic artifact out.
//!
//! Two artifacts exist. A [`ProblemFragment`] holds the dynamic part of a
//! PDDL problem for the solver. A [`SubtaskList`] is a tool sequence for the
//! direct pipeline. Both come out of validating constructors
//! ([`ProblemFragment::parse`], [`SubtaskList::parse`]) that run on raw
//! translator text, so nothing unvalidated reaches the orchestrator.

mod fault;
mod llm;
mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{self, fragment_text, parse_body, tabletop_domain, Atom, Literal, ParseErrorKind, Typed};
use crate::tools::{lookup, ArgKind, ArgValue, ToolCall};
use crate::world::{derive_scene_graph, is_container_class, named_location, Relation, WorldState, DEFAULT_TOLERANCE};

pub use fault::{FaultKind, FaultSpec};
pub use llm::{chat_complete, Completion, EndpointConfig, PromptParts, Prompts, TokenUsage, TransportError};
pub use template::{Intent, Rule, RuleSet, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFact {
    pub name: String,
    pub class: String,
    pub color: String,
    pub position: [f64; 3],
}

impl ObjectFact {
    pub fn is_container(&self) -> bool {
        is_container_class(&self.class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFacts {
    pub gripper_open: bool,
    pub held: Option<String>,
}

/// What the translator is allowed to know about the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFacts {
    pub objects: Vec<ObjectFact>,
    pub relations: Vec<Relation>,
    pub robot: RobotFacts,
}

impl SceneFacts {
    pub fn from_world(w: &WorldState) -> Self {
        Self {
            objects: w
                .objects
                .iter()
                .map(|(n, o)| ObjectFact {
                    name: n.clone(),
                    class: o.class.clone(),
                    color: o.color.clone(),
                    position: o.position,
                })
                .collect(),
            relations: derive_scene_graph(w, DEFAULT_TOLERANCE).edges.into_iter().collect(),
            robot: RobotFacts {
                gripper_open: w.robot.gripper_open,
                held: w.robot.held.clone(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut names = std::collections::HashSet::new();
        for o in &self.objects {
            if !names.insert(o.name.as_str()) {
                return Err(format!("duplicate object {}", o.name));
            }
            if o.position.iter().any(|v| !v.is_finite()) {
                return Err(format!("{} has a non-finite position", o.name));
            }
        }
        match &self.robot.held {
            Some(h) if !names.contains(h.as_str()) => Err(format!("held object {h} is not in the scene")),
            _ => Ok(()),
        }
    }

    pub fn object(&self, name: &str) -> Option<&ObjectFact> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// Scene objects typed for the tabletop domain.
    pub fn typed_objects(&self) -> Vec<Typed> {
        self.objects
            .iter()
            .map(|o| Typed::new(o.name.clone(), if o.is_container() { "container" } else { "item" }))
            .collect()
    }

    /// Objects stacked above `name`, topmost first.
    pub fn blockers(&self, name: &str) -> Vec<String> {
        use crate::world::SpatialPredicate::OnTopOf;
        let above = |n: &str| {
            self.relations
                .iter()
                .find(|r| r.predicate == OnTopOf && r.object == n)
                .map(|r| r.subject.clone())
        };
        let mut chain = Vec::new();
        let mut cur = name.to_string();
        while let Some(top) = above(&cur) {
            if chain.contains(&top) {
                break;
            }
            chain.push(top.clone());
            cur = top;
        }
        chain.reverse();
        chain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationErrorKind {
    NoMatch,
    Unsupported,
    Unparseable,
    UnknownPredicate,
    UnknownObject,
    UnknownTool,
    BadArguments,
    Ambiguous,
    InvalidScene,
    Transport,
}

/// A failed translation. `raw` holds the translator's output verbatim when
/// there was one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Error)]
#[error("{kind:?}: {message}")]
pub struct TranslationError {
    pub kind: TranslationErrorKind,
    pub message: String,
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultKind>,
    #[serde(default)]
    pub requests: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl TranslationError {
    pub fn new(kind: TranslationErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            raw: None,
            fault: None,
            requests: 0,
            usage: None,
        }
    }

    fn with_raw(mut self, raw: &str) -> Self {
        self.raw = Some(raw.to_string());
        self
    }
}

/// Dynamic part of a planning problem produced from one instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFragment {
    pub objects: Vec<Typed>,
    pub init: Vec<Atom>,
    pub goal: Vec<Literal>,
}

impl ProblemFragment {
    /// Parses `(:objects ...) (:init ...) (:goal ...)` text against the
    /// tabletop domain and the scene's objects.
    pub fn parse(raw: &str, scene: &SceneFacts) -> Result<Self, TranslationError> {
        let domain = tabletop_domain();
        let err = |kind, e: pddl::ParseError| TranslationError::new(kind, e.to_string()).with_raw(raw);
        let sections = pddl::sexpr::read_all(raw).map_err(|e| err(TranslationErrorKind::Unparseable, e))?;
        let body = parse_body(&domain, &sections, &scene.typed_objects()).map_err(|e| {
            let kind = match e.kind {
                ParseErrorKind::UndeclaredPredicate(_) => TranslationErrorKind::UnknownPredicate,
                ParseErrorKind::UnknownObject(_) => TranslationErrorKind::UnknownObject,
                _ => TranslationErrorKind::Unparseable,
            };
            err(kind, e)
        })?;
        Ok(Self {
            objects: body.objects,
            init: body.init,
            goal: body.goal,
        })
    }

    pub fn to_text(&self) -> String {
        fragment_text(&self.objects, &self.init, &self.goal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub tool: String,
    #[serde(default)]
    pub args: BTreeMap<String, ArgValue>,
    #[serde(default)]
    pub rationale: String,
}

/// Ordered tool steps for the direct pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubtaskList(pub Vec<Subtask>);

impl SubtaskList {
    /// Parses a JSON array of steps and checks tool names, argument shapes
    /// and object references against the registry and the scene. World
    /// preconditions are checked later, by a dry run at planning time.
    pub fn parse(raw: &str, scene: &SceneFacts) -> Result<Self, TranslationError> {
        use TranslationErrorKind as K;
        let fail = |k, m: String| TranslationError::new(k, m).with_raw(raw);
        let list: Vec<Subtask> = serde_json::from_str(raw).map_err(|e| fail(K::Unparseable, e.to_string()))?;
        if list.is_empty() {
            return Err(fail(K::Unparseable, "empty subtask list".into()));
        }
        for (i, s) in list.iter().enumerate() {
            let spec = lookup(&s.tool).ok_or_else(|| fail(K::UnknownTool, format!("step {i}: unknown tool {:?}", s.tool)))?;
            for a in spec.args {
                let v = s
                    .args
                    .get(a.name)
                    .ok_or_else(|| fail(K::BadArguments, format!("step {i}: {} needs {:?}", s.tool, a.name)))?;
                let ok = match (a.kind, v) {
                    (ArgKind::ObjectRef | ArgKind::Surface, ArgValue::Text(n)) => {
                        if !(a.kind == ArgKind::Surface && n == "table") && scene.object(n).is_none() {
                            return Err(fail(K::UnknownObject, format!("step {i}: unknown object {n:?}")));
                        }
                        true
                    }
                    (ArgKind::Location, ArgValue::Text(n)) => named_location(n).is_some(),
                    (ArgKind::Location, ArgValue::Pose(_)) => true,
                    (ArgKind::Scalar { min, .. }, ArgValue::Number(x)) => *x >= min,
                    _ => false,
                };
                if !ok {
                    return Err(fail(K::BadArguments, format!("step {i}: bad value {v} for {:?}", a.name)));
                }
            }
            if let Some(k) = s.args.keys().find(|k| !spec.args.iter().any(|a| a.name == k.as_str())) {
                return Err(fail(K::BadArguments, format!("step {i}: {} takes no {k:?}", s.tool)));
            }
        }
        Ok(Self(list))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("subtasks serialize")
    }

    pub fn to_calls(&self) -> Vec<ToolCall> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, s)| ToolCall {
                tool: s.tool.clone(),
                args: s.args.clone(),
                step: Some(i),
                ..ToolCall::bare(&s.tool)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslatorKind {
    Template,
    ExternalLlm(EndpointConfig),
    FaultInjecting {
        base: Box<TranslatorKind>,
        fault: FaultSpec,
    },
}

impl TranslatorKind {
    pub fn fault(rate: f64, seed: u64) -> Self {
        TranslatorKind::FaultInjecting {
            base: Box::new(TranslatorKind::Template),
            fault: FaultSpec::new(rate, seed),
        }
    }

    /// Same translator with the fault seed replaced, for per-trial seeding.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            TranslatorKind::FaultInjecting { base, fault } => TranslatorKind::FaultInjecting {
                base: base.clone(),
                fault: FaultSpec { seed, ..*fault },
            },
            other => other.clone(),
        }
    }

    /// Parses `template`, `llm` (endpoint from the environment) or
    /// `fault:<rate>:<seed>`.
    pub fn from_cli(s: &str) -> Result<Self, String> {
        match s {
            "template" => Ok(TranslatorKind::Template),
            "llm" => EndpointConfig::from_env().map(TranslatorKind::ExternalLlm),
            _ => {
                let parts: Vec<_> = s.split(':').collect();
                match parts.as_slice() {
                    ["fault", rate, seed] => {
                        let rate: f64 = rate.parse().map_err(|_| format!("bad fault rate {rate:?}"))?;
                        let seed: u64 = seed.parse().map_err(|_| format!("bad fault seed {seed:?}"))?;
                        if !(0.0..=1.0).contains(&rate) {
                            return Err(format!("fault rate {rate} outside [0, 1]"));
                        }
                        Ok(Self::fault(rate, seed))
                    }
                    _ => Err(format!("unknown translator {s:?}")),
                }
            }
        }
    }
}

/// A successful translation with its raw text and request accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Translation<T> {
    pub value: T,
    pub raw: String,
    pub requests: u32,
    pub usage: Option<TokenUsage>,
    /// Set when the fault injector corrupted this output.
    pub fault: Option<FaultKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Artifact {
    Problem,
    Subtasks,
}

struct RawOutput {
    text: String,
    requests: u32,
    usage: Option<TokenUsage>,
    fault: Option<FaultKind>,
}

fn produce(
    artifact: Artifact,
    instruction: &str,
    scene: &SceneFacts,
    kind: &TranslatorKind,
) -> Result<RawOutput, TranslationError> {
    match kind {
        TranslatorKind::Template => {
            let text = template::translate(artifact, instruction, scene)?;
            Ok(RawOutput {
                text,
                requests: 1,
                usage: None,
                fault: None,
            })
        }
        TranslatorKind::ExternalLlm(cfg) => {
            let parts = Prompts::bundled().render(artifact, instruction, scene);
            let c = chat_complete(cfg, &parts).map_err(|e| {
                let mut err = TranslationError::new(TranslationErrorKind::Transport, e.to_string());
                err.requests = e.attempts();
                err
            })?;
            Ok(RawOutput {
                text: c.text,
                requests: c.attempts,
                usage: c.usage,
                fault: None,
            })
        }
        TranslatorKind::FaultInjecting { base, fault } => {
            let mut out = produce(artifact, instruction, scene, base)?;
            if let Some((text, k)) = fault.apply(artifact, &out.text) {
                out.text = text;
                out.fault = Some(k);
            }
            Ok(out)
        }
    }
}

fn translate<T>(
    artifact: Artifact,
    instruction: &str,
    scene: &SceneFacts,
    kind: &TranslatorKind,
    parse: fn(&str, &SceneFacts) -> Result<T, TranslationError>,
) -> Result<Translation<T>, TranslationError> {
    scene
        .validate()
        .map_err(|m| TranslationError::new(TranslationErrorKind::InvalidScene, m))?;
    let out = produce(artifact, instruction, scene, kind)?;
    match parse(&out.text, scene) {
        Ok(value) => Ok(Translation {
            value,
            raw: out.text,
            requests: out.requests,
            usage: out.usage,
            fault: out.fault,
        }),
        Err(mut e) => {
            e.fault = out.fault;
            e.requests = out.requests;
            e.usage = out.usage;
            Err(e)
        }
    }
}

pub fn translate_to_problem(
    instruction: &str,
    scene: &SceneFacts,
    kind: &TranslatorKind,
) -> Result<Translation<ProblemFragment>, TranslationError> {
    translate(Artifact::Problem, instruction, scene, kind, ProblemFragment::parse)
}

pub fn translate_to_subtasks(
    instruction: &str,
    scene: &SceneFacts,
    kind: &TranslatorKind,
) -> Result<Translation<SubtaskList>, TranslationError> {
    translate(Artifact::Subtasks, instruction, scene, kind, SubtaskList::parse)
}
