//! The finite tool registry, call validation and the plan-to-call mapping.
//!
//! Every physical action goes through one of the nine tools returned by
//! [`registry`]. A call is checked against the tool's argument schema and
//! its precondition on the current [`WorldState`] before dispatch.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::Plan;
use crate::world::{apply_effect, named_location, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArgKind {
    /// Name of an object in the scene.
    ObjectRef,
    /// Object name or the literal `table`.
    Surface,
    /// Named location or an `[x, y, z]` pose in meters.
    Location,
    Scalar { units: &'static str, min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArgSpec {
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: ArgKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToolSpec {
    pub name: &'static str,
    pub args: &'static [ArgSpec],
    /// Precondition in symbolic form, for display and prompt construction.
    pub precondition: &'static str,
    pub effect: &'static str,
    pub duration_ticks: u64,
}

const fn arg(name: &'static str, kind: ArgKind) -> ArgSpec {
    ArgSpec { name, kind }
}

static REGISTRY: [ToolSpec; 9] = [
    ToolSpec {
        name: "detect",
        args: &[arg("object", ArgKind::ObjectRef)],
        precondition: "(present ?object)",
        effect: "none",
        duration_ticks: 10,
    },
    ToolSpec {
        name: "pick",
        args: &[arg("object", ArgKind::ObjectRef)],
        precondition: "(and (gripper-empty) (clear ?object))",
        effect: "(and (holding ?object) (not (gripper-empty)) (not (clear ?object)))",
        duration_ticks: 30,
    },
    ToolSpec {
        name: "place_on",
        args: &[arg("target", ArgKind::Surface)],
        precondition: "(and (holding ?x) (or (= ?target table) (clear ?target)))",
        effect: "(and (gripper-empty) (clear ?x) (not (holding ?x)) (or (on-table ?x) (on ?x ?target)))",
        duration_ticks: 30,
    },
    ToolSpec {
        name: "place_in",
        args: &[arg("container", ArgKind::ObjectRef)],
        precondition: "(and (holding ?x) (container ?container))",
        effect: "(and (in ?x ?container) (gripper-empty) (not (holding ?x)))",
        duration_ticks: 30,
    },
    ToolSpec {
        name: "move_to",
        args: &[arg("location", ArgKind::Location)],
        precondition: "true",
        effect: "arm at ?location",
        duration_ticks: 25,
    },
    ToolSpec {
        name: "open_gripper",
        args: &[],
        precondition: "(gripper-empty)",
        effect: "gripper open",
        duration_ticks: 5,
    },
    ToolSpec {
        name: "close_gripper",
        args: &[],
        precondition: "true",
        effect: "gripper closed",
        duration_ticks: 5,
    },
    ToolSpec {
        name: "home",
        args: &[],
        precondition: "true",
        effect: "arm at home",
        duration_ticks: 20,
    },
    ToolSpec {
        name: "wait",
        args: &[arg("seconds", ArgKind::Scalar { units: "s", min: 0.0 })],
        precondition: "true",
        effect: "none",
        duration_ticks: 0,
    },
];

pub fn registry() -> &'static [ToolSpec] {
    &REGISTRY
}

pub fn lookup(name: &str) -> Option<&'static ToolSpec> {
    REGISTRY.iter().find(|t| t.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Number(f64),
    Pose([f64; 3]),
    Text(String),
}

impl ArgValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            ArgValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<&str> for ArgValue {
    fn from(s: &str) -> Self {
        ArgValue::Text(s.to_string())
    }
}

impl From<f64> for ArgValue {
    fn from(v: f64) -> Self {
        ArgValue::Number(v)
    }
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Number(v) => write!(f, "{v}"),
            ArgValue::Pose([x, y, z]) => write!(f, "[{x}, {y}, {z}]"),
            ArgValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum CallStatus {
    Pending,
    Running,
    Succeeded,
    Failed { reason: String },
    Preempted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal call transition from {from} to {to}")]
pub struct IllegalTransition {
    pub from: &'static str,
    pub to: &'static str,
}

impl CallStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CallStatus::Pending => "pending",
            CallStatus::Running => "running",
            CallStatus::Succeeded => "succeeded",
            CallStatus::Failed { .. } => "failed",
            CallStatus::Preempted => "preempted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, CallStatus::Pending | CallStatus::Running)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub args: BTreeMap<String, ArgValue>,
    #[serde(default = "pending")]
    pub status: CallStatus,
    /// Index of the plan step this call was mapped from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default)]
    pub attempt: u32,
}

fn pending() -> CallStatus {
    CallStatus::Pending
}

impl ToolCall {
    pub fn new<I, K, V>(tool: &str, args: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<ArgValue>,
    {
        Self {
            tool: tool.to_string(),
            args: args.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
            status: CallStatus::Pending,
            step: None,
            attempt: 0,
        }
    }

    pub fn bare(tool: &str) -> Self {
        Self::new(tool, Vec::<(String, ArgValue)>::new())
    }

    pub fn text_arg(&self, name: &str) -> Option<&str> {
        self.args.get(name).and_then(ArgValue::as_text)
    }

    fn transition(&mut self, allowed: bool, to: CallStatus) -> Result<(), IllegalTransition> {
        if !allowed {
            return Err(IllegalTransition {
                from: self.status.label(),
                to: to.label(),
            });
        }
        self.status = to;
        Ok(())
    }

    pub fn start(&mut self) -> Result<(), IllegalTransition> {
        let ok = self.status == CallStatus::Pending;
        self.transition(ok, CallStatus::Running)
    }

    pub fn succeed(&mut self) -> Result<(), IllegalTransition> {
        let ok = self.status == CallStatus::Running;
        self.transition(ok, CallStatus::Succeeded)
    }

    pub fn fail(&mut self, reason: impl Into<String>) -> Result<(), IllegalTransition> {
        let ok = self.status == CallStatus::Running;
        self.transition(ok, CallStatus::Failed { reason: reason.into() })
    }

    pub fn preempt(&mut self) -> Result<(), IllegalTransition> {
        let ok = self.status == CallStatus::Running;
        self.transition(ok, CallStatus::Preempted)
    }

    /// A fresh pending copy for re-dispatch after a preemption.
    pub fn retry(&self) -> Self {
        Self {
            status: CallStatus::Pending,
            attempt: self.attempt + 1,
            ..self.clone()
        }
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.tool)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Error)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Rejection {
    #[error("unknown tool {tool:?}")]
    UnknownTool { tool: String },
    #[error("{tool} is missing argument {arg:?}")]
    MissingArgument { tool: String, arg: String },
    #[error("{tool} does not take argument {arg:?}")]
    UnexpectedArgument { tool: String, arg: String },
    #[error("argument {arg:?}: {detail}")]
    BadArgument { arg: String, detail: String },
    #[error("unknown object {object:?}")]
    UnknownObject { object: String },
    #[error("unknown location {location:?}")]
    UnknownLocation { location: String },
    #[error("gripper occupied by {held}")]
    GripperOccupied { held: String },
    #[error("gripper is empty")]
    GripperEmpty,
    #[error("{object} is not clear ({blocker} is on top)")]
    NotClear { object: String, blocker: String },
    #[error("{object} cannot be grasped")]
    NotGraspable { object: String },
    #[error("{object} is not a container")]
    NotAContainer { object: String },
    #[error("cannot place {object} onto itself")]
    SelfPlacement { object: String },
    #[error("no free spot on the table")]
    TableFull,
}

fn check_schema(spec: &ToolSpec, call: &ToolCall, w: &WorldState) -> Result<(), Rejection> {
    for a in spec.args {
        let v = call.args.get(a.name).ok_or_else(|| Rejection::MissingArgument {
            tool: spec.name.into(),
            arg: a.name.into(),
        })?;
        let bad = |detail: &str| Rejection::BadArgument {
            arg: a.name.into(),
            detail: detail.into(),
        };
        match a.kind {
            ArgKind::ObjectRef | ArgKind::Surface => {
                let name = v.as_text().ok_or_else(|| bad("expected an object name"))?;
                let table_ok = a.kind == ArgKind::Surface && name == "table";
                if !table_ok && w.object(name).is_none() {
                    return Err(Rejection::UnknownObject { object: name.into() });
                }
            }
            ArgKind::Location => match v {
                ArgValue::Text(n) if named_location(n).is_none() => {
                    return Err(Rejection::UnknownLocation { location: n.clone() })
                }
                ArgValue::Pose(p) if p.iter().any(|c| !c.is_finite()) => {
                    return Err(bad("pose must be finite"))
                }
                ArgValue::Number(_) => return Err(bad("expected a location name or pose")),
                _ => {}
            },
            ArgKind::Scalar { units, min } => match v {
                ArgValue::Number(x) if x.is_finite() && *x >= min => {}
                _ => return Err(bad(&format!("expected a number >= {min} {units}"))),
            },
        }
    }
    if let Some(k) = call.args.keys().find(|k| !spec.args.iter().any(|a| a.name == k.as_str())) {
        return Err(Rejection::UnexpectedArgument {
            tool: spec.name.into(),
            arg: k.clone(),
        });
    }
    Ok(())
}

fn check_precondition(call: &ToolCall, w: &WorldState) -> Result<(), Rejection> {
    let held = || w.robot.held.clone().ok_or(Rejection::GripperEmpty);
    let require_clear = |name: &str| match w.stacked_on(name).next() {
        Some(b) => Err(Rejection::NotClear {
            object: name.into(),
            blocker: b.into(),
        }),
        None => Ok(()),
    };
    match call.tool.as_str() {
        "pick" => {
            let x = call.text_arg("object").unwrap_or_default();
            if let Some(h) = &w.robot.held {
                return Err(Rejection::GripperOccupied { held: h.clone() });
            }
            let o = &w.objects[x];
            if o.is_container() || !matches!(o.support, crate::world::Support::Table | crate::world::Support::On(_)) {
                return Err(Rejection::NotGraspable { object: x.into() });
            }
            require_clear(x)
        }
        "place_on" => {
            let x = held()?;
            let t = call.text_arg("target").unwrap_or_default();
            if t == "table" {
                let he = w.objects[&x].half_extents;
                return w.free_table_spot(he, &x).map(|_| ()).ok_or(Rejection::TableFull);
            }
            if t == x {
                return Err(Rejection::SelfPlacement { object: x });
            }
            if w.objects[t].is_container() {
                return Err(Rejection::BadArgument {
                    arg: "target".into(),
                    detail: format!("{t} is a container; use place_in"),
                });
            }
            require_clear(t)
        }
        "place_in" => {
            held()?;
            let c = call.text_arg("container").unwrap_or_default();
            if !w.objects[c].is_container() {
                return Err(Rejection::NotAContainer { object: c.into() });
            }
            Ok(())
        }
        "open_gripper" => match &w.robot.held {
            Some(h) => Err(Rejection::GripperOccupied { held: h.clone() }),
            None => Ok(()),
        },
        _ => Ok(()),
    }
}

/// Checks tool existence, argument schema and precondition. Never mutates `w`.
pub fn validate_call(call: &ToolCall, w: &WorldState) -> Result<(), Rejection> {
    let spec = lookup(&call.tool).ok_or_else(|| Rejection::UnknownTool {
        tool: call.tool.clone(),
    })?;
    check_schema(spec, call, w)?;
    check_precondition(call, w)
}

/// Per-tool tick counts, overridable from configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolDurations(pub BTreeMap<String, u64>);

impl Default for ToolDurations {
    fn default() -> Self {
        Self(REGISTRY.iter().map(|t| (t.name.to_string(), t.duration_ticks)).collect())
    }
}

impl ToolDurations {
    /// Tick count for one call; `wait` converts its seconds argument.
    pub fn ticks(&self, call: &ToolCall, tick_ms: u32) -> u64 {
        if call.tool == "wait" {
            if let Some(ArgValue::Number(s)) = call.args.get("seconds") {
                return (s * 1000.0 / tick_ms as f64).ceil().max(0.0) as u64;
            }
        }
        self.0
            .get(&call.tool)
            .copied()
            .or_else(|| lookup(&call.tool).map(|t| t.duration_ticks))
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Error)]
#[serde(tag = "error", rename_all = "kebab-case")]
pub enum MappingError {
    #[error("no tool mapping for action {action:?} at step {step}")]
    Unmapped { step: usize, action: String },
    #[error("mapped call {index} ({call}) rejected: {rejection}")]
    Rejected {
        index: usize,
        call: ToolCall,
        rejection: Rejection,
    },
}

fn calls_for_step(action: &str, args: &[String]) -> Option<Vec<ToolCall>> {
    let a = |i: usize| args.get(i).map(String::as_str).unwrap_or_default();
    Some(match action {
        "pick-up" | "unstack" => vec![
            ToolCall::new("detect", [("object", a(0))]),
            ToolCall::new("pick", [("object", a(0))]),
        ],
        "put-down" => vec![ToolCall::new("place_on", [("target", "table")])],
        "stack" => vec![ToolCall::new("place_on", [("target", a(1))])],
        "place-in" => vec![ToolCall::new("place_in", [("container", a(1))])],
        _ => return None,
    })
}

/// Applies `calls` in order to a copy of `w`, validating each at its
/// execution point. Returns the predicted final world.
pub fn dry_run(calls: &[ToolCall], w: &WorldState) -> Result<WorldState, (usize, Rejection)> {
    let mut sim = w.clone();
    for (i, c) in calls.iter().enumerate() {
        apply_effect(&mut sim, c).map_err(|r| (i, r))?;
    }
    Ok(sim)
}

/// Expands each plan step into tool calls and checks the sequence against
/// the simulated progression of `w`.
pub fn map_plan_to_calls(plan: &Plan, w: &WorldState) -> Result<Vec<ToolCall>, MappingError> {
    let mut calls = Vec::new();
    for (i, s) in plan.steps.iter().enumerate() {
        let mapped = calls_for_step(&s.action, &s.args).ok_or_else(|| MappingError::Unmapped {
            step: i,
            action: s.action.clone(),
        })?;
        calls.extend(mapped.into_iter().map(|mut c| {
            c.step = Some(i);
            c
        }));
    }
    dry_run(&calls, w).map_err(|(index, rejection)| MappingError::Rejected {
        index,
        call: calls[index].clone(),
        rejection,
    })?;
    Ok(calls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{PlanStep, Provenance};
    use crate::world::{bundled_scene, spawn_scene};

    fn scene(n: &str) -> WorldState {
        spawn_scene(&bundled_scene(n).unwrap()).unwrap()
    }

    #[test]
    fn registry_shape() {
        assert_eq!(registry().len(), 9);
        let pick = lookup("pick").unwrap();
        assert_eq!(pick.args.len(), 1);
        assert_eq!(pick.args[0].kind, ArgKind::ObjectRef);
        assert!(lookup("teleport").is_none());
        let mut names: Vec<_> = registry().iter().map(|t| t.name).collect();
        names.dedup();
        assert_eq!(names.len(), 9);
    }

    #[test]
    fn pick_with_occupied_gripper() {
        let mut w = scene("scene_1");
        apply_effect(&mut w, &ToolCall::new("pick", [("object", "red_cube")])).unwrap();
        let r = validate_call(&ToolCall::new("pick", [("object", "yellow_cube")]), &w);
        assert_eq!(r, Err(Rejection::GripperOccupied { held: "red_cube".into() }));
    }

    #[test]
    fn home_always_ok() {
        let mut w = scene("scene_2");
        assert_eq!(validate_call(&ToolCall::bare("home"), &w), Ok(()));
        apply_effect(&mut w, &ToolCall::new("pick", [("object", "black_box")])).unwrap();
        assert_eq!(validate_call(&ToolCall::bare("home"), &w), Ok(()));
    }

    #[test]
    fn unknown_object_and_tool() {
        let w = scene("scene_1");
        assert_eq!(
            validate_call(&ToolCall::new("pick", [("object", "ghost")]), &w),
            Err(Rejection::UnknownObject { object: "ghost".into() })
        );
        assert!(matches!(
            validate_call(&ToolCall::bare("teleport"), &w),
            Err(Rejection::UnknownTool { .. })
        ));
    }

    #[test]
    fn schema_errors() {
        let w = scene("scene_1");
        assert!(matches!(validate_call(&ToolCall::bare("pick"), &w), Err(Rejection::MissingArgument { .. })));
        let extra = ToolCall::new("home", [("speed", 1.0)]);
        assert!(matches!(validate_call(&extra, &w), Err(Rejection::UnexpectedArgument { .. })));
        let neg = ToolCall::new("wait", [("seconds", -1.0)]);
        assert!(matches!(validate_call(&neg, &w), Err(Rejection::BadArgument { .. })));
        let loc = ToolCall::new("move_to", [("location", "moon")]);
        assert!(matches!(validate_call(&loc, &w), Err(Rejection::UnknownLocation { .. })));
    }

    #[test]
    fn blocked_pick() {
        let w = scene("scene_1");
        assert_eq!(
            validate_call(&ToolCall::new("pick", [("object", "blue_cube")]), &w),
            Err(Rejection::NotClear {
                object: "blue_cube".into(),
                blocker: "red_cube".into()
            })
        );
    }

    #[test]
    fn validation_is_pure() {
        let w = scene("scene_3");
        let before = w.clone();
        for t in registry() {
            let _ = validate_call(&ToolCall::new(t.name, [("object", "red_cube")]), &w);
        }
        assert_eq!(w, before);
    }

    fn step(a: &str, args: &[&str]) -> PlanStep {
        PlanStep::new(a, args.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn two_step_plan_maps_to_three_calls() {
        let w = scene("scene_1");
        let plan = Plan {
            steps: vec![step("pick-up", &["yellow_cube"]), step("stack", &["yellow_cube", "red_cube"])],
            provenance: Provenance::NeuroSymbolic,
        };
        let calls = map_plan_to_calls(&plan, &w).unwrap();
        let names: Vec<_> = calls.iter().map(|c| c.tool.as_str()).collect();
        assert_eq!(names, ["detect", "pick", "place_on"]);
        assert_eq!(calls[2].step, Some(1));
    }

    #[test]
    fn empty_and_unmapped_plans() {
        let w = scene("scene_1");
        let empty = Plan {
            steps: vec![],
            provenance: Provenance::NeuroSymbolic,
        };
        assert_eq!(map_plan_to_calls(&empty, &w).unwrap(), vec![]);
        let odd = Plan {
            steps: vec![step("juggle", &["red_cube"])],
            provenance: Provenance::NeuroSymbolic,
        };
        assert!(matches!(map_plan_to_calls(&odd, &w), Err(MappingError::Unmapped { step: 0, .. })));
    }

    #[test]
    fn status_transitions() {
        let mut c = ToolCall::bare("home");
        assert!(c.succeed().is_err());
        c.start().unwrap();
        assert!(c.start().is_err());
        c.preempt().unwrap();
        assert!(c.fail("late").is_err());
        let r = c.retry();
        assert_eq!((r.status, r.attempt), (CallStatus::Pending, 1));
    }

    #[test]
    fn wait_duration_rounds_up() {
        let d = ToolDurations::default();
        assert_eq!(d.ticks(&ToolCall::new("wait", [("seconds", 0.0)]), 50), 0);
        assert_eq!(d.ticks(&ToolCall::new("wait", [("seconds", 0.12)]), 50), 3);
        assert_eq!(d.ticks(&ToolCall::new("pick", [("object", "x")]), 50), 30);
    }
}
