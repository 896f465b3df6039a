use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compose::{compose_problem, ComposeError};
use crate::gate::{CommandGate, GateConfig, GateEvent, GateMode, GateState};
use crate::pddl::{
    ground_with_limits, print_plan, simulate_plan, tabletop_domain, validate_plan, Atom, Grounding, GroundingLimits,
    Plan, Problem, Verdict,
};
use crate::planner::{solve, Outcome, SearchConfig, SearchStats};
use crate::tools::{dry_run, map_plan_to_calls, CallStatus, MappingError, Rejection, ToolCall, ToolDurations};
use crate::translator::{
    translate_to_problem, translate_to_subtasks, FaultKind, ProblemFragment, SceneFacts, SubtaskList, TokenUsage,
    TranslationError, TranslatorKind,
};
use crate::world::{Motion, MotionStep, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Direct,
    NeuroSymbolic,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::NeuroSymbolic => "pddl",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Mode::Direct),
            "pddl" | "neuro-symbolic" => Ok(Mode::NeuroSymbolic),
            _ => Err(format!("unknown mode {s:?} (expected direct or pddl)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "kebab-case")]
pub enum Phase {
    Idle,
    Translating,
    Planning,
    AwaitingApproval,
    Executing { call: usize, tick: u64 },
    Completed,
    Failed { reason: String },
    Stopped { prior: Box<Phase> },
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Translating => "translating",
            Phase::Planning => "planning",
            Phase::AwaitingApproval => "awaiting-approval",
            Phase::Executing { .. } => "executing",
            Phase::Completed => "completed",
            Phase::Failed { .. } => "failed",
            Phase::Stopped { .. } => "stopped",
        }
    }

    pub fn is_executing(&self) -> bool {
        matches!(self, Phase::Executing { .. })
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Completed | Phase::Failed { .. })
    }
}

fn legal(from: &Phase, to: &Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (Idle | Completed | Failed { .. }, Translating)
            | (Translating, Planning | Failed { .. })
            | (Planning, AwaitingApproval | Failed { .. })
            | (AwaitingApproval, Planning | Translating | Executing { .. })
            | (Executing { .. }, Executing { .. } | Completed | Failed { .. } | Stopped { .. })
            | (Stopped { .. }, Executing { .. })
    )
}

/// Operator edit of a pending plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Revision {
    Swap { i: usize, j: usize },
    Delete { i: usize },
    /// New goal as a PDDL goal expression, e.g. `(and (on-table red_cube))`.
    EditGoal { goal: String },
    ReplaceInstruction { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum PlanCheck {
    Valid,
    Invalid { step: usize, reason: String },
}

impl PlanCheck {
    pub fn is_valid(&self) -> bool {
        *self == PlanCheck::Valid
    }
}

impl From<&Verdict> for PlanCheck {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Valid => PlanCheck::Valid,
            Verdict::Invalid { step, violation } => PlanCheck::Invalid {
                step: *step,
                reason: violation.to_string(),
            },
        }
    }
}

/// Why a session failed, with the offending artifact attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum Failure {
    Translation { error: TranslationError },
    Compose { error: ComposeError },
    Grounding { message: String },
    Unsolvable,
    SearchLimit,
    Mapping { error: MappingError },
    Rejected { index: usize, rejection: Rejection },
    GoalUnsatisfied { missing: Vec<String> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Artifacts {
    pub translator_raw: Option<String>,
    pub fragment: Option<ProblemFragment>,
    pub problem: Option<Problem>,
    pub problem_pddl: Option<String>,
    pub plan: Option<Plan>,
    pub plan_text: Option<String>,
    pub subtasks: Option<SubtaskList>,
    pub check: Option<PlanCheck>,
    pub calls: Vec<ToolCall>,
    /// Attempts that were preempted, in order.
    pub history: Vec<ToolCall>,
    /// World abstraction expected after execution.
    pub predicted: Option<Vec<Atom>>,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub translator_requests: u32,
    pub usage: Option<TokenUsage>,
    pub injected_fault: Option<FaultKind>,
    pub solver: Option<SearchStats>,
    pub step_durations_ms: Vec<f64>,
    pub stop_latencies_ms: Vec<f64>,
    pub world_mutations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    PhaseChange {
        from: String,
        to: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Instruction { text: String, mode: Mode },
    TranslatorOutput {
        raw: Option<String>,
        requests: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fault: Option<FaultKind>,
    },
    PlanReady { check: PlanCheck, steps: Vec<String>, calls: Vec<String> },
    Approval { synthetic: bool },
    Revision { revision: Revision },
    ToolStatus { index: usize, call: String, attempt: u32, status: CallStatus },
    GateEvent { event: GateEvent },
    StopRequested,
    StopIgnored { phase: String },
    StopLatencySample { latency_ms: f64 },
    Resume,
    ResumeIgnored { phase: String },
    StaleState { planned: u64, current: u64 },
    WorldChanged,
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    /// Simulation tick when the event was logged.
    pub tick: u64,
    /// Wall-clock milliseconds since the session was created.
    pub wall_ms: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    /// JSON without the wall-clock field, for determinism comparisons.
    pub fn stable_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("event serializes");
        v.as_object_mut().unwrap().remove("wall_ms");
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    /// Ticks advance as fast as [`Session::tick`] is called; durations and
    /// latencies are computed from tick counts.
    #[default]
    Virtual,
    /// A driver calls [`Session::tick`] once per tick period; durations and
    /// latencies are wall-clock.
    Realtime,
}

/// When a stop was requested.
#[derive(Debug, Clone, Copy)]
pub enum StopTime {
    /// Simulation time in milliseconds.
    Virtual(f64),
    Wall(Instant),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub mode: Mode,
    pub translator: TranslatorKind,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub durations: ToolDurations,
    #[serde(default)]
    pub clock: ClockMode,
    /// Approve automatically once a valid plan exists, logged as synthetic.
    #[serde(default)]
    pub auto_approve: bool,
    #[serde(default)]
    pub gate: GateConfig,
}

impl SessionConfig {
    pub fn new(mode: Mode, translator: TranslatorKind) -> Self {
        Self {
            mode,
            translator,
            search: SearchConfig::default(),
            durations: ToolDurations::default(),
            clock: ClockMode::Virtual,
            auto_approve: false,
            gate: GateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[serde(tag = "error", rename_all = "kebab-case")]
pub enum SessionError {
    #[error("cannot {op} while {phase}")]
    WrongPhase { op: &'static str, phase: String },
    #[error("plan is invalid: {reason}")]
    PlanInvalid { reason: String },
    #[error("world changed since planning; plan regenerated")]
    Stale,
    #[error("index {index} out of range for {len} steps")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid goal: {message}")]
    InvalidGoal { message: String },
    #[error("{message}")]
    Unsupported { message: String },
}

fn edit_steps<T>(v: &mut Vec<T>, r: &Revision) {
    match *r {
        Revision::Swap { i, j } => v.swap(i, j),
        Revision::Delete { i } => {
            v.remove(i);
        }
        _ => {}
    }
}

#[derive(Default)]
struct Exec {
    next: usize,
    motion: Option<Motion>,
    dispatched_tick: u64,
    dispatched_at: Option<Instant>,
}

pub type Listener = Arc<dyn Fn(&Event) + Send + Sync>;

/// Serializable snapshot of a session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionRecord {
    pub id: String,
    pub mode: Mode,
    pub instruction: Option<String>,
    pub phase: Phase,
    pub approved: bool,
    pub artifacts: Artifacts,
    pub metrics: Metrics,
    pub last_seq: Option<u64>,
    pub world: WorldState,
}

/// One instruction's life cycle: translation, planning, review, execution.
///
/// All mutation goes through methods that check the phase, so a tool call
/// can only be dispatched after an approval event.
pub struct Session {
    pub id: String,
    config: SessionConfig,
    instruction: Option<String>,
    phase: Phase,
    approved: bool,
    artifacts: Artifacts,
    metrics: Metrics,
    timeline: Vec<Event>,
    world: WorldState,
    initial_revision: u64,
    grounding: Option<Grounding>,
    planned_hash: Option<u64>,
    exec: Exec,
    pending_stop: Option<StopTime>,
    gate: CommandGate,
    created: Instant,
    listener: Option<Listener>,
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig, world: WorldState) -> Self {
        Self {
            id: id.into(),
            gate: CommandGate::new(config.gate),
            config,
            instruction: None,
            phase: Phase::Idle,
            approved: false,
            artifacts: Artifacts::default(),
            metrics: Metrics::default(),
            timeline: Vec::new(),
            initial_revision: world.revision,
            world,
            grounding: None,
            planned_hash: None,
            exec: Exec::default(),
            pending_stop: None,
            created: Instant::now(),
            listener: None,
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn instruction(&self) -> Option<&str> {
        self.instruction.as_deref()
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.artifacts
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn timeline(&self) -> &[Event] {
        &self.timeline
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn is_approved(&self) -> bool {
        self.approved
    }

    /// Called with every event as it is logged.
    pub fn set_listener(&mut self, listener: Listener) {
        self.listener = Some(listener);
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.id.clone(),
            mode: self.config.mode,
            instruction: self.instruction.clone(),
            phase: self.phase.clone(),
            approved: self.approved,
            artifacts: self.artifacts.clone(),
            metrics: self.metrics.clone(),
            last_seq: self.timeline.last().map(|e| e.seq),
            world: self.world.clone(),
        }
    }

    /// Timeline as line-delimited JSON.
    pub fn events_jsonl(&self) -> String {
        self.timeline
            .iter()
            .map(|e| serde_json::to_string(e).unwrap() + "\n")
            .collect()
    }

    /// Timeline without wall-clock fields.
    pub fn stable_log(&self) -> String {
        self.timeline.iter().map(|e| e.stable_json() + "\n").collect()
    }

    fn emit(&mut self, kind: EventKind) {
        self.metrics.world_mutations = self.world.revision - self.initial_revision;
        let e = Event {
            seq: self.timeline.len() as u64,
            tick: self.world.tick,
            wall_ms: self.created.elapsed().as_secs_f64() * 1000.0,
            kind,
        };
        if let Some(l) = &self.listener {
            l(&e);
        }
        self.timeline.push(e);
    }

    fn set_phase(&mut self, to: Phase) {
        assert!(legal(&self.phase, &to), "illegal transition {} -> {}", self.phase.label(), to.label());
        let from = self.phase.label();
        let reason = match &to {
            Phase::Failed { reason } => Some(reason.clone()),
            _ => None,
        };
        let changed = from != to.label();
        self.phase = to;
        if changed {
            self.emit(EventKind::PhaseChange {
                from: from.into(),
                to: self.phase.label().into(),
                reason,
            });
        }
    }

    fn fail(&mut self, reason: String, failure: Failure) {
        self.artifacts.failure = Some(failure);
        self.set_phase(Phase::Failed { reason });
    }

    fn wrong_phase(&self, op: &'static str) -> SessionError {
        SessionError::WrongPhase {
            op,
            phase: self.phase.label().into(),
        }
    }

    /// Starts the pipeline for a new instruction. Runs to awaiting-approval
    /// (or straight into execution with auto-approve) or to failed.
    pub fn submit(&mut self, instruction: &str) -> Result<(), SessionError> {
        if !matches!(self.phase, Phase::Idle | Phase::Completed | Phase::Failed { .. }) {
            return Err(self.wrong_phase("submit"));
        }
        self.instruction = Some(instruction.to_string());
        self.artifacts = Artifacts::default();
        self.approved = false;
        self.exec = Exec::default();
        self.emit(EventKind::Instruction {
            text: instruction.into(),
            mode: self.config.mode,
        });
        self.run_pipeline();
        Ok(())
    }

    fn after_planning(&mut self) {
        if self.config.auto_approve && self.phase == Phase::AwaitingApproval {
            let _ = self.approve_inner(true);
        }
    }

    fn run_pipeline(&mut self) {
        let instruction = self.instruction.clone().unwrap_or_default();
        self.artifacts = Artifacts::default();
        self.set_phase(Phase::Translating);
        let facts = SceneFacts::from_world(&self.world);
        let kind = self.config.translator.clone();
        let outcome = match self.config.mode {
            Mode::NeuroSymbolic => translate_to_problem(&instruction, &facts, &kind).map(|t| {
                self.artifacts.fragment = Some(t.value);
                (t.raw, t.requests, t.usage, t.fault)
            }),
            Mode::Direct => translate_to_subtasks(&instruction, &facts, &kind).map(|t| {
                self.artifacts.subtasks = Some(t.value);
                (t.raw, t.requests, t.usage, t.fault)
            }),
        };
        let (raw, requests, usage, fault) = match &outcome {
            Ok((raw, r, u, f)) => (Some(raw.clone()), *r, *u, *f),
            Err(e) => (e.raw.clone(), e.requests, e.usage, e.fault),
        };
        self.metrics.translator_requests += requests;
        self.metrics.injected_fault = fault;
        if let Some(u) = usage {
            let acc = self.metrics.usage.get_or_insert_with(TokenUsage::default);
            acc.prompt_tokens += u.prompt_tokens;
            acc.completion_tokens += u.completion_tokens;
        }
        self.artifacts.translator_raw = raw.clone();
        self.emit(EventKind::TranslatorOutput { raw, requests, fault });
        if let Err(e) = outcome {
            return self.fail(format!("translation failed: {}", e.message), Failure::Translation { error: e });
        }
        self.set_phase(Phase::Planning);
        self.plan_current();
        self.after_planning();
    }

    fn plan_current(&mut self) {
        match self.config.mode {
            Mode::NeuroSymbolic => self.plan_fragment(),
            Mode::Direct => self.plan_subtasks(true),
        }
    }

    fn plan_fragment(&mut self) {
        let fragment = self.artifacts.fragment.clone().expect("fragment present in planning");
        let problem = match compose_problem(&fragment, &self.world) {
            Ok(p) => p,
            Err(e) => return self.fail(e.to_string(), Failure::Compose { error: e }),
        };
        self.artifacts.problem_pddl = Some(problem.to_pddl());
        self.artifacts.problem = Some(problem.clone());
        let g = match ground_with_limits(&tabletop_domain(), &problem, GroundingLimits::default()) {
            Ok(g) => g,
            Err(e) => return self.fail(e.to_string(), Failure::Grounding { message: e.to_string() }),
        };
        let result = solve(&g, &self.config.search);
        self.metrics.solver = Some(result.stats.clone());
        self.grounding = Some(g);
        match result.outcome {
            Outcome::Plan { plan } => self.install_plan(plan, true),
            Outcome::Unsolvable => self.fail("unsolvable: no plan reaches the goal".into(), Failure::Unsolvable),
            Outcome::ResourceLimit => self.fail("search limit reached".into(), Failure::SearchLimit),
        }
    }

    fn install_plan(&mut self, plan: Plan, from_solver: bool) {
        let g = self.grounding.as_ref().expect("grounding present");
        let verdict = validate_plan(g, &plan);
        let check = PlanCheck::from(&verdict);
        if from_solver && !verdict.is_valid() {
            panic!("solver produced an invalid plan: {verdict}");
        }
        let predicted = match &verdict {
            Verdict::Valid => simulate_plan(g, &plan).ok().map(|s| g.atoms_of(&s)),
            _ => None,
        };
        let calls = if verdict.is_valid() {
            match map_plan_to_calls(&plan, &self.world) {
                Ok(c) => c,
                Err(e) => {
                    self.artifacts.plan = Some(plan);
                    return self.fail(e.to_string(), Failure::Mapping { error: e });
                }
            }
        } else {
            Vec::new()
        };
        self.artifacts.plan_text = Some(print_plan(&plan));
        self.artifacts.plan = Some(plan);
        self.artifacts.predicted = predicted;
        self.finish_planning(check, calls);
    }

    fn plan_subtasks(&mut self, initial: bool) {
        let calls = self.artifacts.subtasks.as_ref().expect("subtasks present").to_calls();
        match dry_run(&calls, &self.world) {
            Ok(end) => {
                self.artifacts.predicted = Some(end.abstraction());
                self.finish_planning(PlanCheck::Valid, calls);
            }
            Err((i, r)) if initial => {
                self.fail(format!("subtask {i} rejected: {r}"), Failure::Rejected { index: i, rejection: r })
            }
            Err((i, r)) => {
                self.artifacts.predicted = None;
                self.finish_planning(
                    PlanCheck::Invalid {
                        step: i,
                        reason: r.to_string(),
                    },
                    Vec::new(),
                )
            }
        }
    }

    fn finish_planning(&mut self, check: PlanCheck, calls: Vec<ToolCall>) {
        let steps = match self.config.mode {
            Mode::NeuroSymbolic => self.artifacts.plan.iter().flat_map(|p| &p.steps).map(|s| s.signature()).collect(),
            Mode::Direct => self.artifacts.subtasks.iter().flat_map(|l| l.to_calls()).map(|c| c.to_string()).collect(),
        };
        self.artifacts.check = Some(check.clone());
        self.artifacts.calls = calls;
        self.planned_hash = Some(self.world.abstraction_hash());
        self.set_phase(Phase::AwaitingApproval);
        let calls = self.artifacts.calls.iter().map(ToString::to_string).collect();
        self.emit(EventKind::PlanReady { check, steps, calls });
    }

    /// Operator approval. Refused unless a valid plan awaits approval; if
    /// the world changed since planning, the plan is regenerated instead.
    pub fn approve(&mut self) -> Result<(), SessionError> {
        self.approve_inner(false)
    }

    fn approve_inner(&mut self, synthetic: bool) -> Result<(), SessionError> {
        if self.phase != Phase::AwaitingApproval {
            return Err(self.wrong_phase("approve"));
        }
        if let Some(PlanCheck::Invalid { reason, step }) = &self.artifacts.check {
            return Err(SessionError::PlanInvalid {
                reason: format!("step {step}: {reason}"),
            });
        }
        let current = self.world.abstraction_hash();
        if self.planned_hash != Some(current) {
            self.emit(EventKind::StaleState {
                planned: self.planned_hash.unwrap_or_default(),
                current,
            });
            self.set_phase(Phase::Planning);
            self.plan_current();
            return Err(SessionError::Stale);
        }
        self.emit(EventKind::Approval { synthetic });
        self.approved = true;
        self.exec = Exec::default();
        self.set_phase(Phase::Executing {
            call: 0,
            tick: self.world.tick,
        });
        Ok(())
    }

    pub fn revise(&mut self, revision: Revision) -> Result<(), SessionError> {
        if self.phase != Phase::AwaitingApproval {
            return Err(self.wrong_phase("revise"));
        }
        let len = match self.config.mode {
            Mode::NeuroSymbolic => self.artifacts.plan.as_ref().map_or(0, Plan::len),
            Mode::Direct => self.artifacts.subtasks.as_ref().map_or(0, SubtaskList::len),
        };
        let check_index = |index: usize| {
            if index < len {
                Ok(())
            } else {
                Err(SessionError::IndexOutOfRange { index, len })
            }
        };
        match &revision {
            Revision::Swap { i, j } => {
                check_index(*i)?;
                check_index(*j)?;
            }
            Revision::Delete { i } => check_index(*i)?,
            _ => {}
        }
        let new_fragment = match &revision {
            Revision::EditGoal { goal } => {
                let Some(f) = &self.artifacts.fragment else {
                    return Err(SessionError::Unsupported {
                        message: "goal editing needs a planning problem; use replace-instruction".into(),
                    });
                };
                let mut text = String::new();
                if !f.objects.is_empty() {
                    let objs: Vec<String> = f.objects.iter().map(|t| format!("{} - {}", t.name, t.ty)).collect();
                    text += &format!("(:objects {}) ", objs.join(" "));
                }
                if !f.init.is_empty() {
                    let init: Vec<String> = f.init.iter().map(ToString::to_string).collect();
                    text += &format!("(:init {}) ", init.join(" "));
                }
                text += &format!("(:goal {goal})");
                let parsed = ProblemFragment::parse(&text, &SceneFacts::from_world(&self.world))
                    .map_err(|e| SessionError::InvalidGoal { message: e.message })?;
                Some(parsed)
            }
            _ => None,
        };
        self.emit(EventKind::Revision {
            revision: revision.clone(),
        });
        match revision {
            Revision::Swap { .. } | Revision::Delete { .. } => {
                self.set_phase(Phase::Planning);
                match self.config.mode {
                    Mode::NeuroSymbolic => {
                        let mut plan = self.artifacts.plan.clone().expect("plan present");
                        edit_steps(&mut plan.steps, &revision);
                        self.install_plan(plan, false);
                    }
                    Mode::Direct => {
                        if let Some(list) = self.artifacts.subtasks.as_mut() {
                            edit_steps(&mut list.0, &revision);
                        }
                        self.plan_subtasks(false);
                    }
                }
            }
            Revision::EditGoal { .. } => {
                self.artifacts.fragment = new_fragment;
                self.set_phase(Phase::Planning);
                self.plan_fragment();
            }
            Revision::ReplaceInstruction { text } => {
                self.instruction = Some(text);
                self.run_pipeline();
            }
        }
        Ok(())
    }

    /// Requests an emergency stop. Never fails: outside execution the
    /// request is logged as a no-op. The halt itself happens at the next
    /// tick boundary. The command gate enters its stopped mode either way,
    /// as if STOP had been spoken.
    pub fn request_stop(&mut self, at: StopTime) {
        self.gate.state = GateState {
            mode: GateMode::Stopped,
            buffer: String::new(),
        };
        if !self.phase.is_executing() {
            let phase = self.phase.label().to_string();
            self.emit(EventKind::StopIgnored { phase });
            return;
        }
        self.emit(EventKind::StopRequested);
        if self.pending_stop.is_none() {
            self.pending_stop = Some(at);
        }
        if let StopTime::Virtual(_) = at {
            self.poll_stop();
        }
    }

    /// Stop request timestamped now, in this session's clock.
    pub fn stop_now(&mut self) {
        let at = match self.config.clock {
            ClockMode::Virtual => StopTime::Virtual(self.now_ms()),
            ClockMode::Realtime => StopTime::Wall(Instant::now()),
        };
        self.request_stop(at);
    }

    /// Current simulation time in milliseconds.
    pub fn now_ms(&self) -> f64 {
        self.world.tick as f64 * self.world.tick_ms as f64
    }

    fn poll_stop(&mut self) -> bool {
        let Some(at) = self.pending_stop else { return false };
        let latency_ms = match at {
            StopTime::Virtual(v) if v > self.now_ms() => return false,
            StopTime::Virtual(v) => self.now_ms() - v,
            StopTime::Wall(t) => t.elapsed().as_secs_f64() * 1000.0,
        };
        self.pending_stop = None;
        let idx = self.exec.next;
        if let Some(m) = self.exec.motion.take() {
            m.halt(&mut self.world);
            let call = &mut self.artifacts.calls[idx];
            call.preempt().expect("running call");
            let (display, attempt, status) = (call.to_string(), call.attempt, call.status.clone());
            self.artifacts.history.push(call.clone());
            self.artifacts.calls[idx] = self.artifacts.calls[idx].retry();
            self.emit(EventKind::ToolStatus {
                index: idx,
                call: display,
                attempt,
                status,
            });
        }
        self.metrics.stop_latencies_ms.push(latency_ms);
        self.emit(EventKind::StopLatencySample { latency_ms });
        let prior = Box::new(self.phase.clone());
        self.set_phase(Phase::Stopped { prior });
        true
    }

    /// Leaves the stopped phase. The preempted call is re-dispatched and
    /// re-validated against the current world on the next tick. Also
    /// clears the gate's stopped mode.
    pub fn resume(&mut self) {
        self.gate.state = GateState::default();
        match &self.phase {
            Phase::Stopped { prior } if prior.is_executing() => {
                self.emit(EventKind::Resume);
                self.set_phase(Phase::Executing {
                    call: self.exec.next,
                    tick: self.world.tick,
                });
            }
            other => {
                let phase = other.label().to_string();
                self.emit(EventKind::ResumeIgnored { phase });
            }
        }
    }

    /// Feeds one transcript line through the command gate and acts on the
    /// resulting event.
    pub fn transcript(&mut self, line: &str) -> GateEvent {
        let at = match self.config.clock {
            ClockMode::Virtual => StopTime::Virtual(self.now_ms()),
            ClockMode::Realtime => StopTime::Wall(Instant::now()),
        };
        self.transcript_at(line, at)
    }

    /// Like [`Session::transcript`], with the arrival time given explicitly.
    /// Only a resulting stop uses the timestamp.
    pub fn transcript_at(&mut self, line: &str, at: StopTime) -> GateEvent {
        let event = self.gate.feed(line);
        self.emit(EventKind::GateEvent { event: event.clone() });
        match &event {
            GateEvent::EmergencyStop => self.request_stop(at),
            GateEvent::Resume => self.resume(),
            GateEvent::Forward { instruction } => {
                if let Err(e) = self.submit(instruction) {
                    self.emit(EventKind::Error { message: e.to_string() });
                }
            }
            GateEvent::Buffered | GateEvent::Ignored => {}
        }
        event
    }

    /// Changes the world outside of plan execution, e.g. someone moving an
    /// object by hand. Logged so that approval can detect staleness.
    pub fn mutate_world(&mut self, f: impl FnOnce(&mut WorldState)) {
        f(&mut self.world);
        self.world.settle();
        self.world.touch();
        self.emit(EventKind::WorldChanged);
    }

    fn call_event(&mut self, idx: usize) {
        let c = &self.artifacts.calls[idx];
        let kind = EventKind::ToolStatus {
            index: idx,
            call: c.to_string(),
            attempt: c.attempt,
            status: c.status.clone(),
        };
        self.emit(kind);
    }

    /// One tick of execution: polls for a stop, dispatches the next call if
    /// none is running, and advances the running motion. Returns whether the
    /// session is still executing.
    pub fn tick(&mut self) -> bool {
        if !self.phase.is_executing() {
            return false;
        }
        assert!(self.approved, "execution without approval");
        if self.poll_stop() {
            return false;
        }
        let idx = self.exec.next;
        if self.exec.motion.is_none() {
            if idx >= self.artifacts.calls.len() {
                self.finish();
                return false;
            }
            let call = self.artifacts.calls[idx].clone();
            let begun = Motion::begin(&self.world, &call, &self.config.durations);
            self.artifacts.calls[idx].start().expect("pending call");
            match begun {
                Ok(m) => {
                    self.exec.motion = Some(m);
                    self.exec.dispatched_tick = self.world.tick;
                    self.exec.dispatched_at = Some(Instant::now());
                    self.call_event(idx);
                }
                Err(r) => {
                    self.artifacts.calls[idx].fail(r.to_string()).expect("running call");
                    self.call_event(idx);
                    self.fail(
                        format!("call {idx} rejected at dispatch: {r}"),
                        Failure::Rejected { index: idx, rejection: r },
                    );
                    return false;
                }
            }
        }
        let m = self.exec.motion.as_mut().expect("motion running");
        match m.step(&mut self.world) {
            Ok(MotionStep::Running { .. }) => {
                self.phase = Phase::Executing {
                    call: idx,
                    tick: self.world.tick,
                };
            }
            Ok(MotionStep::Completed) => {
                self.exec.motion = None;
                let ms = match self.config.clock {
                    ClockMode::Virtual => {
                        (self.world.tick - self.exec.dispatched_tick) as f64 * self.world.tick_ms as f64
                    }
                    ClockMode::Realtime => self
                        .exec
                        .dispatched_at
                        .map_or(0.0, |t| t.elapsed().as_secs_f64() * 1000.0),
                };
                self.metrics.step_durations_ms.push(ms);
                self.artifacts.calls[idx].succeed().expect("running call");
                self.call_event(idx);
                self.exec.next += 1;
                self.phase = Phase::Executing {
                    call: self.exec.next,
                    tick: self.world.tick,
                };
            }
            Err(r) => {
                self.exec.motion = None;
                self.artifacts.calls[idx].fail(r.to_string()).expect("running call");
                self.call_event(idx);
                self.fail(format!("call {idx} failed: {r}"), Failure::Rejected { index: idx, rejection: r });
                return false;
            }
        }
        // the closing boundary of this tick is also a preemption point
        if self.poll_stop() {
            return false;
        }
        if self.exec.motion.is_none() && self.exec.next == self.artifacts.calls.len() {
            self.finish();
        }
        self.phase.is_executing()
    }

    fn finish(&mut self) {
        let missing = self.unsatisfied_goals();
        if missing.is_empty() {
            self.set_phase(Phase::Completed);
        } else {
            self.fail(
                format!("goal not satisfied: {}", missing.join(" ")),
                Failure::GoalUnsatisfied { missing },
            );
        }
    }

    /// Goal literals of the current problem that do not hold in the world.
    /// Empty in direct mode.
    pub fn unsatisfied_goals(&self) -> Vec<String> {
        let Some(p) = &self.artifacts.problem else { return Vec::new() };
        let now = self.world.abstraction();
        p.goal
            .iter()
            .filter(|l| now.contains(&l.atom) != l.positive)
            .map(ToString::to_string)
            .collect()
    }

    /// Runs ticks until execution ends (virtual clock).
    pub fn run_to_end(&mut self) {
        while self.tick() {}
    }
}
