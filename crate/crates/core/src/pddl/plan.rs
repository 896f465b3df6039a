//! Sequential plans: text format, construction from search output, and
//! validation against a grounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::Atom;
use super::error::{ParseError, ParseErrorKind};
use super::ground::{ActionId, Grounding, SymbolicState};
use super::sexpr::{read_all, SExpr};

/// Which pipeline produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    NeuroSymbolic,
    DirectMapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub action: String,
    pub args: Vec<String>,
    /// Human-readable description shown during review.
    pub description: String,
}

impl PlanStep {
    pub fn new(action: impl Into<String>, args: Vec<String>) -> Self {
        let action = action.into();
        let description = describe(&action, &args);
        Self {
            action,
            args,
            description,
        }
    }

    pub fn signature(&self) -> String {
        let mut s = format!("({}", self.action);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

/// Sentence for a tabletop action; falls back to the signature.
pub fn describe(action: &str, args: &[String]) -> String {
    let a = |i: usize| args.get(i).map(String::as_str).unwrap_or("?");
    match (action, args.len()) {
        ("pick-up", 1) => format!("Pick up {} from the table", a(0)),
        ("put-down", 1) => format!("Put {} down on the table", a(0)),
        ("stack", 2) => format!("Stack {} on {}", a(0), a(1)),
        ("unstack", 2) => format!("Lift {} off {}", a(0), a(1)),
        ("place-in", 2) => format!("Place {} in {}", a(0), a(1)),
        _ => {
            let mut s = format!("({action}");
            for x in args {
                s.push(' ');
                s.push_str(x);
            }
            s + ")"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub provenance: Provenance,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>, provenance: Provenance) -> Self {
        Self { steps, provenance }
    }

    pub fn from_actions(g: &Grounding, ids: &[ActionId], provenance: Provenance) -> Self {
        let steps = ids
            .iter()
            .map(|&id| {
                let a = g.action(id);
                PlanStep::new(a.schema.clone(), a.args.clone())
            })
            .collect();
        Self { steps, provenance }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// One `(action arg ...)` per line, lowercase, newline-terminated.
pub fn print_plan(plan: &Plan) -> String {
    let mut out = String::new();
    for step in &plan.steps {
        out.push_str(&step.signature().to_lowercase());
        out.push('\n');
    }
    out
}

/// Reads the format written by [`print_plan`]. `;` comment lines (such as a
/// planner's trailing cost line) are skipped.
pub fn parse_plan(text: &str, provenance: Provenance) -> Result<Plan, ParseError> {
    let mut steps = Vec::new();
    for e in read_all(text)? {
        let items = match &e {
            SExpr::List(items, _) if !items.is_empty() => items,
            _ => {
                return Err(ParseError::new(
                    e.pos(),
                    ParseErrorKind::UnexpectedToken(e.describe()),
                )
                .expecting(["(action args...)"]))
            }
        };
        let mut names = Vec::with_capacity(items.len());
        for item in items {
            let s = item.as_symbol().ok_or_else(|| {
                ParseError::new(item.pos(), ParseErrorKind::UnexpectedToken(item.describe()))
                    .expecting(["name"])
            })?;
            names.push(s.to_string());
        }
        let action = names.remove(0);
        steps.push(PlanStep::new(action, names));
    }
    Ok(Plan { steps, provenance })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    UnknownAction { action: String },
    PreconditionUnsatisfied { atom: Atom, negated: bool },
    GoalUnsatisfied { atom: Atom, negated: bool },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownAction { action } => write!(f, "unknown action {action}"),
            Violation::PreconditionUnsatisfied { atom, negated: false } => {
                write!(f, "precondition {atom} unsatisfied")
            }
            Violation::PreconditionUnsatisfied { atom, negated: true } => {
                write!(f, "precondition (not {atom}) unsatisfied")
            }
            Violation::GoalUnsatisfied { atom, negated: false } => {
                write!(f, "goal {atom} unsatisfied")
            }
            Violation::GoalUnsatisfied { atom, negated: true } => {
                write!(f, "goal (not {atom}) unsatisfied")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Valid,
    /// `step == plan.len()` means every step applied but the goal failed.
    Invalid { step: usize, violation: Violation },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => f.write_str("valid"),
            Verdict::Invalid { step, violation } => write!(f, "invalid at step {step}: {violation}"),
        }
    }
}

/// Applies the plan from the initial state; returns the final state or the
/// first violation.
pub fn simulate_plan(g: &Grounding, plan: &Plan) -> Result<SymbolicState, Verdict> {
    let mut state = g.init.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let id = g.action_id(&step.action, &step.args).ok_or_else(|| Verdict::Invalid {
            step: i,
            violation: Violation::UnknownAction {
                action: step.signature(),
            },
        })?;
        let a = g.action(id);
        if let Some(&p) = a.pre_pos.iter().find(|&&p| !state.contains(p)) {
            return Err(Verdict::Invalid {
                step: i,
                violation: Violation::PreconditionUnsatisfied {
                    atom: g.atom(p).clone(),
                    negated: false,
                },
            });
        }
        if let Some(&p) = a.pre_neg.iter().find(|&&p| state.contains(p)) {
            return Err(Verdict::Invalid {
                step: i,
                violation: Violation::PreconditionUnsatisfied {
                    atom: g.atom(p).clone(),
                    negated: true,
                },
            });
        }
        state = a.apply(&state);
    }
    Ok(state)
}

/// Valid iff every precondition holds when its step is applied and the goal
/// holds in the final state.
pub fn validate_plan(g: &Grounding, plan: &Plan) -> Verdict {
    let state = match simulate_plan(g, plan) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let end = plan.len();
    if let Some(&p) = g.goal_pos.iter().find(|&&p| !state.contains(p)) {
        return Verdict::Invalid {
            step: end,
            violation: Violation::GoalUnsatisfied {
                atom: g.atom(p).clone(),
                negated: false,
            },
        };
    }
    if let Some(&p) = g.goal_neg.iter().find(|&&p| state.contains(p)) {
        return Verdict::Invalid {
            step: end,
            violation: Violation::GoalUnsatisfied {
                atom: g.atom(p).clone(),
                negated: true,
            },
        };
    }
    Verdict::Valid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{ground, parse_problem, tabletop_domain};

    fn two_blocks() -> Grounding {
        let p = parse_problem(
            "(define (problem t) (:domain tabletop) (:objects b1 b2 - item)
               (:init (on-table b1) (on-table b2) (clear b1) (clear b2) (gripper-empty))
               (:goal (on b1 b2)))",
            &tabletop_domain(),
        )
        .unwrap();
        ground(&tabletop_domain(), &p).unwrap()
    }

    fn plan(text: &str) -> Plan {
        parse_plan(text, Provenance::NeuroSymbolic).unwrap()
    }

    #[test]
    fn pick_then_stack_is_valid() {
        assert_eq!(validate_plan(&two_blocks(), &plan("(pick-up b1)\n(stack b1 b2)\n")), Verdict::Valid);
    }

    #[test]
    fn stack_without_pick_fails_at_step_zero() {
        assert_eq!(
            validate_plan(&two_blocks(), &plan("(stack b1 b2)")),
            Verdict::Invalid {
                step: 0,
                violation: Violation::PreconditionUnsatisfied {
                    atom: Atom::new("holding", ["b1"]),
                    negated: false
                }
            }
        );
    }

    #[test]
    fn empty_plan_with_goal_in_init() {
        let p = parse_problem(
            "(define (problem t) (:domain tabletop) (:objects b1 - item)
               (:init (on-table b1)) (:goal (on-table b1)))",
            &tabletop_domain(),
        )
        .unwrap();
        let g = ground(&tabletop_domain(), &p).unwrap();
        assert_eq!(validate_plan(&g, &plan("")), Verdict::Valid);
    }

    #[test]
    fn unmet_goal_reports_end_index() {
        let v = validate_plan(&two_blocks(), &plan("(pick-up b1)"));
        assert!(matches!(v, Verdict::Invalid { step: 1, violation: Violation::GoalUnsatisfied { .. } }));
    }

    #[test]
    fn unknown_action_is_a_verdict() {
        let v = validate_plan(&two_blocks(), &plan("(teleport b1)"));
        assert!(matches!(v, Verdict::Invalid { step: 0, violation: Violation::UnknownAction { .. } }));
    }

    #[test]
    fn print_two_steps_and_empty() {
        let p = plan("(PICK-UP B1) ; trailing comment\n(stack b1 b2)");
        assert_eq!(print_plan(&p), "(pick-up b1)\n(stack b1 b2)\n");
        assert_eq!(print_plan(&Plan::new(vec![], Provenance::NeuroSymbolic)), "");
    }

    #[test]
    fn planner_cost_comment_is_ignored() {
        let p = plan("(pick-up b1)\n; cost = 1 (unit cost)\n");
        assert_eq!(p.len(), 1);
    }
}
