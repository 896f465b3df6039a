//! Checks that run the crate against the references, shared by the
//! targeted tests and the acceptance run.

use symwrap::orchestrator::{EventKind, PlanCheck, Session};
use symwrap::pddl::{ground, tabletop_domain, validate_plan};
use symwrap::planner::{solve, Heuristic, Outcome, SearchConfig, Strategy};

use super::{oracle_shortest, random_tabletop_problem};

/// Solves one generated instance three ways and compares with the BFS
/// oracle. Returns the optimal length, or `None` when unsolvable.
pub fn planner_matches_oracle(seed: u64) -> Result<Option<usize>, String> {
    let p = random_tabletop_problem(seed);
    let g = ground(&tabletop_domain(), &p).map_err(|e| e.to_string())?;
    let want = oracle_shortest(&p);
    for (strategy, h) in [
        (Strategy::BreadthFirst, Heuristic::Zero),
        (Strategy::AStar, Heuristic::HMax),
        (Strategy::GreedyBestFirst, Heuristic::HAdd),
    ] {
        let r = solve(&g, &SearchConfig::new(strategy, h));
        match (&r.outcome, want) {
            (Outcome::Plan { plan }, Some(n)) => {
                if !validate_plan(&g, plan).is_valid() {
                    return Err(format!("seed {seed} {strategy:?}: invalid plan"));
                }
                if strategy != Strategy::GreedyBestFirst && plan.len() != n {
                    return Err(format!("seed {seed} {strategy:?}: length {} but optimum {n}", plan.len()));
                }
            }
            (Outcome::Unsolvable, None) => {}
            (got, want) => return Err(format!("seed {seed} {strategy:?}: {got:?} but oracle says {want:?}")),
        }
    }
    Ok(want)
}

/// Every tool event must follow an approval of a valid plan given after
/// the latest plan was produced.
pub fn audit(s: &Session) -> Result<(), String> {
    let mut approved = false;
    let mut valid = false;
    for e in s.timeline() {
        match &e.kind {
            EventKind::PlanReady { check, .. } => {
                approved = false;
                valid = *check == PlanCheck::Valid;
            }
            EventKind::Approval { .. } => {
                if !valid {
                    return Err(format!("seq {}: approval of an invalid plan", e.seq));
                }
                approved = true;
            }
            EventKind::ToolStatus { call, .. } if !approved => {
                return Err(format!("seq {}: {call} without approval", e.seq));
            }
            _ => {}
        }
    }
    Ok(())
}
