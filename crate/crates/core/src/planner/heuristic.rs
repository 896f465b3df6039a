//! Delete-relaxation estimates (h-add, h-max) and the blind estimate.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pddl::{Grounding, SymbolicState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    /// Sum of relaxed subgoal costs. Informative, not admissible.
    HAdd,
    /// Maximum of relaxed subgoal costs. Admissible.
    HMax,
    Zero,
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hadd" | "h-add" => Ok(Self::HAdd),
            "hmax" | "h-max" => Ok(Self::HMax),
            "zero" | "blind" => Ok(Self::Zero),
            _ => Err(format!("unknown heuristic `{s}` (expected hadd, hmax or zero)")),
        }
    }
}

/// A heuristic value; `Infinite` marks a state from which the goal is
/// unreachable even when deletes are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimate {
    Finite(u32),
    Infinite,
}

impl Estimate {
    pub fn is_infinite(self) -> bool {
        matches!(self, Estimate::Infinite)
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Estimate::Finite(v) => Some(v),
            Estimate::Infinite => None,
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimate::Finite(v) => write!(f, "{v}"),
            Estimate::Infinite => f.write_str("inf"),
        }
    }
}

const INF: u32 = u32::MAX;

/// Precomputed relaxed task; reusable across evaluations on one grounding.
pub struct RelaxedEvaluator<'g> {
    g: &'g Grounding,
    kind: Heuristic,
    /// For each atom, the actions with it as a positive precondition.
    watchers: Vec<Vec<u32>>,
    unconditional: Vec<u32>,
}

impl<'g> RelaxedEvaluator<'g> {
    pub fn new(g: &'g Grounding, kind: Heuristic) -> Self {
        let mut watchers = vec![Vec::new(); g.num_atoms()];
        let mut unconditional = Vec::new();
        for (i, a) in g.actions.iter().enumerate() {
            if a.pre_pos.is_empty() {
                unconditional.push(i as u32);
            }
            for p in &a.pre_pos {
                watchers[p.0 as usize].push(i as u32);
            }
        }
        Self {
            g,
            kind,
            watchers,
            unconditional,
        }
    }

    pub fn evaluate(&self, state: &SymbolicState) -> Estimate {
        if self.g.is_goal(state) {
            return Estimate::Finite(0);
        }
        let combine: fn(u32, u32) -> u32 = match self.kind {
            Heuristic::Zero => return Estimate::Finite(0),
            Heuristic::HAdd => |acc, c| acc.saturating_add(c),
            Heuristic::HMax => |acc, c| acc.max(c),
        };
        let g = self.g;
        let mut cost = vec![INF; g.num_atoms()];
        let mut done = vec![false; g.num_atoms()];
        let mut unsatisfied: Vec<u32> = g.actions.iter().map(|a| a.pre_pos.len() as u32).collect();
        let mut acc = vec![0u32; g.actions.len()];
        let mut heap = BinaryHeap::new();
        for id in state.ids() {
            cost[id.0 as usize] = 0;
            heap.push(Reverse((0u32, id.0)));
        }
        let fire = |action: u32, pre_cost: u32, cost: &mut Vec<u32>, heap: &mut BinaryHeap<Reverse<(u32, u32)>>| {
            let c = pre_cost.saturating_add(1);
            for e in &g.actions[action as usize].add {
                let slot = &mut cost[e.0 as usize];
                if c < *slot {
                    *slot = c;
                    heap.push(Reverse((c, e.0)));
                }
            }
        };
        for &a in &self.unconditional {
            fire(a, 0, &mut cost, &mut heap);
        }
        let mut goals_left = g.goal_pos.iter().filter(|p| !state.contains(**p)).count();
        while let Some(Reverse((c, atom))) = heap.pop() {
            let ai = atom as usize;
            if done[ai] || c > cost[ai] {
                continue;
            }
            done[ai] = true;
            if g.goal_pos.iter().any(|p| p.0 == atom) && c > 0 {
                goals_left -= 1;
                if goals_left == 0 {
                    break;
                }
            }
            for &action in &self.watchers[ai] {
                let ac = action as usize;
                acc[ac] = combine(acc[ac], c);
                unsatisfied[ac] -= 1;
                if unsatisfied[ac] == 0 {
                    fire(action, acc[ac], &mut cost, &mut heap);
                }
            }
        }
        let mut total = 0u32;
        for p in &g.goal_pos {
            let c = cost[p.0 as usize];
            if c == INF {
                return Estimate::Infinite;
            }
            total = combine(total, c);
        }
        // Only negative goals can be open here; they still need an action.
        Estimate::Finite(total.max(1))
    }
}

/// Evaluates `kind` on `state`. Builds a fresh evaluator; use
/// [`RelaxedEvaluator`] when evaluating many states.
pub fn heuristic_value(g: &Grounding, state: &SymbolicState, kind: Heuristic) -> Estimate {
    RelaxedEvaluator::new(g, kind).evaluate(state)
}

impl PartialOrd<u32> for Estimate {
    fn partial_cmp(&self, other: &u32) -> Option<Ordering> {
        Some(self.cmp(&Estimate::Finite(*other)))
    }
}

impl PartialEq<u32> for Estimate {
    fn eq(&self, other: &u32) -> bool {
        *self == Estimate::Finite(*other)
    }
}
