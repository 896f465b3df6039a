//! Deterministic forward-search planner over a [`Grounding`].
//!
//! The default configuration is greedy best-first search with h-add, a
//! satisficing setup suited to small manipulation tasks. Breadth-first search
//! and A* with h-max are available when shortest plans are needed.
//!
//! [`Grounding`]: crate::pddl::Grounding

mod heuristic;
mod search;

pub use heuristic::{heuristic_value, Estimate, Heuristic, RelaxedEvaluator};
pub use search::{solve, Outcome, SearchConfig, SearchResult, SearchStats, Strategy};
