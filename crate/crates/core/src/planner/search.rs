use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::num::NonZeroU64;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::heuristic::{Estimate, Heuristic, RelaxedEvaluator};
use crate::pddl::{ActionId, Grounding, Plan, Provenance, SymbolicState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    GreedyBestFirst,
    AStar,
    BreadthFirst,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gbfs" | "greedy" | "greedy-best-first" => Ok(Self::GreedyBestFirst),
            "astar" | "a-star" => Ok(Self::AStar),
            "bfs" | "breadth-first" => Ok(Self::BreadthFirst),
            _ => Err(format!("unknown strategy `{s}` (expected gbfs, astar or bfs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub heuristic: Heuristic,
    pub max_expansions: NonZeroU64,
    /// FIFO among equal keys when set, LIFO otherwise.
    pub deterministic_tie_break: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::GreedyBestFirst,
            heuristic: Heuristic::HAdd,
            max_expansions: NonZeroU64::new(100_000).unwrap(),
            deterministic_tie_break: true,
        }
    }
}

impl SearchConfig {
    pub fn new(strategy: Strategy, heuristic: Heuristic) -> Self {
        Self {
            strategy,
            heuristic,
            ..Self::default()
        }
    }

    pub fn with_max_expansions(mut self, n: u64) -> Self {
        self.max_expansions = NonZeroU64::new(n).expect("max_expansions must be positive");
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: u64,
    pub generated: u64,
    pub peak_open: usize,
    #[serde(with = "duration_micros")]
    pub elapsed: Duration,
}

mod duration_micros {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_micros() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_micros(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Plan { plan: Plan },
    /// The reachable state space was exhausted without meeting the goal.
    Unsolvable,
    ResourceLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub stats: SearchStats,
}

impl SearchResult {
    pub fn plan(&self) -> Option<&Plan> {
        match &self.outcome {
            Outcome::Plan { plan } => Some(plan),
            _ => None,
        }
    }
}

struct Node {
    state: SymbolicState,
    parent: Option<usize>,
    action: Option<ActionId>,
    cost: u32,
}

struct Space {
    nodes: Vec<Node>,
    index: HashMap<SymbolicState, usize>,
}

impl Space {
    fn new(init: SymbolicState) -> Self {
        let mut index = HashMap::new();
        index.insert(init.clone(), 0);
        Self {
            nodes: vec![Node {
                state: init,
                parent: None,
                action: None,
                cost: 0,
            }],
            index,
        }
    }

    fn path(&self, mut node: usize) -> Vec<ActionId> {
        let mut out = Vec::new();
        while let Some(a) = self.nodes[node].action {
            out.push(a);
            node = self.nodes[node].parent.expect("non-root node has a parent");
        }
        out.reverse();
        out
    }
}

fn successors<'g>(
    g: &'g Grounding,
    state: &'g SymbolicState,
) -> impl Iterator<Item = (ActionId, SymbolicState)> + 'g {
    g.actions
        .iter()
        .enumerate()
        .filter(move |(_, a)| a.is_applicable(state))
        .map(move |(i, a)| (ActionId(i as u32), a.apply(state)))
}

/// Forward state-space search over `g`.
///
/// Breadth-first and A* with an admissible heuristic (h-max or zero) return
/// shortest plans under unit costs. `Unsolvable` is only reported once every
/// reachable state has been expanded or proven a dead end by the relaxation.
pub fn solve(g: &Grounding, cfg: &SearchConfig) -> SearchResult {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let finish = |outcome: Outcome, mut stats: SearchStats| {
        stats.elapsed = start.elapsed();
        SearchResult { outcome, stats }
    };
    if g.is_goal(&g.init) {
        let plan = Plan::new(Vec::new(), Provenance::NeuroSymbolic);
        return finish(Outcome::Plan { plan }, stats);
    }
    let found = match cfg.strategy {
        Strategy::BreadthFirst => breadth_first(g, cfg, &mut stats),
        Strategy::GreedyBestFirst | Strategy::AStar => best_first(g, cfg, &mut stats),
    };
    let outcome = match found {
        Found::Path(path) => Outcome::Plan {
            plan: Plan::from_actions(g, &path, Provenance::NeuroSymbolic),
        },
        Found::Exhausted => Outcome::Unsolvable,
        Found::Limit => Outcome::ResourceLimit,
    };
    finish(outcome, stats)
}

enum Found {
    Path(Vec<ActionId>),
    Exhausted,
    Limit,
}

fn breadth_first(g: &Grounding, cfg: &SearchConfig, stats: &mut SearchStats) -> Found {
    let mut space = Space::new(g.init.clone());
    let mut open = VecDeque::from([0usize]);
    stats.peak_open = 1;
    while let Some(n) = open.pop_front() {
        if stats.expansions >= cfg.max_expansions.get() {
            return Found::Limit;
        }
        stats.expansions += 1;
        let state = space.nodes[n].state.clone();
        let cost = space.nodes[n].cost;
        for (action, next) in successors(g, &state) {
            stats.generated += 1;
            if space.index.contains_key(&next) {
                continue;
            }
            let is_goal = g.is_goal(&next);
            let id = space.nodes.len();
            space.index.insert(next.clone(), id);
            space.nodes.push(Node {
                state: next,
                parent: Some(n),
                action: Some(action),
                cost: cost + 1,
            });
            if is_goal {
                return Found::Path(space.path(id));
            }
            if cfg.deterministic_tie_break {
                open.push_back(id);
            } else {
                open.push_front(id);
            }
        }
        stats.peak_open = stats.peak_open.max(open.len());
    }
    Found::Exhausted
}

fn best_first(g: &Grounding, cfg: &SearchConfig, stats: &mut SearchStats) -> Found {
    let astar = cfg.strategy == Strategy::AStar;
    let eval = RelaxedEvaluator::new(g, cfg.heuristic);
    let h0 = match eval.evaluate(&g.init) {
        Estimate::Finite(h) => h,
        Estimate::Infinite => return Found::Exhausted,
    };
    let mut space = Space::new(g.init.clone());
    let mut hvals = vec![h0];
    // (priority, tie, cost-at-push, node)
    let mut open: BinaryHeap<Reverse<(u32, i64, u32, usize)>> = BinaryHeap::new();
    let mut counter: i64 = 0;
    let tie = |c: &mut i64| {
        *c += 1;
        if cfg.deterministic_tie_break {
            *c
        } else {
            -*c
        }
    };
    let priority = |cost: u32, h: u32| if astar { cost + h } else { h };
    open.push(Reverse((priority(0, h0), tie(&mut counter), 0, 0)));
    stats.peak_open = 1;
    while let Some(Reverse((_, _, pushed_cost, n))) = open.pop() {
        if pushed_cost != space.nodes[n].cost {
            continue; // superseded by a cheaper path
        }
        if g.is_goal(&space.nodes[n].state) {
            return Found::Path(space.path(n));
        }
        if stats.expansions >= cfg.max_expansions.get() {
            return Found::Limit;
        }
        stats.expansions += 1;
        let state = space.nodes[n].state.clone();
        let cost = space.nodes[n].cost + 1;
        for (action, next) in successors(g, &state) {
            stats.generated += 1;
            let id = match space.index.get(&next) {
                Some(&existing) => {
                    if !astar || cost >= space.nodes[existing].cost {
                        continue;
                    }
                    let node = &mut space.nodes[existing];
                    node.cost = cost;
                    node.parent = Some(n);
                    node.action = Some(action);
                    existing
                }
                None => {
                    let h = match eval.evaluate(&next) {
                        Estimate::Finite(h) => h,
                        Estimate::Infinite => {
                            // Remember dead ends so they are not re-evaluated.
                            let id = space.nodes.len();
                            space.index.insert(next.clone(), id);
                            space.nodes.push(Node {
                                state: next,
                                parent: Some(n),
                                action: Some(action),
                                cost: u32::MAX,
                            });
                            hvals.push(u32::MAX);
                            continue;
                        }
                    };
                    let id = space.nodes.len();
                    space.index.insert(next.clone(), id);
                    space.nodes.push(Node {
                        state: next,
                        parent: Some(n),
                        action: Some(action),
                        cost,
                    });
                    hvals.push(h);
                    id
                }
            };
            if hvals[id] == u32::MAX {
                continue;
            }
            open.push(Reverse((priority(cost, hvals[id]), tie(&mut counter), cost, id)));
        }
        stats.peak_open = stats.peak_open.max(open.len());
    }
    Found::Exhausted
}
