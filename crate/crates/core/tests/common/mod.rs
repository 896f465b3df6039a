//! Independent reference implementations and generators shared by the
//! integration tests. Nothing here goes through the grounder or the search.
#![allow(dead_code)]

pub mod checks;
pub mod gate_model;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symwrap::pddl::{
    ActionSchema, Atom, Domain, Literal, PredicateSchema, Problem, Requirement, TypeDecl, Typed, ROOT_TYPE,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn atom(p: &str, args: &[&str]) -> Atom {
    Atom::new(p, args.iter().copied())
}

// ---------------------------------------------------------------------------
// Tabletop oracle: action rules written out by hand, exhaustive BFS.

pub type State = BTreeSet<Atom>;

pub struct Tabletop {
    pub items: Vec<String>,
    pub containers: Vec<String>,
}

impl Tabletop {
    pub fn of(problem: &Problem) -> Self {
        let pick = |ty: &str| problem.objects.iter().filter(|o| o.ty == ty).map(|o| o.name.clone()).collect();
        Self {
            items: pick("item"),
            containers: pick("container"),
        }
    }

    /// Every successor state with the action that produced it.
    pub fn successors(&self, s: &State) -> Vec<(String, State)> {
        let has = |p: &str, a: &[&str]| s.contains(&atom(p, a));
        let empty = has("gripper-empty", &[]);
        let mut out = Vec::new();
        let apply = |del: &[Atom], add: &[Atom]| {
            let mut n = s.clone();
            for d in del {
                n.remove(d);
            }
            for a in add {
                n.insert(a.clone());
            }
            n
        };
        for x in &self.items {
            let x = x.as_str();
            if has("clear", &[x]) && has("on-table", &[x]) && empty {
                out.push((
                    format!("(pick-up {x})"),
                    apply(
                        &[atom("on-table", &[x]), atom("clear", &[x]), atom("gripper-empty", &[])],
                        &[atom("holding", &[x])],
                    ),
                ));
            }
            if has("holding", &[x]) {
                out.push((
                    format!("(put-down {x})"),
                    apply(
                        &[atom("holding", &[x])],
                        &[atom("on-table", &[x]), atom("clear", &[x]), atom("gripper-empty", &[])],
                    ),
                ));
                for c in &self.containers {
                    out.push((
                        format!("(place-in {x} {c})"),
                        apply(&[atom("holding", &[x])], &[atom("in", &[x, c]), atom("gripper-empty", &[])]),
                    ));
                }
            }
            for y in &self.items {
                let y = y.as_str();
                if has("holding", &[x]) && has("clear", &[y]) {
                    out.push((
                        format!("(stack {x} {y})"),
                        apply(
                            &[atom("holding", &[x]), atom("clear", &[y])],
                            &[atom("on", &[x, y]), atom("clear", &[x]), atom("gripper-empty", &[])],
                        ),
                    ));
                }
                if has("on", &[x, y]) && has("clear", &[x]) && empty {
                    out.push((
                        format!("(unstack {x} {y})"),
                        apply(
                            &[atom("on", &[x, y]), atom("clear", &[x]), atom("gripper-empty", &[])],
                            &[atom("holding", &[x]), atom("clear", &[y])],
                        ),
                    ));
                }
            }
        }
        out
    }
}

pub fn goal_holds(goal: &[Literal], s: &State) -> bool {
    goal.iter().all(|l| s.contains(&l.atom) == l.positive)
}

/// Length of a shortest plan, or `None` if no reachable state meets the goal.
pub fn oracle_shortest(problem: &Problem) -> Option<usize> {
    let world = Tabletop::of(problem);
    let init: State = problem.init.iter().cloned().collect();
    let mut seen = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([(init, 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if goal_holds(&problem.goal, &s) {
            return Some(d);
        }
        for (_, n) in world.successors(&s) {
            if seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    None
}

/// A random tabletop instance: 2-4 items, at most one container, a
/// physically plausible start and a goal of one to three random literals.
pub fn random_tabletop_problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let n_items = r.random_range(2..=4);
    let n_cont = r.random_range(0..=1).min(5 - n_items);
    let items: Vec<String> = (0..n_items).map(|i| format!("b{i}")).collect();
    let conts: Vec<String> = (0..n_cont).map(|i| format!("c{i}")).collect();
    let mut objects: Vec<Typed> = items.iter().map(|i| Typed::new(i, "item")).collect();
    objects.extend(conts.iter().map(|c| Typed::new(c, "container")));

    let mut init = BTreeSet::new();
    let mut order = items.clone();
    order.shuffle(&mut r);
    let mut held = None;
    let mut tops: Vec<String> = Vec::new();
    for x in &order {
        let roll = r.random_range(0..10);
        if roll == 0 && held.is_none() {
            held = Some(x.clone());
            init.insert(atom("holding", &[x]));
        } else if roll == 1 && !conts.is_empty() {
            init.insert(atom("in", &[x, conts.choose(&mut r).unwrap()]));
        } else if roll < 5 && !tops.is_empty() {
            let i = r.random_range(0..tops.len());
            init.insert(atom("on", &[x, &tops[i]]));
            tops[i] = x.clone();
        } else {
            init.insert(atom("on-table", &[x]));
            tops.push(x.clone());
        }
    }
    for t in &tops {
        init.insert(atom("clear", &[t]));
    }
    if held.is_none() {
        init.insert(atom("gripper-empty", &[]));
    }

    let mut candidates = vec![atom("gripper-empty", &[])];
    for x in &items {
        candidates.push(atom("on-table", &[x]));
        candidates.push(atom("clear", &[x]));
        candidates.push(atom("holding", &[x]));
        for y in &items {
            candidates.push(atom("on", &[x, y]));
        }
        for c in &conts {
            candidates.push(atom("in", &[x, c]));
        }
    }
    let mut goal: Vec<Literal> = Vec::new();
    for _ in 0..r.random_range(1..=3) {
        let a = candidates.choose(&mut r).unwrap().clone();
        if goal.iter().any(|l| l.atom == a) {
            continue;
        }
        goal.push(if r.random_bool(0.2) { Literal::neg(a) } else { Literal::pos(a) });
    }
    Problem {
        name: format!("rand-{seed}"),
        domain: "tabletop".into(),
        objects,
        init: init.into_iter().collect(),
        goal,
    }
}

// ---------------------------------------------------------------------------
// Naive plan interpreter: substitutes schema parameters directly and keeps
// the state as a set of atoms.

pub fn is_subtype<'a>(domain: &'a Domain, mut ty: &'a str, sup: &str) -> bool {
    loop {
        if ty == sup {
            return true;
        }
        if ty == ROOT_TYPE {
            return false;
        }
        match domain.types.iter().find(|t| t.name == ty) {
            Some(t) => ty = &t.parent,
            None => return false,
        }
    }
}

/// `Err(i)` names the first failing step; `Err(len)` means the goal failed.
pub fn naive_validate(domain: &Domain, problem: &Problem, plan: &[(String, Vec<String>)]) -> Result<(), usize> {
    let types: HashMap<&str, &str> = domain
        .constants
        .iter()
        .chain(&problem.objects)
        .map(|t| (t.name.as_str(), t.ty.as_str()))
        .collect();
    let mut state: State = problem.init.iter().cloned().collect();
    for (i, (name, args)) in plan.iter().enumerate() {
        let Some(a) = domain.actions.iter().find(|a| &a.name == name) else { return Err(i) };
        if a.parameters.len() != args.len() {
            return Err(i);
        }
        let mut bind: HashMap<&str, &str> = HashMap::new();
        for (p, v) in a.parameters.iter().zip(args) {
            match types.get(v.as_str()) {
                Some(ty) if is_subtype(domain, ty, &p.ty) => {
                    bind.insert(&p.name, v);
                }
                _ => return Err(i),
            }
        }
        let sub = |x: &Atom| Atom::new(x.predicate.clone(), x.args.iter().map(|a| bind.get(a.as_str()).copied().unwrap_or(a)));
        if !a.precondition.iter().all(|l| state.contains(&sub(&l.atom)) == l.positive) {
            return Err(i);
        }
        for d in &a.delete {
            state.remove(&sub(d));
        }
        for x in &a.add {
            state.insert(sub(x));
        }
    }
    if goal_holds(&problem.goal, &state) {
        Ok(())
    } else {
        Err(plan.len())
    }
}

/// All ground actions applicable in `state` under the naive semantics.
pub fn naive_applicable(domain: &Domain, problem: &Problem, state: &State) -> Vec<(String, Vec<String>)> {
    let objs: Vec<&Typed> = domain.constants.iter().chain(&problem.objects).collect();
    let mut out = Vec::new();
    for a in &domain.actions {
        let pools: Vec<Vec<&str>> = a
            .parameters
            .iter()
            .map(|p| objs.iter().filter(|o| is_subtype(domain, &o.ty, &p.ty)).map(|o| o.name.as_str()).collect())
            .collect();
        let mut tuples: Vec<Vec<&str>> = vec![vec![]];
        for pool in &pools {
            tuples = tuples
                .into_iter()
                .flat_map(|t| pool.iter().map(move |o| [t.clone(), vec![*o]].concat()))
                .collect();
        }
        for t in tuples {
            let args: Vec<String> = t.iter().map(|s| s.to_string()).collect();
            let mut p = problem.clone();
            p.init = state.iter().cloned().collect();
            p.goal.clear();
            if naive_validate(domain, &p, &[(a.name.clone(), args.clone())]).is_ok() {
                out.push((a.name.clone(), args));
            }
        }
    }
    out
}

/// Random plan mixing applicable steps with arbitrary ones.
pub fn random_plan(domain: &Domain, problem: &Problem, seed: u64, max_len: usize) -> Vec<(String, Vec<String>)> {
    let mut r = rng(seed);
    let objs: Vec<String> = domain.constants.iter().chain(&problem.objects).map(|o| o.name.clone()).collect();
    let mut state: State = problem.init.iter().cloned().collect();
    let mut plan = Vec::new();
    for _ in 0..r.random_range(0..=max_len) {
        let app = naive_applicable(domain, problem, &state);
        let step = if !app.is_empty() && r.random_bool(0.8) {
            app.choose(&mut r).unwrap().clone()
        } else if r.random_bool(0.1) || domain.actions.is_empty() {
            ("no-such-action".to_string(), vec![])
        } else {
            let a = domain.actions.choose(&mut r).unwrap();
            let args = (0..a.parameters.len()).map(|_| objs.choose(&mut r).cloned().unwrap_or_default()).collect();
            (a.name.clone(), args)
        };
        let mut p = problem.clone();
        p.init = state.iter().cloned().collect();
        p.goal.clear();
        if naive_validate(domain, &p, std::slice::from_ref(&step)).is_ok() {
            let a = domain.actions.iter().find(|a| a.name == step.0).unwrap();
            let bind: HashMap<&str, &str> =
                a.parameters.iter().map(|p| p.name.as_str()).zip(step.1.iter().map(String::as_str)).collect();
            let sub = |x: &Atom| {
                Atom::new(x.predicate.clone(), x.args.iter().map(|a| bind.get(a.as_str()).copied().unwrap_or(a)))
            };
            for d in &a.delete {
                state.remove(&sub(d));
            }
            for x in &a.add {
                state.insert(sub(x));
            }
        }
        plan.push(step);
    }
    plan
}

// ---------------------------------------------------------------------------
// Random well-formed domains and problems in the supported subset.

fn typed_args<'a>(
    domain: &Domain,
    params: &[Typed],
    pool: &'a [Typed],
    r: &mut ChaCha8Rng,
) -> Option<Vec<String>> {
    params
        .iter()
        .map(|p| {
            let fits: Vec<&'a Typed> = pool.iter().filter(|o| is_subtype(domain, &o.ty, &p.ty)).collect();
            fits.choose(r).map(|o| o.name.clone())
        })
        .collect()
}

pub fn random_domain(seed: u64) -> Domain {
    let mut r = rng(seed);
    let mut reqs = vec![Requirement::Strips, Requirement::Typing, Requirement::NegativePreconditions];
    reqs.shuffle(&mut r);
    reqs.truncate(r.random_range(0..=3));
    let mut d = Domain {
        name: format!("dom-{}", r.random_range(0..1000)),
        requirements: reqs,
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for i in 0..r.random_range(0..=4) {
        let parent = if i == 0 || r.random_bool(0.5) {
            ROOT_TYPE.to_string()
        } else {
            format!("t{}", r.random_range(0..i))
        };
        d.types.push(TypeDecl {
            name: format!("t{i}"),
            parent,
        });
    }
    let mut type_pool: Vec<String> = d.types.iter().map(|t| t.name.clone()).collect();
    type_pool.push(ROOT_TYPE.into());
    for i in 0..r.random_range(0..=2) {
        d.constants.push(Typed::new(format!("k{i}"), type_pool.choose(&mut r).unwrap()));
    }
    for i in 0..r.random_range(1..=4) {
        let params = (0..r.random_range(0..=3))
            .map(|j| Typed::new(format!("?v{j}"), type_pool.choose(&mut r).unwrap()))
            .collect();
        d.predicates.push(PredicateSchema {
            name: format!("p{i}"),
            params,
        });
    }
    for i in 0..r.random_range(0..=3) {
        let params: Vec<Typed> = (0..r.random_range(0..=3))
            .map(|j| Typed::new(format!("?x{j}"), type_pool.choose(&mut r).unwrap()))
            .collect();
        let pool: Vec<Typed> = params.iter().chain(&d.constants).cloned().collect();
        let mut lits: Vec<Literal> = Vec::new();
        for _ in 0..r.random_range(0..=6) {
            let p = d.predicates.choose(&mut r).unwrap();
            if let Some(args) = typed_args(&d, &p.params, &pool, &mut r) {
                let a = Atom::new(p.name.clone(), args);
                if lits.iter().any(|l| l.atom == a) {
                    continue;
                }
                lits.push(if r.random_bool(0.3) { Literal::neg(a) } else { Literal::pos(a) });
            }
        }
        let split = r.random_range(0..=lits.len());
        let (pre, eff) = lits.split_at(split);
        d.actions.push(ActionSchema {
            name: format!("a{i}"),
            parameters: params,
            precondition: pre.to_vec(),
            add: eff.iter().filter(|l| l.positive).map(|l| l.atom.clone()).collect(),
            delete: eff.iter().filter(|l| !l.positive).map(|l| l.atom.clone()).collect(),
        });
    }
    d
}

pub fn random_problem(domain: &Domain, seed: u64) -> Problem {
    let mut r = rng(seed);
    let mut type_pool: Vec<String> = domain.types.iter().map(|t| t.name.clone()).collect();
    type_pool.push(ROOT_TYPE.into());
    let objects: Vec<Typed> = (0..r.random_range(0..=4))
        .map(|i| Typed::new(format!("o{i}"), type_pool.choose(&mut r).unwrap()))
        .collect();
    let pool: Vec<Typed> = domain.constants.iter().chain(&objects).cloned().collect();
    let mut atoms: Vec<Atom> = Vec::new();
    for _ in 0..r.random_range(0..=8) {
        let p = domain.predicates.choose(&mut r).unwrap();
        if let Some(args) = typed_args(domain, &p.params, &pool, &mut r) {
            let a = Atom::new(p.name.clone(), args);
            if !atoms.contains(&a) {
                atoms.push(a);
            }
        }
    }
    let split = r.random_range(0..=atoms.len());
    let goal = atoms[split..]
        .iter()
        .map(|a| if r.random_bool(0.3) { Literal::neg(a.clone()) } else { Literal::pos(a.clone()) })
        .collect();
    let mut init = atoms[..split].to_vec();
    for _ in 0..r.random_range(0..=3) {
        let p = domain.predicates.choose(&mut r).unwrap();
        if let Some(args) = typed_args(domain, &p.params, &pool, &mut r) {
            let a = Atom::new(p.name.clone(), args);
            if !init.contains(&a) {
                init.push(a);
            }
        }
    }
    Problem {
        name: format!("prob-{}", r.random_range(0..1000)),
        domain: domain.name.clone(),
        objects,
        init,
        goal,
    }
}
