//! Eager grounding of a typed STRIPS task into a propositional one.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Atom, Domain, Problem, Typed};

/// Index into [`Grounding::atoms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(pub u32);

/// Index into [`Grounding::actions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub u32);

/// Closed-world set of true atoms, stored as a fixed-width bitset so equal
/// states have equal encodings.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicState {
    bits: Vec<u64>,
}

impl SymbolicState {
    pub fn empty(num_atoms: usize) -> Self {
        Self {
            bits: vec![0; num_atoms.div_ceil(64)],
        }
    }

    pub fn from_ids(num_atoms: usize, ids: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = Self::empty(num_atoms);
        for id in ids {
            s.insert(id);
        }
        s
    }

    #[inline]
    pub fn contains(&self, id: AtomId) -> bool {
        let i = id.0 as usize;
        self.bits[i / 64] & (1 << (i % 64)) != 0
    }

    #[inline]
    pub fn insert(&mut self, id: AtomId) {
        let i = id.0 as usize;
        self.bits[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, id: AtomId) {
        let i = id.0 as usize;
        self.bits[i / 64] &= !(1 << (i % 64));
    }

    /// Atom ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            (0..64)
                .filter(move |b| word & (1 << b) != 0)
                .map(move |b| AtomId((w * 64 + b) as u32))
        })
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }
}

impl fmt::Debug for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.ids().map(|a| a.0)).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<AtomId>,
    pub pre_neg: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub delete: Vec<AtomId>,
}

impl GroundAction {
    pub fn is_applicable(&self, state: &SymbolicState) -> bool {
        self.pre_pos.iter().all(|&a| state.contains(a))
            && self.pre_neg.iter().all(|&a| !state.contains(a))
    }

    pub fn apply(&self, state: &SymbolicState) -> SymbolicState {
        let mut next = state.clone();
        for &d in &self.delete {
            next.remove(d);
        }
        for &a in &self.add {
            next.insert(a);
        }
        next
    }

    /// `(name arg1 arg2)`
    pub fn signature(&self) -> String {
        let mut s = format!("({}", self.schema);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundingLimits {
    pub max_actions: usize,
    pub max_atoms: usize,
}

impl Default for GroundingLimits {
    fn default() -> Self {
        Self {
            max_actions: 1_000_000,
            max_atoms: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("grounding would produce {count} {what}, above the limit of {limit}")]
    LimitExceeded {
        what: &'static str,
        count: u128,
        limit: usize,
    },
    #[error("atom {0} is not in the atom table")]
    UnknownAtom(String),
}

/// Propositional task: every type-consistent instantiation of the domain's
/// predicates and actions over the problem's objects.
#[derive(Debug, Clone)]
pub struct Grounding {
    /// Sorted lexicographically by (predicate, args); `AtomId` is the index.
    pub atoms: Vec<Atom>,
    pub actions: Vec<GroundAction>,
    pub init: SymbolicState,
    pub goal_pos: Vec<AtomId>,
    pub goal_neg: Vec<AtomId>,
    /// Constants and problem objects, sorted by name.
    pub objects: Vec<Typed>,
    atom_index: HashMap<Atom, AtomId>,
    action_index: HashMap<(String, Vec<String>), ActionId>,
}

impl Grounding {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id.0 as usize]
    }

    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id.0 as usize]
    }

    pub fn action_id(&self, schema: &str, args: &[String]) -> Option<ActionId> {
        self.action_index
            .get(&(schema.to_string(), args.to_vec()))
            .copied()
    }

    pub fn is_goal(&self, state: &SymbolicState) -> bool {
        self.goal_pos.iter().all(|&a| state.contains(a))
            && self.goal_neg.iter().all(|&a| !state.contains(a))
    }

    pub fn state_from_atoms<'a>(
        &self,
        atoms: impl IntoIterator<Item = &'a Atom>,
    ) -> Result<SymbolicState, GroundingError> {
        let mut s = SymbolicState::empty(self.num_atoms());
        for a in atoms {
            let id = self
                .atom_id(a)
                .ok_or_else(|| GroundingError::UnknownAtom(a.to_string()))?;
            s.insert(id);
        }
        Ok(s)
    }

    pub fn atoms_of(&self, state: &SymbolicState) -> Vec<Atom> {
        state.ids().map(|id| self.atom(id).clone()).collect()
    }
}

fn candidates<'a>(domain: &Domain, objects: &'a [Typed], ty: &str) -> Vec<&'a str> {
    objects
        .iter()
        .filter(|o| domain.is_subtype(&o.ty, ty))
        .map(|o| o.name.as_str())
        .collect()
}

/// Calls `f` for every tuple in the cartesian product, first position
/// varying slowest.
fn for_each_tuple<'a>(pools: &[Vec<&'a str>], mut f: impl FnMut(&[&'a str])) {
    if pools.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; pools.len()];
    let mut tuple: Vec<&str> = pools.iter().map(|p| p[0]).collect();
    loop {
        f(&tuple);
        let mut k = pools.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < pools[k].len() {
                tuple[k] = pools[k][idx[k]];
                break;
            }
            idx[k] = 0;
            tuple[k] = pools[k][0];
        }
    }
}

fn product_size(pools: &[Vec<&str>]) -> u128 {
    pools.iter().map(|p| p.len() as u128).product()
}

fn substitute(atom: &Atom, binding: &HashMap<&str, &str>) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|a| binding.get(a.as_str()).map_or(a.clone(), |v| v.to_string()))
            .collect(),
    }
}

/// Instantiates `domain` over `problem`'s objects with the default limits.
pub fn ground(domain: &Domain, problem: &Problem) -> Result<Grounding, GroundingError> {
    ground_with_limits(domain, problem, GroundingLimits::default())
}

pub fn ground_with_limits(
    domain: &Domain,
    problem: &Problem,
    limits: GroundingLimits,
) -> Result<Grounding, GroundingError> {
    let mut objects: Vec<Typed> = domain
        .constants
        .iter()
        .chain(&problem.objects)
        .cloned()
        .collect();
    objects.sort_by(|a, b| a.name.cmp(&b.name));

    // Atom table.
    let mut atom_count: u128 = 0;
    let mut pred_pools = Vec::with_capacity(domain.predicates.len());
    for p in &domain.predicates {
        let pools: Vec<_> = p
            .params
            .iter()
            .map(|t| candidates(domain, &objects, &t.ty))
            .collect();
        atom_count += product_size(&pools);
        pred_pools.push(pools);
    }
    if atom_count > limits.max_atoms as u128 {
        return Err(GroundingError::LimitExceeded {
            what: "atoms",
            count: atom_count,
            limit: limits.max_atoms,
        });
    }
    let mut atoms = Vec::with_capacity(atom_count as usize);
    for (p, pools) in domain.predicates.iter().zip(&pred_pools) {
        for_each_tuple(pools, |tuple| atoms.push(Atom::new(p.name.clone(), tuple.iter().copied())));
    }
    atoms.sort();
    let atom_index: HashMap<Atom, AtomId> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), AtomId(i as u32)))
        .collect();
    let lookup = |a: &Atom| -> Result<AtomId, GroundingError> {
        atom_index
            .get(a)
            .copied()
            .ok_or_else(|| GroundingError::UnknownAtom(a.to_string()))
    };

    // Actions.
    let mut action_count: u128 = 0;
    let mut act_pools = Vec::with_capacity(domain.actions.len());
    for a in &domain.actions {
        let pools: Vec<_> = a
            .parameters
            .iter()
            .map(|t| candidates(domain, &objects, &t.ty))
            .collect();
        action_count += product_size(&pools);
        act_pools.push(pools);
    }
    if action_count > limits.max_actions as u128 {
        return Err(GroundingError::LimitExceeded {
            what: "ground actions",
            count: action_count,
            limit: limits.max_actions,
        });
    }
    let mut actions = Vec::with_capacity(action_count as usize);
    let mut failure = None;
    for (schema, pools) in domain.actions.iter().zip(&act_pools) {
        for_each_tuple(pools, |tuple| {
            if failure.is_some() {
                return;
            }
            let binding: HashMap<&str, &str> = schema
                .parameters
                .iter()
                .map(|p| p.name.as_str())
                .zip(tuple.iter().copied())
                .collect();
            let ids = |atoms: &mut dyn Iterator<Item = &Atom>| -> Result<Vec<AtomId>, GroundingError> {
                let mut v: Vec<AtomId> = atoms
                    .map(|a| lookup(&substitute(a, &binding)))
                    .collect::<Result<_, _>>()?;
                v.sort();
                v.dedup();
                Ok(v)
            };
            let built = (|| {
                let pre_pos = ids(&mut schema.precondition.iter().filter(|l| l.positive).map(|l| &l.atom))?;
                let pre_neg = ids(&mut schema.precondition.iter().filter(|l| !l.positive).map(|l| &l.atom))?;
                let add = ids(&mut schema.add.iter())?;
                let mut delete = ids(&mut schema.delete.iter())?;
                // Instantiation can make an added and a deleted atom coincide
                // (e.g. stack(b, b)); the add wins.
                delete.retain(|d| !add.contains(d));
                Ok(GroundAction {
                    schema: schema.name.clone(),
                    args: tuple.iter().map(|s| s.to_string()).collect(),
                    pre_pos,
                    pre_neg,
                    add,
                    delete,
                })
            })();
            match built {
                Ok(a) => actions.push(a),
                Err(e) => failure = Some(e),
            }
        });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let action_index = actions
        .iter()
        .enumerate()
        .map(|(i, a)| ((a.schema.clone(), a.args.clone()), ActionId(i as u32)))
        .collect();

    let mut init = SymbolicState::empty(atoms.len());
    for a in &problem.init {
        init.insert(lookup(a)?);
    }
    let mut goal_pos = Vec::new();
    let mut goal_neg = Vec::new();
    for l in &problem.goal {
        let id = lookup(&l.atom)?;
        if l.positive {
            goal_pos.push(id);
        } else {
            goal_neg.push(id);
        }
    }
    Ok(Grounding {
        atoms,
        actions,
        init,
        goal_pos,
        goal_neg,
        objects,
        atom_index,
        action_index,
    })
}
