use serde::Serialize;
use thiserror::Error;

use crate::pddl::{Atom, Problem};
use crate::translator::ProblemFragment;
use crate::world::WorldState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[error("fragment init contradicts the observed world: {}", render(.fragment))]
pub struct ComposeError {
    /// Fragment atoms the world abstraction does not contain.
    pub fragment: Vec<Atom>,
    /// The full abstraction of the observed world.
    pub observed: Vec<Atom>,
}

fn render(atoms: &[Atom]) -> String {
    atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// Merges a fragment with the world: scene objects plus fragment objects,
/// the world's abstraction plus fragment facts, the fragment's goal.
///
/// The abstraction is complete for scene objects, so a fragment fact that
/// mentions one of them (or is nullary) and is missing from it contradicts
/// what was observed.
pub fn compose_problem(fragment: &ProblemFragment, world: &WorldState) -> Result<Problem, ComposeError> {
    let observed = world.abstraction();
    let conflicts: Vec<Atom> = fragment
        .init
        .iter()
        .filter(|a| !observed.contains(a))
        .filter(|a| a.args.is_empty() || a.args.iter().any(|x| world.objects.contains_key(x)))
        .cloned()
        .collect();
    if !conflicts.is_empty() {
        return Err(ComposeError {
            fragment: conflicts,
            observed,
        });
    }
    let mut objects = world.typed_objects();
    objects.extend(fragment.objects.iter().cloned());
    let mut init = observed;
    init.extend(fragment.init.iter().cloned());
    init.sort();
    init.dedup();
    Ok(Problem {
        name: "task".into(),
        domain: "tabletop".into(),
        objects,
        init,
        goal: fragment.goal.clone(),
    })
}
