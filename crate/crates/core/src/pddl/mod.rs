//! The typed STRIPS subset of PDDL used by the tabletop domain.
//!
//! Supported requirements are `:strips`, `:typing` and
//! `:negative-preconditions`. Identifiers are case-insensitive and stored in
//! lowercase; `;` starts a comment that runs to the end of the line.
//!
//! The pipeline is [`parse_domain`] → [`parse_problem`] → [`ground`], after
//! which plans can be checked with [`validate_plan`] and written with
//! [`print_plan`].

mod ast;
mod error;
mod ground;
mod parse;
mod plan;
pub(crate) mod sexpr;

use std::sync::OnceLock;

pub use ast::{
    ActionSchema, Atom, Domain, Literal, PredicateSchema, Problem, Requirement, TypeDecl, Typed,
    ROOT_TYPE,
};
pub(crate) use ast::fragment_text;
pub use error::{ParseError, ParseErrorKind};
pub use ground::{
    ground, ground_with_limits, ActionId, AtomId, GroundAction, Grounding, GroundingError,
    GroundingLimits, SymbolicState,
};
pub use parse::{parse_domain, parse_problem, ProblemBody};
pub(crate) use parse::parse_body;
pub use plan::{
    describe, parse_plan, print_plan, simulate_plan, validate_plan, Plan, PlanStep, Provenance,
    Verdict, Violation,
};
pub use sexpr::Pos;

/// Source of the bundled tabletop domain.
pub const TABLETOP_DOMAIN: &str = include_str!("../../data/tabletop.pddl");

/// The bundled tabletop domain, parsed once.
pub fn tabletop_domain() -> Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN
        .get_or_init(|| parse_domain(TABLETOP_DOMAIN).expect("bundled domain parses"))
        .clone()
}
