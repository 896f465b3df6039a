//! Typed STRIPS domain and problem representation.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// The implicit root of every type hierarchy.
pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Requirement {
    Strips,
    Typing,
    NegativePreconditions,
}

impl Requirement {
    pub fn from_keyword(kw: &str) -> Option<Self> {
        match kw {
            ":strips" => Some(Self::Strips),
            ":typing" => Some(Self::Typing),
            ":negative-preconditions" => Some(Self::NegativePreconditions),
            _ => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Self::Strips => ":strips",
            Self::Typing => ":typing",
            Self::NegativePreconditions => ":negative-preconditions",
        }
    }
}

/// A name with its declared type: a parameter (`?x - item`), an object or a
/// constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Typed {
    pub name: String,
    pub ty: String,
}

impl Typed {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<Typed>,
}

/// A predicate applied to arguments. In action schemas arguments may be
/// variables (`?x`); everywhere else they are object names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<I, S>(predicate: impl Into<String>, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_char(')')
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Self {
            atom,
            positive: false,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub parameters: Vec<Typed>,
    pub precondition: Vec<Literal>,
    pub add: Vec<Atom>,
    pub delete: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<Requirement>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<Typed>,
    pub predicates: Vec<PredicateSchema>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == ROOT_TYPE || self.types.iter().any(|t| t.name == name)
    }

    fn parent_of(&self, name: &str) -> Option<&str> {
        self.types
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.parent.as_str())
    }

    /// `true` when `sub` equals `sup` or inherits from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = sub;
        // Bounded by the number of declared types; cycles are rejected at
        // parse time.
        for _ in 0..=self.types.len() {
            if cur == sup || sup == ROOT_TYPE {
                return true;
            }
            match self.parent_of(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    /// Canonical PDDL text. Parsing it yields a structurally equal domain.
    pub fn to_pddl(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(define (domain {})", self.name);
        if !self.requirements.is_empty() {
            let reqs: Vec<_> = self.requirements.iter().map(|r| r.keyword()).collect();
            let _ = writeln!(s, "  (:requirements {})", reqs.join(" "));
        }
        if !self.types.is_empty() {
            s.push_str("  (:types");
            for t in &self.types {
                let _ = write!(s, " {} - {}", t.name, t.parent);
            }
            s.push_str(")\n");
        }
        if !self.constants.is_empty() {
            let _ = writeln!(s, "  (:constants{})", typed_list(&self.constants));
        }
        if !self.predicates.is_empty() {
            s.push_str("  (:predicates\n");
            for p in &self.predicates {
                let _ = writeln!(s, "    ({}{})", p.name, typed_list(&p.params));
            }
            s.push_str("  )\n");
        }
        for a in &self.actions {
            let _ = writeln!(s, "  (:action {}", a.name);
            let _ = writeln!(s, "    :parameters ({})", typed_list(&a.parameters).trim_start());
            let pre: Vec<String> = a.precondition.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "    :precondition (and {})", pre.join(" "));
            let mut eff: Vec<String> = a.add.iter().map(ToString::to_string).collect();
            eff.extend(a.delete.iter().map(|d| format!("(not {d})")));
            let _ = writeln!(s, "    :effect (and {}))", eff.join(" "));
        }
        s.push_str(")\n");
        s
    }
}

fn typed_list(items: &[Typed]) -> String {
    let mut s = String::new();
    for t in items {
        let _ = write!(s, " {} - {}", t.name, t.ty);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<Typed>,
    pub init: Vec<Atom>,
    pub goal: Vec<Literal>,
}

impl Problem {
    pub fn to_pddl(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(define (problem {})", self.name);
        let _ = writeln!(s, "  (:domain {})", self.domain);
        s.push_str(&fragment_text(&self.objects, &self.init, &self.goal));
        s.push_str(")\n");
        s
    }
}

/// The `(:objects ...) (:init ...) (:goal ...)` body shared by problems and
/// problem fragments.
pub(crate) fn fragment_text(objects: &[Typed], init: &[Atom], goal: &[Literal]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "  (:objects{})", typed_list(objects));
    s.push_str("  (:init");
    for a in init {
        let _ = write!(s, " {a}");
    }
    s.push_str(")\n");
    let goal: Vec<String> = goal.iter().map(ToString::to_string).collect();
    let _ = writeln!(s, "  (:goal (and {}))", goal.join(" "));
    s
}
