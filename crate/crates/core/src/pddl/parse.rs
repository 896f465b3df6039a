//! Semantic layer over the S-expression reader: builds and checks
//! [`Domain`] and [`Problem`] values.

use std::collections::{HashMap, HashSet};

use super::ast::{
    ActionSchema, Atom, Domain, Literal, PredicateSchema, Problem, Requirement, TypeDecl, Typed,
    ROOT_TYPE,
};
use super::error::{ParseError, ParseErrorKind as K};
use super::sexpr::{read_one, Pos, SExpr};

type Result<T> = std::result::Result<T, ParseError>;

const DOMAIN_SECTIONS: [&str; 5] = [
    ":requirements",
    ":types",
    ":constants",
    ":predicates",
    ":action",
];
const PROBLEM_SECTIONS: [&str; 5] = [":domain", ":requirements", ":objects", ":init", ":goal"];

fn unexpected(e: &SExpr, expected: &[&str]) -> ParseError {
    ParseError::new(e.pos(), K::UnexpectedToken(e.describe())).expecting(expected.iter().copied())
}

fn list<'a>(e: &'a SExpr, expected: &[&str]) -> Result<&'a [SExpr]> {
    e.as_list().ok_or_else(|| unexpected(e, expected))
}

fn symbol<'a>(e: Option<&'a SExpr>, after: Pos, expected: &[&str]) -> Result<&'a str> {
    match e {
        Some(e) => e.as_symbol().ok_or_else(|| unexpected(e, expected)),
        None => Err(ParseError::new(after, K::UnexpectedEnd).expecting(expected.iter().copied())),
    }
}

fn keyword(e: Option<&SExpr>, after: Pos, kw: &str) -> Result<()> {
    let s = symbol(e, after, &[kw])?;
    if s == kw {
        Ok(())
    } else {
        Err(unexpected(e.unwrap(), &[kw]))
    }
}

/// `(define (<kind> <name>) sections...)` → (name, sections).
fn header<'a>(root: &'a SExpr, kind: &str) -> Result<(String, &'a [SExpr])> {
    let items = list(root, &["("])?;
    keyword(items.first(), root.pos(), "define")?;
    let head = items
        .get(1)
        .ok_or_else(|| ParseError::new(root.pos(), K::UnexpectedEnd).expecting(["("]))?;
    let head_items = list(head, &["("])?;
    keyword(head_items.first(), head.pos(), kind)?;
    let name = symbol(head_items.get(1), head.pos(), &["name"])?;
    if let Some(extra) = head_items.get(2) {
        return Err(unexpected(extra, &[")"]));
    }
    Ok((name.to_string(), &items[2..]))
}

struct TypedEntry {
    name: String,
    name_pos: Pos,
    ty: String,
    ty_pos: Pos,
}

/// Parses `a b - t c - u d`; untyped trailing names default to `object`.
fn typed_list(items: &[SExpr]) -> Result<Vec<TypedEntry>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let e = &items[i];
        let s = e.as_symbol().ok_or_else(|| unexpected(e, &["name", "-"]))?;
        if s == "-" {
            let ty_expr = items.get(i + 1);
            let ty = symbol(ty_expr, e.pos(), &["type name"])?;
            if pending.is_empty() {
                return Err(unexpected(e, &["name"]));
            }
            let ty_pos = ty_expr.unwrap().pos();
            for (name, name_pos) in pending.drain(..) {
                out.push(TypedEntry {
                    name,
                    name_pos,
                    ty: ty.to_string(),
                    ty_pos,
                });
            }
            i += 2;
        } else {
            pending.push((s.to_string(), e.pos()));
            i += 1;
        }
    }
    for (name, name_pos) in pending {
        out.push(TypedEntry {
            name,
            name_pos,
            ty: ROOT_TYPE.to_string(),
            ty_pos: name_pos,
        });
    }
    Ok(out)
}

fn check_type(domain: &Domain, ty: &str, pos: Pos) -> Result<()> {
    if domain.has_type(ty) {
        Ok(())
    } else {
        Err(ParseError::new(pos, K::UndeclaredType(ty.to_string())))
    }
}

/// Parses PDDL domain text restricted to `:strips`, `:typing` and
/// `:negative-preconditions`.
pub fn parse_domain(text: &str) -> Result<Domain> {
    let root = read_one(text)?;
    let (name, sections) = header(&root, "domain")?;
    let mut domain = Domain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };

    // Declarations first so actions may appear anywhere.
    let mut action_sections = Vec::new();
    for section in sections {
        let items = list(section, &DOMAIN_SECTIONS)?;
        let head = symbol(items.first(), section.pos(), &DOMAIN_SECTIONS)?;
        let body = &items[1..];
        match head {
            ":requirements" => {
                for r in body {
                    let kw = r.as_symbol().ok_or_else(|| unexpected(r, &[":strips"]))?;
                    let req = Requirement::from_keyword(kw).ok_or_else(|| {
                        ParseError::new(r.pos(), K::UnknownRequirement(kw.to_string()))
                            .expecting([":strips", ":typing", ":negative-preconditions"])
                    })?;
                    if !domain.requirements.contains(&req) {
                        domain.requirements.push(req);
                    }
                }
            }
            ":types" => parse_types(&mut domain, body)?,
            ":constants" => {
                for entry in typed_list(body)? {
                    if domain.constants.iter().any(|c| c.name == entry.name) {
                        return Err(ParseError::new(
                            entry.name_pos,
                            K::Duplicate {
                                what: "constant",
                                name: entry.name,
                            },
                        ));
                    }
                    domain.constants.push(Typed::new(entry.name, entry.ty));
                }
            }
            ":predicates" => {
                for p in body {
                    let pred = parse_predicate_schema(&domain, p)?;
                    if domain.predicate(&pred.name).is_some() {
                        return Err(ParseError::new(
                            p.pos(),
                            K::Duplicate {
                                what: "predicate",
                                name: pred.name,
                            },
                        ));
                    }
                    domain.predicates.push(pred);
                }
            }
            ":action" => action_sections.push(section),
            _ => return Err(unexpected(&items[0], &DOMAIN_SECTIONS)),
        }
    }
    for c in &domain.constants {
        if !domain.has_type(&c.ty) {
            let pos = sections
                .iter()
                .find(|s| s.head() == Some(":constants"))
                .map(SExpr::pos)
                .unwrap_or_default();
            return Err(ParseError::new(pos, K::UndeclaredType(c.ty.clone())));
        }
    }
    for section in action_sections {
        let action = parse_action(&domain, section)?;
        if domain.action(&action.name).is_some() {
            return Err(ParseError::new(
                section.pos(),
                K::Duplicate {
                    what: "action",
                    name: action.name,
                },
            ));
        }
        domain.actions.push(action);
    }
    Ok(domain)
}

fn parse_types(domain: &mut Domain, body: &[SExpr]) -> Result<()> {
    let entries = typed_list(body)?;
    for e in &entries {
        if e.name == ROOT_TYPE || domain.types.iter().any(|t| t.name == e.name) {
            return Err(ParseError::new(
                e.name_pos,
                K::Duplicate {
                    what: "type",
                    name: e.name.clone(),
                },
            ));
        }
        domain.types.push(TypeDecl {
            name: e.name.clone(),
            parent: e.ty.clone(),
        });
    }
    for e in &entries {
        check_type(domain, &e.ty, e.ty_pos)?;
    }
    // Cycle check: walking parents must reach the root.
    for e in &entries {
        let mut seen = HashSet::new();
        let mut cur = e.name.as_str();
        while cur != ROOT_TYPE {
            if !seen.insert(cur) {
                return Err(ParseError::new(e.name_pos, K::CyclicType(e.name.clone())));
            }
            cur = domain
                .types
                .iter()
                .find(|t| t.name == cur)
                .map(|t| t.parent.as_str())
                .unwrap_or(ROOT_TYPE);
        }
    }
    Ok(())
}

fn parse_predicate_schema(domain: &Domain, e: &SExpr) -> Result<PredicateSchema> {
    let items = list(e, &["("])?;
    let name = symbol(items.first(), e.pos(), &["predicate name"])?;
    let mut params = Vec::new();
    for entry in typed_list(&items[1..])? {
        if !entry.name.starts_with('?') {
            return Err(ParseError::new(
                entry.name_pos,
                K::UnexpectedToken(format!("`{}`", entry.name)),
            )
            .expecting(["?variable"]));
        }
        check_type(domain, &entry.ty, entry.ty_pos)?;
        params.push(Typed::new(entry.name, entry.ty));
    }
    Ok(PredicateSchema {
        name: name.to_string(),
        params,
    })
}

/// Resolves names in atoms to their declared types.
struct Scope<'a> {
    domain: &'a Domain,
    names: HashMap<String, String>,
    /// `true` for action bodies, where `?x` must be a parameter.
    variables: bool,
}

impl<'a> Scope<'a> {
    fn atom(&self, e: &SExpr) -> Result<Atom> {
        let items = list(e, &["("])?;
        let pred = symbol(items.first(), e.pos(), &["predicate name"])?;
        let schema = self
            .domain
            .predicate(pred)
            .ok_or_else(|| ParseError::new(items[0].pos(), K::UndeclaredPredicate(pred.into())))?;
        let args = &items[1..];
        if args.len() != schema.params.len() {
            return Err(ParseError::new(
                e.pos(),
                K::ArityMismatch {
                    predicate: pred.to_string(),
                    expected: schema.params.len(),
                    found: args.len(),
                },
            ));
        }
        let mut out = Vec::with_capacity(args.len());
        for (arg, param) in args.iter().zip(&schema.params) {
            let name = arg.as_symbol().ok_or_else(|| unexpected(arg, &["argument"]))?;
            let ty = match self.names.get(name) {
                Some(ty) => ty,
                None if name.starts_with('?') && self.variables => {
                    return Err(ParseError::new(arg.pos(), K::UndeclaredVariable(name.into())))
                }
                None => return Err(ParseError::new(arg.pos(), K::UnknownObject(name.into()))),
            };
            if !self.domain.is_subtype(ty, &param.ty) {
                return Err(ParseError::new(
                    arg.pos(),
                    K::TypeMismatch {
                        name: name.to_string(),
                        expected: param.ty.clone(),
                        found: ty.clone(),
                    },
                ));
            }
            out.push(name.to_string());
        }
        Ok(Atom {
            predicate: pred.to_string(),
            args: out,
        })
    }

    fn literal(&self, e: &SExpr) -> Result<Literal> {
        if e.head() == Some("not") {
            let items = e.as_list().unwrap();
            if items.len() != 2 {
                return Err(unexpected(e, &["(not <atom>)"]));
            }
            return Ok(Literal::neg(self.atom(&items[1])?));
        }
        Ok(Literal::pos(self.atom(e)?))
    }

    /// A conjunction of literals: `()`, `(and ...)` or a single literal.
    fn conjunction(&self, e: &SExpr, out: &mut Vec<Literal>) -> Result<()> {
        let items = list(e, &["("])?;
        if items.is_empty() {
            return Ok(());
        }
        if e.head() == Some("and") {
            for item in &items[1..] {
                self.conjunction(item, out)?;
            }
            return Ok(());
        }
        if let Some(h) = e.head() {
            if matches!(h, "or" | "imply" | "forall" | "exists" | "when" | "=") {
                return Err(unexpected(&items[0], &["and", "not", "predicate"]));
            }
        }
        let lit = self.literal(e)?;
        if !out.contains(&lit) {
            out.push(lit);
        }
        Ok(())
    }
}

fn parse_action(domain: &Domain, section: &SExpr) -> Result<ActionSchema> {
    let items = section.as_list().unwrap();
    let name = symbol(items.get(1), section.pos(), &["action name"])?.to_string();
    let mut parameters = Vec::new();
    let mut precondition = Vec::new();
    let mut effects = Vec::new();
    let mut precondition_expr = None;
    let mut effect_expr = None;
    let mut i = 2;
    const KEYS: [&str; 3] = [":parameters", ":precondition", ":effect"];
    while i < items.len() {
        let key = symbol(items.get(i), section.pos(), &KEYS)?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| ParseError::new(items[i].pos(), K::UnexpectedEnd).expecting(["("]))?;
        match key {
            ":parameters" => {
                for entry in typed_list(list(value, &["("])?)? {
                    if !entry.name.starts_with('?') {
                        return Err(ParseError::new(
                            entry.name_pos,
                            K::UnexpectedToken(format!("`{}`", entry.name)),
                        )
                        .expecting(["?variable"]));
                    }
                    check_type(domain, &entry.ty, entry.ty_pos)?;
                    if parameters.iter().any(|p: &Typed| p.name == entry.name) {
                        return Err(ParseError::new(
                            entry.name_pos,
                            K::Duplicate {
                                what: "parameter",
                                name: entry.name,
                            },
                        ));
                    }
                    parameters.push(Typed::new(entry.name, entry.ty));
                }
            }
            ":precondition" => precondition_expr = Some(value),
            ":effect" => effect_expr = Some(value),
            _ => return Err(unexpected(&items[i], &KEYS)),
        }
        i += 2;
    }

    let mut names: HashMap<String, String> = domain
        .constants
        .iter()
        .map(|c| (c.name.clone(), c.ty.clone()))
        .collect();
    names.extend(parameters.iter().map(|p| (p.name.clone(), p.ty.clone())));
    let scope = Scope {
        domain,
        names,
        variables: true,
    };
    if let Some(e) = precondition_expr {
        scope.conjunction(e, &mut precondition)?;
    }
    if let Some(e) = effect_expr {
        scope.conjunction(e, &mut effects)?;
    }
    let add: Vec<Atom> = effects
        .iter()
        .filter(|l| l.positive)
        .map(|l| l.atom.clone())
        .collect();
    let delete: Vec<Atom> = effects
        .iter()
        .filter(|l| !l.positive)
        .map(|l| l.atom.clone())
        .collect();
    if let Some(a) = add.iter().find(|a| delete.contains(a)) {
        return Err(ParseError::new(
            effect_expr.map(SExpr::pos).unwrap_or_default(),
            K::AddDeleteOverlap(a.to_string()),
        ));
    }
    Ok(ActionSchema {
        name,
        parameters,
        precondition,
        add,
        delete,
    })
}

/// Objects, initial atoms and goal of a problem or problem fragment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemBody {
    pub objects: Vec<Typed>,
    pub init: Vec<Atom>,
    pub goal: Vec<Literal>,
}

/// Parses `(:objects ...)`, `(:init ...)` and `(:goal ...)` sections. Names in
/// `known` (plus the domain's constants) may be referenced without being
/// declared in `:objects`.
pub(crate) fn parse_body(
    domain: &Domain,
    sections: &[SExpr],
    known: &[Typed],
) -> Result<ProblemBody> {
    let mut body = ProblemBody::default();
    let mut names: HashMap<String, String> = HashMap::new();
    for t in domain.constants.iter().chain(known) {
        names.insert(t.name.clone(), t.ty.clone());
    }
    let mut init_exprs = Vec::new();
    let mut goal_expr = None;
    for section in sections {
        let items = list(section, &[":objects", ":init", ":goal"])?;
        let head = symbol(items.first(), section.pos(), &[":objects", ":init", ":goal"])?;
        match head {
            ":objects" => {
                for entry in typed_list(&items[1..])? {
                    check_type(domain, &entry.ty, entry.ty_pos)?;
                    if names.contains_key(&entry.name)
                        || body.objects.iter().any(|o| o.name == entry.name)
                    {
                        return Err(ParseError::new(
                            entry.name_pos,
                            K::Duplicate {
                                what: "object",
                                name: entry.name,
                            },
                        ));
                    }
                    body.objects.push(Typed::new(entry.name, entry.ty));
                }
            }
            ":init" => init_exprs.extend(&items[1..]),
            ":goal" => {
                if items.len() > 2 {
                    return Err(unexpected(&items[2], &[")"]));
                }
                goal_expr = items.get(1);
            }
            _ => return Err(unexpected(&items[0], &[":objects", ":init", ":goal"])),
        }
    }
    for o in &body.objects {
        names.insert(o.name.clone(), o.ty.clone());
    }
    let scope = Scope {
        domain,
        names,
        variables: false,
    };
    for e in init_exprs {
        if e.head() == Some("not") {
            return Err(unexpected(e, &["ground atom"]));
        }
        let atom = scope.atom(e)?;
        if !body.init.contains(&atom) {
            body.init.push(atom);
        }
    }
    if let Some(g) = goal_expr {
        scope.conjunction(g, &mut body.goal)?;
    }
    Ok(body)
}

/// Parses a problem and checks every atom against `domain`.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem> {
    let root = read_one(text)?;
    let (name, sections) = header(&root, "problem")?;
    let mut domain_name = None;
    let mut rest = Vec::new();
    for section in sections {
        let items = list(section, &PROBLEM_SECTIONS)?;
        match items.first().and_then(SExpr::as_symbol) {
            Some(":domain") => {
                let d = symbol(items.get(1), section.pos(), &["domain name"])?;
                if d != domain.name {
                    return Err(ParseError::new(
                        items[1].pos(),
                        K::DomainMismatch {
                            expected: domain.name.clone(),
                            found: d.to_string(),
                        },
                    ));
                }
                domain_name = Some(d.to_string());
            }
            Some(":requirements") => {
                for r in &items[1..] {
                    let kw = r.as_symbol().ok_or_else(|| unexpected(r, &[":strips"]))?;
                    if Requirement::from_keyword(kw).is_none() {
                        return Err(ParseError::new(
                            r.pos(),
                            K::UnknownRequirement(kw.to_string()),
                        ));
                    }
                }
            }
            Some(":objects" | ":init" | ":goal") => rest.push(section.clone()),
            _ => {
                return Err(match items.first() {
                    Some(h) => unexpected(h, &PROBLEM_SECTIONS),
                    None => unexpected(section, &PROBLEM_SECTIONS),
                })
            }
        }
    }
    let domain_name = domain_name.ok_or_else(|| {
        ParseError::new(root.pos(), K::UnexpectedEnd).expecting([":domain"])
    })?;
    let body = parse_body(domain, &rest, &[])?;
    Ok(Problem {
        name,
        domain: domain_name,
        objects: body.objects,
        init: body.init,
        goal: body.goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::tabletop_domain;

    #[test]
    fn minimal_domain() {
        let d = parse_domain("(define (domain d))").unwrap();
        assert_eq!(d.name, "d");
        assert!(d.types.is_empty() && d.predicates.is_empty() && d.actions.is_empty());
    }

    #[test]
    fn undeclared_parameter_type() {
        let err = parse_domain("(define (domain d) (:action a :parameters (?x - blob)))").unwrap_err();
        assert_eq!(err.kind, K::UndeclaredType("blob".into()));
        assert_eq!((err.line, err.column), (1, 49));
    }

    #[test]
    fn unknown_requirement() {
        let err = parse_domain("(define (domain d) (:requirements :strips :fluents))").unwrap_err();
        assert_eq!(err.kind, K::UnknownRequirement(":fluents".into()));
        assert!(err.expected.contains(&":typing".to_string()));
    }

    #[test]
    fn undeclared_predicate_in_action() {
        let err = parse_domain(
            "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (q ?x)))",
        )
        .unwrap_err();
        assert_eq!(err.kind, K::UndeclaredPredicate("q".into()));
    }

    #[test]
    fn arity_mismatch() {
        let err = parse_domain(
            "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x ?y) :effect (p ?x ?y)))",
        )
        .unwrap_err();
        assert!(matches!(err.kind, K::ArityMismatch { expected: 1, found: 2, .. }));
    }

    #[test]
    fn variable_must_be_a_parameter() {
        let err = parse_domain(
            "(define (domain d) (:predicates (p ?x)) (:action a :parameters () :effect (p ?z)))",
        )
        .unwrap_err();
        assert_eq!(err.kind, K::UndeclaredVariable("?z".into()));
    }

    #[test]
    fn add_delete_overlap_is_rejected() {
        let err = parse_domain(
            "(define (domain d) (:predicates (p)) (:action a :effect (and (p) (not (p)))))",
        )
        .unwrap_err();
        assert_eq!(err.kind, K::AddDeleteOverlap("(p)".into()));
    }

    #[test]
    fn quantifiers_are_outside_the_subset() {
        let err = parse_domain(
            "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (or (p ?x) (p ?x))))",
        )
        .unwrap_err();
        assert!(matches!(err.kind, K::UnexpectedToken(_)));
    }

    #[test]
    fn tabletop_domain_shape() {
        let d = tabletop_domain();
        let names: Vec<_> = d.actions.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["pick-up", "put-down", "stack", "unstack", "place-in"]);
        assert_eq!(
            d.types,
            vec![
                TypeDecl { name: "item".into(), parent: "object".into() },
                TypeDecl { name: "container".into(), parent: "object".into() },
            ]
        );
        let preds: Vec<_> = d.predicates.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(preds, ["on", "on-table", "clear", "holding", "gripper-empty", "in"]);
    }

    #[test]
    fn tabletop_stack_schema_matches_hand_expansion() {
        let d = tabletop_domain();
        let stack = d.action("stack").unwrap();
        let expected = ActionSchema {
            name: "stack".into(),
            parameters: vec![Typed::new("?x", "item"), Typed::new("?y", "item")],
            precondition: vec![
                Literal::pos(Atom::new("holding", ["?x"])),
                Literal::pos(Atom::new("clear", ["?y"])),
            ],
            add: vec![
                Atom::new("on", ["?x", "?y"]),
                Atom::new("clear", ["?x"]),
                Atom::new("gripper-empty", Vec::<String>::new()),
            ],
            delete: vec![Atom::new("holding", ["?x"]), Atom::new("clear", ["?y"])],
        };
        assert_eq!(stack, &expected);
    }

    const PROBLEM: &str = "(define (problem p1) (:domain tabletop)
        (:objects red_cube blue_cube - item)
        (:init (on-table red_cube) (on-table blue_cube) (clear red_cube) (clear blue_cube) (gripper-empty))
        (:goal (on red_cube blue_cube)))";

    #[test]
    fn problem_with_single_goal() {
        let p = parse_problem(PROBLEM, &tabletop_domain()).unwrap();
        assert_eq!(p.goal, vec![Literal::pos(Atom::new("on", ["red_cube", "blue_cube"]))]);
        assert_eq!(p.init.len(), 5);
    }

    #[test]
    fn unknown_goal_object() {
        let text = PROBLEM.replace("(on red_cube blue_cube)", "(on red_cube ghost)");
        let err = parse_problem(&text, &tabletop_domain()).unwrap_err();
        assert_eq!(err.kind, K::UnknownObject("ghost".into()));
    }

    #[test]
    fn empty_init_and_goal() {
        let p = parse_problem(
            "(define (problem e) (:domain tabletop) (:objects) (:init) (:goal (and)))",
            &tabletop_domain(),
        )
        .unwrap();
        assert!(p.init.is_empty() && p.goal.is_empty() && p.objects.is_empty());
    }

    #[test]
    fn goal_type_mismatch() {
        let text = "(define (problem p) (:domain tabletop) (:objects a - item b - container)
            (:goal (on a b)))";
        let err = parse_problem(text, &tabletop_domain()).unwrap_err();
        assert!(matches!(err.kind, K::TypeMismatch { .. }));
    }

    #[test]
    fn problem_for_other_domain() {
        let err = parse_problem("(define (problem p) (:domain other))", &tabletop_domain())
            .unwrap_err();
        assert!(matches!(err.kind, K::DomainMismatch { .. }));
    }

    #[test]
    fn printed_domain_reparses() {
        let d = tabletop_domain();
        assert_eq!(parse_domain(&d.to_pddl()).unwrap(), d);
    }
}
