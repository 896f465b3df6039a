use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::{Support, WorldState};

/// Default metric tolerance for spatial predicates, meters.
pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialPredicate {
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
    OnTopOf,
    Inside,
    Adjacent,
}

impl SpatialPredicate {
    pub fn name(self) -> &'static str {
        match self {
            Self::LeftOf => "left-of",
            Self::RightOf => "right-of",
            Self::InFrontOf => "in-front-of",
            Self::Behind => "behind",
            Self::OnTopOf => "on-top-of",
            Self::Inside => "inside",
            Self::Adjacent => "adjacent",
        }
    }

    /// Predicates computed from metric poses, as opposed to support edges.
    pub fn is_metric(self) -> bool {
        !matches!(self, Self::OnTopOf | Self::Inside)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub predicate: SpatialPredicate,
    pub subject: String,
    pub object: String,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.predicate.name(), self.subject, self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeSet<Relation>,
    pub tolerance: f64,
}

impl SceneGraph {
    pub fn holds(&self, predicate: SpatialPredicate, subject: &str, object: &str) -> bool {
        self.edges.contains(&Relation {
            predicate,
            subject: subject.into(),
            object: object.into(),
        })
    }
}

/// Centroid and horizontal half extents of one node.
#[derive(Debug, Clone, Copy)]
pub struct Footprint {
    pub x: f64,
    pub y: f64,
    pub hx: f64,
    pub hy: f64,
}

/// The four directional predicates plus adjacency between two footprints.
/// The tolerance applies per axis.
pub fn metric_relations(a: Footprint, b: Footprint, tau: f64) -> Vec<SpatialPredicate> {
    let mut out = Vec::new();
    if a.x < b.x - tau {
        out.push(SpatialPredicate::LeftOf);
    }
    if a.x > b.x + tau {
        out.push(SpatialPredicate::RightOf);
    }
    if a.y < b.y - tau {
        out.push(SpatialPredicate::InFrontOf);
    }
    if a.y > b.y + tau {
        out.push(SpatialPredicate::Behind);
    }
    if out.is_empty() {
        let gap_x = (a.x - b.x).abs() - a.hx - b.hx;
        let gap_y = (a.y - b.y).abs() - a.hy - b.hy;
        if gap_x.max(gap_y).max(0.0) < tau {
            out.push(SpatialPredicate::Adjacent);
        }
    }
    out
}

/// Builds the graph from a list of footprints plus the support edges of `w`.
pub fn graph_from_footprints(w: &WorldState, feet: &[(String, Footprint)], tau: f64) -> SceneGraph {
    assert!(tau > 0.0, "tolerance must be positive");
    let mut edges = BTreeSet::new();
    for (an, a) in feet {
        for (bn, b) in feet {
            if an == bn {
                continue;
            }
            for p in metric_relations(*a, *b, tau) {
                edges.insert(Relation {
                    predicate: p,
                    subject: an.clone(),
                    object: bn.clone(),
                });
            }
        }
    }
    for (n, o) in &w.objects {
        let (p, other) = match &o.support {
            Support::On(b) => (SpatialPredicate::OnTopOf, b),
            Support::In(c) => (SpatialPredicate::Inside, c),
            _ => continue,
        };
        edges.insert(Relation {
            predicate: p,
            subject: n.clone(),
            object: other.clone(),
        });
    }
    SceneGraph {
        nodes: w.objects.keys().cloned().collect(),
        edges,
        tolerance: tau,
    }
}

pub fn derive_scene_graph(w: &WorldState, tau: f64) -> SceneGraph {
    let feet: Vec<_> = w
        .objects
        .iter()
        .map(|(n, o)| {
            (
                n.clone(),
                Footprint {
                    x: o.position[0],
                    y: o.position[1],
                    hx: o.half_extents[0],
                    hy: o.half_extents[1],
                },
            )
        })
        .collect();
    graph_from_footprints(w, &feet, tau)
}
