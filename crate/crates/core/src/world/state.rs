use std::collections::{BTreeMap, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::pddl::{Atom, Typed};

/// Object classes that hold items rather than being grasped.
pub const CONTAINER_CLASSES: [&str; 5] = ["bin", "container", "shelf", "holder", "tray"];

pub fn is_container_class(class: &str) -> bool {
    CONTAINER_CLASSES.contains(&class)
}

/// Workspace extent on the table, in meters (world frame).
pub const TABLE_X: (f64, f64) = (-0.3, 0.3);
pub const TABLE_Y: (f64, f64) = (0.2, 0.6);

/// Fixed arm targets standing in for motion-planner pose goals.
pub const NAMED_LOCATIONS: [(&str, [f64; 3]); 4] = [
    ("home", [0.0, 0.1, 0.4]),
    ("scanning-position", [0.0, 0.4, 0.45]),
    ("bin", [0.25, 0.55, 0.3]),
    ("table", [0.0, 0.4, 0.15]),
];

pub fn named_location(name: &str) -> Option<[f64; 3]> {
    NAMED_LOCATIONS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| *p)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    Table,
    On(String),
    Held,
    In(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub class: String,
    pub color: String,
    /// Centroid, meters.
    pub position: [f64; 3],
    pub half_extents: [f64; 3],
    pub support: Support,
}

impl WorldObject {
    pub fn is_container(&self) -> bool {
        is_container_class(&self.class)
    }

    pub fn pddl_type(&self) -> &'static str {
        if self.is_container() {
            "container"
        } else {
            "item"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmLocation {
    Named(String),
    Pose([f64; 3]),
}

impl ArmLocation {
    pub fn position(&self) -> [f64; 3] {
        match self {
            ArmLocation::Named(n) => named_location(n).unwrap_or(NAMED_LOCATIONS[0].1),
            ArmLocation::Pose(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub gripper_open: bool,
    pub held: Option<String>,
    pub arm: ArmLocation,
}

impl Default for RobotState {
    fn default() -> Self {
        Self {
            gripper_open: true,
            held: None,
            arm: ArmLocation::Named("home".into()),
        }
    }
}

pub const DEFAULT_TICK_MS: u32 = 50;

/// Ground truth of the simulated tabletop.
///
/// `tick` counts elapsed simulation ticks; `revision` counts physical
/// changes (effects, arm motion) and is what the safety checks audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<String, WorldObject>,
    pub robot: RobotState,
    pub tick: u64,
    pub tick_ms: u32,
    #[serde(default)]
    pub revision: u64,
}

impl Default for WorldState {
    fn default() -> Self {
        Self {
            objects: BTreeMap::new(),
            robot: RobotState::default(),
            tick: 0,
            tick_ms: DEFAULT_TICK_MS,
            revision: 0,
        }
    }
}

fn hash_f64<H: Hasher>(v: f64, h: &mut H) {
    v.to_bits().hash(h);
}

impl WorldState {
    pub fn object(&self, name: &str) -> Option<&WorldObject> {
        self.objects.get(name)
    }

    /// Objects resting directly on `name`.
    pub fn stacked_on<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects.iter().filter_map(move |(n, o)| match &o.support {
            Support::On(b) if b == name => Some(n.as_str()),
            _ => None,
        })
    }

    /// Objects above `name` in its stack, topmost first.
    pub fn blockers(&self, name: &str) -> Vec<String> {
        let mut chain: Vec<String> = Vec::new();
        let mut cur = name;
        while let Some(top) = self.stacked_on(cur).next() {
            chain.push(top.to_string());
            cur = top;
        }
        chain.reverse();
        chain
    }

    pub fn is_clear(&self, name: &str) -> bool {
        self.stacked_on(name).next().is_none()
    }

    /// PDDL objects for the tabletop domain, sorted by name.
    pub fn typed_objects(&self) -> Vec<Typed> {
        self.objects
            .iter()
            .map(|(n, o)| Typed::new(n.clone(), o.pddl_type()))
            .collect()
    }

    /// Closed-world symbolic abstraction over the tabletop predicates, sorted.
    pub fn abstraction(&self) -> Vec<Atom> {
        let mut atoms = Vec::new();
        for (name, o) in &self.objects {
            if o.is_container() {
                continue;
            }
            match &o.support {
                Support::Table => atoms.push(Atom::new("on-table", [name.as_str()])),
                Support::On(b) => atoms.push(Atom::new("on", [name.as_str(), b.as_str()])),
                Support::In(c) => atoms.push(Atom::new("in", [name.as_str(), c.as_str()])),
                Support::Held => atoms.push(Atom::new("holding", [name.as_str()])),
            }
            if matches!(o.support, Support::Table | Support::On(_)) && self.is_clear(name) {
                atoms.push(Atom::new("clear", [name.as_str()]));
            }
        }
        if self.robot.held.is_none() {
            atoms.push(Atom::new("gripper-empty", Vec::<String>::new()));
        }
        atoms.sort();
        atoms
    }

    /// Hash of the abstraction only.
    pub fn abstraction_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.abstraction().hash(&mut h);
        h.finish()
    }

    /// Hash of everything physical: objects, poses and robot state.
    /// Excludes the clock and the revision counter.
    pub fn physical_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (n, o) in &self.objects {
            n.hash(&mut h);
            o.class.hash(&mut h);
            o.color.hash(&mut h);
            o.position.iter().for_each(|v| hash_f64(*v, &mut h));
            o.half_extents.iter().for_each(|v| hash_f64(*v, &mut h));
            o.support.hash(&mut h);
        }
        self.robot.gripper_open.hash(&mut h);
        self.robot.held.hash(&mut h);
        match &self.robot.arm {
            ArmLocation::Named(n) => n.hash(&mut h),
            ArmLocation::Pose(p) => p.iter().for_each(|v| hash_f64(*v, &mut h)),
        }
        h.finish()
    }

    pub(crate) fn touch(&mut self) {
        self.revision += 1;
    }

    /// Recomputes positions implied by supports: table objects rest on the
    /// surface, stacked objects sit centred on their support, contained
    /// objects sit on the container floor and held objects follow the arm.
    pub fn settle(&mut self) {
        let names: Vec<String> = self.objects.keys().cloned().collect();
        let mut done = HashSet::new();
        for n in &names {
            self.settle_one(n, &mut done, 0);
        }
    }

    fn settle_one(&mut self, name: &str, done: &mut HashSet<String>, depth: usize) {
        if done.contains(name) || depth > self.objects.len() {
            return;
        }
        let support = self.objects[name].support.clone();
        let he = self.objects[name].half_extents;
        let pos = match &support {
            Support::Table => {
                let p = self.objects[name].position;
                [p[0], p[1], he[2]]
            }
            Support::On(b) | Support::In(b) => {
                self.settle_one(b, done, depth + 1);
                let base = &self.objects[b];
                let (bp, bh) = (base.position, base.half_extents);
                let z = if matches!(support, Support::On(_)) {
                    bp[2] + bh[2] + he[2]
                } else {
                    bp[2] - bh[2] + he[2]
                };
                [bp[0], bp[1], z]
            }
            Support::Held => self.robot.arm.position(),
        };
        self.objects.get_mut(name).unwrap().position = pos;
        done.insert(name.to_string());
    }

    /// Checks the structural invariants: at most one held object, held
    /// object consistent with the robot, acyclic supports referring to
    /// existing objects of the right kind, finite positions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<_> = self
            .objects
            .iter()
            .filter(|(_, o)| o.support == Support::Held)
            .map(|(n, _)| n.clone())
            .collect();
        if held.len() > 1 {
            return Err(format!("more than one held object: {held:?}"));
        }
        if held.first() != self.robot.held.as_ref() {
            return Err(format!(
                "robot holds {:?} but objects marked held are {held:?}",
                self.robot.held
            ));
        }
        for (n, o) in &self.objects {
            if o.position.iter().chain(&o.half_extents).any(|v| !v.is_finite()) {
                return Err(format!("{n} has a non-finite position or extent"));
            }
            match &o.support {
                Support::On(b) => match self.objects.get(b) {
                    Some(base) if !base.is_container() && !o.is_container() => {}
                    Some(_) => return Err(format!("{n} stacked on container or is a container")),
                    None => return Err(format!("{n} rests on unknown object {b}")),
                },
                Support::In(c) => match self.objects.get(c) {
                    Some(base) if base.is_container() && !o.is_container() => {}
                    _ => return Err(format!("{n} is inside {c}, which is not a container")),
                },
                Support::Held if o.is_container() => {
                    return Err(format!("container {n} cannot be held"))
                }
                _ => {}
            }
            if self.stacked_on(n).count() > 1 {
                return Err(format!("more than one object rests on {n}"));
            }
            let mut seen = HashSet::new();
            let mut cur = n.as_str();
            while let Some(Support::On(b) | Support::In(b)) = self.objects.get(cur).map(|o| &o.support) {
                if !seen.insert(cur) {
                    return Err(format!("support cycle through {n}"));
                }
                cur = b;
            }
        }
        Ok(())
    }

    /// First free spot on the table (row-major scan, 2 cm grid) for an object
    /// with the given half extents, ignoring `skip`.
    pub fn free_table_spot(&self, half_extents: [f64; 3], skip: &str) -> Option<[f64; 2]> {
        const STEP: f64 = 0.02;
        const MARGIN: f64 = 0.01;
        let nx = ((TABLE_X.1 - TABLE_X.0) / STEP).round() as i32;
        let ny = ((TABLE_Y.1 - TABLE_Y.0) / STEP).round() as i32;
        for j in 0..=ny {
            for i in 0..=nx {
                let x = TABLE_X.0 + half_extents[0] + i as f64 * STEP;
                let y = TABLE_Y.0 + half_extents[1] + j as f64 * STEP;
                if x + half_extents[0] > TABLE_X.1 + 1e-9 || y + half_extents[1] > TABLE_Y.1 + 1e-9 {
                    continue;
                }
                let free = self.objects.iter().all(|(n, o)| {
                    n == skip
                        || o.support != Support::Table
                        || (x - o.position[0]).abs() >= half_extents[0] + o.half_extents[0] + MARGIN
                        || (y - o.position[1]).abs() >= half_extents[1] + o.half_extents[1] + MARGIN
                });
                if free {
                    return Some([x, y]);
                }
            }
        }
        None
    }
}
