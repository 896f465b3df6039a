use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::camera::Camera;
use super::observe::NoiseModel;
use super::state::{is_container_class, RobotState, Support, WorldObject, WorldState, DEFAULT_TICK_MS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid scene file: {0}")]
    Format(String),
    #[error("duplicate object name {0:?}")]
    DuplicateName(String),
    #[error("object name {0:?} is not a lowercase identifier")]
    BadName(String),
    #[error("footprints of {0} and {1} overlap")]
    Overlap(String, String),
    #[error("{0}")]
    Inconsistent(String),
    #[error("unknown bundled scene {0:?}")]
    UnknownScene(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub class: String,
    pub color: String,
    pub position: [f64; 3],
    pub half_extents: [f64; 3],
    pub support: Support,
}

/// On-disk scene description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub robot: Option<RobotState>,
    #[serde(default)]
    pub camera: Option<Camera>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub tick_ms: Option<u32>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Format(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn camera(&self) -> Camera {
        self.camera.unwrap_or_default()
    }

    /// Snapshot of an existing world, e.g. to persist a randomized scene.
    pub fn from_world(name: &str, w: &WorldState) -> Self {
        Self {
            name: name.into(),
            objects: w
                .objects
                .iter()
                .map(|(n, o)| ObjectSpec {
                    name: n.clone(),
                    class: o.class.clone(),
                    color: o.color.clone(),
                    position: o.position,
                    half_extents: o.half_extents,
                    support: o.support.clone(),
                })
                .collect(),
            robot: Some(w.robot.clone()),
            camera: None,
            noise: None,
            tick_ms: Some(w.tick_ms),
        }
    }
}

pub const BUNDLED_SCENES: [(&str, &str); 5] = [
    ("scene_1", include_str!("../../data/scenes/scene_1.json")),
    ("scene_2", include_str!("../../data/scenes/scene_2.json")),
    ("scene_3", include_str!("../../data/scenes/scene_3.json")),
    ("scene_4", include_str!("../../data/scenes/scene_4.json")),
    ("scene_5", include_str!("../../data/scenes/scene_5.json")),
];

pub fn bundled_scene(name: &str) -> Result<SceneSpec, SceneError> {
    let (_, text) = BUNDLED_SCENES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SceneError::UnknownScene(name.into()))?;
    SceneSpec::from_json(text)
}

fn valid_name(n: &str) -> bool {
    let mut cs = n.chars();
    cs.next().is_some_and(|c| c.is_ascii_lowercase())
        && cs.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
        && n != "table"
}

pub fn spawn_scene(spec: &SceneSpec) -> Result<WorldState, SceneError> {
    let mut w = WorldState {
        robot: spec.robot.clone().unwrap_or_default(),
        tick_ms: spec.tick_ms.unwrap_or(DEFAULT_TICK_MS),
        ..WorldState::default()
    };
    if w.tick_ms == 0 {
        return Err(SceneError::Inconsistent("tick duration must be positive".into()));
    }
    let mut seen = HashSet::new();
    for o in &spec.objects {
        if !valid_name(&o.name) {
            return Err(SceneError::BadName(o.name.clone()));
        }
        if !seen.insert(o.name.as_str()) {
            return Err(SceneError::DuplicateName(o.name.clone()));
        }
        if o.half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(SceneError::Inconsistent(format!("{} needs positive extents", o.name)));
        }
        if is_container_class(&o.class) && o.support != Support::Table {
            return Err(SceneError::Inconsistent(format!("container {} must rest on the table", o.name)));
        }
        w.objects.insert(
            o.name.clone(),
            WorldObject {
                class: o.class.clone(),
                color: o.color.clone(),
                position: o.position,
                half_extents: o.half_extents,
                support: o.support.clone(),
            },
        );
    }
    let on_table: Vec<_> = spec.objects.iter().filter(|o| o.support == Support::Table).collect();
    for (i, a) in on_table.iter().enumerate() {
        for b in &on_table[i + 1..] {
            if (a.position[0] - b.position[0]).abs() < a.half_extents[0] + b.half_extents[0]
                && (a.position[1] - b.position[1]).abs() < a.half_extents[1] + b.half_extents[1]
            {
                return Err(SceneError::Overlap(a.name.clone(), b.name.clone()));
            }
        }
    }
    w.check_invariants().map_err(SceneError::Inconsistent)?;
    w.settle();
    Ok(w)
}

const CLASSES: [&str; 3] = ["cube", "block", "cylinder"];
const COLORS: [&str; 6] = ["red", "green", "blue", "yellow", "black", "white"];

/// Random scene with `n` items on a jittered 10 cm grid; roughly a third
/// are stacked on an earlier clear item. Deterministic per seed.
pub fn spawn_random(seed: u64, n: usize) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<(f64, f64)> = (0..6)
        .flat_map(|i| (0..4).map(move |j| (-0.25 + i as f64 * 0.1, 0.25 + j as f64 * 0.1)))
        .collect();
    let mut specs: Vec<ObjectSpec> = Vec::new();
    let mut clear: Vec<String> = Vec::new();
    for k in 0..n {
        let class = *CLASSES.choose(&mut rng).unwrap();
        let color = *COLORS.choose(&mut rng).unwrap();
        let name = format!("{color}_{class}_{k}");
        let stack = !clear.is_empty() && (cells.is_empty() || rng.random_bool(0.33));
        let (support, position) = if stack {
            let base = clear.swap_remove(rng.random_range(0..clear.len()));
            (Support::On(base), [0.0; 3])
        } else {
            assert!(!cells.is_empty(), "too many objects for the table grid");
            let (x, y) = cells.swap_remove(rng.random_range(0..cells.len()));
            let jx = rng.random_range(-0.02..0.02);
            let jy = rng.random_range(-0.02..0.02);
            (Support::Table, [x + jx, y + jy, 0.0])
        };
        clear.push(name.clone());
        specs.push(ObjectSpec {
            name,
            class: class.into(),
            color: color.into(),
            position,
            half_extents: [0.02; 3],
            support,
        });
    }
    let spec = SceneSpec {
        name: format!("random_{seed}"),
        objects: specs,
        ..SceneSpec::default()
    };
    spawn_scene(&spec).expect("random scenes are valid by construction")
}
