use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::sexpr::{read_one, SExpr};
use crate::pddl::Atom;
use crate::world::{bundled_scene, spawn_scene, SceneSpec, WorldState};

const BUNDLED_SUITE: &str = include_str!("../../data/tasks.yaml");

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed suite: {0}")]
    Yaml(#[from] serde_yaml::Error),
    #[error("task {task}: {message}")]
    Invalid { task: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    /// Bundled scene name, or a scene file path relative to the suite file.
    pub scene: String,
    pub sentence: String,
    /// Atoms that must hold at the end, e.g. `(in cup container)`.
    pub goal: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub tasks: Vec<Task>,
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

pub fn parse_atom(text: &str) -> Result<Atom, String> {
    let e = read_one(text).map_err(|e| e.to_string())?;
    let items = e.as_list().ok_or_else(|| format!("{text:?} is not a list"))?;
    let syms: Option<Vec<&str>> = items.iter().map(SExpr::as_symbol).collect();
    match syms.as_deref() {
        Some([pred, args @ ..]) => Ok(Atom::new(pred.to_lowercase(), args.iter().map(|a| a.to_lowercase()))),
        _ => Err(format!("{text:?} is not a flat atom")),
    }
}

impl Suite {
    pub fn parse(text: &str) -> Result<Self, SuiteError> {
        let suite: Suite = serde_yaml::from_str(text)?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, SuiteError> {
        let text = std::fs::read_to_string(path).map_err(|source| SuiteError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut suite: Suite = serde_yaml::from_str(&text)?;
        suite.base = path.parent().map(Path::to_path_buf);
        suite.validate()?;
        Ok(suite)
    }

    /// The 13-task tabletop suite.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SUITE).expect("bundled suite is valid")
    }

    pub fn scene_spec(&self, task: &Task) -> Result<SceneSpec, SuiteError> {
        let invalid = |message: String| SuiteError::Invalid {
            task: task.id.clone(),
            message,
        };
        if let Ok(spec) = bundled_scene(&task.scene) {
            return Ok(spec);
        }
        let path = self.base.as_deref().unwrap_or(Path::new(".")).join(&task.scene);
        SceneSpec::load(&path).map_err(|e| invalid(e.to_string()))
    }

    pub fn world(&self, task: &Task) -> Result<WorldState, SuiteError> {
        let spec = self.scene_spec(task)?;
        spawn_scene(&spec).map_err(|e| SuiteError::Invalid {
            task: task.id.clone(),
            message: e.to_string(),
        })
    }

    fn validate(&self) -> Result<(), SuiteError> {
        let mut ids = BTreeSet::new();
        for task in &self.tasks {
            let invalid = |message: String| SuiteError::Invalid {
                task: task.id.clone(),
                message,
            };
            if !ids.insert(task.id.as_str()) {
                return Err(invalid("duplicate task id".into()));
            }
            if task.goal.is_empty() {
                return Err(invalid("empty goal".into()));
            }
            let world = self.world(task)?;
            for g in task.goal_atoms().map_err(invalid)? {
                if let Some(x) = g.args.iter().find(|a| !world.objects.contains_key(*a)) {
                    return Err(invalid(format!("goal {g} names {x}, which is not in scene {}", task.scene)));
                }
            }
        }
        Ok(())
    }
}

impl Task {
    pub fn goal_atoms(&self) -> Result<Vec<Atom>, String> {
        self.goal.iter().map(|g| parse_atom(g)).collect()
    }

    /// Whether every goal atom holds in `w`.
    pub fn satisfied(&self, w: &WorldState) -> bool {
        let now = w.abstraction();
        self.goal_atoms().is_ok_and(|g| g.iter().all(|a| now.contains(a)))
    }
}
