use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{bootstrap_ci, mix};
use crate::world::{
    bundled_scene, metric_relations, spawn_scene, synth_observation, CameraError, Footprint, NoiseModel, SceneSpec,
    SpatialPredicate, DEFAULT_TOLERANCE,
};

const METRIC: [SpatialPredicate; 5] = [
    SpatialPredicate::LeftOf,
    SpatialPredicate::RightOf,
    SpatialPredicate::InFrontOf,
    SpatialPredicate::Behind,
    SpatialPredicate::Adjacent,
];

/// Externally measured figures for the noisy regime, for orientation.
pub const REFERENCE_ACCURACY: f64 = 0.980;
pub const REFERENCE_RMSE_M: f64 = 0.054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub scenes: Vec<String>,
    /// (σ pixel, σ depth in meters) per level.
    pub levels: Vec<(f64, f64)>,
    /// Noise draws per scene and level.
    pub repeats: u32,
    /// Spatial-predicate tolerance, meters.
    pub tau: f64,
    /// Position tolerance for a recovered point to count as correct, meters.
    pub tolerance: f64,
    pub seed: u64,
    pub bootstrap: usize,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            scenes: (1..=5).map(|i| format!("scene_{i}")).collect(),
            levels: vec![(0.0, 0.0), (1.0, 0.005), (2.0, 0.01), (4.0, 0.02)],
            repeats: 20,
            tau: DEFAULT_TOLERANCE,
            tolerance: 0.02,
            seed: 2024,
            bootstrap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecovery {
    pub name: String,
    pub truth: [f64; 3],
    pub recovered: [f64; 3],
    pub error: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionTrial {
    pub scene: String,
    pub noise: NoiseModel,
    pub objects: Vec<ObjectRecovery>,
    pub predicates: Confusion,
}

/// Observes a scene through the noisy camera, inverts every observation and
/// compares positions and metric predicates with ground truth.
pub fn perception_trial(spec: &SceneSpec, noise: NoiseModel, tau: f64) -> Result<PerceptionTrial, CameraError> {
    let world = spawn_scene(spec).expect("scene spawns");
    let camera = spec.camera();
    let obs = synth_observation(&world, &camera, &noise)?;
    let mut objects = Vec::with_capacity(obs.len());
    for o in &obs {
        let truth = world.objects[&o.name].position;
        let recovered = camera.recover(o.pixel)?.to_array();
        let error = truth.iter().zip(&recovered).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        objects.push(ObjectRecovery {
            name: o.name.clone(),
            truth,
            recovered,
            error,
        });
    }
    assert_eq!(objects.len(), spec.objects.len(), "one observation per object");
    let foot = |name: &str, p: [f64; 3]| {
        let he = world.objects[name].half_extents;
        Footprint {
            x: p[0],
            y: p[1],
            hx: he[0],
            hy: he[1],
        }
    };
    let mut predicates = Confusion::default();
    for a in &objects {
        for b in &objects {
            if a.name == b.name {
                continue;
            }
            let want = metric_relations(foot(&a.name, a.truth), foot(&b.name, b.truth), tau);
            let got = metric_relations(foot(&a.name, a.recovered), foot(&b.name, b.recovered), tau);
            for p in METRIC {
                match (want.contains(&p), got.contains(&p)) {
                    (true, true) => predicates.tp += 1,
                    (false, true) => predicates.fp += 1,
                    (true, false) => predicates.fn_ += 1,
                    (false, false) => predicates.tn += 1,
                }
            }
        }
    }
    Ok(PerceptionTrial {
        scene: spec.name.clone(),
        noise,
        objects,
        predicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMetrics {
    pub sigma_px: f64,
    pub sigma_d: f64,
    pub trials: usize,
    pub points: usize,
    /// Correct predicate checks plus in-tolerance positions, over all checks.
    pub spatial_accuracy: f64,
    pub position_accuracy: f64,
    pub predicate_accuracy: f64,
    pub predicates: Confusion,
    pub rmse: f64,
    pub rmse_ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerceptionReport {
    pub config: PerceptionConfig,
    pub levels: Vec<LevelMetrics>,
    pub trials: Vec<PerceptionTrial>,
}

fn rmse(sq: &[f64]) -> f64 {
    (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()
}

/// Runs the noise grid. Within a scene and repeat, every level reuses one
/// noise seed, so levels differ only in scale.
pub fn run_perception_eval(cfg: &PerceptionConfig) -> Result<PerceptionReport, CameraError> {
    let specs: Vec<SceneSpec> = cfg
        .scenes
        .iter()
        .map(|s| bundled_scene(s).expect("bundled scene"))
        .collect();
    let mut jobs = Vec::new();
    for (li, &(px, d)) in cfg.levels.iter().enumerate() {
        for (si, spec) in specs.iter().enumerate() {
            for r in 0..cfg.repeats {
                let seed = mix(cfg.seed, ((si as u64) << 32) | u64::from(r));
                jobs.push((li, spec, NoiseModel::new(px, d, seed)));
            }
        }
    }
    let trials: Vec<(usize, PerceptionTrial)> = jobs
        .par_iter()
        .map(|(li, spec, noise)| perception_trial(spec, *noise, cfg.tau).map(|t| (*li, t)))
        .collect::<Result<_, _>>()?;
    let levels = cfg
        .levels
        .iter()
        .enumerate()
        .map(|(li, &(sigma_px, sigma_d))| {
            let ts: Vec<&PerceptionTrial> = trials.iter().filter(|(l, _)| *l == li).map(|(_, t)| t).collect();
            let errors: Vec<f64> = ts.iter().flat_map(|t| t.objects.iter().map(|o| o.error)).collect();
            let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
            let mut predicates = Confusion::default();
            for t in &ts {
                predicates.add(&t.predicates);
            }
            let within = errors.iter().filter(|e| **e <= cfg.tolerance).count();
            let checks = predicates.total() as usize + errors.len();
            LevelMetrics {
                sigma_px,
                sigma_d,
                trials: ts.len(),
                points: errors.len(),
                spatial_accuracy: (predicates.correct() as usize + within) as f64 / checks as f64,
                position_accuracy: within as f64 / errors.len() as f64,
                predicate_accuracy: predicates.correct() as f64 / predicates.total() as f64,
                predicates,
                rmse: rmse(&sq),
                rmse_ci: bootstrap_ci(&sq, cfg.bootstrap, 0.95, mix(cfg.seed, li as u64), rmse),
            }
        })
        .collect();
    Ok(PerceptionReport {
        config: cfg.clone(),
        levels,
        trials: trials.into_iter().map(|(_, t)| t).collect(),
    })
}

impl PerceptionReport {
    /// RMSE never decreases from one level to the next.
    pub fn rmse_monotone(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].rmse >= w[0].rmse)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:>6}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}  {:>21}",
            "σ_px", "σ_d (m)", "accuracy", "position", "predic.", "RMSE (m)", "RMSE 95% CI"
        )
        .unwrap();
        for l in &self.levels {
            writeln!(
                out,
                "{:>6.1}  {:>8.3}  {:>8.3}  {:>8.3}  {:>8.3}  {:>10.3e}  [{:.3e}, {:.3e}]",
                l.sigma_px,
                l.sigma_d,
                l.spatial_accuracy,
                l.position_accuracy,
                l.predicate_accuracy,
                l.rmse,
                l.rmse_ci.0,
                l.rmse_ci.1
            )
            .unwrap();
        }
        writeln!(
            out,
            "{} scenes × {} draws per level, τ = {} m, position tolerance = {} m; RMSE monotone: {}.",
            self.config.scenes.len(),
            self.config.repeats,
            self.config.tau,
            self.config.tolerance,
            if self.rmse_monotone() { "yes" } else { "no" }
        )
        .unwrap();
        writeln!(
            out,
            "Reference (external, learned perception): accuracy {REFERENCE_ACCURACY:.3}, RMSE {REFERENCE_RMSE_M:.3} m."
        )
        .unwrap();
        out
    }
}
