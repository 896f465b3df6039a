use std::fmt::Write as _;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean_std, mix, pm};
use super::suite::{Suite, Task};
use crate::orchestrator::{drive_realtime, ClockMode, Mode, Phase, Session, SessionConfig, StopTime};
use crate::translator::TranslatorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyConfig {
    pub trials: u32,
    pub tick_ms: u32,
    pub seed: u64,
    pub clock: ClockMode,
}

impl LatencyConfig {
    pub fn new(trials: u32, tick_ms: u32, seed: u64) -> Self {
        Self {
            trials,
            tick_ms,
            seed,
            clock: ClockMode::Virtual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub trial: u32,
    pub task: String,
    /// Ticks executed before the stop arrived.
    pub after_ticks: u64,
    pub latency_ms: f64,
    /// No motion was in flight when the halt happened.
    pub between_calls: bool,
    /// After resuming, the run ended in the same world as an uninterrupted
    /// one. Only checked on the virtual clock.
    pub resume_matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub config: LatencyConfig,
    pub samples: Vec<LatencySample>,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub max_ms: f64,
    /// Two ticks.
    pub bound_ms: f64,
}

impl LatencyReport {
    pub fn within_bound(&self) -> bool {
        self.samples.iter().all(|s| s.latency_ms <= self.bound_ms)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "Stop latency ({} clock, tick {} ms, {} trials): {} ms (max {:.2} ms, bound {:.0} ms, {} within bound).",
            match self.config.clock {
                ClockMode::Virtual => "virtual",
                ClockMode::Realtime => "wall",
            },
            self.config.tick_ms,
            self.samples.len(),
            pm(self.mean_ms, self.std_ms, 2),
            self.max_ms,
            self.bound_ms,
            self.samples.iter().filter(|s| s.latency_ms <= self.bound_ms).count(),
        )
        .unwrap();
        writeln!(
            out,
            "Measured from gate event to halt; an external figure of 1.41 ± 0.14 s includes speech transport and is a different quantity."
        )
        .unwrap();
        out
    }
}

fn session(suite: &Suite, task: &Task, cfg: &LatencyConfig) -> Session {
    let mut world = suite.world(task).expect("suite scene spawns");
    world.tick_ms = cfg.tick_ms;
    let mut sc = SessionConfig::new(Mode::NeuroSymbolic, TranslatorKind::Template);
    sc.auto_approve = true;
    sc.clock = cfg.clock;
    let mut s = Session::new(format!("stop-{}", task.id), sc, world);
    s.submit(&task.sentence).expect("fresh session");
    assert!(s.phase().is_executing(), "{}: {:?}", task.id, s.phase());
    s
}

fn total_ticks(s: &Session) -> u64 {
    let d = &s.config().durations;
    s.artifacts().calls.iter().map(|c| d.ticks(c, s.world().tick_ms)).sum()
}

fn virtual_trial(suite: &Suite, task: &Task, cfg: &LatencyConfig, trial: u32, rng: &mut ChaCha8Rng) -> LatencySample {
    let mut s = session(suite, task, cfg);
    let mut reference = session(suite, task, cfg);
    reference.run_to_end();
    let after_ticks = rng.random_range(0..total_ticks(&s));
    let offset = rng.random_range(0.0..f64::from(cfg.tick_ms));
    for _ in 0..after_ticks {
        s.tick();
    }
    let preempted = s.artifacts().history.len();
    s.transcript_at("STOP", StopTime::Virtual(s.now_ms() + offset));
    while s.phase().is_executing() {
        s.tick();
    }
    assert!(matches!(s.phase(), Phase::Stopped { .. }));
    let between_calls = s.artifacts().history.len() == preempted;
    let latency_ms = *s.metrics().stop_latencies_ms.last().expect("latency sample");
    s.transcript("okay");
    s.run_to_end();
    let resume_matches =
        *s.phase() == Phase::Completed && s.world().physical_hash() == reference.world().physical_hash();
    LatencySample {
        trial,
        task: task.id.clone(),
        after_ticks,
        latency_ms,
        between_calls,
        resume_matches: Some(resume_matches),
    }
}

fn realtime_trial(suite: &Suite, task: &Task, cfg: &LatencyConfig, trial: u32, rng: &mut ChaCha8Rng) -> LatencySample {
    let s = session(suite, task, cfg);
    let span_ms = (total_ticks(&s) * u64::from(cfg.tick_ms)) as f64;
    let delay_ms = rng.random_range(0.0..(0.9 * span_ms).min(1500.0));
    let shared = Mutex::new(s);
    let period = Duration::from_millis(u64::from(cfg.tick_ms));
    thread::scope(|sc| {
        sc.spawn(|| drive_realtime(&shared, period));
        thread::sleep(Duration::from_secs_f64(delay_ms / 1000.0));
        shared.lock().unwrap().transcript("STOP");
    });
    let s = shared.into_inner().unwrap();
    let latency_ms = s.metrics().stop_latencies_ms.last().copied().unwrap_or(f64::NAN);
    LatencySample {
        trial,
        task: task.id.clone(),
        after_ticks: s.world().tick,
        latency_ms,
        between_calls: s.artifacts().history.is_empty(),
        resume_matches: None,
    }
}

/// Interrupts seeded executions with a STOP transcript line and measures the
/// time until the halt. Virtual-clock trials run in parallel on the thread
/// pool; wall-clock trials each get their own driver thread.
pub fn run_stop_latency(suite: &Suite, cfg: &LatencyConfig) -> LatencyReport {
    assert!(cfg.trials > 0 && cfg.tick_ms > 0, "need trials and a positive tick");
    let trial = |k: u32| {
        let task = &suite.tasks[k as usize % suite.tasks.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, u64::from(k)));
        match cfg.clock {
            ClockMode::Virtual => virtual_trial(suite, task, cfg, k, &mut rng),
            ClockMode::Realtime => realtime_trial(suite, task, cfg, k, &mut rng),
        }
    };
    let samples: Vec<LatencySample> = match cfg.clock {
        ClockMode::Virtual => (0..cfg.trials).into_par_iter().map(trial).collect(),
        ClockMode::Realtime => thread::scope(|sc| {
            let handles: Vec<_> = (0..cfg.trials).map(|k| sc.spawn(move || trial(k))).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        }),
    };
    let lat: Vec<f64> = samples.iter().map(|s| s.latency_ms).collect();
    let (mean_ms, std_ms) = mean_std(&lat);
    LatencyReport {
        config: cfg.clone(),
        max_ms: lat.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples,
        mean_ms,
        std_ms,
        bound_ms: 2.0 * f64::from(cfg.tick_ms),
    }
}
