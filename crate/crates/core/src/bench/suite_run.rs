use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{binomial_bounds, mean_std, mix, pm, welch, Welch};
use super::suite::{Suite, SuiteError, Task};
use crate::orchestrator::{Failure, Mode, Phase, Session, SessionConfig};
use crate::translator::{FaultKind, TokenUsage, TranslatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialOutcome {
    Success,
    TranslationFail,
    Unsolvable,
    ExecutionFail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task: String,
    pub mode: Mode,
    pub trial: u32,
    pub seed: u64,
    pub outcome: TrialOutcome,
    pub step_durations_ms: Vec<f64>,
    pub translator_requests: u32,
    pub usage: Option<TokenUsage>,
    pub stop_latencies_ms: Vec<f64>,
    pub injected_fault: Option<FaultKind>,
    /// World revisions during the trial.
    pub world_mutations: u64,
    pub approved: bool,
    pub failure: Option<String>,
}

impl TrialRecord {
    /// A trial that changed the world without reaching its goal.
    pub fn is_unsafe(&self) -> bool {
        self.outcome != TrialOutcome::Success && self.world_mutations > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub modes: Vec<Mode>,
    pub trials: u32,
    pub translator: TranslatorKind,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(modes: Vec<Mode>, trials: u32, translator: TranslatorKind, seed: u64) -> Self {
        Self {
            modes,
            trials,
            translator,
            seed,
        }
    }
}

fn classify(s: &Session, task: &Task) -> TrialOutcome {
    match s.phase() {
        Phase::Completed if task.satisfied(s.world()) => TrialOutcome::Success,
        Phase::Failed { .. } if !s.is_approved() => match s.artifacts().failure {
            Some(Failure::Unsolvable | Failure::SearchLimit) => TrialOutcome::Unsolvable,
            _ => TrialOutcome::TranslationFail,
        },
        _ => TrialOutcome::ExecutionFail,
    }
}

/// One auto-approved run of `task` in a fresh world.
pub fn run_trial(
    suite: &Suite,
    task: &Task,
    mode: Mode,
    translator: &TranslatorKind,
    trial: u32,
    seed: u64,
) -> Result<TrialRecord, SuiteError> {
    let world = suite.world(task)?;
    let mut cfg = SessionConfig::new(mode, translator.reseeded(seed));
    cfg.auto_approve = true;
    let mut s = Session::new(format!("{}-{}-{trial}", task.id, mode), cfg, world);
    s.submit(&task.sentence).expect("fresh session accepts an instruction");
    s.run_to_end();
    let m = s.metrics();
    Ok(TrialRecord {
        task: task.id.clone(),
        mode,
        trial,
        seed,
        outcome: classify(&s, task),
        step_durations_ms: m.step_durations_ms.clone(),
        translator_requests: m.translator_requests,
        usage: m.usage,
        stop_latencies_ms: m.stop_latencies_ms.clone(),
        injected_fault: m.injected_fault,
        world_mutations: m.world_mutations,
        approved: s.is_approved(),
        failure: match s.phase() {
            Phase::Failed { reason } => Some(reason.clone()),
            _ => None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub trials: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    pub outcomes: BTreeMap<TrialOutcome, usize>,
    pub step_mean_s: f64,
    pub step_std_s: f64,
    pub steps: usize,
    pub requests_per_step: f64,
    pub tokens_per_trial: Option<f64>,
    pub faults_injected: usize,
    pub unsafe_trials: usize,
    pub mutations_in_failed: u64,
}

impl ModeSummary {
    /// Aggregates one mode's records; independent of record order.
    pub fn from_records(mode: Mode, records: &[TrialRecord]) -> Self {
        let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.mode == mode).collect();
        let mut outcomes = BTreeMap::new();
        for r in &rs {
            *outcomes.entry(r.outcome).or_insert(0) += 1;
        }
        let successes = outcomes.get(&TrialOutcome::Success).copied().unwrap_or(0);
        let durations: Vec<f64> = rs.iter().flat_map(|r| r.step_durations_ms.iter().map(|d| d / 1000.0)).collect();
        let (step_mean_s, step_std_s) = mean_std(&durations);
        let requests: u64 = rs.iter().map(|r| u64::from(r.translator_requests)).sum();
        let tokens: Vec<u64> = rs.iter().filter_map(|r| r.usage.map(|u| u.total())).collect();
        Self {
            mode,
            trials: rs.len(),
            successes,
            success_rate: if rs.is_empty() {
                f64::NAN
            } else {
                100.0 * successes as f64 / rs.len() as f64
            },
            outcomes,
            step_mean_s,
            step_std_s,
            steps: durations.len(),
            requests_per_step: if durations.is_empty() {
                f64::NAN
            } else {
                requests as f64 / durations.len() as f64
            },
            tokens_per_trial: (!tokens.is_empty()).then(|| tokens.iter().sum::<u64>() as f64 / tokens.len() as f64),
            faults_injected: rs.iter().filter(|r| r.injected_fault.is_some()).count(),
            unsafe_trials: rs.iter().filter(|r| r.is_unsafe()).count(),
            mutations_in_failed: rs
                .iter()
                .filter(|r| r.outcome != TrialOutcome::Success)
                .map(|r| r.world_mutations)
                .sum(),
        }
    }

    /// Failure fraction and its ±3σ binomial band around `rate`.
    pub fn failure_check(&self, rate: f64) -> (f64, (f64, f64)) {
        let failed = (self.trials - self.successes) as f64 / self.trials.max(1) as f64;
        (failed, binomial_bounds(rate, self.trials, 3.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: SuiteConfig,
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<ModeSummary>,
    /// Per-step durations, first mode against second.
    pub welch: Option<Welch>,
}

/// External measurements with a live language model, shown next to ours
/// for orientation only.
struct Reference {
    time: &'static str,
    success: &'static str,
    requests: &'static str,
    tokens: &'static str,
}

fn reference(mode: Mode) -> Reference {
    match mode {
        Mode::Direct => Reference {
            time: "7.20 ± 0.25",
            success: "100.0",
            requests: "2.0",
            tokens: "≈3,000",
        },
        Mode::NeuroSymbolic => Reference {
            time: "6.83 ± 0.27",
            success: "91.0",
            requests: "2.0",
            tokens: "≈3,000",
        },
    }
}

pub fn column_title(mode: Mode) -> &'static str {
    match mode {
        Mode::Direct => "LLM-Direct",
        Mode::NeuroSymbolic => "Neuro-Symbolic (PDDL)",
    }
}

fn num(x: f64, decimals: usize) -> String {
    if x.is_nan() {
        "n/a".into()
    } else {
        format!("{x:.decimals$}")
    }
}

impl SuiteReport {
    pub fn table(&self) -> String {
        let mut rows: Vec<Vec<String>> = vec![vec!["Metric".into()]];
        for s in &self.summaries {
            rows[0].push(column_title(s.mode).into());
        }
        rows[0].push("Reference (external)".into());
        let refs: Vec<Reference> = self.summaries.iter().map(|s| reference(s.mode)).collect();
        let joined = |f: fn(&Reference) -> &'static str| refs.iter().map(f).collect::<Vec<_>>().join(" / ");
        let mut row = |label: &str, f: &dyn Fn(&ModeSummary) -> String, r: String| {
            let mut v = vec![label.to_string()];
            v.extend(self.summaries.iter().map(f));
            v.push(r);
            rows.push(v);
        };
        row(
            "Avg. Execution Time per Step (s)",
            &|s| {
                if s.steps == 0 {
                    "n/a".into()
                } else {
                    pm(s.step_mean_s, s.step_std_s, 2)
                }
            },
            joined(|r| r.time),
        );
        row("Success Rate (%)", &|s| num(s.success_rate, 1), joined(|r| r.success));
        row("LLM Requests per Step", &|s| num(s.requests_per_step, 2), joined(|r| r.requests));
        row(
            "Computational Cost (Tokens)",
            &|s| s.tokens_per_trial.map_or("n/a".into(), |t| format!("{t:.0}")),
            joined(|r| r.tokens),
        );
        row("Trials", &|s| s.trials.to_string(), String::new());
        row("Unsafe executions", &|s| s.unsafe_trials.to_string(), String::new());
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
            if i == 0 {
                writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
            }
        }
        if let Some(w) = &self.welch {
            writeln!(out, "Note: Welch t-test on per-step durations: t = {:.3}, df = {:.1}, p = {:.3}.", w.t, w.df, w.p)
                .unwrap();
        }
        writeln!(
            out,
            "Reference values were measured with a live language model (reported p = 0.049); \
             durations here are simulated and are not comparable."
        )
        .unwrap();
        out
    }

    /// One JSON record per line.
    pub fn jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
    }

    pub fn summary(&self, mode: Mode) -> Option<&ModeSummary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }
}

/// Runs every task `trials` times per mode, in parallel. Deterministic for a
/// given config: each trial's seed derives from the base seed, mode, task
/// index and trial number, so no two trials share a fault draw.
pub fn run_suite(suite: &Suite, cfg: &SuiteConfig) -> Result<SuiteReport, SuiteError> {
    let jobs: Vec<(Mode, usize, u32)> = cfg
        .modes
        .iter()
        .flat_map(|&m| (0..suite.tasks.len()).flat_map(move |t| (0..cfg.trials).map(move |k| (m, t, k))))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(mode, t, k)| {
            let m = (mode == Mode::NeuroSymbolic) as u64;
            let seed = mix(cfg.seed, (m << 63) | ((t as u64) << 32) | u64::from(k));
            run_trial(suite, &suite.tasks[t], mode, &cfg.translator, k, seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(&suite.name, cfg, records))
}

pub fn summarize(suite: &str, cfg: &SuiteConfig, records: Vec<TrialRecord>) -> SuiteReport {
    let summaries: Vec<ModeSummary> = cfg.modes.iter().map(|&m| ModeSummary::from_records(m, &records)).collect();
    let durations = |m: Mode| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.mode == m)
            .flat_map(|r| r.step_durations_ms.iter().map(|d| d / 1000.0))
            .collect()
    };
    let welch = match cfg.modes.as_slice() {
        [a, b, ..] => welch(&durations(*a), &durations(*b)),
        _ => None,
    };
    SuiteReport {
        suite: suite.into(),
        config: cfg.clone(),
        records,
        summaries,
        welch,
    }
}
