//! Command-line verbs. Exit codes: 0 success, 1 failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use symwrap::bench::{
    run_perception_eval, run_stop_latency, run_suite, LatencyConfig, PerceptionConfig, Suite, SuiteConfig,
};
use symwrap::orchestrator::{ClockMode, Mode, Phase, Session, SessionConfig};
use symwrap::translator::TranslatorKind;
use symwrap::world::spawn_scene;

use crate::config::{load_scene, GatewayConfig};
use crate::server::Server;

pub const FAILURE: i32 = 1;
pub const USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "symwrap", version, about = "Plan, review and execute tabletop instructions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP gateway.
    Serve(ServeArgs),
    /// Translate and plan one instruction, optionally executing it.
    Plan(PlanArgs),
    /// Run the task suite in both pipelines.
    Bench(BenchArgs),
    /// Pixel-to-real and scene-graph accuracy over the noise grid.
    Perception(PerceptionArgs),
    /// Interrupt executions with STOP and measure the halt latency.
    StopLatency(LatencyArgs),
}

fn mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn translator(s: &str) -> Result<TranslatorKind, String> {
    TranslatorKind::from_cli(s)
}

fn rate(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(r) if (0.0..=1.0).contains(&r) => Ok(r),
        _ => Err(format!("{s:?} is not a rate in [0, 1]")),
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, value_parser = mode)]
    pub mode: Mode,
    #[arg(long)]
    pub instruction: String,
    /// Scene file, or the name of a bundled scene.
    #[arg(long, default_value = "scene_1")]
    pub scene: String,
    /// template, llm or fault:<rate>:<seed>
    #[arg(long, default_value = "template", value_parser = translator)]
    pub translator: TranslatorKind,
    /// Approve the plan and execute it on the simulated world.
    #[arg(long)]
    pub approve: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub tick_ms: u32,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite file; the bundled 13-task suite when omitted.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub trials: u32,
    #[arg(long, value_delimiter = ',', default_value = "direct,pddl", value_parser = mode)]
    pub modes: Vec<Mode>,
    /// Corrupt translator output with this probability.
    #[arg(long, value_parser = rate)]
    pub fault: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for table.txt and records.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerceptionArgs {
    #[arg(long, default_value_t = 20)]
    pub repeats: u32,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    pub tick_ms: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Drive executions on the wall clock instead of virtual time.
    #[arg(long)]
    pub realtime: bool,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Plan(a) => plan(a),
        Command::Bench(a) => bench(a),
        Command::Perception(a) => perception(a),
        Command::StopLatency(a) => stop_latency(a),
    };
    result.unwrap_or_else(|(code, message)| {
        eprintln!("error: {message}");
        code
    })
}

type Outcome = Result<i32, (i32, String)>;

fn fail(e: impl ToString) -> (i32, String) {
    (FAILURE, e.to_string())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), (i32, String)> {
    fs::create_dir_all(dir).map_err(|e| fail(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn serve(a: ServeArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => GatewayConfig::load(p).map_err(|e| (USAGE, e.to_string()))?,
        None => GatewayConfig::default(),
    };
    cfg.port = a.port.unwrap_or(cfg.port);
    cfg.bind = a.bind.unwrap_or(cfg.bind);
    let rt = tokio::runtime::Runtime::new().map_err(fail)?;
    rt.block_on(async {
        let server = Server::bind(cfg).await.map_err(fail)?;
        eprintln!("listening on http://{}", server.local_addr());
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(fail)?;
        Ok(0)
    })
}

fn plan(a: PlanArgs) -> Outcome {
    let spec = load_scene(&a.scene).map_err(|e| (USAGE, e))?;
    let mut world = spawn_scene(&spec).map_err(|e| (USAGE, e.to_string()))?;
    world.tick_ms = a.tick_ms;
    let mut cfg = SessionConfig::new(a.mode, a.translator);
    cfg.clock = ClockMode::Virtual;
    let mut s = Session::new("cli", cfg, world);
    s.submit(&a.instruction).map_err(fail)?;
    if a.approve && *s.phase() == Phase::AwaitingApproval {
        s.approve().map_err(fail)?;
        s.run_to_end();
    }

    let art = s.artifacts();
    if let Some(dir) = &a.out {
        let files = [
            ("translator_raw.txt", art.translator_raw.clone()),
            ("fragment.pddl", art.fragment.as_ref().map(|f| f.to_text())),
            ("problem.pddl", art.problem_pddl.clone()),
            ("plan.txt", art.plan_text.clone()),
            ("subtasks.json", art.subtasks.as_ref().map(|t| t.to_json())),
        ];
        for (name, text) in files {
            if let Some(text) = text {
                write(dir, name, &text)?;
            }
        }
        write(dir, "events.jsonl", &s.events_jsonl())?;
        write(dir, "record.json", &serde_json::to_string_pretty(&s.record()).map_err(fail)?)?;
    }

    if let Some(text) = &art.plan_text {
        print!("{text}");
    } else if let Some(t) = &art.subtasks {
        println!("{}", t.to_json());
    }
    for c in &art.calls {
        println!("  {c}");
    }
    println!("phase: {}", s.phase().label());
    match s.phase() {
        Phase::Failed { reason } => {
            eprintln!("failed: {reason}");
            Ok(FAILURE)
        }
        Phase::AwaitingApproval | Phase::Completed => Ok(0),
        other => Err(fail(format!("unexpected final phase {}", other.label()))),
    }
}

fn load_suite(path: Option<&Path>) -> Result<Suite, (i32, String)> {
    match path {
        Some(p) => Suite::load(p).map_err(fail),
        None => Ok(Suite::bundled()),
    }
}

fn bench(a: BenchArgs) -> Outcome {
    let suite = load_suite(a.suite.as_deref())?;
    let translator = match a.fault {
        Some(r) => TranslatorKind::fault(r, a.seed),
        None => TranslatorKind::Template,
    };
    let report = run_suite(&suite, &SuiteConfig::new(a.modes, a.trials, translator, a.seed)).map_err(fail)?;
    let table = report.table();
    print!("{table}");
    let unsafe_runs = report.records.iter().filter(|r| r.is_unsafe()).count();
    println!("unsafe executions: {unsafe_runs}");
    if let Some(dir) = &a.out {
        write(dir, "table.txt", &table)?;
        write(dir, "records.jsonl", &report.jsonl())?;
    }
    Ok(0)
}

fn perception(a: PerceptionArgs) -> Outcome {
    let cfg = PerceptionConfig {
        repeats: a.repeats,
        seed: a.seed,
        ..PerceptionConfig::default()
    };
    let report = run_perception_eval(&cfg).map_err(fail)?;
    let table = report.table();
    print!("{table}");
    if let Some(dir) = &a.out {
        write(dir, "perception.txt", &table)?;
        write(dir, "perception.json", &serde_json::to_string_pretty(&report.levels).map_err(fail)?)?;
    }
    Ok(0)
}

fn stop_latency(a: LatencyArgs) -> Outcome {
    let suite = load_suite(a.suite.as_deref())?;
    let mut cfg = LatencyConfig::new(a.trials, a.tick_ms, a.seed);
    if a.realtime {
        cfg.clock = ClockMode::Realtime;
    }
    let report = run_stop_latency(&suite, &cfg);
    let table = report.table();
    print!("{table}");
    if let Some(dir) = &a.out {
        write(dir, "stop_latency.txt", &table)?;
        write(dir, "stop_latency.json", &serde_json::to_string_pretty(&report.samples).map_err(fail)?)?;
    }
    if report.within_bound() {
        Ok(0)
    } else {
        eprintln!("latency above {} ms", report.bound_ms);
        Ok(FAILURE)
    }
}
