//! Subcommands. Failures surface as [`CliError`]: one JSON line on stderr.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use verna_agents::backend::LlmBackend;
use verna_agents::{paz_describe, run_conventional, run_pipeline_observed, Caps, Llm, Mode, PipelineEvent, PlanOutcome, PlannerKind, SessionState, Status, Verdict};
use verna_core::dsl::{self, DslSource};
use verna_core::scene::Scene;
use verna_core::Trajectory;
use verna_plan::{emit_model, encode, ModelFormat};
use verna_sim::experiment::{default_task, trajectory_rows, write_trajectory};
use verna_sim::{experiment, ExperimentConfig};

use crate::config::Settings;
use crate::service::{self, AppState, ServiceConfig, WAYPOINT_DT};
use crate::{resolve_backend, resolve_scene};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_NEEDS_USER: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl std::fmt::Display) -> Self {
        CliError { kind, message: message.to_string() }
    }

    /// Single-line JSON for stderr.
    pub fn line(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

trait Kind<T> {
    fn kind(self, kind: &'static str) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> Kind<T> for Result<T, E> {
    fn kind(self, kind: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(kind, e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "verna", version, about = "Natural-language drone mission planning through STL and mixed-integer optimization")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Config file (default: $VERNA_CONFIG, then ./verna.toml).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// External MILP/MIQP solver executable.
    #[arg(long, global = true)]
    pub solver_cmd: Option<PathBuf>,
    /// Solver arguments; {model}, {solution} and {time} are substituted.
    #[arg(long, global = true, allow_hyphen_values = true, num_args = 1..)]
    pub solver_args: Option<Vec<String>>,
    /// Per-solve time limit in seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// Branch-and-bound node limit of the in-process solver.
    #[arg(long, global = true)]
    pub node_limit: Option<usize>,
    #[arg(long, global = true)]
    pub llm_base_url: Option<String>,
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
}

impl GlobalOpts {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut flags = Settings::default();
        flags.solver.cmd = self.solver_cmd.clone();
        flags.solver.args = self.solver_args.clone();
        flags.solver.time_s = self.time_limit;
        flags.solver.node_limit = self.node_limit;
        flags.llm.base_url = self.llm_base_url.clone();
        flags.llm.model = self.llm_model.clone();
        Settings::resolve(self.config.as_deref(), |k| std::env::var(k).ok(), &flags).kind("config")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerArg {
    Verna,
    Conventional,
}

impl From<PlannerArg> for PlannerKind {
    fn from(k: PlannerArg) -> Self {
        match k {
            PlannerArg::Verna => PlannerKind::Verna,
            PlannerArg::Conventional => PlannerKind::Conventional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fmt {
    Lp,
    Mps,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan one mission and write trajectory, transcript and path report.
    Plan {
        #[arg(long)]
        scene: String,
        /// Mission text (default: the scenario's standard command).
        #[arg(long)]
        task: Option<String>,
        /// Re-send the task instead of stopping at assistant questions.
        #[arg(long)]
        one_shot: bool,
        #[arg(long, default_value = "live")]
        backend: String,
        #[arg(long, value_enum, default_value = "verna")]
        planner: PlannerArg,
        #[arg(long, default_value = "verna-out")]
        out: PathBuf,
    },
    /// Interactive conversation on the terminal.
    Chat {
        #[arg(long)]
        scene: String,
        #[arg(long, default_value = "live")]
        backend: String,
        #[arg(long, value_enum, default_value = "verna")]
        planner: PlannerArg,
        /// Where to write the accepted plan.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent trials with success statistics.
    Experiment {
        #[arg(long)]
        scene: String,
        #[arg(long, value_enum, default_value = "verna")]
        planner: PlannerArg,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value = "live")]
        backend: String,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Seed of the first trial; trial i uses seed_base + i.
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, default_value = "verna-experiment")]
        out: PathBuf,
    },
    /// Encode a specification and print the optimization model.
    EmitModel {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        stl: String,
        #[arg(long, value_enum, default_value = "lp")]
        fmt: Fmt,
    },
    /// Print the path report of a trajectory file ([t, x, y, z, ...] rows).
    Analyze {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        traj: PathBuf,
        /// Print the structured report instead of the text.
        #[arg(long)]
        json: bool,
    },
    /// HTTP/WebSocket session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "live")]
        backend: String,
        /// Write-through directory for session artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code of a planning outcome.
pub fn exit_code<P>(o: &PlanOutcome<P>) -> i32 {
    match o {
        PlanOutcome::Accepted(_) => EXIT_OK,
        PlanOutcome::Failed(_) => EXIT_FAILED,
        PlanOutcome::NeedsUser(_) => EXIT_NEEDS_USER,
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    let settings = cli.global.settings()?;
    match cli.command {
        Command::Plan { scene, task, one_shot, backend, planner, out } => {
            let scene = resolve_scene(&scene).kind("scene")?;
            let task = task.or_else(|| default_task(&scene.scenario_id).map(str::to_string)).ok_or_else(|| CliError::new("usage", "--task is required for this scene"))?;
            let backend = resolve_backend(&backend, &settings).kind("backend")?;
            let mode = if one_shot { Mode::OneShot } else { Mode::Conversation };
            plan(&settings, &scene, &task, mode, planner.into(), backend.as_ref(), &out)
        }
        Command::Chat { scene, backend, planner, out } => {
            let scene = resolve_scene(&scene).kind("scene")?;
            let backend = resolve_backend(&backend, &settings).kind("backend")?;
            let stdin = std::io::stdin();
            chat(&settings, scene, planner.into(), backend.as_ref(), out.as_deref(), &mut stdin.lock(), &mut std::io::stdout())
        }
        Command::Experiment { scene, planner, trials, backend, workers, seed_base, task, out } => {
            if trials == 0 {
                return Err(CliError::new("usage", "--trials must be at least 1"));
            }
            let scene = resolve_scene(&scene).kind("scene")?;
            let backend = resolve_backend(&backend, &settings).kind("backend")?;
            let mut cfg = ExperimentConfig::new(scene, planner.into(), trials);
            if let Some(t) = task {
                cfg.task = t;
            }
            if cfg.task.is_empty() {
                return Err(CliError::new("usage", "--task is required for this scene"));
            }
            if let Some(w) = workers {
                cfg.workers = w.max(1);
            }
            cfg.seeds = (0..trials as u64).map(|i| seed_base + i).collect();
            cfg.agents = settings.agent_configs();
            cfg.planner = settings.planner().kind("config")?;
            cfg.out_dir = Some(out.clone());
            let table = experiment(&cfg, backend.as_ref()).kind("io")?;
            let s = &table.summary;
            println!("scenario {}, planner {:?}, {} trials ({:.1} s)", table.scenario, cfg.planner_kind, table.n_trials, s.wall_time_s);
            println!("goal-reaching: {}", s.goal_reaching);
            println!("collision-free: {}", s.collision_free);
            if let Some(o) = &s.subtask_order_ok {
                println!("subtask order: {o}");
            }
            println!("follower goal-reaching: {}", s.flown_goal_reaching);
            println!("follower collision-free: {}", s.flown_collision_free);
            println!("results: {}", out.join("results.json").display());
            Ok(EXIT_OK)
        }
        Command::EmitModel { scene, stl, fmt } => {
            let scene = resolve_scene(&scene).kind("scene")?;
            let planner = settings.planner().kind("config")?;
            let text = dsl::extract_stl_block(&stl).unwrap_or(stl);
            let phi = dsl::parse(&DslSource::new(&text, &scene, planner.dt)).map_err(|e| CliError::new("parse", e.render(&text).replace('\n', " | ")))?;
            let model = encode(&planner.problem(&scene, phi), None).kind("encode")?;
            let fmt = match fmt {
                Fmt::Lp => ModelFormat::Lp,
                Fmt::Mps => ModelFormat::Mps,
            };
            print!("{}", emit_model(&model, fmt).kind("encode")?);
            Ok(EXIT_OK)
        }
        Command::Analyze { scene, traj, json } => {
            let scene = resolve_scene(&scene).kind("scene")?;
            let t = read_trajectory(&traj)?;
            let report = paz_describe(&t, &scene);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).kind("io")?);
            } else {
                println!("{}", report.rendered_text);
            }
            Ok(EXIT_OK)
        }
        Command::Serve { addr, backend, out } => {
            let backend = resolve_backend(&backend, &settings).kind("backend")?;
            let cfg = ServiceConfig { backend, agents: settings.agent_configs(), planner: settings.planner().kind("config")?, caps: Caps::default(), out_dir: out };
            let rt = tokio::runtime::Runtime::new().kind("io")?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await.kind("io")?;
                eprintln!("listening on http://{}", listener.local_addr().kind("io")?);
                service::serve(listener, AppState::new(cfg)).await.kind("io")
            })?;
            Ok(EXIT_OK)
        }
    }
}

/// Rows of `[t, x, y, z, ...]`; the step is taken from the first two times.
pub fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| CliError::new("trajectory", format!("{}: {e}", path.display())))?;
    if rows.is_empty() || rows.iter().any(|r| r.len() < 4 || r.len() != rows[0].len()) {
        return Err(CliError::new("trajectory", "expected non-empty rows of equal length [t, x, y, z, ...]"));
    }
    let dt = if rows.len() > 1 { rows[1][0] - rows[0][0] } else { 1.0 };
    Trajectory::new(rows.iter().map(|r| r[1..].to_vec()).collect(), dt).kind("trajectory")
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).kind("io")?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display())))
}

struct Run {
    outcome: &'static str,
    exit: i32,
}

fn run_once(settings: &Settings, s: &mut SessionState, backend: &dyn LlmBackend, out: Option<&Path>, obs: &mut dyn FnMut(PipelineEvent)) -> Result<Run, CliError> {
    let planner = settings.planner().kind("config")?;
    let agents = settings.agent_configs();
    let llm = Llm { backend, configs: &agents };
    let caps = Caps::default();
    let (exit, outcome, detail) = match s.kind {
        PlannerKind::Verna => {
            let o = run_pipeline_observed(s, &llm, &planner, &caps, obs);
            let detail = match &o {
                PlanOutcome::Accepted(p) => {
                    if let Some(dir) = out {
                        prepare(dir)?;
                        write_trajectory(&dir.join("trajectory.json"), &p.trajectory).kind("io")?;
                        std::fs::write(dir.join("spec.stl"), format!("{}\n", p.stl_text)).kind("io")?;
                        std::fs::write(dir.join("report.txt"), format!("{}\n", p.report.rendered_text)).kind("io")?;
                        write_json(&dir.join("report.json"), &p.report)?;
                    }
                    json!({ "stl_text": p.stl_text, "objective": p.result.objective, "robustness": p.result.robustness, "steps": p.trajectory.len(), "dt": p.trajectory.dt() })
                }
                PlanOutcome::Failed(f) => json!({ "reason": f.reason, "message": f.message }),
                PlanOutcome::NeedsUser(q) => json!({ "question": q }),
            };
            (exit_code(&o), o.kind(), detail)
        }
        PlannerKind::Conventional => {
            let o = run_conventional(s, &llm, &caps, WAYPOINT_DT, obs);
            let detail = match &o {
                PlanOutcome::Accepted(p) => {
                    if let Some(dir) = out {
                        prepare(dir)?;
                        let t = Trajectory::new(p.waypoints.iter().map(|w| w.to_vec()).collect(), WAYPOINT_DT).kind("trajectory")?;
                        write_json(&dir.join("trajectory.json"), &trajectory_rows(&t))?;
                        std::fs::write(dir.join("report.txt"), format!("{}\n", p.report.rendered_text)).kind("io")?;
                        write_json(&dir.join("report.json"), &p.report)?;
                    }
                    json!({ "waypoints": p.waypoints.len() })
                }
                PlanOutcome::Failed(f) => json!({ "reason": f.reason, "message": f.message }),
                PlanOutcome::NeedsUser(q) => json!({ "question": q }),
            };
            (exit_code(&o), o.kind(), detail)
        }
    };
    if let Some(dir) = out {
        prepare(dir)?;
        write_json(&dir.join("transcript.json"), &s.transcript)?;
        let c = s.counters;
        write_json(&dir.join("outcome.json"), &json!({ "outcome": outcome, "detail": detail, "loop_counters": [c.loop1, c.loop2, c.loop3], "scenario": s.scene.scenario_id }))?;
    }
    Ok(Run { outcome, exit })
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("cannot create {}: {e}", dir.display())))
}

fn plan(settings: &Settings, scene: &Scene, task: &str, mode: Mode, kind: PlannerKind, backend: &dyn LlmBackend, out: &Path) -> Result<i32, CliError> {
    let mut s = SessionState::with_task(scene.clone(), task, mode, kind);
    let mut last_report = None;
    let mut question = None;
    let run = run_once(settings, &mut s, backend, Some(out), &mut |ev| match ev {
        PipelineEvent::PazReport { report } => last_report = Some(report.rendered_text),
        PipelineEvent::AssistantMessage { text, question: true, .. } => question = Some(text),
        PipelineEvent::PlanFailed { reason, message } => eprintln!("{}", json!({ "error": reason, "message": message })),
        _ => {}
    })?;
    println!("outcome: {}", run.outcome);
    match (run.exit, s.candidate_text.as_ref()) {
        (EXIT_OK, Some(stl)) => println!("specification: {stl}"),
        (EXIT_NEEDS_USER, _) => println!("question: {}", question.unwrap_or_default()),
        _ => {}
    }
    if run.exit == EXIT_OK {
        if let Some(r) = last_report {
            println!("{r}");
        }
    }
    println!("artifacts: {}", out.display());
    Ok(run.exit)
}

fn print_event(w: &mut dyn Write, ev: &PipelineEvent) {
    let _ = match ev {
        PipelineEvent::AssistantMessage { agent, text, .. } => writeln!(w, "[{agent}] {text}"),
        PipelineEvent::StlCandidate { stl_text, source } => writeln!(w, "[candidate from {source}] {stl_text}"),
        PipelineEvent::PazReport { report } => writeln!(w, "[path report]\n{}", report.rendered_text),
        PipelineEvent::SemcheqVerdict { verdict } => match verdict {
            Verdict::Aligned => writeln!(w, "[semantics] aligned"),
            Verdict::Advice(a) => writeln!(w, "[semantics] advice: {a}"),
            Verdict::Malformed(m) => writeln!(w, "[semantics] unreadable verdict: {m}"),
        },
        PipelineEvent::PlanReady { steps, dt, robustness, .. } => {
            let rob = robustness.map(|r| format!(", robustness {r:.3}")).unwrap_or_default();
            writeln!(w, "[plan ready] {steps} steps of {dt} s{rob}. Type 'accept' or 'reject <comment>'.")
        }
        PipelineEvent::PlanFailed { reason, message } => writeln!(w, "[failed] {}: {message}", reason.as_str()),
    };
}

/// Conversation on `input`/`output`. `accept` and `reject [comment]` answer
/// a proposed plan; `quit` or end of input stops. The exit code follows the
/// final session status.
pub fn chat(settings: &Settings, scene: Scene, kind: PlannerKind, backend: &dyn LlmBackend, out: Option<&Path>, input: &mut dyn BufRead, output: &mut dyn Write) -> Result<i32, CliError> {
    let mut s = SessionState::new(scene, Mode::Conversation, kind);
    let _ = writeln!(output, "Scene '{}'. Describe the mission; 'quit' ends the session.", s.scene.scenario_id);
    let mut line = String::new();
    loop {
        let _ = write!(output, "> ");
        let _ = output.flush();
        line.clear();
        if input.read_line(&mut line).kind("io")? == 0 {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "quit" {
            break;
        }
        let (cmd, rest) = text.split_once(' ').map_or((text, ""), |(a, b)| (a, b.trim()));
        match (cmd, s.status) {
            ("accept", Status::AwaitingDecision) => {
                s.decide(true, None).map_err(|e| CliError::new("state", e))?;
                let _ = writeln!(output, "[accepted]");
                break;
            }
            ("reject", Status::AwaitingDecision) => {
                s.decide(false, (!rest.is_empty()).then_some(rest)).map_err(|e| CliError::new("state", e))?;
            }
            (_, Status::AwaitingDecision) => {
                let _ = writeln!(output, "A plan is waiting: type 'accept' or 'reject <comment>'.");
                continue;
            }
            (_, Status::Accepted) => break,
            _ => s.submit_user_message(text),
        }
        // the accepted plan is only written once the user accepts it
        run_once(settings, &mut s, backend, None, &mut |ev| print_event(output, &ev))?;
    }
    if s.status == Status::Accepted {
        if let Some(dir) = out {
            write_accepted(&s, dir)?;
        }
    }
    Ok(match s.status {
        Status::Accepted => EXIT_OK,
        Status::Failed => EXIT_FAILED,
        _ => EXIT_NEEDS_USER,
    })
}

fn write_accepted(s: &SessionState, dir: &Path) -> Result<(), CliError> {
    prepare(dir)?;
    write_json(&dir.join("transcript.json"), &s.transcript)?;
    if let (Some(r), Some(stl)) = (&s.candidate_result, &s.candidate_text) {
        if let Some(t) = &r.trajectory {
            write_trajectory(&dir.join("trajectory.json"), t).kind("io")?;
            std::fs::write(dir.join("report.txt"), paz_describe(t, &s.scene).rendered_text + "\n").kind("io")?;
        }
        std::fs::write(dir.join("spec.stl"), format!("{stl}\n")).kind("io")?;
    }
    Ok(())
}
