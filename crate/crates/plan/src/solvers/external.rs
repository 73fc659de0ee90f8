//! Adapter for an external solver executable.
//!
//! The model is written to a temporary directory, `{model}` and `{solution}`
//! in the argument list are replaced by the file paths, and the solution file
//! is read back as `name value` lines. An optional `status <word>` line
//! reports optimal / feasible / infeasible / timeout; without it a complete
//! set of values counts as feasible.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::emit::{emit_model, ModelFormat};
use crate::model::MicpModel;
use crate::solve::{Limits, RawSolution, SolveStatus};
use crate::solvers::SolverAdapter;
use crate::PlanError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionFormat {
    /// `name value` per line, `#` comments, optional `status` line.
    NameValue,
}

impl std::str::FromStr for SolutionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "name-value" | "name_value" => Ok(SolutionFormat::NameValue),
            other => Err(format!("unknown solution format '{other}' (expected name-value)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolver {
    pub cmd: PathBuf,
    pub args: Vec<String>,
    pub model_format: ModelFormat,
    pub solution_format: SolutionFormat,
    /// Directory for model and solution files; a fresh temporary one if unset.
    pub work_dir: Option<PathBuf>,
}

impl ExternalSolver {
    pub fn new(cmd: impl Into<PathBuf>, args: Vec<String>) -> Self {
        ExternalSolver { cmd: cmd.into(), args, model_format: ModelFormat::Mps, solution_format: SolutionFormat::NameValue, work_dir: None }
    }

    fn run(&self, m: &MicpModel, limits: &Limits) -> Result<RawSolution, String> {
        let text = emit_model(m, self.model_format).map_err(|e: PlanError| e.to_string())?;
        let tmp;
        let dir = match &self.work_dir {
            Some(d) => {
                std::fs::create_dir_all(d).map_err(|e| format!("cannot create {}: {e}", d.display()))?;
                d.clone()
            }
            None => {
                tmp = std::env::temp_dir().join(format!("verna-solve-{}-{}", std::process::id(), unique()));
                std::fs::create_dir_all(&tmp).map_err(|e| format!("cannot create {}: {e}", tmp.display()))?;
                tmp
            }
        };
        let model_path = dir.join(format!("model.{}", self.model_format.extension()));
        let sol_path = dir.join("solution.txt");
        let _ = std::fs::remove_file(&sol_path);
        std::fs::write(&model_path, text).map_err(|e| format!("cannot write model: {e}"))?;
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.replace("{model}", &model_path.to_string_lossy()).replace("{solution}", &sol_path.to_string_lossy()).replace("{time}", &format!("{}", limits.time_s)))
            .collect();
        let mut child = Command::new(&self.cmd)
            .args(&args)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start solver {}: {e}", self.cmd.display()))?;
        let deadline = Instant::now() + Duration::from_secs_f64(limits.time_s.max(0.0));
        let status = loop {
            if let Some(st) = child.try_wait().map_err(|e| e.to_string())? {
                break st;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(RawSolution::failed(SolveStatus::Timeout, "external solver exceeded the time limit"));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        if !status.success() {
            let mut err = String::new();
            if let Some(mut e) = child.stderr.take() {
                use std::io::Read;
                let _ = e.read_to_string(&mut err);
            }
            return Err(format!("solver exited with {status}: {}", err.lines().last().unwrap_or("").trim()));
        }
        let sol = std::fs::read_to_string(&sol_path).map_err(|e| format!("cannot read solution file: {e}"))?;
        if self.work_dir.is_none() {
            let _ = std::fs::remove_dir_all(&dir);
        }
        parse_solution(m, &sol)
    }
}

fn unique() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static N: AtomicU64 = AtomicU64::new(0);
    N.fetch_add(1, Ordering::Relaxed)
}

/// Reads a `name value` solution for model `m`.
pub fn parse_solution(m: &MicpModel, text: &str) -> Result<RawSolution, String> {
    let index: HashMap<&str, usize> = m.vars.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut values = vec![f64::NAN; m.vars.len()];
    let mut status = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(val), None) = (it.next(), it.next(), it.next()) else {
            return Err(format!("solution line {}: expected 'name value'", ln + 1));
        };
        if name.eq_ignore_ascii_case("status") {
            status = Some(match val.to_ascii_lowercase().as_str() {
                "optimal" => SolveStatus::Optimal,
                "feasible" => SolveStatus::Feasible,
                "infeasible" => SolveStatus::Infeasible,
                "timeout" | "time_limit" => SolveStatus::Timeout,
                other => return Err(format!("solution line {}: unknown status '{other}'", ln + 1)),
            });
            continue;
        }
        let v: f64 = val.parse().map_err(|_| format!("solution line {}: bad number '{val}'", ln + 1))?;
        match index.get(name) {
            Some(&j) => values[j] = v,
            None => return Err(format!("solution line {}: unknown variable '{name}'", ln + 1)),
        }
    }
    let complete = values.iter().all(|v| v.is_finite());
    match status {
        Some(s) if !s.has_solution() => Ok(RawSolution::failed(s, format!("external solver reports {s:?}").to_lowercase())),
        Some(s) if complete => Ok(RawSolution { status: s, values: Some(values), message: "external solver".into(), nodes: 0 }),
        None if complete => Ok(RawSolution { status: SolveStatus::Feasible, values: Some(values), message: "external solver".into(), nodes: 0 }),
        _ => Err("solution file does not assign every variable".into()),
    }
}

impl SolverAdapter for ExternalSolver {
    fn name(&self) -> String {
        format!("external: {}", self.cmd.display())
    }

    fn solve_model(&mut self, m: &MicpModel, limits: &Limits) -> RawSolution {
        match self.run(m, limits) {
            Ok(r) => r,
            Err(msg) => RawSolution::failed(SolveStatus::SolverError, msg),
        }
    }
}
