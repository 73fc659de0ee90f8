//! Settings from `verna.toml`, the environment and command-line flags, in
//! increasing order of precedence.
//!
//! ```toml
//! [solver]
//! cmd = "/usr/bin/cbc-wrapper"       # unset: in-process branch and bound
//! args = ["{model}", "{solution}"]
//! model_format = "mps"               # lp | mps
//! solution_format = "name-value"
//! time_s = 60
//! node_limit = 20
//!
//! [llm]
//! base_url = "https://api.openai.com/v1"
//! model = "gpt-4o"
//! timeout_s = 120
//!
//! [planner]
//! dt = 0.5
//! min_horizon = 50
//! ```
//!
//! Environment: `VERNA_CONFIG` (file path), `VERNA_SOLVER_CMD`,
//! `VERNA_SOLVER_ARGS` (whitespace separated), `VERNA_SOLVER_MODEL_FORMAT`,
//! `VERNA_SOLVER_SOLUTION_FORMAT`, `VERNA_SOLVER_TIME_S`, `VERNA_LLM_BASE_URL`,
//! `VERNA_LLM_MODEL`. The API key is only read from `VERNA_LLM_KEY`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Deserialize;
use verna_agents::{AgentConfigs, Planner};
use verna_plan::solvers::SolutionFormat;
use verna_plan::{ExternalSolver, ModelFormat};

pub const DEFAULT_FILE: &str = "verna.toml";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub cmd: Option<PathBuf>,
    pub args: Option<Vec<String>>,
    pub model_format: Option<String>,
    pub solution_format: Option<String>,
    pub time_s: Option<f64>,
    pub node_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSettings {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub timeout_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSettings {
    pub dt: Option<f64>,
    pub min_horizon: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub planner: PlannerSettings,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),*) => {
        $(if $src.$field.is_some() { $dst.$field = $src.$field.clone(); })*
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Values set through `var`, usually [`std::env::var`].
    pub fn from_env(var: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let num = |key: &str| -> anyhow::Result<Option<f64>> {
            var(key).map(|v| v.trim().parse::<f64>().with_context(|| format!("{key} is not a number: {v}"))).transpose()
        };
        Ok(Settings {
            solver: SolverSettings {
                cmd: var("VERNA_SOLVER_CMD").map(PathBuf::from),
                args: var("VERNA_SOLVER_ARGS").map(|a| a.split_whitespace().map(str::to_string).collect()),
                model_format: var("VERNA_SOLVER_MODEL_FORMAT"),
                solution_format: var("VERNA_SOLVER_SOLUTION_FORMAT"),
                time_s: num("VERNA_SOLVER_TIME_S")?,
                node_limit: None,
            },
            llm: LlmSettings { base_url: var("VERNA_LLM_BASE_URL"), model: var("VERNA_LLM_MODEL"), timeout_s: None },
            planner: PlannerSettings::default(),
        })
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(mut self, other: &Settings) -> Self {
        overlay!(self.solver, other.solver, cmd, args, model_format, solution_format, time_s, node_limit);
        overlay!(self.llm, other.llm, base_url, model, timeout_s);
        overlay!(self.planner, other.planner, dt, min_horizon);
        self
    }

    /// File (explicit path, else `VERNA_CONFIG`, else `./verna.toml` when it
    /// exists), then environment, then `flags`.
    pub fn resolve(explicit: Option<&Path>, var: impl Fn(&str) -> Option<String>, flags: &Settings) -> anyhow::Result<Self> {
        let path = explicit.map(Path::to_path_buf).or_else(|| var("VERNA_CONFIG").map(PathBuf::from));
        let file = match path {
            Some(p) => Self::load(&p)?,
            None if Path::new(DEFAULT_FILE).exists() => Self::load(Path::new(DEFAULT_FILE))?,
            None => Settings::default(),
        };
        Ok(file.overlay(&Self::from_env(var)?).overlay(flags))
    }

    pub fn planner(&self) -> anyhow::Result<Planner> {
        let s = &self.solver;
        let mut planner = match &s.cmd {
            None => Planner::in_process(),
            Some(cmd) => {
                let mut ext = ExternalSolver::new(cmd, s.args.clone().unwrap_or_else(|| vec!["{model}".into(), "{solution}".into()]));
                if let Some(f) = &s.model_format {
                    ext.model_format = f.parse::<ModelFormat>().map_err(anyhow::Error::msg)?;
                }
                if let Some(f) = &s.solution_format {
                    ext.solution_format = f.parse::<SolutionFormat>().map_err(anyhow::Error::msg)?;
                }
                Planner::new(Arc::new(move || Box::new(ext.clone())))
            }
        };
        if s.cmd.is_none() && (s.args.is_some() || s.model_format.is_some() || s.solution_format.is_some()) {
            bail!("solver args/formats are set but solver.cmd is not");
        }
        if let Some(t) = s.time_s {
            if !(t > 0.0) {
                bail!("solver.time_s must be positive");
            }
            planner.limits.time_s = t;
        }
        if s.node_limit.is_some() {
            planner.limits.node_limit = s.node_limit;
        }
        if let Some(dt) = self.planner.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("planner.dt must be positive");
            }
            planner.dt = dt;
        }
        if let Some(h) = self.planner.min_horizon {
            planner.min_horizon = h;
        }
        Ok(planner)
    }

    pub fn agent_configs(&self) -> AgentConfigs {
        match &self.llm.model {
            Some(m) => AgentConfigs::default().with_model(m),
            None => AgentConfigs::default(),
        }
    }

    pub fn llm_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.llm.timeout_s.unwrap_or(120.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let owned: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| owned.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone())
    }

    #[test]
    fn flags_beat_env_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verna.toml");
        std::fs::write(&path, "[solver]\ntime_s = 10\nnode_limit = 5\n[llm]\nmodel = \"file-model\"\nbase_url = \"http://file\"\n").unwrap();
        let mut flags = Settings::default();
        flags.solver.time_s = Some(30.0);
        let s = Settings::resolve(Some(&path), env(&[("VERNA_SOLVER_TIME_S", "20"), ("VERNA_LLM_MODEL", "env-model")]), &flags).unwrap();
        assert_eq!(s.solver.time_s, Some(30.0));
        assert_eq!(s.solver.node_limit, Some(5));
        assert_eq!(s.llm.model.as_deref(), Some("env-model"));
        assert_eq!(s.llm.base_url.as_deref(), Some("http://file"));
        let p = s.planner().unwrap();
        assert_eq!(p.limits.time_s, 30.0);
        assert_eq!(p.limits.node_limit, Some(5));
        assert_eq!(s.agent_configs().semcheq.model_name, "env-model");
    }

    #[test]
    fn config_path_from_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.toml");
        std::fs::write(&path, "[planner]\ndt = 0.25\n").unwrap();
        let s = Settings::resolve(None, env(&[("VERNA_CONFIG", path.to_str().unwrap())]), &Settings::default()).unwrap();
        assert_eq!(s.planner().unwrap().dt, 0.25);
    }

    #[test]
    fn external_solver_settings() {
        let s = Settings::from_toml("[solver]\ncmd = \"/bin/solver\"\nargs = [\"-m\", \"{model}\"]\nmodel_format = \"lp\"\nsolution_format = \"name-value\"\n").unwrap();
        assert!(s.planner().unwrap().adapter_name().contains("/bin/solver"));
        let bad = Settings::from_toml("[solver]\ncmd = \"/bin/solver\"\nmodel_format = \"xml\"\n").unwrap();
        assert!(bad.planner().is_err());
        let orphan = Settings::from_toml("[solver]\nargs = [\"x\"]\n").unwrap();
        assert!(orphan.planner().is_err());
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(Settings::from_toml("[solver]\ncolour = 1\n").is_err());
        assert!(Settings::from_env(env(&[("VERNA_SOLVER_TIME_S", "soon")])).is_err());
        assert!(Settings::from_toml("[solver]\ntime_s = -1\n").unwrap().planner().is_err());
        let args = Settings::from_env(env(&[("VERNA_SOLVER_ARGS", " {model}  {solution} ")])).unwrap();
        assert_eq!(args.solver.args.unwrap(), vec!["{model}", "{solution}"]);
    }
}
