//! Command-line front end and HTTP/WebSocket session service.

pub mod commands;
pub mod config;
pub mod service;

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use verna_agents::backend::{LiveBackend, LlmBackend, ScriptedBackend, DEFAULT_BASE_URL};
use verna_agents::fixtures;
use verna_core::scene::{bundled_scene, bundled_scene_ids, load_scene, Scene};

use crate::config::Settings;

/// A bundled scenario id or a scene file.
pub fn resolve_scene(spec: &str) -> anyhow::Result<Scene> {
    if let Some(s) = bundled_scene(spec) {
        return Ok(s);
    }
    if Path::new(spec).exists() {
        return load_scene(spec).with_context(|| format!("cannot load scene {spec}"));
    }
    let ids: Vec<&str> = bundled_scene_ids().collect();
    Err(anyhow!("unknown scene '{spec}' (bundled: {})", ids.join(", ")))
}

/// `live`, or `scripted:NAME` with a bundled fixture name or a fixture file.
pub fn resolve_backend(spec: &str, settings: &Settings) -> anyhow::Result<Arc<dyn LlmBackend>> {
    if spec == "live" {
        let base = settings.llm.base_url.clone().unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        return Ok(Arc::new(LiveBackend::from_env(base, settings.llm_timeout())?));
    }
    let Some(name) = spec.strip_prefix("scripted:") else {
        return Err(anyhow!("unknown backend '{spec}' (expected live or scripted:FIXTURE)"));
    };
    if let Some(b) = fixtures::scripted(name) {
        return Ok(Arc::new(b));
    }
    if Path::new(name).exists() {
        return Ok(Arc::new(ScriptedBackend::load(name)?));
    }
    Err(anyhow!("unknown fixture '{name}' (bundled: {})", fixtures::NAMES.join(", ")))
}
