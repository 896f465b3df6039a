//! Gateway configuration, read from TOML.
//!
//! ```toml
//! port = 8080
//! tick_ms = 50
//! scene = "scene_1"          # bundled name or path to a scene JSON file
//! translator = "template"    # template | llm | fault:<rate>:<seed>
//! gate_buffering = true
//!
//! [durations]                # ticks per tool, overriding the registry
//! pick = 40
//!
//! [llm]                      # used when translator = "llm"
//! url = "http://localhost:8000/v1/chat/completions"
//! model = "local"
//! ```
//!
//! The LLM key is read from `SYMWRAP_LLM_KEY` unless `llm.api_key` is set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symwrap::gate::GateConfig;
use symwrap::orchestrator::{ClockMode, Mode, SessionConfig};
use symwrap::tools::ToolDurations;
use symwrap::translator::{EndpointConfig, TranslatorKind};
use symwrap::world::{bundled_scene, spawn_scene, SceneSpec, WorldState};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub bind: String,
    pub port: u16,
    pub tick_ms: u32,
    pub scene: String,
    pub translator: String,
    pub gate_buffering: bool,
    pub durations: BTreeMap<String, u64>,
    pub llm: Option<EndpointConfig>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            tick_ms: 50,
            scene: "scene_1".into(),
            translator: "template".into(),
            gate_buffering: true,
            durations: BTreeMap::new(),
            llm: None,
        }
    }
}

/// A bundled scene name, or a path to a scene file.
pub fn load_scene(scene: &str) -> Result<SceneSpec, String> {
    bundled_scene(scene).or_else(|_| SceneSpec::load(Path::new(scene)).map_err(|e| e.to_string()))
}

impl GatewayConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tick_ms == 0 {
            return Err(ConfigError::Invalid("tick_ms must be positive".into()));
        }
        self.scene_spec().map_err(ConfigError::Invalid)?;
        self.translator_kind(None).map_err(ConfigError::Invalid)?;
        if let Some(bad) = self.durations.keys().find(|t| symwrap::tools::lookup(t).is_none()) {
            return Err(ConfigError::Invalid(format!("unknown tool {bad:?} in durations")));
        }
        Ok(())
    }

    pub fn scene_spec(&self) -> Result<SceneSpec, String> {
        load_scene(&self.scene)
    }

    /// A fresh copy of the configured world, ticking at `tick_ms`.
    pub fn world(&self) -> Result<WorldState, String> {
        let mut w = spawn_scene(&self.scene_spec()?).map_err(|e| e.to_string())?;
        w.tick_ms = self.tick_ms;
        Ok(w)
    }

    /// Resolves a translator spec, falling back to the configured one.
    pub fn translator_kind(&self, spec: Option<&str>) -> Result<TranslatorKind, String> {
        match (spec.unwrap_or(&self.translator), &self.llm) {
            ("llm", Some(endpoint)) => {
                let mut endpoint = endpoint.clone();
                if endpoint.api_key.is_none() {
                    endpoint.api_key = std::env::var("SYMWRAP_LLM_KEY").ok();
                }
                Ok(TranslatorKind::ExternalLlm(endpoint))
            }
            (s, _) => TranslatorKind::from_cli(s),
        }
    }

    pub fn durations(&self) -> ToolDurations {
        let mut d = ToolDurations::default();
        d.0.extend(self.durations.clone());
        d
    }

    /// Sessions served over HTTP run on the wall clock.
    pub fn session_config(&self, mode: Mode, translator: TranslatorKind) -> SessionConfig {
        let mut cfg = SessionConfig::new(mode, translator);
        cfg.durations = self.durations();
        cfg.clock = ClockMode::Realtime;
        cfg.gate = GateConfig {
            buffering: self.gate_buffering,
        };
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(GatewayConfig::from_toml("").unwrap(), GatewayConfig::default());
    }

    #[test]
    fn example_file_loads() {
        let cfg = GatewayConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("gateway.toml")).unwrap();
        assert_eq!(cfg.durations(), ToolDurations::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = GatewayConfig::from_toml("port = 9000\ntick_ms = 20\n[durations]\npick = 4\n").unwrap();
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.durations().0["pick"], 4);
        assert_eq!(cfg.durations().0["home"], 20);
        assert_eq!(cfg.world().unwrap().tick_ms, 20);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "port = \"x\"",
            "tick_ms = 0",
            "scene = \"nowhere.json\"",
            "translator = \"oracle\"",
            "colour = 1",
            "[durations]\nfly = 3",
        ] {
            assert!(GatewayConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn llm_endpoint_comes_from_the_file() {
        let cfg = GatewayConfig::from_toml("translator = \"llm\"\n[llm]\nurl = \"http://x\"\nmodel = \"m\"\n").unwrap();
        assert!(matches!(cfg.translator_kind(None), Ok(TranslatorKind::ExternalLlm(e)) if e.model == "m"));
    }
}
