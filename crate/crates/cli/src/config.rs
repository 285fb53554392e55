//! Deployment configuration, read from TOML.
//!
//! ```toml
//! store = "sessions"
//! templates = "my-templates"      # optional
//! ui_dir = "studio/dist"          # optional, served under /
//!
//! [backend]
//! kind = "live"
//! endpoint = "https://api.example.com/v1/chat/completions"
//! model = "some-model"
//!
//! [executor]
//! kind = "sandbox"
//! harness = ["python3", "harness/run.py"]
//! workdir = "scratch"
//! time_limit_secs = 60
//!
//! [session]
//! auto_debug = true
//! max_auto_debug = 10
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use delf_core::executor::ExecutorSpec;
use delf_core::gateway::BackendConfig;
use delf_core::session::SessionSettings;
use serde::{Deserialize, Serialize};

pub const CONFIG_VAR: &str = "DELF_CONFIG";

fn default_store() -> PathBuf {
    "delf-sessions".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_store")]
    pub store: PathBuf,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub executor: Option<ExecutorSpec>,
    #[serde(default)]
    pub session: SessionSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            store: default_store(),
            templates: None,
            ui_dir: None,
            backend: BackendConfig::default(),
            executor: None,
            session: SessionSettings::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads `path`, else `$DELF_CONFIG`, else defaults. Relative paths in
    /// the file are resolved against the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let path = path.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_VAR).map(PathBuf::from));
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.resolve_against(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store);
        self.templates.as_mut().map(fix);
        self.ui_dir.as_mut().map(fix);
        self.backend.transcript.as_mut().map(fix);
        match &mut self.executor {
            Some(ExecutorSpec::Sandbox(cfg)) => fix(&mut cfg.workdir),
            Some(ExecutorSpec::Recorded { reports }) => fix(reports),
            None => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use delf_core::gateway::BackendKind;

    #[test]
    fn parses_the_documented_example() {
        let text = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = Config::from_toml(&text).unwrap();
        assert_eq!(cfg.backend.kind, BackendKind::Live);
        assert!(cfg.session.auto_debug);
        assert!(matches!(cfg.executor, Some(ExecutorSpec::Sandbox(ref e)) if e.harness.len() == 2));
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
        assert!(Config::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let path = dir.join("delf.toml");
        fs::write(&path, "store = \"s\"\n[executor]\nkind = \"recorded\"\nreports = \"r.jsonl\"\n").unwrap();
        let cfg = Config::load(Some(&path)).unwrap();
        assert_eq!(cfg.store, dir.join("s"));
        assert_eq!(cfg.executor, Some(ExecutorSpec::Recorded { reports: dir.join("r.jsonl") }));
    }
}
