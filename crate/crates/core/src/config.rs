//! Deployment configuration and the reference data it points at.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, ParameterCatalog};
use crate::immunization::{ImmunizationError, ImmunizationSchedule};
use crate::screening::{LabTestTable, Ruleset, RulesetError, ScreeningContext};

/// Environment variable consulted when no `--config` is given.
pub const CONFIG_ENV: &str = "HMMS_CONFIG";

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_ttl() -> u64 {
    8 * 60
}

/// `hmms.toml`. Relative paths are resolved against the file's directory.
/// Reference files left unset fall back to the shipped defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub database: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ruleset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lab_tests: Option<PathBuf>,
    #[serde(default = "default_ttl")]
    pub session_ttl_minutes: u64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("catalog: {0}")]
    Catalog(#[from] CatalogError),
    #[error("schedule: {0}")]
    Schedule(#[from] ImmunizationError),
    #[error("ruleset: {0}")]
    Ruleset(#[from] RulesetError),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Unreadable { .. } => "ConfigUnreadable",
            ConfigError::Malformed { .. } => "MalformedConfig",
            ConfigError::Catalog(e) => e.code(),
            ConfigError::Schedule(e) => e.code(),
            ConfigError::Ruleset(e) => e.code(),
        }
    }
}

impl Config {
    pub fn new(database: impl Into<PathBuf>) -> Self {
        Config {
            database: database.into(),
            bind: default_bind(),
            port: default_port(),
            catalog: None,
            schedule: None,
            ruleset: None,
            lab_tests: None,
            session_ttl_minutes: default_ttl(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Unreadable { path: path.to_path_buf(), source })?;
        let mut cfg: Config = toml::from_str(&text)
            .map_err(|e| ConfigError::Malformed { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.database);
        for p in [&mut cfg.catalog, &mut cfg.schedule, &mut cfg.ruleset, &mut cfg.lab_tests].into_iter().flatten() {
            resolve(p);
        }
        Ok(cfg)
    }

    /// Loads and cross-validates every reference file.
    pub fn reference(&self) -> Result<Reference, ConfigError> {
        let catalog = match &self.catalog {
            Some(p) => ParameterCatalog::load(p)?,
            None => ParameterCatalog::shipped(),
        };
        let schedule = match &self.schedule {
            Some(p) => ImmunizationSchedule::load(p)?,
            None => ImmunizationSchedule::shipped(),
        };
        let lab_tests = match &self.lab_tests {
            Some(p) => LabTestTable::load(p)?,
            None => LabTestTable::shipped(),
        };
        let ruleset = match &self.ruleset {
            Some(p) if p.exists() => Ruleset::load(p, &catalog)?,
            _ => Ruleset::shipped(&catalog),
        };
        Ok(Reference {
            catalog: Arc::new(catalog),
            schedule: Arc::new(schedule),
            lab_tests: Arc::new(lab_tests),
            ruleset: Arc::new(ruleset),
        })
    }
}

/// Immutable reference data shared by every component.
#[derive(Debug, Clone)]
pub struct Reference {
    pub catalog: Arc<ParameterCatalog>,
    pub schedule: Arc<ImmunizationSchedule>,
    pub lab_tests: Arc<LabTestTable>,
    pub ruleset: Arc<Ruleset>,
}

impl Reference {
    pub fn shipped() -> Self {
        let catalog = ParameterCatalog::shipped();
        let ruleset = Ruleset::shipped(&catalog);
        Reference {
            catalog: Arc::new(catalog),
            schedule: Arc::new(ImmunizationSchedule::shipped()),
            lab_tests: Arc::new(LabTestTable::shipped()),
            ruleset: Arc::new(ruleset),
        }
    }

    pub fn screening_context(&self) -> ScreeningContext<'_> {
        ScreeningContext { catalog: &self.catalog, schedule: &self.schedule, lab_tests: &self.lab_tests }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hmms.toml");
        std::fs::write(&path, "database = \"data/hmms.db\"\nport = 9000\nruleset = \"rules.toml\"\n").unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.database, dir.path().join("data/hmms.db"));
        assert_eq!(cfg.ruleset, Some(dir.path().join("rules.toml")));
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.bind, "127.0.0.1");
        // Ruleset path not yet installed: shipped default is used.
        assert_eq!(cfg.reference().unwrap().ruleset.rules.len(), 10);
    }

    #[test]
    fn bad_catalog_surfaces_code() {
        let dir = tempfile::tempdir().unwrap();
        let catalog = dir.path().join("catalog.toml");
        let short = crate::catalog::DEFAULT_CATALOG.replace(
            "[[parameter]]\nkey = \"Student Photo\"\narea = \"GeneralInformation\"\ncardinality = \"OneTime\"\nkind = { type = \"PhotoRef\" }\n",
            "",
        );
        std::fs::write(&catalog, short).unwrap();
        let mut cfg = Config::new(dir.path().join("x.db"));
        cfg.catalog = Some(catalog);
        let err = cfg.reference().unwrap_err();
        assert_eq!(err.code(), "CatalogCountMismatch", "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hmms.toml");
        std::fs::write(&path, "database = \"x.db\"\nprot = 1\n").unwrap();
        assert_eq!(Config::load(&path).unwrap_err().code(), "MalformedConfig");
    }
}
