use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::potentials::{surface_by_id, PotentialSurface};

/// Contents of a run configuration file: an `[env]` and an `[agent]` table,
/// each optional and defaulted field by field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
}

/// Parses TOML into `T`, reporting the offending field path on failure.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Schema {
        path: "<document>".into(),
        message: e.to_string().trim().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string().trim().to_string(),
        }
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    /// `path` if given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Checks both sections and returns the configured surface.
    pub fn validate(&self) -> Result<PotentialSurface> {
        let surface = surface_by_id(&self.env.surface)?;
        self.env.validate(&surface)?;
        self.agent.validate()?;
        Ok(surface)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is always representable")
    }
}
