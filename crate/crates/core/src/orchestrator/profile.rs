use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tags::TagSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("prompt template must contain exactly one `{{question}}`, found {0}")]
    Placeholder(usize),
    #[error("tag names must be non-empty and distinct")]
    Tags,
    #[error("max_iterations must be at least 1")]
    MaxIterations,
    #[error("cannot read profile {path}: {message}")]
    Load { path: String, message: String },
}

fn default_max_iterations() -> u32 {
    256
}

fn default_max_tokens() -> u32 {
    512
}

fn default_timeout_secs() -> u64 {
    300
}

/// Agent configuration: prompt, tag vocabulary, and run limits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub name: String,
    pub prompt_template: String,
    #[serde(default)]
    pub tags: TagSet,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_max_tokens")]
    pub max_tokens_per_call: u32,
    /// Wall-clock budget for a whole run.
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl AgentProfile {
    pub fn new(name: impl Into<String>, prompt_template: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            prompt_template: prompt_template.into(),
            tags: TagSet::default(),
            max_iterations: default_max_iterations(),
            max_tokens_per_call: default_max_tokens(),
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ProfileError> {
        let profile: Self = serde_json::from_str(json).map_err(|e| ProfileError::Load {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let load_err = |message: String| ProfileError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let profile: Self = serde_json::from_str(&text).map_err(|e| load_err(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let n = self.prompt_template.matches("{question}").count();
        if n != 1 {
            return Err(ProfileError::Placeholder(n));
        }
        let t = &self.tags;
        let mut names = vec![&t.think, &t.search, &t.information, &t.answer];
        names.extend(t.refine.as_ref());
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() || names.iter().any(|n| n.is_empty()) {
            return Err(ProfileError::Tags);
        }
        if self.max_iterations == 0 {
            return Err(ProfileError::MaxIterations);
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}
