//! JSON configuration: extra models and chips, power constants, sweeps.
//!
//! ```json
//! { "models": [], "chips": [], "power": {}, "sweeps": [] }
//! ```
//!
//! Every key is optional. Entries in `models` and `chips` are added to the
//! built-in catalog, replacing a built-in of the same name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explorer::SweepSpec;
use crate::machine::{builtin_chip, ChipConfig, BUILTIN_CHIPS};
use crate::model::{builtin_model, ModelArch, BUILTIN_MODELS};
use crate::power::PowerModel;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub models: Vec<ModelArch>,
    pub chips: Vec<ChipConfig>,
    pub power: PowerModel,
    pub sweeps: Vec<SweepSpec>,
}

impl ConfigFile {
    /// Parses and validates. Errors name the offending field path and line.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |where_: String, e: Error| Error::Config(format!("{where_}: {e}"));
        for (i, m) in self.models.iter().enumerate() {
            m.validate().map_err(|e| cfg_err(format!("models[{i}]"), e))?;
        }
        for (i, c) in self.chips.iter().enumerate() {
            c.validate().map_err(|e| cfg_err(format!("chips[{i}]"), e))?;
        }
        self.power.validate().map_err(|e| cfg_err("power".into(), e))?;
        let catalog = Catalog::from_config(self);
        for (i, s) in self.sweeps.iter().enumerate() {
            s.validate(&catalog).map_err(|e| cfg_err(format!("sweeps[{i}]"), e))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Models, chips and power constants available to a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    pub models: Vec<ModelArch>,
    pub chips: Vec<ChipConfig>,
    pub power: PowerModel,
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::default()
    }

    pub fn from_config(cfg: &ConfigFile) -> Self {
        Self {
            models: cfg.models.clone(),
            chips: cfg.chips.clone(),
            power: cfg.power,
        }
    }

    pub fn model(&self, name: &str) -> Result<ModelArch> {
        if let Some(m) = self.models.iter().find(|m| m.name.eq_ignore_ascii_case(name.trim())) {
            return Ok(m.clone());
        }
        builtin_model(name).map_err(|_| Error::UnknownModel {
            name: name.to_string(),
            valid: self.model_names().join(", "),
        })
    }

    pub fn chip(&self, name: &str) -> Result<ChipConfig> {
        if let Some(c) = self.chips.iter().find(|c| c.name.eq_ignore_ascii_case(name.trim())) {
            return Ok(c.clone());
        }
        builtin_chip(name).map_err(|_| Error::UnknownChip {
            name: name.to_string(),
            valid: self.chip_names().join(", "),
        })
    }

    pub fn model_names(&self) -> Vec<String> {
        merged_names(
            BUILTIN_MODELS.iter().copied(),
            self.models.iter().map(|m| m.name.as_str()),
        )
    }

    pub fn chip_names(&self) -> Vec<String> {
        merged_names(
            BUILTIN_CHIPS.iter().copied(),
            self.chips.iter().map(|c| c.name.as_str()),
        )
    }

    /// User-supplied chips whose name contains `needle` (case-insensitive).
    pub fn user_chips_matching(&self, needle: &str) -> Vec<ChipConfig> {
        let needle = needle.to_ascii_lowercase();
        self.chips
            .iter()
            .filter(|c| c.name.to_ascii_lowercase().contains(&needle))
            .cloned()
            .collect()
    }
}

fn merged_names<'a>(builtin: impl Iterator<Item = &'a str>, extra: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = builtin.map(str::to_string).collect();
    for n in extra {
        if !out.iter().any(|o| o.eq_ignore_ascii_case(n)) {
            out.push(n.to_string());
        }
    }
    out
}
