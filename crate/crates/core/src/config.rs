//! Experiment configuration: a TOML file layered over built-in defaults,
//! then `key.path=value` overrides.
//!
//! ```toml
//! [model]            # architecture (frame_size, sub_frames, growth, ...)
//! [train]            # lambda, batch_size, gru_clip, seed, frames_per_epoch
//! [train.cnn]        # epochs, lr   (likewise [train.rnn], [train.finetune])
//! [train.adam]       # beta1, beta2, eps
//! [train.mel]        # fft_size, hop, n_mels, fmin, fmax
//! [data]             # manifest
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::{config_hash, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Training manifest (JSON lines); only `train` entries are used.
    pub manifest: Option<String>,
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies one `a.b.c=value` assignment. The value is read as a TOML
/// literal when possible and as a bare string otherwise.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        node = match node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            _ => return Err(Error::InvalidConfig(format!("`{p}` in `{key}` is not a table"))),
        };
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Defaults, overlaid with `text`, overlaid with `overrides`; validated.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table =
            toml::to_string(&Self::default()).expect("defaults serialize").parse().expect("defaults parse");
        let file: Table = text.parse().map_err(|e| Error::InvalidConfig(format!("{e}")))?;
        merge(&mut table, file);
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = Value::Table(table).try_into().map_err(|e| Error::InvalidConfig(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.train.mel.fft_size < 2 {
            return Err(Error::InvalidConfig("mel fft_size must be >= 2".into()));
        }
        Ok(())
    }

    /// Canonical text of the configuration actually in effect.
    pub fn effective_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> u64 {
        config_hash(&self.effective_text())
    }
}
