//! Objective, optimizer, checkpoints and the three-stage training schedule.

mod checkpoint;
mod objective;
mod optim;
mod trainer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::MelConfig;
use crate::error::{Error, Result};
use crate::model::{ForwardOptions, Trainable};

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use objective::{objective, objective_value};
pub use optim::{adam_step, adam_update, clip_gru_gradients, AdamConfig, AdamState, ParamGrads};
pub use trainer::{train_stage, EpochLog, StageRequest};

/// One of the three training phases, in the order they must run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Cnn,
    Rnn,
    Finetune,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Cnn, Stage::Rnn, Stage::Finetune];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Cnn => "cnn",
            Stage::Rnn => "rnn",
            Stage::Finetune => "finetune",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.tag() == tag)
    }

    /// The stage whose checkpoint must seed this one, if any.
    pub fn prerequisite(self) -> Option<Stage> {
        match self {
            Stage::Cnn => None,
            Stage::Rnn => Some(Stage::Cnn),
            Stage::Finetune => Some(Stage::Rnn),
        }
    }

    /// Whether a checkpoint written by `from` (or none) may start this stage.
    /// A stage may always resume from its own checkpoints.
    pub fn accepts(self, from: Option<Stage>) -> bool {
        from == self.prerequisite() || from == Some(self)
    }

    pub fn trainable(self) -> Trainable {
        match self {
            Stage::Cnn => Trainable::Cnn,
            Stage::Rnn => Trainable::Rnn,
            Stage::Finetune => Trainable::All,
        }
    }

    pub fn forward_options(self) -> ForwardOptions {
        match self {
            Stage::Cnn => ForwardOptions::cnn_only(),
            Stage::Rnn | Stage::Finetune => ForwardOptions::default(),
        }
    }

    /// The CNN stage scores the whole frame, later stages the final sub-frame.
    pub fn full_frame_loss(self) -> bool {
        self == Stage::Cnn
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stage `{s}` (cnn, rnn, finetune)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSchedule {
    pub epochs: u32,
    pub lr: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the mel-spectrogram term.
    pub lambda: f32,
    pub cnn: StageSchedule,
    pub rnn: StageSchedule,
    pub finetune: StageSchedule,
    /// Frames per optimizer step.
    pub batch_size: usize,
    /// Symmetric clamp applied to recurrent-weight gradients.
    pub gru_clip: f32,
    pub adam: AdamConfig,
    pub seed: u64,
    pub mel: MelConfig,
    /// Frames drawn per epoch; all frames when absent.
    pub frames_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0 / 60.0,
            cnn: StageSchedule { epochs: 100, lr: 1e-4 },
            rnn: StageSchedule { epochs: 20, lr: 5e-6 },
            finetune: StageSchedule { epochs: 20, lr: 5e-7 },
            batch_size: 32,
            gru_clip: 0.1,
            adam: AdamConfig::default(),
            seed: 0,
            mel: MelConfig::default(),
            frames_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self, stage: Stage) -> StageSchedule {
        match stage {
            Stage::Cnn => self.cnn,
            Stage::Rnn => self.rnn,
            Stage::Finetune => self.finetune,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let lrs = [self.cnn.lr, self.rnn.lr, self.finetune.lr];
        if lrs.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return bad(format!("learning rates {lrs:?} must be positive"));
        }
        if !(lrs[0] > lrs[1] && lrs[1] > lrs[2]) {
            return bad(format!("learning rates {lrs:?} must strictly decrease from cnn to finetune"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.gru_clip > 0.0) {
            return bad(format!("gru_clip {} must be positive", self.gru_clip));
        }
        if self.frames_per_epoch == Some(0) {
            return bad("frames_per_epoch must be positive when set".into());
        }
        self.adam.validate()
    }
}
