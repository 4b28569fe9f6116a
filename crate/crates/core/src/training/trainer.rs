use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use log::debug;

use super::{adam_step, clip_gru_gradients, objective, AdamState, Checkpoint, ParamGrads, Stage, TrainConfig};
use crate::data::{Batch, FrameSet};
use crate::dsp::{MelAnalysis, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::model::{bind, dccrn_forward, DccrnParams, ModelConfig};
use crate::tensor::{Tape, Tensor};

/// What to train and where to start from.
pub struct StageRequest<'a> {
    pub stage: Stage,
    /// Architecture for a fresh model; a resumed checkpoint must match it.
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub resume: Option<Checkpoint>,
    /// Effective configuration, echoed into every checkpoint.
    pub config_text: &'a str,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: u32,
    pub stage: Stage,
    pub mean_loss: f64,
    pub lr: f32,
    pub wall_ms: u128,
}

impl EpochLog {
    pub const HEADER: &'static str = "epoch,stage,mean_loss,lr,wall_ms";
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{:.9e},{:e},{}", self.epoch, self.stage, self.mean_loss, self.lr, self.wall_ms)
    }
}

fn epoch_seed(seed: u64, stage: Stage, epoch: u32) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((stage.tag() as u64) << 40) ^ epoch as u64
}

/// Loss of one batch; gradients (averaged over the batch) are added to `grads`.
fn batch_step(
    params: &DccrnParams<f32>,
    stage: Stage,
    batch: &Batch,
    cfg: &TrainConfig,
    mel: &Arc<MelAnalysis<f32>>,
    grads: &mut ParamGrads<f32>,
) -> Result<f64> {
    let sub = params.config.sub_frame_len();
    let n = params.config.frame_size;
    let mut loss_sum = 0.0;
    for i in 0..batch.size() {
        let mut tape = Tape::new();
        let bound = bind(params, &mut tape, stage.trainable());
        let x = tape.input(Tensor::column(batch.noisy_frame(i).to_vec()));
        let out = dccrn_forward(&mut tape, &bound, x, stage.forward_options())?;
        let clean = batch.clean_frame(i);
        let (estimate, target) = if stage.full_frame_loss() {
            (out.cnn, tape.input(Tensor::column(clean.to_vec())))
        } else {
            (out.out, tape.input(Tensor::vector(clean[n - sub..].to_vec())))
        };
        let loss = objective(&mut tape, estimate, target, cfg.lambda, mel)?;
        loss_sum += tape.value(loss).data()[0] as f64;
        let g = tape.backward(loss)?;
        for (k, leaf) in bound.leaves.iter().enumerate() {
            if let Some(gk) = g.get(*leaf) {
                grads.accumulate(k, gk);
            }
        }
    }
    grads.scale(1.0 / batch.size() as f32);
    Ok(loss_sum / batch.size() as f64)
}

/// Runs one stage to its configured epoch count. `on_epoch` sees every
/// epoch's log line and checkpoint; an error from it stops training.
pub fn train_stage(
    req: StageRequest<'_>,
    data: &FrameSet,
    on_epoch: &mut dyn FnMut(&EpochLog, &Checkpoint) -> Result<()>,
) -> Result<Checkpoint> {
    let StageRequest { stage, model, train, resume, config_text } = req;
    train.validate()?;
    let from = resume.as_ref().map(|c| c.stage);
    if !stage.accepts(from) {
        return Err(match stage.prerequisite() {
            Some(required) => Error::MissingPrerequisite { stage: stage.to_string(), required: required.to_string() },
            None => {
                Error::InvalidInput(format!("stage {stage} cannot start from a {} checkpoint", from.expect("rejected")))
            }
        });
    }
    let (mut params, mut state, start) = match resume {
        None => {
            let p = DccrnParams::init(model, train.seed)?;
            let s = AdamState::new(&p);
            (p, s, 0)
        }
        Some(ckpt) => {
            if &ckpt.params.config != model {
                return Err(Error::InvalidConfig("checkpoint architecture differs from the configured model".into()));
            }
            if ckpt.stage == stage {
                let s = ckpt.optimizer.unwrap_or_else(|| AdamState::new(&ckpt.params));
                (ckpt.params, s, ckpt.epoch)
            } else {
                let s = AdamState::new(&ckpt.params);
                (ckpt.params, s, 0)
            }
        }
    };
    if *data.plan() != params.plan() {
        return Err(Error::InvalidConfig(format!(
            "data framing {:?} differs from the model's {:?}",
            data.plan(),
            params.plan()
        )));
    }
    let available = train.frames_per_epoch.map_or(data.len(), |l| l.min(data.len()));
    if available < train.batch_size {
        return Err(Error::InvalidInput(format!(
            "{available} frames per epoch cannot fill one batch of {}",
            train.batch_size
        )));
    }
    let mel = Arc::new(MelAnalysis::<f32>::new(&train.mel, SAMPLE_RATE)?);
    let schedule = train.schedule(stage);
    let mut step = 0u64;
    for epoch in start..schedule.epochs {
        let t0 = Instant::now();
        let (mut total, mut batches) = (0.0, 0usize);
        for batch in data.batches(train.batch_size, epoch_seed(train.seed, stage, epoch), train.frames_per_epoch) {
            let mut grads = ParamGrads::zeros(&params, stage.trainable());
            let loss = batch_step(&params, stage, &batch, train, &mel, &mut grads)?;
            step += 1;
            if !loss.is_finite() {
                return Err(Error::Diverged { stage: stage.to_string(), epoch: epoch + 1, step, loss });
            }
            clip_gru_gradients(&mut grads, train.gru_clip);
            adam_step(&mut params, &grads, &mut state, schedule.lr, &train.adam).map_err(|e| match e {
                Error::NonFinite(_) => {
                    Error::Diverged { stage: stage.to_string(), epoch: epoch + 1, step, loss: f64::NAN }
                }
                other => other,
            })?;
            debug!("{stage} epoch {} step {step}: loss {loss:.6e}", epoch + 1);
            total += loss;
            batches += 1;
        }
        let log = EpochLog {
            epoch: epoch + 1,
            stage,
            mean_loss: total / batches as f64,
            lr: schedule.lr,
            wall_ms: t0.elapsed().as_millis(),
        };
        let ckpt = Checkpoint::new(params.clone(), stage, epoch + 1, Some(state.clone()), config_text.to_string());
        on_epoch(&log, &ckpt)?;
    }
    let epoch = start.max(schedule.epochs);
    Ok(Checkpoint::new(params, stage, epoch, Some(state), config_text.to_string()))
}
