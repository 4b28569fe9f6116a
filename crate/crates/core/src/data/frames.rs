//! Aligned noisy/clean training frames and shuffled batches.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{Manifest, Split};
use crate::dsp::{frame_at, frame_count, FramePlan};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A mixture and the clean signal it was made from, sample-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub noisy: Vec<f32>,
    pub clean: Vec<f32>,
}

/// Every frame of a set of utterances, addressable by a flat index.
#[derive(Clone, Debug)]
pub struct FrameSet {
    plan: FramePlan,
    utterances: Vec<Utterance>,
    index: Vec<(u32, u32)>,
    /// Manifest entries that could not be realized.
    pub skipped: usize,
}

/// `B` noisy frames and their clean targets, each `(B, N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub noisy: Tensor,
    pub clean: Tensor,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.noisy.features()
    }

    pub fn noisy_frame(&self, i: usize) -> &[f32] {
        let n = self.noisy.channels();
        &self.noisy.data()[i * n..(i + 1) * n]
    }

    pub fn clean_frame(&self, i: usize) -> &[f32] {
        let n = self.clean.channels();
        &self.clean.data()[i * n..(i + 1) * n]
    }
}

impl FrameSet {
    pub fn new(plan: FramePlan, utterances: Vec<Utterance>) -> Result<Self> {
        plan.validate()?;
        let mut index = Vec::new();
        for (u, utt) in utterances.iter().enumerate() {
            if utt.noisy.len() != utt.clean.len() {
                return Err(Error::Shape(format!(
                    "utterance {u}: noisy has {} samples, clean {}",
                    utt.noisy.len(),
                    utt.clean.len()
                )));
            }
            for j in 0..frame_count(utt.clean.len(), &plan) {
                index.push((u as u32, j as u32));
            }
        }
        Ok(Self { plan, utterances, index, skipped: 0 })
    }

    /// Realizes the mixtures of `manifest` (optionally one split only).
    /// Unreadable entries are skipped, logged and counted.
    pub fn from_manifest(manifest: &Manifest, split: Option<Split>, plan: FramePlan) -> Result<Self> {
        let mut utterances = Vec::new();
        let mut skipped = 0;
        for entry in manifest.entries.iter().filter(|e| split.is_none_or(|s| e.split == s)) {
            match manifest.realize(entry) {
                Ok((mix, clean)) => utterances.push(Utterance { noisy: mix.noisy.samples, clean: clean.samples }),
                Err(e) => {
                    warn!("skipping {}: {e}", entry.clean_path);
                    skipped += 1;
                }
            }
        }
        let mut set = Self::new(plan, utterances)?;
        set.skipped = skipped;
        Ok(set)
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// `(noisy, clean)` frame `i`.
    pub fn frame(&self, i: usize) -> (Vec<f32>, Vec<f32>) {
        let (u, j) = self.index[i];
        let utt = &self.utterances[u as usize];
        (frame_at(&utt.noisy, &self.plan, j as usize), frame_at(&utt.clean, &self.plan, j as usize))
    }

    /// Frame indices in the shuffled order of one epoch.
    pub fn epoch_order(&self, epoch_seed: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
        order
    }

    /// Full batches over the first `limit` (default: all) shuffled frames;
    /// a final partial batch is dropped.
    pub fn batches(
        &self,
        batch_size: usize,
        epoch_seed: u64,
        limit: Option<usize>,
    ) -> impl Iterator<Item = Batch> + '_ {
        let mut order = self.epoch_order(epoch_seed);
        order.truncate(limit.unwrap_or(usize::MAX));
        let n = self.plan.frame_size;
        let full = order.len().checked_div(batch_size).unwrap_or(0);
        (0..full).map(move |b| {
            let mut noisy = Vec::with_capacity(batch_size * n);
            let mut clean = Vec::with_capacity(batch_size * n);
            for &i in &order[b * batch_size..(b + 1) * batch_size] {
                let (x, s) = self.frame(i);
                noisy.extend_from_slice(&x);
                clean.extend_from_slice(&s);
            }
            Batch {
                noisy: Tensor::new(&[batch_size, n], noisy).expect("batch shape"),
                clean: Tensor::new(&[batch_size, n], clean).expect("batch shape"),
            }
        })
    }
}
