//! The DCCRN network: a dilated DenseNet front end, a two-layer many-to-one
//! GRU back end, and an additive shortcut between them.

mod forward;
mod ledger;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::FramePlan;
use crate::error::{Error, Result};
use crate::tensor::{ConvKernel, Real, Tensor};

pub use forward::{
    bind, dccrn_forward, dense_block_forward, densenet_forward, gru_cell, gru_forward, BoundConv, BoundGru,
    BoundParams, ForwardOptions, FrameOutput, Trainable,
};
pub use ledger::{render_ledger, shape_ledger, LedgerRow};

/// Architecture hyperparameters. Defaults reproduce the 1024-sample,
/// four-block topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub frame_size: usize,
    pub sub_frames: usize,
    /// Channels produced by every dense layer (growth rate `D`).
    pub growth: usize,
    /// Dilation of the middle layer of each dense block; one entry per block.
    pub dilations: Vec<usize>,
    pub layers_per_block: usize,
    pub small_kernel: usize,
    pub large_kernel: usize,
    /// Kernel size of the channel-changing entry and exit convolutions.
    pub channel_kernel: usize,
    /// Hidden units of the first GRU layer; the second has `N/M`.
    pub gru_hidden: usize,
    pub leaky_slope: f32,
    /// Initial update-gate bias of both GRU layers. Negative values start the
    /// GRU close to holding its zero state.
    pub gru_update_bias: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frame_size: 1024,
            sub_frames: 4,
            growth: 32,
            dilations: vec![1, 2, 4, 8],
            layers_per_block: 5,
            small_kernel: 5,
            large_kernel: 55,
            channel_kernel: 55,
            gru_hidden: 32,
            leaky_slope: 0.01,
            gru_update_bias: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn plan(&self) -> FramePlan {
        FramePlan { frame_size: self.frame_size, sub_frames: self.sub_frames }
    }

    pub fn sub_frame_len(&self) -> usize {
        self.frame_size / self.sub_frames
    }

    /// Index of the wide, dilated layer inside a dense block.
    pub fn middle_layer(&self) -> usize {
        self.layers_per_block / 2
    }

    /// `(kernel, dilation)` of dense layer `layer` in block `block`.
    pub fn dense_layer_kernel(&self, block: usize, layer: usize) -> (usize, usize) {
        if layer == self.middle_layer() {
            (self.large_kernel, self.dilations[block])
        } else {
            (self.small_kernel, 1)
        }
    }

    /// `Σ (K − 1)·γ + 1` over the whole convolution stack.
    pub fn receptive_field(&self) -> usize {
        let mut span = 2 * (self.channel_kernel - 1);
        for b in 0..self.dilations.len() {
            for l in 0..self.layers_per_block {
                let (k, d) = self.dense_layer_kernel(b, l);
                span += (k - 1) * d;
            }
        }
        span + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.growth == 0 || self.layers_per_block == 0 || self.gru_hidden == 0 {
            return bad("growth, layers_per_block and gru_hidden must be positive".into());
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return bad(format!("dilations {:?} must be non-empty and >= 1", self.dilations));
        }
        for k in [self.small_kernel, self.large_kernel, self.channel_kernel] {
            if k % 2 == 0 {
                return bad(format!("kernel size {k} must be odd"));
            }
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky slope {} not in (0, 1)", self.leaky_slope));
        }
        if !self.gru_update_bias.is_finite() {
            return bad("gru_update_bias must be finite".into());
        }
        if self.receptive_field() > self.frame_size {
            return bad(format!(
                "receptive field {} exceeds the frame size {}",
                self.receptive_field(),
                self.frame_size
            ));
        }
        Ok(())
    }
}

/// Which half of the network a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    Cnn,
    Rnn,
}

/// Five (by default) densely connected convolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlock<T = f32> {
    pub layers: Vec<ConvKernel<T>>,
}

/// One GRU layer; input maps are `(F_in, H)`, recurrent maps `(H, H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer<T = f32> {
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

impl<T: Real> GruLayer<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[input, hidden]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        Self { w_z: w(), w_r: w(), w_h: w(), u_z: u(), u_r: u(), u_h: u(), b_z: b(), b_r: b(), b_h: b() }
    }

    pub fn input_size(&self) -> usize {
        self.w_z.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.shape()[1]
    }

    fn tensors(&self) -> [(&'static str, &Tensor<T>); 9] {
        [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<T>); 9] {
        [
            ("w_z", &mut self.w_z),
            ("w_r", &mut self.w_r),
            ("w_h", &mut self.w_h),
            ("u_z", &mut self.u_z),
            ("u_r", &mut self.u_r),
            ("u_h", &mut self.u_h),
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
        ]
    }
}

/// Every learnable tensor of the network plus the architecture it encodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DccrnParams<T = f32> {
    pub config: ModelConfig,
    pub entry: ConvKernel<T>,
    pub blocks: Vec<DenseBlock<T>>,
    pub exit: ConvKernel<T>,
    pub gru: Vec<GruLayer<T>>,
}

/// Exact learnable-scalar totals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub entry: usize,
    /// Weights (no biases) of each dense block.
    pub dense_block_weights: Vec<usize>,
    pub dense_biases: usize,
    pub exit: usize,
    /// Weights (no biases) of each GRU layer.
    pub gru_weights: Vec<usize>,
    pub gru_biases: usize,
    pub cnn: usize,
    pub rnn: usize,
    pub total: usize,
}

/// Parameter total quoted for the published model.
pub const REPORTED_PARAMS: usize = 1_380_000;

impl<T: Real> DccrnParams<T> {
    /// All-zero parameters with the topology described by `config`.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.growth;
        let entry = ConvKernel::zeros(config.channel_kernel, 1, d, 1)?;
        let blocks = (0..config.dilations.len())
            .map(|b| {
                let layers = (0..config.layers_per_block)
                    .map(|l| {
                        let (k, dil) = config.dense_layer_kernel(b, l);
                        ConvKernel::zeros(k, (l + 1) * d, d, dil)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(DenseBlock { layers })
            })
            .collect::<Result<Vec<_>>>()?;
        let exit = ConvKernel::zeros(config.channel_kernel, d, 1, 1)?;
        let sub = config.sub_frame_len();
        let gru = vec![GruLayer::zeros(sub, config.gru_hidden), GruLayer::zeros(config.gru_hidden, sub)];
        Ok(Self { config: config.clone(), entry, blocks, exit, gru })
    }

    /// Fan-in scaled uniform weights `U(−1/√fan_in, 1/√fan_in)`. Biases are
    /// zero apart from the GRU update gates, which take `gru_update_bias`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, _, t) in params.named_mut() {
            if is_bias(&name) {
                continue;
            }
            let bound = 1.0 / (fan_in(t.shape()) as f64).sqrt();
            for v in t.data_mut() {
                *v = T::lit(rng.random_range(-bound..bound));
            }
        }
        let b_z = T::lit(config.gru_update_bias as f64);
        for g in &mut params.gru {
            g.b_z.data_mut().fill(b_z);
        }
        Ok(params)
    }

    pub fn plan(&self) -> FramePlan {
        self.config.plan()
    }

    /// `(name, component, tensor)` for every learnable tensor, in a fixed
    /// order with stable names.
    pub fn named(&self) -> Vec<(String, Component, &Tensor<T>)> {
        let mut out = vec![
            ("entry.weight".to_string(), Component::Cnn, &self.entry.weights),
            ("entry.bias".to_string(), Component::Cnn, &self.entry.bias),
        ];
        for (b, block) in self.blocks.iter().enumerate() {
            for (l, k) in block.layers.iter().enumerate() {
                out.push((format!("block{b}.layer{l}.weight"), Component::Cnn, &k.weights));
                out.push((format!("block{b}.layer{l}.bias"), Component::Cnn, &k.bias));
            }
        }
        out.push(("exit.weight".to_string(), Component::Cnn, &self.exit.weights));
        out.push(("exit.bias".to_string(), Component::Cnn, &self.exit.bias));
        for (i, layer) in self.gru.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("gru{i}.{name}"), Component::Rnn, t));
            }
        }
        out
    }

    /// Mutable counterpart of [`DccrnParams::named`], same order.
    pub fn named_mut(&mut self) -> Vec<(String, Component, &mut Tensor<T>)> {
        let mut out = vec![
            ("entry.weight".to_string(), Component::Cnn, &mut self.entry.weights),
            ("entry.bias".to_string(), Component::Cnn, &mut self.entry.bias),
        ];
        for (b, block) in self.blocks.iter_mut().enumerate() {
            for (l, k) in block.layers.iter_mut().enumerate() {
                out.push((format!("block{b}.layer{l}.weight"), Component::Cnn, &mut k.weights));
                out.push((format!("block{b}.layer{l}.bias"), Component::Cnn, &mut k.bias));
            }
        }
        out.push(("exit.weight".to_string(), Component::Cnn, &mut self.exit.weights));
        out.push(("exit.bias".to_string(), Component::Cnn, &mut self.exit.bias));
        for (i, layer) in self.gru.iter_mut().enumerate() {
            for (name, t) in layer.tensors_mut() {
                out.push((format!("gru{i}.{name}"), Component::Rnn, t));
            }
        }
        out
    }

    pub fn param_count(&self) -> ParamCount {
        let weights = |k: &ConvKernel<T>| k.weights.len();
        let dense_block_weights: Vec<usize> = self.blocks.iter().map(|b| b.layers.iter().map(weights).sum()).collect();
        let dense_biases = self.blocks.iter().flat_map(|b| &b.layers).map(|k| k.bias.len()).sum();
        let gru_weights: Vec<usize> = self
            .gru
            .iter()
            .map(|g| [&g.w_z, &g.w_r, &g.w_h, &g.u_z, &g.u_r, &g.u_h].iter().map(|t| t.len()).sum())
            .collect();
        let gru_biases = self.gru.iter().map(|g| g.b_z.len() + g.b_r.len() + g.b_h.len()).sum();
        let entry = self.entry.weights.len() + self.entry.bias.len();
        let exit = self.exit.weights.len() + self.exit.bias.len();
        let cnn = entry + exit + dense_block_weights.iter().sum::<usize>() + dense_biases;
        let rnn = gru_weights.iter().sum::<usize>() + gru_biases;
        ParamCount {
            entry,
            dense_block_weights,
            dense_biases,
            exit,
            gru_weights,
            gru_biases,
            cnn,
            rnn,
            total: cnn + rnn,
        }
    }

    pub fn cast<U: Real>(&self) -> DccrnParams<U> {
        let conv = |k: &ConvKernel<T>| k.cast::<U>();
        DccrnParams {
            config: self.config.clone(),
            entry: conv(&self.entry),
            blocks: self.blocks.iter().map(|b| DenseBlock { layers: b.layers.iter().map(conv).collect() }).collect(),
            exit: conv(&self.exit),
            gru: self
                .gru
                .iter()
                .map(|g| GruLayer {
                    w_z: g.w_z.cast(),
                    w_r: g.w_r.cast(),
                    w_h: g.w_h.cast(),
                    u_z: g.u_z.cast(),
                    u_r: g.u_r.cast(),
                    u_h: g.u_h.cast(),
                    b_z: g.b_z.cast(),
                    b_r: g.b_r.cast(),
                    b_h: g.b_h.cast(),
                })
                .collect(),
        }
    }

    /// Sets every tensor of one component to zero.
    pub fn zero_component(&mut self, which: Component) {
        for (_, c, t) in self.named_mut() {
            if c == which {
                t.data_mut().iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }
}

pub(crate) fn is_bias(name: &str) -> bool {
    name.ends_with("bias") || name.contains(".b_")
}

/// Inputs feeding one output unit: `K·C_in` for convolutions, rows for matrices.
fn fan_in(shape: &[usize]) -> usize {
    match shape {
        [k, c_in, _] => k * c_in,
        [rows, _] => *rows,
        [n] => *n,
        _ => 1,
    }
}
