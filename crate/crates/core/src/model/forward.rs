//! Recording the network's forward pass on a [`Tape`].

use super::{Component, DccrnParams, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{NodeId, Real, Tape, Tensor};

/// Which parameters receive gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainable {
    Nothing,
    Cnn,
    Rnn,
    All,
}

impl Trainable {
    pub fn includes(self, c: Component) -> bool {
        matches!((self, c), (Trainable::All, _) | (Trainable::Cnn, Component::Cnn) | (Trainable::Rnn, Component::Rnn))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundConv {
    pub weight: NodeId,
    pub bias: NodeId,
    pub dilation: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundGru {
    pub w_z: NodeId,
    pub w_r: NodeId,
    pub w_h: NodeId,
    pub u_z: NodeId,
    pub u_r: NodeId,
    pub u_h: NodeId,
    pub b_z: NodeId,
    pub b_r: NodeId,
    pub b_h: NodeId,
    pub hidden: usize,
}

/// Parameter tensors registered as tape leaves.
pub struct BoundParams<'a> {
    pub config: &'a ModelConfig,
    pub entry: BoundConv,
    pub blocks: Vec<Vec<BoundConv>>,
    pub exit: BoundConv,
    pub gru: Vec<BoundGru>,
    /// Leaves in [`DccrnParams::named`] order.
    pub leaves: Vec<NodeId>,
}

/// Registers every parameter of `params` on `tape`, borrowing rather than
/// copying. Only tensors selected by `trainable` will carry gradients.
pub fn bind<'a, T: Real>(params: &'a DccrnParams<T>, tape: &mut Tape<'a, T>, trainable: Trainable) -> BoundParams<'a> {
    let leaves: Vec<NodeId> = params
        .named()
        .into_iter()
        .map(|(_, c, t)| if trainable.includes(c) { tape.param(t) } else { tape.constant(t) })
        .collect();
    let mut it = leaves.iter().copied();
    let mut next = || it.next().expect("leaf count matches the parameter layout");
    let mut conv = |dilation: usize| BoundConv { weight: next(), bias: next(), dilation };
    let entry = conv(params.entry.dilation);
    let blocks = params.blocks.iter().map(|b| b.layers.iter().map(|k| conv(k.dilation)).collect()).collect();
    let exit = conv(params.exit.dilation);
    let gru = params
        .gru
        .iter()
        .map(|g| BoundGru {
            w_z: next(),
            w_r: next(),
            w_h: next(),
            u_z: next(),
            u_r: next(),
            u_h: next(),
            b_z: next(),
            b_r: next(),
            b_h: next(),
            hidden: g.hidden_size(),
        })
        .collect();
    BoundParams { config: &params.config, entry, blocks, exit, gru, leaves }
}

/// Switches for ablations of the recurrent half.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Run the GRU; when false its output is treated as zero.
    pub gru: bool,
    /// Add the DenseNet's last sub-frame to the GRU output.
    pub shortcut: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { gru: true, shortcut: true }
    }
}

impl ForwardOptions {
    /// DenseNet only: output is the CNN's final sub-frame.
    pub fn cnn_only() -> Self {
        Self { gru: false, shortcut: true }
    }
}

/// Nodes produced by one frame.
#[derive(Clone, Copy, Debug)]
pub struct FrameOutput {
    /// DenseNet output, `(N, 1)`.
    pub cnn: NodeId,
    /// Enhanced last sub-frame, `(N/M)`.
    pub out: NodeId,
}

fn conv_act<T: Real>(tape: &mut Tape<'_, T>, x: NodeId, k: &BoundConv, slope: T) -> Result<NodeId> {
    let y = tape.conv1d(x, k.weight, k.bias, k.dilation)?;
    tape.leaky_relu(y, slope)
}

/// One dense block: every layer sees the newest-first channel concatenation
/// of the block input and all earlier layer outputs; the last layer's output
/// leaves the block.
pub fn dense_block_forward<T: Real>(
    tape: &mut Tape<'_, T>,
    layers: &[BoundConv],
    x: NodeId,
    slope: T,
) -> Result<NodeId> {
    let mut maps = vec![x];
    for k in layers {
        let input = if maps.len() == 1 {
            maps[0]
        } else {
            let newest_first: Vec<NodeId> = maps.iter().rev().copied().collect();
            tape.concat_channels(&newest_first)?
        };
        maps.push(conv_act(tape, input, k, slope)?);
    }
    Ok(*maps.last().expect("block has layers"))
}

/// `(N, 1)` frame → `(N, 1)` DenseNet estimate.
pub fn densenet_forward<T: Real>(tape: &mut Tape<'_, T>, bound: &BoundParams<'_>, frame: NodeId) -> Result<NodeId> {
    let cfg = bound.config;
    let n = cfg.frame_size;
    if tape.value(frame).shape() != [n, 1] {
        return Err(Error::Shape(format!("frame must be ({n}, 1), got {:?}", tape.value(frame).shape())));
    }
    let slope = T::lit(cfg.leaky_slope as f64);
    let mut h = conv_act(tape, frame, &bound.entry, slope)?;
    debug_assert_eq!(tape.value(h).shape(), [n, cfg.growth]);
    for block in &bound.blocks {
        h = dense_block_forward(tape, block, h, slope)?;
        debug_assert_eq!(tape.value(h).shape(), [n, cfg.growth]);
    }
    // The exit layer emits the waveform, so it stays linear.
    let out = tape.conv1d(h, bound.exit.weight, bound.exit.bias, bound.exit.dilation)?;
    debug_assert_eq!(tape.value(out).shape(), [n, 1]);
    Ok(out)
}

/// One GRU step. `update_gate` replaces the computed `z` when given.
pub fn gru_cell<T: Real>(
    tape: &mut Tape<'_, T>,
    layer: &BoundGru,
    x: NodeId,
    h: NodeId,
    update_gate: Option<NodeId>,
) -> Result<NodeId> {
    let gate = |tape: &mut Tape<'_, T>, w, u, b, hv| -> Result<NodeId> {
        let a = tape.linear(x, w, Some(b))?;
        let c = tape.linear(hv, u, None)?;
        tape.add(a, c)
    };
    let z = match update_gate {
        Some(z) => z,
        None => {
            let pre = gate(tape, layer.w_z, layer.u_z, layer.b_z, h)?;
            tape.sigmoid(pre)
        }
    };
    let r_pre = gate(tape, layer.w_r, layer.u_r, layer.b_r, h)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h)?;
    let cand_pre = gate(tape, layer.w_h, layer.u_h, layer.b_h, rh)?;
    let cand = tape.tanh(cand_pre);
    let keep = tape.one_minus(z);
    let old = tape.mul(keep, h)?;
    let new = tape.mul(z, cand)?;
    tape.add(old, new)
}

/// Stacked GRU layers over `seq` from zero initial states; returns the last
/// layer's state at the final step.
pub fn gru_forward<T: Real>(tape: &mut Tape<'_, T>, layers: &[BoundGru], seq: &[NodeId]) -> Result<NodeId> {
    if seq.is_empty() {
        return Err(Error::Shape("GRU input sequence is empty".into()));
    }
    let mut inputs = seq.to_vec();
    for layer in layers {
        let mut h = tape.input(Tensor::zeros(&[layer.hidden]));
        let mut states = Vec::with_capacity(inputs.len());
        for &x in &inputs {
            h = gru_cell(tape, layer, x, h, None)?;
            states.push(h);
        }
        inputs = states;
    }
    Ok(*inputs.last().expect("non-empty sequence"))
}

/// Full network on one `(N, 1)` frame: DenseNet, reshape into `M`
/// consecutive sub-frames (oldest first), GRU, plus the additive shortcut
/// from the DenseNet's final sub-frame.
pub fn dccrn_forward<T: Real>(
    tape: &mut Tape<'_, T>,
    bound: &BoundParams<'_>,
    frame: NodeId,
    options: ForwardOptions,
) -> Result<FrameOutput> {
    let cfg = bound.config;
    let cnn = densenet_forward(tape, bound, frame)?;
    let sub = cfg.sub_frame_len();
    let last_rows = tape.rows(cnn, (cfg.sub_frames - 1) * sub, sub)?;
    let last = tape.reshape(last_rows, &[sub])?;
    if !options.gru {
        let out = if options.shortcut { last } else { tape.scale(last, T::zero()) };
        return Ok(FrameOutput { cnn, out });
    }
    let mut seq = Vec::with_capacity(cfg.sub_frames);
    for m in 0..cfg.sub_frames - 1 {
        let rows = tape.rows(cnn, m * sub, sub)?;
        seq.push(tape.reshape(rows, &[sub])?);
    }
    seq.push(last);
    let g = gru_forward(tape, &bound.gru, &seq)?;
    debug_assert_eq!(tape.value(g).shape(), [sub]);
    let out = if options.shortcut { tape.add(g, last)? } else { g };
    Ok(FrameOutput { cnn, out })
}
