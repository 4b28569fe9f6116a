//! Checks shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::sync::Arc;

use dccrn::dsp::{MelAnalysis, MelConfig};
use dccrn::model::{bind, dccrn_forward, DccrnParams, ForwardOptions, ModelConfig, Trainable};
use dccrn::tensor::{NodeId, Tape, Tensor};
use dccrn::training::{objective, train_stage, Stage, StageRequest, StageSchedule, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOL: f64 = 1e-4;
pub const MEL_GRAD_TOL: f64 = 1e-3;
pub const GRAD_CASES: u64 = 25;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// A network small enough for exhaustive finite differences.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        frame_size: 32,
        sub_frames: 4,
        growth: 2,
        dilations: vec![1, 2],
        layers_per_block: 3,
        small_kernel: 3,
        large_kernel: 5,
        channel_kernel: 3,
        gru_hidden: 3,
        leaky_slope: 0.01,
        gru_update_bias: 0.0,
    }
}

pub fn small_mel() -> MelConfig {
    MelConfig { fft_size: 16, hop: 8, n_mels: 4, fmin: 0.0, fmax: 8000.0 }
}

/// Relative disagreement between an analytic and a numeric derivative.
/// Magnitudes below 1e-6 are compared on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

type Graph<'g> = dyn for<'t> Fn(&mut Tape<'t, f64>, &[NodeId]) -> dccrn::Result<NodeId> + 'g;

fn eval(inputs: &[Tensor<f64>], graph: &Graph<'_>) -> f64 {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = graph(&mut tape, &ids).unwrap();
    tape.value(loss).data()[0]
}

/// Worst relative error of `graph`'s gradient with respect to every element
/// of every input, against central differences. A failing element is
/// retried with a much smaller step in case it sits next to a kink.
pub fn fd_worst(inputs: &[Tensor<f64>], graph: &Graph<'_>) -> f64 {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = graph(&mut tape, &ids).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut worst = 0.0f64;
    for (i, id) in ids.iter().enumerate() {
        let analytic: Vec<f64> = grads.get(*id).map_or_else(|| vec![0.0; inputs[i].len()], |g| g.to_vec());
        for k in 0..inputs[i].len() {
            let numeric = |eps: f64| {
                let mut plus = inputs.to_vec();
                plus[i].data_mut()[k] += eps;
                let mut minus = inputs.to_vec();
                minus[i].data_mut()[k] -= eps;
                (eval(&plus, graph) - eval(&minus, graph)) / (2.0 * eps)
            };
            let mut e = rel_err(analytic[k], numeric(1e-5));
            if e >= GRAD_TOL {
                e = e.min(rel_err(analytic[k], numeric(1e-8)));
            }
            worst = worst.max(e);
        }
    }
    worst
}

/// Gradient of the full frame → loss graph with respect to every parameter,
/// against central differences on the parameters themselves.
pub fn fd_network_worst(
    params: &DccrnParams<f64>,
    frame: &[f64],
    target: &[f64],
    lambda: f64,
    mel: &Arc<MelAnalysis<f64>>,
) -> f64 {
    let loss_of = |p: &DccrnParams<f64>| -> f64 {
        let mut tape = Tape::new();
        let bound = bind(p, &mut tape, Trainable::Nothing);
        let x = tape.input(Tensor::column(frame.to_vec()));
        let out = dccrn_forward(&mut tape, &bound, x, ForwardOptions::default()).unwrap();
        let t = tape.input(Tensor::vector(target.to_vec()));
        let l = objective(&mut tape, out.out, t, lambda, mel).unwrap();
        tape.value(l).data()[0]
    };
    let mut tape = Tape::new();
    let bound = bind(params, &mut tape, Trainable::All);
    let x = tape.input(Tensor::column(frame.to_vec()));
    let out = dccrn_forward(&mut tape, &bound, x, ForwardOptions::default()).unwrap();
    let t = tape.input(Tensor::vector(target.to_vec()));
    let l = objective(&mut tape, out.out, t, lambda, mel).unwrap();
    let grads = tape.backward(l).unwrap();
    let analytic: Vec<Vec<f64>> =
        bound.leaves.iter().map(|id| grads.get(*id).expect("trainable leaf").to_vec()).collect();
    let mut worst = 0.0f64;
    let count = params.named().len();
    for i in 0..count {
        let len = params.named()[i].2.len();
        for k in 0..len {
            let numeric = |eps: f64| {
                let mut plus = params.clone();
                plus.named_mut()[i].2.data_mut()[k] += eps;
                let mut minus = params.clone();
                minus.named_mut()[i].2.data_mut()[k] -= eps;
                (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps)
            };
            let mut e = rel_err(analytic[i][k], numeric(1e-5));
            if e >= GRAD_TOL {
                e = e.min(rel_err(analytic[i][k], numeric(1e-8)));
            }
            worst = worst.max(e);
        }
    }
    worst
}

/// Per-op worst error over [`GRAD_CASES`] random cases, with its tolerance.
pub struct GradResult {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
}

impl GradResult {
    pub fn ok(&self) -> bool {
        self.worst < self.tol
    }
}

fn over_cases(name: &'static str, tol: f64, salt: u64, mut case: impl FnMut(&mut ChaCha8Rng) -> f64) -> GradResult {
    let worst = (0..GRAD_CASES).map(|c| case(&mut rng(salt * 1000 + c))).fold(0.0, f64::max);
    GradResult { name, worst, tol }
}

fn target_mse<'t>(tape: &mut Tape<'t, f64>, y: NodeId, rng_seed: u64) -> dccrn::Result<NodeId> {
    let shape = tape.value(y).shape().to_vec();
    let t = random_tensor(&mut rng(rng_seed), &shape, 1.0);
    let t = tape.input(t);
    tape.mse(y, t)
}

/// Every differentiable op, then the whole network with and without the
/// spectral term.
pub fn gradient_suite() -> Vec<GradResult> {
    let mut out = Vec::new();
    out.push(over_cases("conv1d", GRAD_TOL, 1, |r| {
        let (n, ci, co) = (r.random_range(3..12), r.random_range(1..4), r.random_range(1..4));
        let k = [1, 3, 5][r.random_range(0..3)];
        let d = r.random_range(1..4);
        let s = r.random();
        let inputs =
            [random_tensor(r, &[n, ci], 1.0), random_tensor(r, &[k, ci, co], 1.0), random_tensor(r, &[co], 1.0)];
        fd_worst(&inputs, &move |t, x| {
            let y = t.conv1d(x[0], x[1], x[2], d)?;
            target_mse(t, y, s)
        })
    }));
    out.push(over_cases("leaky_relu", GRAD_TOL, 2, |r| {
        let (n, c) = (r.random_range(1..10), r.random_range(1..4));
        let slope = r.random_range(0.01..0.5);
        let s = r.random();
        fd_worst(&[random_tensor(r, &[n, c], 1.0)], &move |t, x| {
            let y = t.leaky_relu(x[0], slope)?;
            target_mse(t, y, s)
        })
    }));
    out.push(over_cases("concat_channels", GRAD_TOL, 3, |r| {
        let n = r.random_range(1..8);
        let parts = r.random_range(1..4);
        let inputs: Vec<_> = (0..parts)
            .map(|_| {
                let c = r.random_range(1..4);
                random_tensor(r, &[n, c], 1.0)
            })
            .collect();
        let s = r.random();
        fd_worst(&inputs, &move |t, x| {
            let y = t.concat_channels(x)?;
            target_mse(t, y, s)
        })
    }));
    out.push(over_cases("linear", GRAD_TOL, 4, |r| {
        let (fi, fo) = (r.random_range(1..8), r.random_range(1..8));
        let with_bias = r.random::<bool>();
        let s = r.random();
        let inputs = [random_tensor(r, &[fi], 1.0), random_tensor(r, &[fi, fo], 1.0), random_tensor(r, &[fo], 1.0)];
        fd_worst(&inputs, &move |t, x| {
            let y = t.linear(x[0], x[1], with_bias.then_some(x[2]))?;
            target_mse(t, y, s)
        })
    }));
    type Unary = for<'t> fn(&mut Tape<'t, f64>, NodeId) -> NodeId;
    let unary: [(&'static str, Unary); 4] = [
        ("sigmoid", |t, x| t.sigmoid(x)),
        ("tanh", |t, x| t.tanh(x)),
        ("one_minus", |t, x| t.one_minus(x)),
        ("scale", |t, x| t.scale(x, -1.7)),
    ];
    for (i, (name, op)) in unary.into_iter().enumerate() {
        out.push(over_cases(name, GRAD_TOL, 10 + i as u64, |r| {
            let (s, n) = (r.random(), r.random_range(1..10));
            fd_worst(&[random_tensor(r, &[n], 3.0)], &move |t, x| {
                let y = op(t, x[0]);
                target_mse(t, y, s)
            })
        }));
    }
    out.push(over_cases("add", GRAD_TOL, 20, |r| {
        let n = r.random_range(1..10);
        let s = r.random();
        fd_worst(&[random_tensor(r, &[n], 1.0), random_tensor(r, &[n], 1.0)], &move |t, x| {
            let y = t.add(x[0], x[1])?;
            target_mse(t, y, s)
        })
    }));
    out.push(over_cases("mul", GRAD_TOL, 21, |r| {
        let n = r.random_range(1..10);
        let s = r.random();
        fd_worst(&[random_tensor(r, &[n], 1.0), random_tensor(r, &[n], 1.0)], &move |t, x| {
            let y = t.mul(x[0], x[1])?;
            target_mse(t, y, s)
        })
    }));
    out.push(over_cases("rows+reshape", GRAD_TOL, 22, |r| {
        let (n, c) = (r.random_range(2..10), r.random_range(1..4));
        let start = r.random_range(0..n - 1);
        let len = r.random_range(1..n - start + 1);
        let s = r.random();
        fd_worst(&[random_tensor(r, &[n, c], 1.0)], &move |t, x| {
            let y = t.rows(x[0], start, len)?;
            let y = t.reshape(y, &[len * c])?;
            target_mse(t, y, s)
        })
    }));
    out.push(over_cases("mse", GRAD_TOL, 23, |r| {
        let n = r.random_range(1..10);
        fd_worst(&[random_tensor(r, &[n], 1.0), random_tensor(r, &[n], 1.0)], &|t, x| t.mse(x[0], x[1]))
    }));
    out.push(over_cases("mel_spectrogram", MEL_GRAD_TOL, 24, |r| {
        let fft = [16usize, 32][r.random_range(0..2)];
        let cfg = MelConfig { fft_size: fft, hop: fft / 2, n_mels: r.random_range(1..6), fmin: 0.0, fmax: 8000.0 };
        let mel = Arc::new(MelAnalysis::<f64>::new(&cfg, 16000).unwrap());
        let n = r.random_range(8..80);
        let s = r.random();
        fd_worst(&[random_tensor(r, &[n], 1.0)], &move |t, x| {
            let y = t.mel_spectrogram(x[0], &mel)?;
            target_mse(t, y, s)
        })
    }));
    let mel = Arc::new(MelAnalysis::<f64>::new(&small_mel(), 16000).unwrap());
    let cfg = tiny_config();
    let sub = cfg.sub_frame_len();
    for (name, lambda, tol, salt) in
        [("network, time loss", 0.0, GRAD_TOL, 30), ("network, time+mel loss", 1.0 / 60.0, MEL_GRAD_TOL, 31)]
    {
        out.push(over_cases(name, tol, salt, |r| {
            let mut params = DccrnParams::<f64>::init(&cfg, r.random()).unwrap();
            // Non-zero biases so every bias path is exercised.
            for (n, _, t) in params.named_mut() {
                if n.ends_with("bias") || n.contains(".b_") {
                    t.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.1..0.1));
                }
            }
            let frame: Vec<f64> = (0..cfg.frame_size).map(|_| r.random_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..sub).map(|_| r.random_range(-0.5..0.5)).collect();
            fd_network_worst(&params, &frame, &target, lambda, &mel)
        }));
    }
    out
}

/// Direct transcription of the GRU update equations with explicit loops.
/// Weight layout matches the model: input maps `(F_in, H)`, recurrent
/// maps `(H, H)`, applied as `x·W`.
pub struct GruOracle {
    pub w: [Vec<Vec<f64>>; 3],
    pub u: [Vec<Vec<f64>>; 3],
    pub b: [Vec<f64>; 3],
}

impl GruOracle {
    fn affine(x: &[f64], w: &[Vec<f64>], j: usize) -> f64 {
        x.iter().zip(w).map(|(xi, row)| xi * row[j]).sum()
    }

    /// `[z, r, h̃]` indices 0, 1, 2.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hidden = h.len();
        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        let z: Vec<f64> = (0..hidden)
            .map(|j| sigmoid(Self::affine(x, &self.w[0], j) + Self::affine(h, &self.u[0], j) + self.b[0][j]))
            .collect();
        let r: Vec<f64> = (0..hidden)
            .map(|j| sigmoid(Self::affine(x, &self.w[1], j) + Self::affine(h, &self.u[1], j) + self.b[1][j]))
            .collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = (0..hidden)
            .map(|j| (Self::affine(x, &self.w[2], j) + Self::affine(&rh, &self.u[2], j) + self.b[2][j]).tanh())
            .collect();
        (0..hidden).map(|j| (1.0 - z[j]) * h[j] + z[j] * cand[j]).collect()
    }
}

impl GruOracle {
    pub fn from_layer(g: &dccrn::model::GruLayer<f64>) -> Self {
        let mat = |t: &Tensor<f64>| t.data().chunks(t.shape()[1]).map(<[f64]>::to_vec).collect::<Vec<_>>();
        Self {
            w: [mat(&g.w_z), mat(&g.w_r), mat(&g.w_h)],
            u: [mat(&g.u_z), mat(&g.u_r), mat(&g.u_h)],
            b: [g.b_z.data().to_vec(), g.b_r.data().to_vec(), g.b_h.data().to_vec()],
        }
    }
}

/// Zero-padded dilated correlation written as a plain quadruple loop over
/// `x[τ + k·γ]` with `k` centred on the kernel.
pub fn oracle_conv(x: &[Vec<f64>], k: &dccrn::tensor::ConvKernel<f64>) -> Vec<Vec<f64>> {
    let (taps, c_in, c_out) = (k.weights.shape()[0], k.weights.shape()[1], k.weights.shape()[2]);
    let w = k.weights.data();
    let n = x.len() as isize;
    let half = (taps / 2) as isize;
    (0..n)
        .map(|tau| {
            (0..c_out)
                .map(|o| {
                    let mut s = k.bias.data()[o];
                    for j in 0..taps {
                        let src = tau + (j as isize - half) * k.dilation as isize;
                        if (0..n).contains(&src) {
                            for c in 0..c_in {
                                s += x[src as usize][c] * w[(j * c_in + c) * c_out + o];
                            }
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn oracle_leaky(x: Vec<Vec<f64>>, slope: f64) -> Vec<Vec<f64>> {
    x.into_iter().map(|r| r.into_iter().map(|v| if v > 0.0 { v } else { slope * v }).collect()).collect()
}

/// DenseNet output `(N, 1)` flattened, replaying the dense connectivity with
/// explicit newest-first concatenation.
pub fn oracle_densenet(p: &DccrnParams<f64>, frame: &[f64]) -> Vec<f64> {
    let slope = p.config.leaky_slope as f64;
    let x: Vec<Vec<f64>> = frame.iter().map(|v| vec![*v]).collect();
    let mut h = oracle_leaky(oracle_conv(&x, &p.entry), slope);
    for block in &p.blocks {
        let mut maps = vec![h.clone()];
        for k in &block.layers {
            let input: Vec<Vec<f64>> =
                (0..frame.len()).map(|t| maps.iter().rev().flat_map(|m| m[t].iter().copied()).collect()).collect();
            maps.push(oracle_leaky(oracle_conv(&input, k), slope));
        }
        h = maps.pop().unwrap();
    }
    oracle_conv(&h, &p.exit).into_iter().map(|r| r[0]).collect()
}

/// Whole-network output sub-frame, built from the oracles above.
pub fn oracle_dccrn(p: &DccrnParams<f64>, frame: &[f64]) -> Vec<f64> {
    let cnn = oracle_densenet(p, frame);
    let sub = p.config.sub_frame_len();
    let mut seq: Vec<Vec<f64>> = cnn.chunks(sub).map(<[f64]>::to_vec).collect();
    for layer in &p.gru {
        let o = GruOracle::from_layer(layer);
        let mut h = vec![0.0; layer.hidden_size()];
        let mut states = Vec::new();
        for x in &seq {
            h = o.step(x, &h);
            states.push(h.clone());
        }
        seq = states;
    }
    let last = &cnn[cnn.len() - sub..];
    seq.last().unwrap().iter().zip(last).map(|(g, s)| g + s).collect()
}

/// Width of the DenseNet's response to a centred impulse when every weight
/// is positive, so every path contributes and nothing cancels.
pub fn measured_receptive_field(config: &ModelConfig) -> usize {
    let mut p = DccrnParams::<f64>::zeros(config).unwrap();
    for (name, _, t) in p.named_mut() {
        if !name.ends_with("bias") && !name.contains(".b_") {
            t.data_mut().iter_mut().for_each(|v| *v = 0.1);
        }
    }
    let n = config.frame_size;
    let mut frame = vec![0.0; n];
    frame[n / 2] = 1.0;
    let mut tape = Tape::new();
    let bound = bind(&p, &mut tape, Trainable::Nothing);
    let x = tape.input(Tensor::column(frame));
    let y = dccrn::model::densenet_forward(&mut tape, &bound, x).unwrap();
    let nz: Vec<usize> = tape.value(y).data().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
    nz.last().unwrap() - nz.first().unwrap() + 1
}

/// Streaming lag measured on a live enhancer. Output sample `j` of the
/// clip sits at stream position `j + hop` (the pre-roll block that file
/// enhancement drops); its lag is the number of input samples pushed when it
/// is emitted, minus `j`. Each probed input is also perturbed to check that
/// nothing it influences is emitted before it was pushed. Returns the
/// largest lag over `probe`.
pub fn measured_streaming_delay(params: &DccrnParams<f32>, probe: &[usize]) -> usize {
    use dccrn::enhance::StreamingEnhancer;
    let hop = params.plan().hop();
    let last = probe.iter().max().copied().unwrap_or(0);
    let len = (last + 2 * params.config.frame_size).next_multiple_of(hop);
    let mut r = rng(17);
    let base: Vec<f32> = (0..len).map(|_| r.random_range(-0.5..0.5)).collect();
    let stream = |x: &[f32]| -> Vec<Vec<f32>> {
        let mut e = StreamingEnhancer::new(params, ForwardOptions::default()).unwrap();
        x.chunks_exact(hop).map(|b| e.push(b).unwrap()).collect()
    };
    let reference = stream(&base);
    let mut emitted_at = Vec::new();
    let mut pushed = 0;
    for block in &reference {
        pushed += hop;
        emitted_at.extend(std::iter::repeat_n(pushed, block.len()));
    }
    let mut worst = 0;
    for &s in probe {
        let mut x = base.clone();
        x[s] += 0.25;
        let first =
            stream(&x).iter().zip(&reference).position(|(a, b)| a != b).expect("input change never reaches the output");
        assert!((first + 1) * hop > s, "output reacted to input {s} before it was pushed");
        worst = worst.max(emitted_at[s + hop] - s);
    }
    worst
}

/// Largest deviation of the tape GRU cell from [`GruOracle`] over `steps`
/// random cells with input and hidden sizes in `1..7`.
pub fn gru_cell_oracle_worst(steps: usize, seed: u64) -> f64 {
    use dccrn::model::{gru_cell, BoundGru, GruLayer};
    let mut worst = 0.0f64;
    let mut r = rng(seed);
    for _ in 0..steps {
        let (fi, h) = (r.random_range(1..7), r.random_range(1..7));
        let layer = GruLayer::<f64> {
            w_z: random_tensor(&mut r, &[fi, h], 1.0),
            w_r: random_tensor(&mut r, &[fi, h], 1.0),
            w_h: random_tensor(&mut r, &[fi, h], 1.0),
            u_z: random_tensor(&mut r, &[h, h], 1.0),
            u_r: random_tensor(&mut r, &[h, h], 1.0),
            u_h: random_tensor(&mut r, &[h, h], 1.0),
            b_z: random_tensor(&mut r, &[h], 1.0),
            b_r: random_tensor(&mut r, &[h], 1.0),
            b_h: random_tensor(&mut r, &[h], 1.0),
        };
        let x = random_tensor(&mut r, &[fi], 1.0);
        let h0 = random_tensor(&mut r, &[h], 1.0);
        let want = GruOracle::from_layer(&layer).step(x.data(), h0.data());
        let mut tape = Tape::new();
        let b = BoundGru {
            w_z: tape.param(&layer.w_z),
            w_r: tape.param(&layer.w_r),
            w_h: tape.param(&layer.w_h),
            u_z: tape.param(&layer.u_z),
            u_r: tape.param(&layer.u_r),
            u_h: tape.param(&layer.u_h),
            b_z: tape.param(&layer.b_z),
            b_r: tape.param(&layer.b_r),
            b_h: tape.param(&layer.b_h),
            hidden: h,
        };
        let xi = tape.input(x);
        let hi = tape.input(h0);
        let got = gru_cell(&mut tape, &b, xi, hi, None).unwrap();
        for (a, w) in tape.value(got).data().iter().zip(&want) {
            worst = worst.max((a - w).abs());
        }
    }
    worst
}

/// With the update gate forced to zero every GRU layer of `params` returns
/// its previous state bit for bit.
pub fn closed_gate_keeps_state(params: &DccrnParams<f64>, seed: u64) -> bool {
    use dccrn::model::gru_cell;
    let mut r = rng(seed);
    params.gru.iter().enumerate().all(|(i, layer)| {
        let mut tape = Tape::new();
        let bound = bind(params, &mut tape, Trainable::Nothing);
        let g = bound.gru[i];
        let x = tape.input(random_tensor(&mut r, &[layer.input_size()], 1.0));
        let h0 = random_tensor(&mut r, &[layer.hidden_size()], 1.0);
        let h = tape.input(h0.clone());
        let z = tape.input(Tensor::zeros(&[layer.hidden_size()]));
        let out = gru_cell(&mut tape, &g, x, h, Some(z)).unwrap();
        tape.value(out).data() == h0.data()
    })
}

/// Short schedule for [`tiny_config`] with strictly decreasing rates.
pub fn tiny_train(epochs: u32, lr: f32) -> TrainConfig {
    TrainConfig {
        cnn: StageSchedule { epochs, lr },
        rnn: StageSchedule { epochs, lr: lr / 2.0 },
        finetune: StageSchedule { epochs, lr: lr / 4.0 },
        batch_size: 4,
        mel: small_mel(),
        seed: 3,
        ..TrainConfig::default()
    }
}

/// Sinusoids in uniform noise, framed for [`tiny_config`].
pub fn tiny_data(seed: u64, utterances: usize, len: usize) -> dccrn::data::FrameSet {
    let utts = (0..utterances)
        .map(|u| {
            let clean: Vec<f32> = (0..len).map(|i| 0.3 * ((i as f32) * (0.2 + 0.05 * u as f32)).sin()).collect();
            let mut r = rng(seed + u as u64);
            let noise: Vec<f64> = (0..len).map(|_| r.random_range(-0.5..0.5)).collect();
            let noisy = clean.iter().zip(&noise).map(|(c, n)| c + 0.3 * *n as f32).collect();
            dccrn::data::Utterance { noisy, clean }
        })
        .collect();
    dccrn::data::FrameSet::new(tiny_config().plan(), utts).unwrap()
}

/// One stage of [`tiny_config`] training; returns the checkpoint and epoch logs.
pub fn run(
    stage: Stage,
    cfg: &TrainConfig,
    data: &dccrn::data::FrameSet,
    resume: Option<dccrn::Checkpoint>,
) -> dccrn::Result<(dccrn::Checkpoint, Vec<dccrn::training::EpochLog>)> {
    let mut logs = Vec::new();
    let req = StageRequest { stage, model: &tiny_config(), train: cfg, resume, config_text: "test\n" };
    let ckpt = train_stage(req, data, &mut |log, _| {
        logs.push(log.clone());
        Ok(())
    })?;
    Ok((ckpt, logs))
}

/// Every value of one component, in parameter order.
pub fn component_data(p: &DccrnParams<f32>, which: dccrn::model::Component) -> Vec<f32> {
    p.named().iter().filter(|(_, c, _)| *c == which).flat_map(|(_, _, t)| t.data().to_vec()).collect()
}
