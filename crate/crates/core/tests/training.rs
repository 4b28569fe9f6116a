mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{component_data, run, tiny_config, tiny_data, tiny_train};
use dccrn::dsp::{MelAnalysis, MelConfig};
use dccrn::model::{Component, DccrnParams, Trainable};
use dccrn::training::*;
use dccrn::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signal(seed: u64, n: usize) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| r.random_range(-0.5..0.5)).collect()
}

#[test]
fn adam_matches_closed_form_recursion() {
    let cfg = AdamConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let n = 6;
    let mut p: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut want = p.clone();
    let (mut mo, mut vo) = (vec![0.0; n], vec![0.0; n]);
    for t in 1..=10u64 {
        let g: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        adam_update(&mut p, &g, &mut m, &mut v, t, 1e-2, &cfg);
        for i in 0..n {
            mo[i] = 0.9 * mo[i] + 0.1 * g[i];
            vo[i] = 0.999 * vo[i] + 0.001 * g[i] * g[i];
            let mh = mo[i] / (1.0 - 0.9f64.powi(t as i32));
            let vh = vo[i] / (1.0 - 0.999f64.powi(t as i32));
            want[i] -= 1e-2 * mh / (vh.sqrt() + 1e-8);
        }
    }
    for i in 0..n {
        assert!((p[i] - want[i]).abs() < 1e-6);
    }
}

#[test]
fn adam_first_step_moves_by_lr() {
    let cfg = AdamConfig::default();
    let mut p = vec![0.0f64, 1.0, -1.0];
    let g = [3.0, -0.2, 0.0];
    let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
    adam_update(&mut p, &g, &mut m, &mut v, 1, 0.5, &cfg);
    assert!((p[0] + 0.5).abs() < 1e-6);
    assert!((p[1] - 1.5).abs() < 1e-6);
    assert_eq!(p[2], -1.0);
}

#[test]
fn adam_step_skips_frozen_tensors_and_rejects_nan() {
    let mut params = DccrnParams::<f32>::init(&tiny_config(), 1).unwrap();
    let before = params.clone();
    let mut grads = ParamGrads::zeros(&params, Trainable::Rnn);
    for g in grads.grads.iter_mut().flatten() {
        g.iter_mut().for_each(|v| *v = 1.0);
    }
    let mut state = AdamState::new(&params);
    adam_step(&mut params, &grads, &mut state, 1e-3, &AdamConfig::default()).unwrap();
    for ((_, c, a), (_, _, b)) in params.named().iter().zip(before.named()) {
        assert_eq!(*c == Component::Cnn, a.data() == b.data());
    }
    grads.grads.iter_mut().flatten().next().unwrap()[0] = f32::NAN;
    let snapshot = params.clone();
    assert!(matches!(
        adam_step(&mut params, &grads, &mut state, 1e-3, &AdamConfig::default()),
        Err(Error::NonFinite(_))
    ));
    assert_eq!(params, snapshot);
}

#[test]
fn gru_clip_touches_only_recurrent_gradients() {
    let params = DccrnParams::<f32>::init(&tiny_config(), 1).unwrap();
    let mut grads = ParamGrads::zeros(&params, Trainable::All);
    for g in grads.grads.iter_mut().flatten() {
        g.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f32 - 3.0) * 0.07);
    }
    let raw = grads.clone();
    clip_gru_gradients(&mut grads, 0.1);
    for ((c, a), b) in grads.components.iter().zip(&grads.grads).zip(&raw.grads) {
        for (x, y) in a.as_ref().unwrap().iter().zip(b.as_ref().unwrap()) {
            let want = if *c == Component::Rnn { y.clamp(-0.1, 0.1) } else { *y };
            assert_eq!(*x, want);
        }
    }
}

/// Time MSE plus `lambda` times the MSE of mel spectrograms computed with a
/// direct DFT and freshly built triangles.
fn objective_oracle(s: &[f64], e: &[f64], lambda: f64, cfg: &MelConfig) -> f64 {
    let n = s.len() as f64;
    let time = s.iter().zip(e).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let f = cfg.fft_size;
    let bins = f / 2 + 1;
    let mel = |x: f64| 2595.0 * (1.0 + x / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (mel(cfg.fmin as f64), mel(cfg.fmax as f64));
    let edge = |i: usize| match i {
        0 => cfg.fmin as f64,
        i if i == cfg.n_mels + 1 => cfg.fmax as f64,
        i => hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64),
    };
    let tri = |m: usize, freq: f64| {
        let (l, c, r) = (edge(m), edge(m + 1), edge(m + 2));
        ((freq - l) / (c - l)).min((r - freq) / (r - c)).max(0.0)
    };
    let frames = if s.len() <= f { 1 } else { 1 + (s.len() - f) / cfg.hop };
    let spec = |x: &[f64]| -> Vec<f64> {
        let mut out = Vec::new();
        for fr in 0..frames {
            let mags: Vec<f64> = (0..bins)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for t in 0..f {
                        let v = x.get(fr * cfg.hop + t).copied().unwrap_or(0.0)
                            * 0.5
                            * (1.0 - (2.0 * PI * t as f64 / f as f64).cos());
                        re += v * (2.0 * PI * (k * t) as f64 / f as f64).cos();
                        im -= v * (2.0 * PI * (k * t) as f64 / f as f64).sin();
                    }
                    (re * re + im * im).sqrt()
                })
                .collect();
            for m in 0..cfg.n_mels {
                out.push((0..bins).map(|b| tri(m, b as f64 * 16000.0 / f as f64) * mags[b]).sum());
            }
        }
        out
    };
    let (ms, me) = (spec(s), spec(e));
    let spectral = ms.iter().zip(&me).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / ms.len() as f64;
    time + lambda * spectral
}

#[test]
fn objective_matches_direct_dft_oracle() {
    let cfg = MelConfig::default();
    let mel64 = Arc::new(MelAnalysis::<f64>::new(&cfg, 16000).unwrap());
    let mel32 = Arc::new(MelAnalysis::<f32>::new(&cfg, 16000).unwrap());
    for (seed, len) in [(1, 256), (2, 1024), (3, 700)] {
        let s = signal(seed, len);
        let e = signal(seed + 10, len);
        for lambda in [0.0, 1.0 / 60.0, 1.0] {
            let want = objective_oracle(&s, &e, lambda, &cfg);
            let got = objective_value(&s, &e, lambda, &mel64).unwrap();
            assert!((got - want).abs() / want < 1e-5, "{len} {lambda}: {got} vs {want}");
            let s32: Vec<f32> = s.iter().map(|v| *v as f32).collect();
            let e32: Vec<f32> = e.iter().map(|v| *v as f32).collect();
            let got32 = objective_value(&s32, &e32, lambda as f32, &mel32).unwrap() as f64;
            assert!((got32 - want).abs() / want < 1e-4, "f32 {len} {lambda}");
        }
    }
}

#[test]
fn stages_update_only_their_components() {
    let data = tiny_data(1, 3, 60);
    let cfg = tiny_train(2, 1e-3);
    let (cnn, _) = run(Stage::Cnn, &cfg, &data, None).unwrap();
    let init = DccrnParams::<f32>::init(&tiny_config(), cfg.seed).unwrap();
    assert_ne!(component_data(&cnn.params, Component::Cnn), component_data(&init, Component::Cnn));
    assert_eq!(component_data(&cnn.params, Component::Rnn), component_data(&init, Component::Rnn));

    let (rnn, _) = run(Stage::Rnn, &cfg, &data, Some(cnn.clone())).unwrap();
    let cnn_bits: Vec<u32> = component_data(&cnn.params, Component::Cnn).iter().map(|v| v.to_bits()).collect();
    let rnn_bits: Vec<u32> = component_data(&rnn.params, Component::Cnn).iter().map(|v| v.to_bits()).collect();
    assert_eq!(cnn_bits, rnn_bits);
    assert_ne!(component_data(&rnn.params, Component::Rnn), component_data(&cnn.params, Component::Rnn));

    let (fine, _) = run(Stage::Finetune, &cfg, &data, Some(rnn.clone())).unwrap();
    for c in [Component::Cnn, Component::Rnn] {
        assert_ne!(component_data(&fine.params, c), component_data(&rnn.params, c));
    }
}

#[test]
fn stage_order_is_enforced() {
    let data = tiny_data(1, 2, 40);
    let cfg = tiny_train(1, 1e-3);
    match run(Stage::Rnn, &cfg, &data, None) {
        Err(e @ Error::MissingPrerequisite { .. }) => {
            assert!(e.to_string().contains("cnn"));
            assert!(e.is_validation());
        }
        other => panic!("{other:?}"),
    }
    let (cnn, _) = run(Stage::Cnn, &cfg, &data, None).unwrap();
    assert!(matches!(run(Stage::Finetune, &cfg, &data, Some(cnn.clone())), Err(Error::MissingPrerequisite { .. })));
    let (rnn, _) = run(Stage::Rnn, &cfg, &data, Some(cnn)).unwrap();
    assert!(run(Stage::Cnn, &cfg, &data, Some(rnn)).is_err());
}

#[test]
fn default_schedule_and_validation() {
    let d = TrainConfig::default();
    assert_eq!((d.cnn.lr, d.rnn.lr, d.finetune.lr), (1e-4, 5e-6, 5e-7));
    assert_eq!(d.lambda, 1.0 / 60.0);
    d.validate().unwrap();
    let flat = TrainConfig { rnn: StageSchedule { epochs: 1, lr: 1e-4 }, ..TrainConfig::default() };
    assert!(flat.validate().unwrap_err().is_validation());
    let neg = TrainConfig { lambda: -1.0, ..TrainConfig::default() };
    assert!(neg.validate().is_err());
}

#[test]
fn logged_lr_is_the_configured_one() {
    let data = tiny_data(2, 2, 40);
    let cfg = tiny_train(1, 2e-3);
    let (cnn, a) = run(Stage::Cnn, &cfg, &data, None).unwrap();
    let (_, b) = run(Stage::Rnn, &cfg, &data, Some(cnn)).unwrap();
    assert_eq!((a[0].lr, b[0].lr), (2e-3, 1e-3));
    assert_eq!((a[0].stage, a[0].epoch), (Stage::Cnn, 1));
}

#[test]
fn training_is_deterministic_and_resumable() {
    let data = tiny_data(3, 3, 60);
    let cfg = tiny_train(4, 1e-3);
    let (a, la) = run(Stage::Cnn, &cfg, &data, None).unwrap();
    let (b, lb) = run(Stage::Cnn, &cfg, &data, None).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(la.iter().map(|l| l.mean_loss).collect::<Vec<_>>(), lb.iter().map(|l| l.mean_loss).collect::<Vec<_>>());

    let (half, _) = run(Stage::Cnn, &tiny_train(2, 1e-3), &data, None).unwrap();
    let (resumed, rest) = run(Stage::Cnn, &cfg, &data, Some(half)).unwrap();
    assert_eq!(rest.iter().map(|l| l.epoch).collect::<Vec<_>>(), vec![3, 4]);
    assert_eq!(resumed.params, a.params);
}

#[test]
fn epoch_loss_does_not_grow() {
    let data = tiny_data(4, 4, 80);
    let (_, logs) = run(Stage::Cnn, &tiny_train(6, 1e-3), &data, None).unwrap();
    let first = logs[0].mean_loss;
    assert!(logs.iter().all(|l| l.mean_loss <= 1.05 * first), "{logs:?}");
    assert!(logs.last().unwrap().mean_loss < first);
}

#[test]
fn cnn_stage_overfits_eight_frames() {
    // One utterance of 7 hops gives exactly 8 frames.
    let hop = tiny_config().plan().hop();
    let data = tiny_data(5, 1, 7 * hop);
    assert_eq!(data.len(), 8);
    let cfg = TrainConfig { batch_size: 8, ..tiny_train(2000, 1e-3) };
    let (_, logs) = run(Stage::Cnn, &cfg, &data, None).unwrap();
    let first = logs[0].mean_loss;
    let best = logs.iter().map(|l| l.mean_loss).fold(f64::INFINITY, f64::min);
    assert!(first / best >= 100.0, "{first} -> {best}");
}

#[test]
fn undersized_data_is_rejected() {
    let data = tiny_data(6, 1, 4);
    let cfg = TrainConfig { batch_size: 64, ..tiny_train(1, 1e-3) };
    assert!(run(Stage::Cnn, &cfg, &data, None).unwrap_err().is_validation());
}
