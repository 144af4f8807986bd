//! Straight-line reference implementations used as test oracles. They share
//! no code with the library: plain `Vec<f64>` and index loops only.
#![allow(dead_code)]

use mci_prognosis::autoencoder::{AutoencoderModel, Conditioning};
use mci_prognosis::neural::{LstmLayerParams, LstmStack};
use nalgebra::DVector;

pub fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One LSTM step; every gate reads `[h_prev, x]`.
pub fn lstm_step(p: &LstmLayerParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = h.len();
    let input: Vec<f64> = h.iter().chain(x).copied().collect();
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    for r in 0..hd {
        let (mut zf, mut zi, mut zc, mut zo) = (p.b_f[r], p.b_i[r], p.b_c[r], p.b_o[r]);
        for (k, v) in input.iter().enumerate() {
            zf += p.w_f[(r, k)] * v;
            zi += p.w_i[(r, k)] * v;
            zc += p.w_c[(r, k)] * v;
            zo += p.w_o[(r, k)] * v;
        }
        c_new[r] = sig(zf) * c[r] + sig(zi) * zc.tanh();
        h_new[r] = sig(zo) * c_new[r].tanh();
    }
    (h_new, c_new)
}

pub type States = Vec<(Vec<f64>, Vec<f64>)>;

pub fn stack_step(stack: &LstmStack, x: &[f64], states: &mut States) -> Vec<f64> {
    let mut input = x.to_vec();
    for (layer, st) in stack.layers().iter().zip(states.iter_mut()) {
        let (h, c) = lstm_step(layer, &input, &st.0, &st.1);
        *st = (h.clone(), c);
        input = h;
    }
    input
}

pub fn encode(m: &AutoencoderModel, seq: &[Vec<f64>]) -> Vec<f64> {
    let hd = m.hidden_dim();
    let mut states: States = vec![(vec![0.0; hd], vec![0.0; hd]); 2];
    let mut top = vec![0.0; hd];
    for x in seq {
        top = stack_step(&m.encoder, x, &mut states);
    }
    top
}

fn project(m: &AutoencoderModel, h: &[f64]) -> Vec<f64> {
    (0..m.input_dim())
        .map(|r| m.projection_bias[r] + (0..h.len()).map(|k| m.projection[(r, k)] * h[k]).sum::<f64>())
        .collect()
}

/// Decoder unrolled for `len` steps. With `teacher`, the input of step
/// `k > 0` is `teacher[k - 1]`.
pub fn decode(m: &AutoencoderModel, z: &[f64], len: usize, teacher: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
    let hd = z.len();
    let mut states: States = vec![(z.to_vec(), vec![0.0; hd]); 2];
    let mut x = vec![0.0; m.input_dim()];
    let mut out = Vec::new();
    for k in 0..len {
        let h = stack_step(&m.decoder, &x, &mut states);
        let y = project(m, &h);
        x = match teacher {
            Some(t) if k + 1 < len => t[k].clone(),
            _ => y.clone(),
        };
        out.push(y);
    }
    out
}

pub fn loss(m: &AutoencoderModel, batch: &[Vec<Vec<f64>>]) -> f64 {
    let mut total = 0.0;
    for seq in batch {
        let z = encode(m, seq);
        let targets: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let teacher = (m.conditioning == Conditioning::Conditioned).then_some(targets.as_slice());
        let rec = decode(m, &z, seq.len(), teacher);
        for (y, t) in rec.iter().zip(&targets) {
            total += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    total / batch.len() as f64
}

pub fn to_dvecs(seq: &[Vec<f64>]) -> Vec<DVector<f64>> {
    seq.iter().map(|v| DVector::from_column_slice(v)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Deterministic pseudo-random trajectory values in roughly [-1.5, 1.5].
pub fn trajectory(seed: u64, len: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 11) as f64 / (1u64 << 53) as f64) * 3.0 - 1.5
                })
                .collect()
        })
        .collect()
}
