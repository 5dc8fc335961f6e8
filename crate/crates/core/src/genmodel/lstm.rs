//! Single-layer LSTM next-symbol model.
//!
//! Parameter order: `w_x [A, 4H]`, `w_h [H, 4H]`, `b [1, 4H]`,
//! `w_out [H, A]`, `b_out [1, A]`; gate blocks are `i, f, g, o`. Position
//! `d` is predicted from the state after consuming `x_1..x_{d-1}`, starting
//! from a zero state.

use crate::numcore::{gemm, log_softmax_at, sigmoid, NodeId, NumError, Tape, Tensor};
use crate::rng::Rng;

pub const PARAM_NAMES: [&str; 5] = ["w_x", "w_h", "b", "w_out", "b_out"];
/// Which parameters receive L2 (weight matrices only).
pub const DECAY: [bool; 5] = [true, true, false, true, false];

pub fn init_params(hidden: usize, alphabet: usize, rng: &mut Rng) -> Vec<Tensor> {
    vec![
        Tensor::xavier_uniform(alphabet, 4 * hidden, rng),
        Tensor::xavier_uniform(hidden, 4 * hidden, rng),
        Tensor::zeros(&[1, 4 * hidden]),
        // Zero output layer: an untrained model predicts the uniform distribution.
        Tensor::zeros(&[hidden, alphabet]),
        Tensor::zeros(&[1, alphabet]),
    ]
}

/// Tape ids of the five LSTM parameters.
#[derive(Clone, Copy, Debug)]
pub struct LstmNodes {
    pub w_x: NodeId,
    pub w_h: NodeId,
    pub b: NodeId,
    pub w_out: NodeId,
    pub b_out: NodeId,
}

impl LstmNodes {
    pub fn from_slice(ids: &[NodeId]) -> Self {
        Self {
            w_x: ids[0],
            w_h: ids[1],
            b: ids[2],
            w_out: ids[3],
            b_out: ids[4],
        }
    }
}

/// One recurrence step on the tape: consumes input rows `x` (`[B, A]`) and
/// returns the new `(h, c)`.
pub fn cell_step(
    tape: &mut Tape,
    p: &LstmNodes,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    hidden: usize,
) -> Result<(NodeId, NodeId), NumError> {
    let zx = tape.matmul(x, p.w_x)?;
    let zh = tape.matmul(h, p.w_h)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add_row(z, p.b)?;
    let i = tape.slice_cols(z, 0, hidden)?;
    let f = tape.slice_cols(z, hidden, 2 * hidden)?;
    let g = tape.slice_cols(z, 2 * hidden, 3 * hidden)?;
    let o = tape.slice_cols(z, 3 * hidden, 4 * hidden)?;
    let i = tape.sigmoid(i)?;
    let f = tape.sigmoid(f)?;
    let g = tape.tanh(g)?;
    let o = tape.sigmoid(o)?;
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_new = tape.add(fc, ig)?;
    let tc = tape.tanh(c_new)?;
    let h_new = tape.mul(o, tc)?;
    Ok((h_new, c_new))
}

/// Mean next-symbol cross-entropy over every position of `batch`, built on
/// `tape`. Sequences may differ in length; finished rows get zero targets.
pub fn batch_loss(
    tape: &mut Tape,
    p: &LstmNodes,
    batch: &[&[u8]],
    hidden: usize,
    alphabet: usize,
) -> Result<NodeId, NumError> {
    let rows = batch.len();
    let max_len = batch.iter().map(|s| s.len()).max().unwrap_or(0);
    let total: usize = batch.iter().map(|s| s.len()).sum();
    let mut h = tape.constant(Tensor::zeros(&[rows, hidden]));
    let mut c = tape.constant(Tensor::zeros(&[rows, hidden]));
    let mut acc: Option<NodeId> = None;
    for t in 0..max_len {
        let logits = tape.matmul(h, p.w_out)?;
        let logits = tape.add_row(logits, p.b_out)?;
        let mut targets = Tensor::zeros(&[rows, alphabet]);
        let mut inputs = Tensor::zeros(&[rows, alphabet]);
        for (r, s) in batch.iter().enumerate() {
            if let Some(&x) = s.get(t) {
                targets.data_mut()[r * alphabet + x as usize] = 1.0;
                inputs.data_mut()[r * alphabet + x as usize] = 1.0;
            }
        }
        let losses = tape.softmax_xent(logits, targets)?;
        let step_loss = tape.sum_all(losses)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, step_loss)?,
            None => step_loss,
        });
        if t + 1 < max_len {
            let x = tape.constant(inputs);
            (h, c) = cell_step(tape, p, x, h, c, hidden)?;
        }
    }
    let acc = acc.ok_or(NumError::InvalidShape(vec![0]))?;
    tape.scale(acc, 1.0 / total as f64)
}

/// Per-position `log p(x_d | x_<d)` for each sequence, evaluated in one
/// batched forward pass without a tape.
pub fn log_probs(params: &[Tensor], hidden: usize, alphabet: usize, batch: &[&[u8]]) -> Vec<Vec<f64>> {
    let (w_x, w_h, b, w_out, b_out) = (
        params[0].data(),
        params[1].data(),
        params[2].data(),
        params[3].data(),
        params[4].data(),
    );
    let rows = batch.len();
    let max_len = batch.iter().map(|s| s.len()).max().unwrap_or(0);
    let g4 = 4 * hidden;
    let mut h = vec![0.0; rows * hidden];
    let mut c = vec![0.0; rows * hidden];
    let mut z = vec![0.0; rows * g4];
    let mut logits = vec![0.0; rows * alphabet];
    let mut out: Vec<Vec<f64>> = batch.iter().map(|s| Vec::with_capacity(s.len())).collect();

    for t in 0..max_len {
        gemm(rows, hidden, alphabet, &h, w_out, &mut logits, false);
        for r in 0..rows {
            let row = &mut logits[r * alphabet..(r + 1) * alphabet];
            for (l, bo) in row.iter_mut().zip(b_out) {
                *l += bo;
            }
            if let Some(&x) = batch[r].get(t) {
                out[r].push(log_softmax_at(row, x as usize));
            }
        }
        if t + 1 == max_len {
            break;
        }
        gemm(rows, hidden, g4, &h, w_h, &mut z, false);
        for r in 0..rows {
            let x = batch[r].get(t).copied().unwrap_or(0) as usize;
            let zr = &mut z[r * g4..(r + 1) * g4];
            let wx = &w_x[x * g4..(x + 1) * g4];
            for j in 0..g4 {
                zr[j] = wx[j] + zr[j] + b[j];
            }
            let hr = &mut h[r * hidden..(r + 1) * hidden];
            let cr = &mut c[r * hidden..(r + 1) * hidden];
            for j in 0..hidden {
                let i = sigmoid(zr[j]);
                let f = sigmoid(zr[hidden + j]);
                let g = zr[2 * hidden + j].tanh();
                let o = sigmoid(zr[3 * hidden + j]);
                cr[j] = f * cr[j] + i * g;
                hr[j] = o * cr[j].tanh();
            }
        }
    }
    out
}

/// Next-symbol distribution at every position of one sequence.
pub fn next_distributions(params: &[Tensor], hidden: usize, alphabet: usize, seq: &[u8]) -> Vec<Vec<f64>> {
    // Probe each symbol's log-probability by swapping it in at that position;
    // the state before position d does not depend on x_d.
    let mut dists = vec![vec![0.0; alphabet]; seq.len()];
    for a in 0..alphabet {
        let probes: Vec<Vec<u8>> = (0..seq.len())
            .map(|d| {
                let mut s = seq[..=d].to_vec();
                s[d] = a as u8;
                s
            })
            .collect();
        let refs: Vec<&[u8]> = probes.iter().map(Vec::as_slice).collect();
        for (d, lp) in log_probs(params, hidden, alphabet, &refs).into_iter().enumerate() {
            dists[d][a] = lp[d].exp();
        }
    }
    dists
}
