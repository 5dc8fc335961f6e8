//! Interpolated n-gram model with a closed-form fit.
//!
//! The stored parameter is the order-`k` conditional table `probs
//! [A^k, A]`, with contexts encoded most-significant-symbol first. The
//! first `k` positions of a sequence score under the uniform distribution.

use crate::numcore::Tensor;

pub const DEFAULT_WEIGHT: f64 = 0.9;

/// Context counts for every order `0..=k`.
#[derive(Clone, Debug)]
pub struct NgramCounts {
    order: usize,
    alphabet: usize,
    /// `counts[j]` is `[A^j * A]`: next-symbol counts per order-`j` context.
    counts: Vec<Vec<f64>>,
}

impl NgramCounts {
    pub fn new(order: usize, alphabet: usize) -> Self {
        let counts = (0..=order)
            .map(|j| vec![0.0; alphabet.pow(j as u32) * alphabet])
            .collect();
        Self {
            order,
            alphabet,
            counts,
        }
    }

    pub fn add_sequence(&mut self, seq: &[u8]) {
        let a = self.alphabet;
        for d in 0..seq.len() {
            let mut ctx = 0usize;
            for j in 0..=self.order.min(d) {
                if j > 0 {
                    // Extend the context one symbol further back.
                    ctx += seq[d - j] as usize * a.pow(j as u32 - 1);
                }
                self.counts[j][ctx * a + seq[d] as usize] += 1.0;
            }
        }
    }

    /// Jelinek–Mercer interpolation into the order-`k` table.
    pub fn to_table(&self, weights: &[f64]) -> Tensor {
        let a = self.alphabet;
        let uniform = vec![1.0 / a as f64; a];
        // prev[ctx_{j-1}] rows of the order-(j-1) interpolated table.
        let mut prev: Vec<f64> = uniform.clone();
        for j in 0..=self.order {
            let w = weights.get(j).copied().unwrap_or(DEFAULT_WEIGHT);
            let nctx = a.pow(j as u32);
            let mut table = vec![0.0; nctx * a];
            for ctx in 0..nctx {
                // Dropping the oldest (most significant) symbol gives the order-(j-1) context.
                let lower = if j == 0 { 0 } else { ctx % a.pow(j as u32 - 1) };
                let lower_row = &prev[lower * a..(lower + 1) * a];
                let row = &self.counts[j][ctx * a..(ctx + 1) * a];
                let total: f64 = row.iter().sum();
                let out = &mut table[ctx * a..(ctx + 1) * a];
                if total > 0.0 {
                    for s in 0..a {
                        out[s] = w * row[s] / total + (1.0 - w) * lower_row[s];
                    }
                } else {
                    out.copy_from_slice(lower_row);
                }
            }
            prev = table;
        }
        Tensor::matrix(a.pow(self.order as u32), a, prev).expect("non-empty table")
    }
}

/// Per-position log-probabilities under a fitted table.
pub fn log_probs(table: &Tensor, order: usize, alphabet: usize, seq: &[u8]) -> Vec<f64> {
    let uniform = -(alphabet as f64).ln();
    let modulus = alphabet.pow(order as u32);
    let mut ctx = 0usize;
    seq.iter()
        .enumerate()
        .map(|(d, &x)| {
            let lp = if d < order {
                uniform
            } else {
                table.get2(ctx, x as usize).ln()
            };
            ctx = (ctx * alphabet + x as usize) % modulus;
            lp
        })
        .collect()
}

pub fn next_distributions(table: &Tensor, order: usize, alphabet: usize, seq: &[u8]) -> Vec<Vec<f64>> {
    let modulus = alphabet.pow(order as u32);
    let mut ctx = 0usize;
    seq.iter()
        .enumerate()
        .map(|(d, &x)| {
            let dist = if d < order {
                vec![1.0 / alphabet as f64; alphabet]
            } else {
                table.row(ctx).to_vec()
            };
            ctx = (ctx * alphabet + x as usize) % modulus;
            dist
        })
        .collect()
}
