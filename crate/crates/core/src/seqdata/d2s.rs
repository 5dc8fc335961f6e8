//! Alignment-free d2S distance between two sequences.
//!
//! Word counts are centred by their expectation under an order-`m` Markov
//! background fitted to both sequences together:
//!
//! ```text
//! X̃_w = X_w - (n_X - k + 1) p_w
//! D2S = Σ_w X̃_w Ỹ_w / sqrt(X̃_w² + Ỹ_w²)
//! d   = ½ (1 - D2S / sqrt(Σ_w X̃_w²/√(X̃_w²+Ỹ_w²) · Σ_w Ỹ_w²/√(X̃_w²+Ỹ_w²)))
//! ```
//!
//! Words whose centred counts are both zero are skipped. By Cauchy–Schwarz
//! the distance lies in `[0, 1]`, and it is `0` for identical inputs.

use super::SeqError;

/// Default word length.
pub const DEFAULT_K: usize = 6;
/// Default background Markov order.
pub const DEFAULT_ORDER: usize = 0;

const MAX_WORDS: usize = 1 << 24;

fn word_counts(seq: &[u8], alphabet: usize, k: usize) -> Vec<f64> {
    let nwords = alphabet.pow(k as u32);
    let mut counts = vec![0.0; nwords];
    if seq.len() < k {
        return counts;
    }
    let top = alphabet.pow(k as u32 - 1);
    let mut code = 0usize;
    for (i, &s) in seq.iter().enumerate() {
        if i >= k {
            code -= seq[i - k] as usize * top;
        }
        code = code * alphabet + s as usize;
        if i + 1 >= k {
            counts[code] += 1.0;
        }
    }
    counts
}

/// Expected per-position word probabilities under an order-`m` Markov
/// chain fitted to `seqs` (counts do not cross sequence boundaries).
fn markov_word_probs(seqs: &[&[u8]], alphabet: usize, k: usize, m: usize) -> Vec<f64> {
    let nwords = alphabet.pow(k as u32);
    // (m+1)-mer and m-mer counts pooled over the sequences.
    let mut upper = vec![0.0; alphabet.pow(m as u32 + 1)];
    let mut lower = vec![0.0; alphabet.pow(m as u32)];
    for s in seqs {
        for (u, c) in upper.iter_mut().zip(word_counts(s, alphabet, m + 1)) {
            *u += c;
        }
        if m > 0 {
            for (l, c) in lower.iter_mut().zip(word_counts(s, alphabet, m)) {
                *l += c;
            }
        }
    }
    let total_upper: f64 = upper.iter().sum();
    // Start distribution over m-mers, transition from m-mer prefix to next symbol.
    let start: Vec<f64> = if m == 0 {
        vec![1.0]
    } else {
        let t: f64 = lower.iter().sum();
        lower.iter().map(|c| c / t).collect()
    };
    let trans: Vec<f64> = (0..upper.len())
        .map(|w| {
            let prefix = w / alphabet;
            let denom: f64 = (0..alphabet).map(|a| upper[prefix * alphabet + a]).sum();
            if denom > 0.0 {
                upper[w] / denom
            } else if m == 0 {
                upper[w] / total_upper
            } else {
                1.0 / alphabet as f64
            }
        })
        .collect();

    let mmod = alphabet.pow(m as u32);
    (0..nwords)
        .map(|w| {
            // Digits of w, most significant first.
            // k <= 24 because alphabet^k is capped at MAX_WORDS.
            let mut buf = [0usize; 24];
            let digits = &mut buf[..k];
            let mut x = w;
            for d in digits.iter_mut().rev() {
                *d = x % alphabet;
                x /= alphabet;
            }
            let mut prefix = 0usize;
            for &d in &digits[..m] {
                prefix = prefix * alphabet + d;
            }
            let mut p = start[prefix];
            for &d in &digits[m..] {
                p *= trans[prefix * alphabet + d];
                prefix = if m == 0 { 0 } else { (prefix * alphabet + d) % mmod };
            }
            p
        })
        .collect()
}

/// d2S distance between two encoded sequences over an alphabet of
/// `alphabet` symbols, with word length `k` and background order `m`.
pub fn d2s_distance(a: &[u8], b: &[u8], alphabet: usize, k: usize, m: usize) -> Result<f64, SeqError> {
    if k == 0 || k < m + 1 {
        return Err(SeqError::InvalidArgument(format!(
            "word length {k} must exceed background order {m}"
        )));
    }
    if alphabet.checked_pow(k as u32).is_none_or(|n| n > MAX_WORDS) {
        return Err(SeqError::InvalidArgument(format!(
            "{alphabet}^{k} words is too many to enumerate"
        )));
    }
    for (name, s) in [("first", a), ("second", b)] {
        if s.len() <= k {
            return Err(SeqError::InvalidArgument(format!(
                "{name} sequence has length {} but must be longer than k = {k}",
                s.len()
            )));
        }
    }
    let probs = markov_word_probs(&[a, b], alphabet, k, m);
    let xa = word_counts(a, alphabet, k);
    let xb = word_counts(b, alphabet, k);
    let na = (a.len() - k + 1) as f64;
    let nb = (b.len() - k + 1) as f64;

    let (mut cross, mut self_a, mut self_b) = (0.0, 0.0, 0.0);
    for w in 0..probs.len() {
        let x = xa[w] - na * probs[w];
        let y = xb[w] - nb * probs[w];
        let norm = (x * x + y * y).sqrt();
        if norm == 0.0 {
            continue;
        }
        cross += x * y / norm;
        self_a += x * x / norm;
        self_b += y * y / norm;
    }
    let denom = (self_a * self_b).sqrt();
    if denom == 0.0 {
        return Ok(0.5);
    }
    Ok((0.5 * (1.0 - cross / denom)).clamp(0.0, 1.0))
}

/// Smallest d2S distance from `query` to any of `references`.
pub fn min_distance_to_set<S: AsRef<[u8]>>(
    query: &[u8],
    references: &[S],
    alphabet: usize,
    k: usize,
    m: usize,
) -> Result<f64, SeqError> {
    if references.is_empty() {
        return Err(SeqError::InvalidArgument("empty reference set".into()));
    }
    let mut best = f64::INFINITY;
    for r in references {
        best = best.min(d2s_distance(query, r.as_ref(), alphabet, k, m)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::seqdata::{perturb_symbols, sample_background, MutationSemantics, PerturbConfig};

    fn random_seq(seed: u64, len: usize) -> Vec<u8> {
        sample_background(0.5, len, &mut rng::stream(seed, 0))
    }

    #[test]
    fn word_probs_sum_to_one() {
        let a = random_seq(1, 500);
        let b = random_seq(2, 300);
        for m in 0..3 {
            let p = markov_word_probs(&[&a, &b], 4, 4, m);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "order {m}");
        }
    }

    #[test]
    fn identical_is_zero_and_symmetric() {
        let a = random_seq(3, 2000);
        let b = random_seq(4, 1500);
        assert!(d2s_distance(&a, &a, 4, 6, 0).unwrap() < 1e-12);
        let ab = d2s_distance(&a, &b, 4, 6, 0).unwrap();
        let ba = d2s_distance(&b, &a, 4, 6, 0).unwrap();
        assert_eq!(ab, ba);
        assert!((0.0..=1.0).contains(&ab));
        let ab1 = d2s_distance(&a, &b, 4, 5, 1).unwrap();
        assert_eq!(ab1, d2s_distance(&b, &a, 4, 5, 1).unwrap());
    }

    #[test]
    fn single_substitution_stays_close() {
        let a = random_seq(5, 3000);
        let mut b = a.clone();
        b[1500] = (b[1500] + 1) % 4;
        let d = d2s_distance(&a, &b, 4, 6, 0).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn distance_ranks_mutation_levels() {
        // Monte Carlo oracle over seeds: mean distance grows with mutation rate.
        let rates = [0.05, 0.15, 0.30];
        let mut means = [0.0; 3];
        for seed in 0..5 {
            let base = random_seq(100 + seed, 5000);
            for (i, &r) in rates.iter().enumerate() {
                let cfg = PerturbConfig::new(r, MutationSemantics::OtherSymbols).unwrap();
                let copy = perturb_symbols(&base, 4, &cfg, &mut rng::stream(seed, i as u64));
                means[i] += d2s_distance(&base, &copy, 4, 6, 0).unwrap() / 5.0;
            }
        }
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn min_over_references() {
        let q = random_seq(7, 800);
        let refs: Vec<Vec<u8>> = (0..3).map(|i| random_seq(20 + i, 800)).collect();
        let brute = refs
            .iter()
            .map(|r| d2s_distance(&q, r, 4, 6, 0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_distance_to_set(&q, &refs, 4, 6, 0).unwrap(), brute);
        assert_eq!(
            min_distance_to_set(&q, &refs[..1], 4, 6, 0).unwrap(),
            d2s_distance(&q, &refs[0], 4, 6, 0).unwrap()
        );
        let with_self = vec![refs[0].clone(), q.clone()];
        assert!(min_distance_to_set(&q, &with_self, 4, 6, 0).unwrap() < 1e-12);
        assert!(min_distance_to_set::<Vec<u8>>(&q, &[], 4, 6, 0).is_err());
    }

    #[test]
    fn short_sequences_rejected() {
        assert!(d2s_distance(&[0, 1, 2], &[0, 1, 2, 3, 0, 1, 2], 4, 3, 0).is_err());
        assert!(d2s_distance(&[0; 10], &[1; 10], 4, 2, 2).is_err());
    }
}
