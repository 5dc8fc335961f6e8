use std::path::Path;

use super::checkpoint::{self, Container};
use super::config::{ARConfig, ModelKind};
use super::{lstm, ngram, ModelError};
use crate::numcore::Tensor;

/// Anything that assigns autoregressive log-probabilities to symbol sequences.
pub trait DensityModel: Sync {
    fn alphabet_size(&self) -> usize;

    /// Entry `d` is `log p(x_d | x_<d)`.
    fn per_position_log_prob(&self, seq: &[u8]) -> Result<Vec<f64>, ModelError>;

    /// Total log-likelihood in nats; the sum of [`Self::per_position_log_prob`].
    fn log_likelihood(&self, seq: &[u8]) -> Result<f64, ModelError> {
        Ok(self.per_position_log_prob(seq)?.iter().sum())
    }

    /// Per-position tracks for many sequences; implementations may batch.
    fn per_position_log_prob_batch(&self, seqs: &[&[u8]]) -> Result<Vec<Vec<f64>>, ModelError> {
        seqs.iter().map(|s| self.per_position_log_prob(s)).collect()
    }

    fn check_alphabet(&self, seq: &[u8]) -> Result<(), ModelError> {
        let size = self.alphabet_size();
        if seq.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        match seq.iter().find(|&&s| s as usize >= size) {
            Some(&s) => Err(ModelError::AlphabetMismatch {
                symbol: s,
                alphabet_size: size,
            }),
            None => Ok(()),
        }
    }
}

/// Trained (or freshly initialized) density model with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ARConfig,
    params: Vec<(String, Tensor)>,
    pub step: u64,
    pub seed: u64,
    fingerprint: String,
}

const KIND: &str = "density";

impl Checkpoint {
    pub fn new(config: ARConfig, params: Vec<(String, Tensor)>, step: u64, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        Self::check_shapes(&config, &params)?;
        let fingerprint = checkpoint::fingerprint(KIND, &config, step, seed, &params)?;
        Ok(Self {
            config,
            params,
            step,
            seed,
            fingerprint,
        })
    }

    fn check_shapes(config: &ARConfig, params: &[(String, Tensor)]) -> Result<(), ModelError> {
        let a = config.alphabet_size;
        let expected: Vec<(&str, Vec<usize>)> = match &config.model {
            ModelKind::Lstm { hidden } => {
                let h = *hidden;
                vec![
                    ("w_x", vec![a, 4 * h]),
                    ("w_h", vec![h, 4 * h]),
                    ("b", vec![1, 4 * h]),
                    ("w_out", vec![h, a]),
                    ("b_out", vec![1, a]),
                ]
            }
            ModelKind::Ngram { order, .. } => vec![("probs", vec![a.pow(*order as u32), a])],
        };
        let ok = expected.len() == params.len()
            && expected
                .iter()
                .zip(params)
                .all(|((n, s), (pn, t))| n == pn && s.as_slice() == t.shape());
        if ok {
            Ok(())
        } else {
            Err(ModelError::ShapeMismatch(format!(
                "{} parameters do not match config",
                config.model.name()
            )))
        }
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn kind(&self) -> &ModelKind {
        &self.config.model
    }

    /// Next-symbol distribution at each position.
    pub fn next_distributions(&self, seq: &[u8]) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_alphabet(seq)?;
        let a = self.config.alphabet_size;
        Ok(match &self.config.model {
            ModelKind::Lstm { hidden } => lstm::next_distributions(&self.tensors(), *hidden, a, seq),
            ModelKind::Ngram { order, .. } => ngram::next_distributions(&self.params[0].1, *order, a, seq),
        })
    }

    /// Fraction of positions whose most probable next symbol is the observed one.
    pub fn next_symbol_accuracy(&self, seqs: &[&[u8]]) -> Result<f64, ModelError> {
        let (mut hit, mut total) = (0usize, 0usize);
        for s in seqs {
            for (dist, &x) in self.next_distributions(s)?.iter().zip(s.iter()) {
                let best = dist
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
                    )
                    .0;
                hit += (best == x as usize) as usize;
                total += 1;
            }
        }
        Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
    }

    fn tensors(&self) -> Vec<Tensor> {
        self.params.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        checkpoint::encode(&self.container())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        Self::from_container(checkpoint::decode(bytes, KIND)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        checkpoint::save(&self.container(), path)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_container(checkpoint::load(path, KIND)?)
    }

    fn container(&self) -> Container<ARConfig> {
        Container {
            kind: KIND.to_string(),
            config: self.config.clone(),
            step: self.step,
            seed: self.seed,
            params: self.params.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    fn from_container(c: Container<ARConfig>) -> Result<Self, ModelError> {
        c.config.validate()?;
        Self::check_shapes(&c.config, &c.params)?;
        Ok(Self {
            config: c.config,
            params: c.params,
            step: c.step,
            seed: c.seed,
            fingerprint: c.fingerprint,
        })
    }
}

/// Scoring batch size for LSTM inference.
const SCORE_BATCH: usize = 128;

impl DensityModel for Checkpoint {
    fn alphabet_size(&self) -> usize {
        self.config.alphabet_size
    }

    fn per_position_log_prob(&self, seq: &[u8]) -> Result<Vec<f64>, ModelError> {
        Ok(self.per_position_log_prob_batch(&[seq])?.pop().expect("one sequence"))
    }

    fn per_position_log_prob_batch(&self, seqs: &[&[u8]]) -> Result<Vec<Vec<f64>>, ModelError> {
        for s in seqs {
            self.check_alphabet(s)?;
        }
        let a = self.config.alphabet_size;
        Ok(match &self.config.model {
            ModelKind::Lstm { hidden } => {
                let tensors = self.tensors();
                seqs.chunks(SCORE_BATCH)
                    .flat_map(|chunk| lstm::log_probs(&tensors, *hidden, a, chunk))
                    .collect()
            }
            ModelKind::Ngram { order, .. } => seqs
                .iter()
                .map(|s| ngram::log_probs(&self.params[0].1, *order, a, s))
                .collect(),
        })
    }
}

/// Convenience: total log-likelihoods for many sequences, batched.
pub fn log_likelihoods<M: DensityModel + ?Sized>(model: &M, seqs: &[&[u8]]) -> Result<Vec<f64>, ModelError> {
    Ok(model
        .per_position_log_prob_batch(seqs)?
        .into_iter()
        .map(|lp| lp.iter().sum())
        .collect())
}

impl<M: DensityModel + ?Sized> DensityModel for &M {
    fn alphabet_size(&self) -> usize {
        (**self).alphabet_size()
    }

    fn per_position_log_prob(&self, seq: &[u8]) -> Result<Vec<f64>, ModelError> {
        (**self).per_position_log_prob(seq)
    }

    fn per_position_log_prob_batch(&self, seqs: &[&[u8]]) -> Result<Vec<Vec<f64>>, ModelError> {
        (**self).per_position_log_prob_batch(seqs)
    }
}
