use serde::{Deserialize, Serialize};

use super::{BaselineError, Classifier};
use crate::numcore::linalg::Cholesky;
use crate::seqdata::EncodedSequence;

/// Class means and one pooled covariance of penultimate features.
#[derive(Clone, Debug)]
pub struct MahalanobisFit {
    pub means: Vec<Vec<f64>>,
    /// Row-major `dim x dim`, including the diagonal loading.
    pub covariance: Vec<f64>,
    pub epsilon: f64,
    chol: Cholesky,
}

/// Diagonal loading relative to the mean feature variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularization(pub f64);

impl Default for Regularization {
    fn default() -> Self {
        Self(1e-6)
    }
}

impl MahalanobisFit {
    /// `features[i]` belongs to class `labels[i]`. The pooled covariance gets
    /// `reg * trace / dim` added to its diagonal.
    pub fn from_features(
        features: &[Vec<f64>],
        labels: &[usize],
        classes: usize,
        reg: Regularization,
    ) -> Result<Self, BaselineError> {
        let dim = features.first().map(Vec::len).ok_or(BaselineError::EmptyData)?;
        let mut means = vec![vec![0.0; dim]; classes];
        let mut counts = vec![0usize; classes];
        for (f, &k) in features.iter().zip(labels) {
            if k >= classes {
                return Err(BaselineError::LabelOutOfRange { label: k, classes });
            }
            counts[k] += 1;
            for (m, x) in means[k].iter_mut().zip(f) {
                *m += x;
            }
        }
        if let Some(k) = counts.iter().position(|&c| c < 2) {
            return Err(BaselineError::InvalidArgument(format!(
                "class {k} has fewer than two examples"
            )));
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            for v in m.iter_mut() {
                *v /= c as f64;
            }
        }
        let mut cov = vec![0.0; dim * dim];
        let mut d = vec![0.0; dim];
        for (f, &k) in features.iter().zip(labels) {
            for (di, (x, m)) in d.iter_mut().zip(f.iter().zip(&means[k])) {
                *di = x - m;
            }
            for i in 0..dim {
                if d[i] != 0.0 {
                    for j in 0..dim {
                        cov[i * dim + j] += d[i] * d[j];
                    }
                }
            }
        }
        let n = features.len() as f64;
        for c in &mut cov {
            *c /= n;
        }
        let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
        // A degenerate (all-constant) feature set still gets a usable metric.
        let epsilon = if trace > 0.0 { reg.0 * trace / dim as f64 } else { reg.0 };
        for i in 0..dim {
            cov[i * dim + i] += epsilon;
        }
        let chol = Cholesky::factor(&cov, dim).map_err(|_| BaselineError::SingularCovariance)?;
        Ok(Self {
            means,
            covariance: cov,
            epsilon,
            chol,
        })
    }

    /// Penultimate features of labeled in-distribution data.
    pub fn fit(model: &Classifier, data: &[EncodedSequence], reg: Regularization) -> Result<Self, BaselineError> {
        let mut feats = Vec::with_capacity(data.len());
        let mut labels = Vec::with_capacity(data.len());
        for s in data {
            labels.push(s.class_label.ok_or_else(|| BaselineError::MissingLabel(s.id.clone()))? as usize);
            feats.push(model.features(&s.symbols)?);
        }
        Self::from_features(&feats, &labels, model.config.num_classes, reg)
    }

    /// `-min_k (f - mu_k)^T Sigma^{-1} (f - mu_k)`.
    pub fn score_features(&self, f: &[f64]) -> f64 {
        let mut diff = vec![0.0; f.len()];
        let best = self
            .means
            .iter()
            .map(|m| {
                for (d, (x, mu)) in diff.iter_mut().zip(f.iter().zip(m)) {
                    *d = x - mu;
                }
                self.chol.inv_quad(&diff)
            })
            .fold(f64::INFINITY, f64::min);
        -best
    }
}

pub fn score_mahalanobis(fit: &MahalanobisFit, model: &Classifier, seq: &[u8]) -> Result<f64, BaselineError> {
    Ok(fit.score_features(&model.features(seq)?))
}
