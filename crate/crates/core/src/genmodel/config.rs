use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numcore::AdamConfig;
use crate::seqdata::PerturbConfig;

/// Architecture of an autoregressive density model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// One-hot input, one LSTM layer, dense layer, softmax.
    Lstm { hidden: usize },
    /// Jelinek–Mercer interpolated n-gram of order `order`. `weights[j]` is
    /// the weight of the order-`j` estimate against the lower-order mixture
    /// (`order + 1` entries; empty means 0.9 everywhere).
    Ngram {
        order: usize,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Lstm { .. } => "lstm",
            ModelKind::Ngram { .. } => "ngram",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Optimizer steps (LSTM) or perturbed corpus passes (n-gram background).
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    /// Held-out evaluation interval for the metrics log; 0 disables.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: 64,
            optimizer: AdamConfig::default(),
            clip_norm: 5.0,
            log_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ARConfig {
    pub model: ModelKind,
    pub alphabet_size: usize,
    #[serde(default)]
    pub train: TrainConfig,
    /// Present only for background models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
}

impl ARConfig {
    pub fn lstm(hidden: usize, alphabet_size: usize) -> Self {
        Self {
            model: ModelKind::Lstm { hidden },
            alphabet_size,
            train: TrainConfig::default(),
            perturb: None,
        }
    }

    pub fn ngram(order: usize, alphabet_size: usize) -> Self {
        Self {
            model: ModelKind::Ngram {
                order,
                weights: Vec::new(),
            },
            alphabet_size,
            train: TrainConfig {
                steps: 1,
                ..TrainConfig::default()
            },
            perturb: None,
        }
    }

    /// L2 coefficient applied to weight matrices.
    pub fn l2(&self) -> f64 {
        self.train.optimizer.l2
    }

    /// Copy configured as a background model with mutation rate `mu` and L2 `lambda`.
    pub fn as_background(&self, perturb: PerturbConfig, lambda: f64) -> Self {
        let mut cfg = self.clone();
        cfg.perturb = Some(perturb);
        cfg.train.optimizer.l2 = lambda;
        cfg
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.alphabet_size < 2 {
            return bad(format!("alphabet size {} < 2", self.alphabet_size));
        }
        match &self.model {
            ModelKind::Lstm { hidden } if *hidden == 0 => return bad("LSTM needs at least one hidden unit".into()),
            ModelKind::Ngram { order, .. } if *order == 0 => return bad("n-gram order must be at least 1".into()),
            ModelKind::Ngram { order, weights } => {
                if !weights.is_empty() && weights.len() != order + 1 {
                    return bad(format!("n-gram order {order} needs {} weights", order + 1));
                }
                if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                    return bad("interpolation weights must lie in [0, 1]".into());
                }
                if self
                    .alphabet_size
                    .checked_pow(*order as u32)
                    .is_none_or(|n| n > 1 << 24)
                {
                    return bad(format!("order {order} context table too large"));
                }
            }
            ModelKind::Lstm { .. } => {}
        }
        let opt = &self.train.optimizer;
        if !(opt.l2 >= 0.0) {
            return bad(format!("L2 coefficient {} must be non-negative", opt.l2));
        }
        if !(opt.learning_rate > 0.0) {
            return bad("learning rate must be positive".into());
        }
        if self.train.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if let Some(p) = &self.perturb {
            p.validate().map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}
