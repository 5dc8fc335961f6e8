//! One-layer 1-D CNN sequence classifier.
//!
//! One-hot input, a width-`W` convolution with `F` filters and ReLU, global
//! max-pooling over positions, a ReLU dense layer (the penultimate
//! features), and a dense output layer. Parameters, in order:
//! `conv_w [A*W, F]`, `conv_b [1, F]`, `dense_w [F, H]`, `dense_b [1, H]`,
//! `out_w [H, O]`, `out_b [1, O]`. Row `j*A + a` of `conv_w` weights symbol
//! `a` at window offset `j`.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::genmodel::checkpoint::{self, Container};
use crate::genmodel::TrainConfig;
use crate::numcore::{adam_step, clip_global_norm, softmax, NodeId, NumError, OptimizerState, Tape, Tensor};
use crate::rng;
use crate::seqdata::{perturb_symbols, EncodedSequence, PerturbConfig};

/// Training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    /// Plain K-way cross-entropy.
    #[default]
    Standard,
    /// Two outputs: in-distribution (0) against perturbed inputs (1).
    Binary,
    /// K + 1 outputs; perturbed inputs are labeled K.
    KPlusOne,
    /// K outputs; perturbed inputs are pushed toward the uniform
    /// distribution with this weight relative to the classification term.
    Calibrated { uniform_weight: f64 },
}

impl Variant {
    pub fn uses_perturbation(&self) -> bool {
        !matches!(self, Variant::Standard)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub num_classes: usize,
    pub alphabet_size: usize,
    pub filters: usize,
    pub filter_width: usize,
    pub dense: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<PerturbConfig>,
}

impl ClassifierConfig {
    /// Desk-scale defaults: 64 filters of width 12, 128 dense units.
    pub fn new(num_classes: usize, alphabet_size: usize) -> Self {
        Self {
            num_classes,
            alphabet_size,
            filters: 64,
            filter_width: 12,
            dense: 128,
            variant: Variant::Standard,
            train: TrainConfig {
                steps: 1000,
                ..TrainConfig::default()
            },
            perturb: None,
        }
    }

    pub fn with_variant(mut self, variant: Variant, perturb: PerturbConfig) -> Self {
        self.variant = variant;
        self.perturb = Some(perturb);
        self
    }

    pub fn outputs(&self) -> usize {
        match self.variant {
            Variant::Binary => 2,
            Variant::KPlusOne => self.num_classes + 1,
            Variant::Standard | Variant::Calibrated { .. } => self.num_classes,
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: String| Err(BaselineError::InvalidConfig(m));
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.alphabet_size < 2 {
            return bad("alphabet size must be at least 2".into());
        }
        if self.filters == 0 || self.filter_width == 0 || self.dense == 0 {
            return bad("layer sizes must be positive".into());
        }
        if self.train.batch_size == 0 || !(self.train.optimizer.learning_rate > 0.0) {
            return bad("batch size and learning rate must be positive".into());
        }
        if let Variant::Calibrated { uniform_weight } = self.variant {
            if !(uniform_weight >= 0.0) {
                return bad("uniform-target weight must be non-negative".into());
            }
        }
        match (&self.perturb, self.variant.uses_perturbation()) {
            (None, true) => bad("this variant needs a perturbation config".into()),
            (Some(p), _) => p.validate().map_err(|e| BaselineError::InvalidConfig(e.to_string())),
            (None, false) => Ok(()),
        }
    }
}

pub const PARAM_NAMES: [&str; 6] = ["conv_w", "conv_b", "dense_w", "dense_b", "out_w", "out_b"];
const DECAY: [bool; 6] = [true, false, true, false, true, false];
const KIND: &str = "classifier";

fn init_params(cfg: &ClassifierConfig, r: &mut rng::Rng) -> Vec<Tensor> {
    let (a, w, f, h, o) = (
        cfg.alphabet_size,
        cfg.filter_width,
        cfg.filters,
        cfg.dense,
        cfg.outputs(),
    );
    vec![
        Tensor::xavier_uniform(a * w, f, r),
        Tensor::zeros(&[1, f]),
        Tensor::xavier_uniform(f, h, r),
        Tensor::zeros(&[1, h]),
        Tensor::xavier_uniform(h, o, r),
        Tensor::zeros(&[1, o]),
    ]
}

/// Tape ids of the six classifier parameters.
#[derive(Clone, Copy, Debug)]
pub struct ClassifierNodes {
    pub conv_w: NodeId,
    pub conv_b: NodeId,
    pub dense_w: NodeId,
    pub dense_b: NodeId,
    pub out_w: NodeId,
    pub out_b: NodeId,
}

impl ClassifierNodes {
    pub fn from_slice(ids: &[NodeId]) -> Self {
        Self {
            conv_w: ids[0],
            conv_b: ids[1],
            dense_w: ids[2],
            dense_b: ids[3],
            out_w: ids[4],
            out_b: ids[5],
        }
    }
}

/// One-hot sliding windows of equal-length sequences: `[B*P, A*W]` with
/// `P = D - W + 1`.
pub fn im2col(batch: &[&[u8]], alphabet: usize, width: usize) -> Tensor {
    let len = batch[0].len();
    let positions = len + 1 - width;
    let cols = alphabet * width;
    let mut data = vec![0.0; batch.len() * positions * cols];
    for (b, s) in batch.iter().enumerate() {
        for p in 0..positions {
            let row = &mut data[(b * positions + p) * cols..][..cols];
            for j in 0..width {
                row[j * alphabet + s[p + j] as usize] = 1.0;
            }
        }
    }
    Tensor::matrix(batch.len() * positions, cols, data).expect("consistent im2col shape")
}

/// Logits `[B, O]` on the tape. All sequences must share one length `>= W`.
pub fn forward_tape(
    tape: &mut Tape,
    p: &ClassifierNodes,
    batch: &[&[u8]],
    alphabet: usize,
    width: usize,
) -> Result<NodeId, NumError> {
    let positions = batch[0].len() + 1 - width;
    let x = tape.constant(im2col(batch, alphabet, width));
    let conv = tape.matmul(x, p.conv_w)?;
    let conv = tape.add_row(conv, p.conv_b)?;
    let conv = tape.relu(conv)?;
    let pooled = tape.segment_max(conv, positions)?;
    let hidden = tape.matmul(pooled, p.dense_w)?;
    let hidden = tape.add_row(hidden, p.dense_b)?;
    let hidden = tape.relu(hidden)?;
    let logits = tape.matmul(hidden, p.out_w)?;
    tape.add_row(logits, p.out_b)
}

/// Trained CNN classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    params: Vec<(String, Tensor)>,
    pub step: u64,
    pub seed: u64,
    fingerprint: String,
}

impl Classifier {
    pub fn new(config: ClassifierConfig, params: Vec<Tensor>, step: u64, seed: u64) -> Result<Self, BaselineError> {
        config.validate()?;
        let named: Vec<(String, Tensor)> = PARAM_NAMES.iter().map(|n| n.to_string()).zip(params).collect();
        Self::check_shapes(&config, &named)?;
        let fingerprint = checkpoint::fingerprint(KIND, &config, step, seed, &named)?;
        Ok(Self {
            config,
            params: named,
            step,
            seed,
            fingerprint,
        })
    }

    fn check_shapes(cfg: &ClassifierConfig, params: &[(String, Tensor)]) -> Result<(), BaselineError> {
        let (a, w, f, h, o) = (
            cfg.alphabet_size,
            cfg.filter_width,
            cfg.filters,
            cfg.dense,
            cfg.outputs(),
        );
        let expected = [
            vec![a * w, f],
            vec![1, f],
            vec![f, h],
            vec![1, h],
            vec![h, o],
            vec![1, o],
        ];
        let ok = params.len() == 6
            && params
                .iter()
                .zip(PARAM_NAMES.iter().zip(&expected))
                .all(|((n, t), (en, es))| n == en && t.shape() == es.as_slice());
        if ok {
            Ok(())
        } else {
            Err(BaselineError::InvalidConfig(
                "classifier parameters do not match config".into(),
            ))
        }
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn feature_dim(&self) -> usize {
        self.config.dense
    }

    fn check_input(&self, seq: &[u8]) -> Result<(), BaselineError> {
        if seq.len() < self.config.filter_width {
            return Err(BaselineError::TooShort {
                len: seq.len(),
                width: self.config.filter_width,
            });
        }
        if let Some(&s) = seq.iter().find(|&&s| s as usize >= self.config.alphabet_size) {
            return Err(BaselineError::AlphabetMismatch {
                symbol: s,
                alphabet_size: self.config.alphabet_size,
            });
        }
        Ok(())
    }

    /// Penultimate (post-ReLU dense) activations.
    pub fn features(&self, seq: &[u8]) -> Result<Vec<f64>, BaselineError> {
        self.check_input(seq)?;
        let cfg = &self.config;
        let (a, w, f, h) = (cfg.alphabet_size, cfg.filter_width, cfg.filters, cfg.dense);
        let conv_w = self.params[0].1.data();
        let conv_b = self.params[1].1.data();
        let mut pooled = vec![f64::NEG_INFINITY; f];
        let mut acc = vec![0.0; f];
        for p in 0..=seq.len() - w {
            acc.copy_from_slice(conv_b);
            for j in 0..w {
                let row = &conv_w[(j * a + seq[p + j] as usize) * f..][..f];
                for (x, r) in acc.iter_mut().zip(row) {
                    *x += r;
                }
            }
            for (m, x) in pooled.iter_mut().zip(&acc) {
                *m = m.max(x.max(0.0));
            }
        }
        Ok(dense_relu(&pooled, self.params[2].1.data(), self.params[3].1.data(), h))
    }

    /// Output logits from penultimate features.
    pub fn head_logits(&self, features: &[f64]) -> Vec<f64> {
        let o = self.config.outputs();
        dense(features, self.params[4].1.data(), self.params[5].1.data(), o)
    }

    pub fn out_weights(&self) -> &Tensor {
        &self.params[4].1
    }

    pub fn logits(&self, seq: &[u8]) -> Result<Vec<f64>, BaselineError> {
        Ok(self.head_logits(&self.features(seq)?))
    }

    pub fn predict_proba(&self, seq: &[u8]) -> Result<Vec<f64>, BaselineError> {
        Ok(softmax(&self.logits(seq)?))
    }

    pub fn accuracy(&self, data: &[EncodedSequence]) -> Result<f64, BaselineError> {
        let mut hit = 0usize;
        for s in data {
            let label = s.class_label.ok_or_else(|| BaselineError::MissingLabel(s.id.clone()))?;
            let probs = self.predict_proba(&s.symbols)?;
            let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
            hit += (best == label as usize) as usize;
        }
        Ok(hit as f64 / data.len().max(1) as f64)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BaselineError> {
        Ok(checkpoint::encode(&self.container())?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BaselineError> {
        Self::from_container(checkpoint::decode(bytes, KIND)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        Ok(checkpoint::save(&self.container(), path)?)
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        Self::from_container(checkpoint::load(path, KIND)?)
    }

    fn container(&self) -> Container<ClassifierConfig> {
        Container {
            kind: KIND.into(),
            config: self.config.clone(),
            step: self.step,
            seed: self.seed,
            params: self.params.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    fn from_container(c: Container<ClassifierConfig>) -> Result<Self, BaselineError> {
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

fn dense(x: &[f64], w: &[f64], b: &[f64], out: usize) -> Vec<f64> {
    let mut y = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            for (yj, wj) in y.iter_mut().zip(&w[i * out..(i + 1) * out]) {
                *yj += xi * wj;
            }
        }
    }
    y
}

fn dense_relu(x: &[f64], w: &[f64], b: &[f64], out: usize) -> Vec<f64> {
    let mut y = dense(x, w, b, out);
    for v in &mut y {
        *v = v.max(0.0);
    }
    y
}

/// Trains a classifier on labeled in-distribution data. Perturbing variants
/// pair every batch with an equally sized batch of freshly mutated inputs.
pub fn train_classifier(
    data: &[EncodedSequence],
    config: &ClassifierConfig,
    seed: u64,
) -> Result<Classifier, BaselineError> {
    config.validate()?;
    if data.is_empty() {
        return Err(BaselineError::EmptyData);
    }
    let len = data[0].symbols.len();
    if len < config.filter_width {
        return Err(BaselineError::TooShort {
            len,
            width: config.filter_width,
        });
    }
    let mut labels = Vec::with_capacity(data.len());
    for s in data {
        if s.symbols.len() != len {
            return Err(BaselineError::UnequalLengths);
        }
        if let Some(&bad) = s.symbols.iter().find(|&&x| x as usize >= config.alphabet_size) {
            return Err(BaselineError::AlphabetMismatch {
                symbol: bad,
                alphabet_size: config.alphabet_size,
            });
        }
        let label = s.class_label.ok_or_else(|| BaselineError::MissingLabel(s.id.clone()))? as usize;
        if label >= config.num_classes {
            return Err(BaselineError::LabelOutOfRange {
                label,
                classes: config.num_classes,
            });
        }
        labels.push(label);
    }

    let a = config.alphabet_size;
    let outputs = config.outputs();
    let mut init_rng = rng::stream(seed, 0);
    let mut batch_rng = rng::stream(seed, 1);
    let mut perturb_rng = rng::stream(rng::derive(seed, config.perturb.map_or(0, |p| p.seed)), 2);
    let mut params = init_params(config, &mut init_rng);
    let mut opt = OptimizerState::new(config.train.optimizer, &params, DECAY.to_vec());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let batch_size = config.train.batch_size.min(data.len());
    let mut next_index = |r: &mut rng::Rng| {
        if cursor == order.len() {
            order.shuffle(r);
            cursor = 0;
        }
        cursor += 1;
        order[cursor - 1]
    };

    for step in 1..=config.train.steps {
        let mut seqs: Vec<Vec<u8>> = Vec::with_capacity(2 * batch_size);
        let mut targets: Vec<Vec<f64>> = Vec::with_capacity(2 * batch_size);
        let onehot = |k: usize| {
            let mut t = vec![0.0; outputs];
            t[k] = 1.0;
            t
        };
        for _ in 0..batch_size {
            let i = next_index(&mut batch_rng);
            seqs.push(data[i].symbols.clone());
            targets.push(onehot(match config.variant {
                Variant::Binary => 0,
                _ => labels[i],
            }));
        }
        if let Some(p) = config.perturb.filter(|_| config.variant.uses_perturbation()) {
            for _ in 0..batch_size {
                let i = next_index(&mut batch_rng);
                seqs.push(perturb_symbols(&data[i].symbols, a, &p, &mut perturb_rng));
                targets.push(match config.variant {
                    Variant::Binary => onehot(1),
                    Variant::KPlusOne => onehot(config.num_classes),
                    Variant::Calibrated { uniform_weight } => vec![uniform_weight / outputs as f64; outputs],
                    Variant::Standard => unreachable!("standard variant takes no perturbed batch"),
                });
            }
        }
        let refs: Vec<&[u8]> = seqs.iter().map(Vec::as_slice).collect();
        let target = Tensor::matrix(refs.len(), outputs, targets.concat())?;

        let mut tape = Tape::new();
        let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p.clone())).collect();
        let logits = forward_tape(
            &mut tape,
            &ClassifierNodes::from_slice(&ids),
            &refs,
            a,
            config.filter_width,
        )?;
        let losses = tape.softmax_xent(logits, target)?;
        let total = tape.sum_all(losses)?;
        let loss = tape.scale(total, 1.0 / batch_size as f64)?;
        if !tape.scalar(loss)?.is_finite() {
            return Err(BaselineError::NonFinite { step: step as u64 });
        }
        let mut grads = tape.backward(loss)?;
        let mut grads: Vec<Tensor> = ids.iter().map(|id| grads.take(*id).expect("param gradient")).collect();
        if config.train.clip_norm > 0.0 {
            clip_global_norm(&mut grads, config.train.clip_norm);
        }
        adam_step(&mut params, &grads, &mut opt)?;
    }
    Classifier::new(config.clone(), params, config.train.steps as u64, seed)
}

/// Independently seeded members, trained in parallel.
pub fn train_ensemble(
    data: &[EncodedSequence],
    config: &ClassifierConfig,
    seeds: &[u64],
) -> Result<Vec<Classifier>, BaselineError> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| train_classifier(data, config, s)).collect()
}
