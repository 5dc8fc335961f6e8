use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ARConfig, ModelKind};
use super::model::{log_likelihoods, Checkpoint};
use super::ngram::NgramCounts;
use super::{lstm, ModelError};
use crate::numcore::{adam_step, clip_global_norm, NodeId, OptimizerState, Tape, Tensor};
use crate::rng;
use crate::seqdata::{perturb_symbols, EncodedSequence};

/// One line of the JSON-lines training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub step: u64,
    pub train_nll: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_nll: Option<f64>,
}

/// Fits a density model. With `config.perturb` set, every step (LSTM) or
/// corpus pass (n-gram) sees a fresh mutation of its inputs.
pub fn train_ar(data: &[EncodedSequence], config: &ARConfig, seed: u64) -> Result<Checkpoint, ModelError> {
    train_ar_logged(data, None, config, seed, |_| {})
}

/// Mean per-symbol negative log-likelihood of `seqs` under `model`.
pub fn mean_nll(model: &Checkpoint, seqs: &[&[u8]]) -> Result<f64, ModelError> {
    let total: usize = seqs.iter().map(|s| s.len()).sum();
    let ll: f64 = log_likelihoods(model, seqs)?.iter().sum();
    Ok(-ll / total as f64)
}

pub fn train_ar_logged(
    data: &[EncodedSequence],
    val: Option<&[EncodedSequence]>,
    config: &ARConfig,
    seed: u64,
    mut log: impl FnMut(&TrainLog),
) -> Result<Checkpoint, ModelError> {
    config.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let a = config.alphabet_size;
    for s in data.iter().chain(val.unwrap_or(&[])) {
        if s.symbols.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        if let Some(&bad) = s.symbols.iter().find(|&&x| x as usize >= a) {
            return Err(ModelError::AlphabetMismatch {
                symbol: bad,
                alphabet_size: a,
            });
        }
    }
    let val_refs: Option<Vec<&[u8]>> = val.map(|v| v.iter().map(|s| s.symbols.as_slice()).collect());
    match &config.model {
        ModelKind::Ngram { order, weights } => {
            let mut counts = NgramCounts::new(*order, a);
            let passes = match &config.perturb {
                Some(_) => config.train.steps.max(1),
                None => 1,
            };
            let mut prng = perturb_stream(config, seed);
            for _ in 0..passes {
                for s in data {
                    match &config.perturb {
                        Some(p) => counts.add_sequence(&perturb_symbols(&s.symbols, a, p, &mut prng)),
                        None => counts.add_sequence(&s.symbols),
                    }
                }
            }
            let table = counts.to_table(weights);
            let cp = Checkpoint::new(config.clone(), vec![("probs".into(), table)], passes as u64, seed)?;
            if let Some(v) = &val_refs {
                let refs: Vec<&[u8]> = data.iter().map(|s| s.symbols.as_slice()).collect();
                log(&TrainLog {
                    step: passes as u64,
                    train_nll: mean_nll(&cp, &refs)?,
                    val_nll: Some(mean_nll(&cp, v)?),
                });
            }
            Ok(cp)
        }
        ModelKind::Lstm { hidden } => train_lstm(data, val_refs.as_deref(), config, *hidden, seed, &mut log),
    }
}

fn train_lstm(
    data: &[EncodedSequence],
    val: Option<&[&[u8]]>,
    config: &ARConfig,
    hidden: usize,
    seed: u64,
    log: &mut impl FnMut(&TrainLog),
) -> Result<Checkpoint, ModelError> {
    let a = config.alphabet_size;
    let tc = &config.train;
    let mut init_rng = rng::stream(seed, 0);
    let mut batch_rng = rng::stream(seed, 1);
    let mut perturb_rng = perturb_stream(config, seed);

    let mut params = lstm::init_params(hidden, a, &mut init_rng);
    let mut opt = OptimizerState::new(tc.optimizer, &params, lstm::DECAY.to_vec());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let batch_size = tc.batch_size.min(data.len());

    for step in 1..=tc.steps {
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            if cursor == order.len() {
                order.shuffle(&mut batch_rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let seqs: Vec<Vec<u8>> = batch
            .iter()
            .map(|&i| match &config.perturb {
                Some(p) => perturb_symbols(&data[i].symbols, a, p, &mut perturb_rng),
                None => data[i].symbols.clone(),
            })
            .collect();
        let refs: Vec<&[u8]> = seqs.iter().map(Vec::as_slice).collect();

        let mut tape = Tape::new();
        let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = lstm::batch_loss(&mut tape, &lstm::LstmNodes::from_slice(&ids), &refs, hidden, a)?;
        let train_nll = tape.scalar(loss)?;
        if !train_nll.is_finite() {
            return Err(ModelError::NonFinite { step: step as u64 });
        }
        let mut grads = tape.backward(loss)?;
        let mut grads: Vec<Tensor> = ids.iter().map(|id| grads.take(*id).expect("param gradient")).collect();
        if tc.clip_norm > 0.0 {
            clip_global_norm(&mut grads, tc.clip_norm);
        }
        adam_step(&mut params, &grads, &mut opt)?;

        if tc.log_every > 0 && (step % tc.log_every == 0 || step == tc.steps) {
            let val_nll = match val {
                Some(v) => {
                    let cp = snapshot(config, &params, step as u64, seed)?;
                    Some(mean_nll(&cp, v)?)
                }
                None => None,
            };
            log(&TrainLog {
                step: step as u64,
                train_nll,
                val_nll,
            });
        }
    }
    snapshot(config, &params, tc.steps as u64, seed)
}

fn snapshot(config: &ARConfig, params: &[Tensor], step: u64, seed: u64) -> Result<Checkpoint, ModelError> {
    let named = lstm::PARAM_NAMES
        .iter()
        .zip(params)
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    Checkpoint::new(config.clone(), named, step, seed)
}

fn perturb_stream(config: &ARConfig, seed: u64) -> rng::Rng {
    rng::stream(rng::derive(seed, config.perturb.map_or(0, |p| p.seed)), 2)
}
