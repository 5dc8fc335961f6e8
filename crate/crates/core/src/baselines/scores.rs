//! Classifier-based OOD scores. Every score is oriented so that larger means
//! more in-distribution.

use rayon::prelude::*;

use super::{BaselineError, Classifier, Variant};
use crate::numcore::softmax;

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum class probability.
pub fn score_max_prob(model: &Classifier, seq: &[u8]) -> Result<f64, BaselineError> {
    Ok(max(&model.predict_proba(seq)?))
}

/// `sum_k p_k ln p_k`, the negated predictive entropy.
pub fn score_neg_entropy(model: &Classifier, seq: &[u8]) -> Result<f64, BaselineError> {
    Ok(neg_entropy(&model.predict_proba(seq)?))
}

pub fn neg_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum()
}

/// ODIN on the penultimate features: step `epsilon` along the sign of the
/// gradient of the log max tempered softmax, then return the max tempered
/// softmax at the moved features.
pub fn score_odin(model: &Classifier, seq: &[u8], temperature: f64, epsilon: f64) -> Result<f64, BaselineError> {
    score_odin_features(model, &model.features(seq)?, temperature, epsilon)
}

/// [`score_odin`] from precomputed penultimate features.
pub fn score_odin_features(
    model: &Classifier,
    features: &[f64],
    temperature: f64,
    epsilon: f64,
) -> Result<f64, BaselineError> {
    if !(temperature >= 1.0) || !(epsilon >= 0.0) {
        return Err(BaselineError::InvalidArgument(format!(
            "ODIN needs T >= 1 and epsilon >= 0, got T = {temperature}, epsilon = {epsilon}"
        )));
    }
    if features.len() != model.feature_dim() {
        return Err(BaselineError::InvalidArgument(format!(
            "expected {} features, got {}",
            model.feature_dim(),
            features.len()
        )));
    }
    let mut f = features.to_vec();
    let tempered =
        |f: &[f64]| -> Vec<f64> { softmax(&model.head_logits(f).iter().map(|z| z / temperature).collect::<Vec<_>>()) };
    if epsilon > 0.0 {
        let p = tempered(&f);
        let y = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        let w = model.out_weights();
        let o = w.cols();
        for (i, fi) in f.iter_mut().enumerate() {
            let row = &w.data()[i * o..(i + 1) * o];
            let g: f64 = row
                .iter()
                .zip(&p)
                .enumerate()
                .map(|(j, (wij, pj))| wij * ((j == y) as u8 as f64 - pj))
                .sum::<f64>()
                / temperature;
            *fi += epsilon
                * if g > 0.0 {
                    1.0
                } else if g < 0.0 {
                    -1.0
                } else {
                    0.0
                };
        }
    }
    Ok(max(&tempered(&f)))
}

/// Max class probability of the members' averaged predictive distribution.
pub fn ensemble_score(models: &[Classifier], seq: &[u8]) -> Result<f64, BaselineError> {
    let first = models.first().ok_or(BaselineError::EmptyEnsemble)?;
    let mut avg = first.predict_proba(seq)?;
    for m in &models[1..] {
        let p = m.predict_proba(seq)?;
        if p.len() != avg.len() {
            return Err(BaselineError::InvalidArgument(
                "ensemble members disagree on class count".into(),
            ));
        }
        for (a, b) in avg.iter_mut().zip(&p) {
            *a += b;
        }
    }
    let n = models.len() as f64;
    Ok(max(&avg) / n)
}

/// `log p(in | x) - log p(perturbed | x)` of a binary-variant classifier,
/// i.e. the difference of its two logits.
pub fn score_binary_logodds(model: &Classifier, seq: &[u8]) -> Result<f64, BaselineError> {
    if model.config.variant != Variant::Binary {
        return Err(BaselineError::WrongVariant("binary"));
    }
    let z = model.logits(seq)?;
    Ok(z[0] - z[1])
}

/// Max probability over the K real classes of a (K+1)-way classifier.
pub fn score_kplus1(model: &Classifier, seq: &[u8]) -> Result<f64, BaselineError> {
    if model.config.variant != Variant::KPlusOne {
        return Err(BaselineError::WrongVariant("k_plus_one"));
    }
    let p = model.predict_proba(seq)?;
    Ok(max(&p[..model.config.num_classes]))
}

/// Scores many sequences in parallel; output order follows `seqs`.
pub fn score_all<F>(seqs: &[&[u8]], score: F) -> Result<Vec<f64>, BaselineError>
where
    F: Fn(&[u8]) -> Result<f64, BaselineError> + Sync,
{
    seqs.par_iter().map(|s| score(s)).collect()
}
