//! Likelihood-ratio scoring against a background model, the WAIC ensemble
//! score, and background hyperparameter selection.
//!
//! `llr(x) = log p_fg(x) - log p_bg(x)`; larger means more in-distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::genmodel::{log_likelihoods, train_ar, ARConfig, Checkpoint, DensityModel, ModelError};
use crate::metrics::{auroc, MetricError};
use crate::rng;
use crate::seqdata::{perturb_symbols, EncodedSequence, MutationSemantics, Origin, PerturbConfig};

#[derive(Debug, thiserror::Error)]
pub enum LlrError {
    #[error("incompatible models: {0}")]
    Incompatible(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Foreground/background pair.
#[derive(Clone, Debug)]
pub struct LlrScorer<F = Checkpoint, B = Checkpoint> {
    foreground: F,
    background: B,
}

impl LlrScorer<Checkpoint, Checkpoint> {
    /// Pairs two checkpoints of the same kind and alphabet. The background
    /// must have been trained on perturbed inputs (`mu > 0`).
    pub fn new(foreground: Checkpoint, background: Checkpoint) -> Result<Self, LlrError> {
        let (fk, bk) = (foreground.kind().name(), background.kind().name());
        if fk != bk {
            return Err(LlrError::Incompatible(format!(
                "foreground is {fk}, background is {bk}"
            )));
        }
        match background.config.perturb {
            Some(p) if p.mutation_rate > 0.0 => {}
            _ => {
                return Err(LlrError::Incompatible(
                    "background was not trained with a positive mutation rate".into(),
                ))
            }
        }
        Self::from_models(foreground, background)
    }
}

impl<F: DensityModel, B: DensityModel> LlrScorer<F, B> {
    /// Pairs any two density models over the same alphabet.
    pub fn from_models(foreground: F, background: B) -> Result<Self, LlrError> {
        if foreground.alphabet_size() != background.alphabet_size() {
            return Err(LlrError::Incompatible(format!(
                "alphabet sizes {} and {}",
                foreground.alphabet_size(),
                background.alphabet_size()
            )));
        }
        Ok(Self { foreground, background })
    }

    pub fn foreground(&self) -> &F {
        &self.foreground
    }

    pub fn background(&self) -> &B {
        &self.background
    }

    pub fn llr_score(&self, seq: &[u8]) -> Result<f64, LlrError> {
        Ok(self.foreground.log_likelihood(seq)? - self.background.log_likelihood(seq)?)
    }

    pub fn per_position_llr(&self, seq: &[u8]) -> Result<Vec<f64>, LlrError> {
        let fg = self.foreground.per_position_log_prob(seq)?;
        let bg = self.background.per_position_log_prob(seq)?;
        Ok(fg.iter().zip(&bg).map(|(f, b)| f - b).collect())
    }

    /// Batched [`Self::llr_score`]; results are identical to scoring one at a time.
    pub fn llr_scores(&self, seqs: &[&[u8]]) -> Result<Vec<f64>, LlrError> {
        let fg = log_likelihoods(&self.foreground, seqs)?;
        let bg = log_likelihoods(&self.background, seqs)?;
        Ok(fg.iter().zip(&bg).map(|(f, b)| f - b).collect())
    }
}

/// Mean minus population variance of the members' log-likelihoods.
pub fn waic_score<M: DensityModel>(models: &[M], seq: &[u8]) -> Result<f64, LlrError> {
    Ok(waic_scores(models, &[seq])?[0])
}

pub fn waic_scores<M: DensityModel>(models: &[M], seqs: &[&[u8]]) -> Result<Vec<f64>, LlrError> {
    if models.len() < 2 {
        return Err(LlrError::InvalidArgument(format!(
            "WAIC needs at least two models, got {}",
            models.len()
        )));
    }
    let per_model = models
        .iter()
        .map(|m| log_likelihoods(m, seqs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(waic_from_loglik(&per_model))
}

/// WAIC from stored per-model log-likelihoods, `per_model[m][i]`.
pub fn waic_from_loglik(per_model: &[Vec<f64>]) -> Vec<f64> {
    let m = per_model.len() as f64;
    (0..per_model[0].len())
        .map(|i| {
            let mean = per_model.iter().map(|v| v[i]).sum::<f64>() / m;
            let var = per_model.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / m;
            mean - var
        })
        .collect()
}

/// Background hyperparameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub mutation_rates: Vec<f64>,
    pub l2: Vec<f64>,
    #[serde(default)]
    pub semantics: MutationSemantics,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            mutation_rates: vec![0.01, 0.05, 0.1, 0.2],
            l2: vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3],
            semantics: MutationSemantics::FullAlphabet,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), LlrError> {
        if self.mutation_rates.is_empty() || self.l2.is_empty() {
            return Err(LlrError::Empty("hyperparameter grid"));
        }
        if let Some(mu) = self.mutation_rates.iter().find(|m| !(**m > 0.0 && **m <= 1.0)) {
            return Err(LlrError::InvalidArgument(format!("mutation rate {mu} outside (0, 1]")));
        }
        if let Some(l) = self.l2.iter().find(|l| !(**l >= 0.0)) {
            return Err(LlrError::InvalidArgument(format!("L2 coefficient {l} is negative")));
        }
        Ok(())
    }

    /// Cells in row-major `(mu, lambda)` order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.mutation_rates
            .iter()
            .flat_map(|&m| self.l2.iter().map(move |&l| (m, l)))
            .collect()
    }
}

/// A background model trained for one grid cell.
#[derive(Clone, Debug)]
pub struct GridCell {
    pub mu: f64,
    pub lambda: f64,
    pub background: Checkpoint,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub mu: f64,
    pub lambda: f64,
    pub val_auroc: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the selected cell.
    pub selected: usize,
}

impl SweepResult {
    pub fn selected_row(&self) -> &SweepRow {
        &self.rows[self.selected]
    }
}

/// Training seed of grid cell `index`.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    rng::derive(seed, index as u64 + 1)
}

/// Trains one background per grid cell, in parallel. Cell `i` is seeded
/// with [`cell_seed`]`(seed, i)`, so results do not depend on scheduling.
pub fn train_backgrounds(
    train: &[EncodedSequence],
    grid: &SweepGrid,
    base: &ARConfig,
    seed: u64,
) -> Result<Vec<GridCell>, LlrError> {
    grid.validate()?;
    grid.cells()
        .into_par_iter()
        .enumerate()
        .map(|(i, (mu, lambda))| {
            let perturb = PerturbConfig {
                mutation_rate: mu,
                semantics: grid.semantics,
                seed: 0,
            };
            let cfg = base.as_background(perturb, lambda);
            let background = train_ar(train, &cfg, cell_seed(seed, i))?;
            Ok(GridCell { mu, lambda, background })
        })
        .collect()
}

fn symbols(seqs: &[EncodedSequence]) -> Vec<&[u8]> {
    seqs.iter().map(|s| s.symbols.as_slice()).collect()
}

/// Scores every cell by validation AUROC of the LLR and picks the best;
/// ties go to the smaller mutation rate, then the smaller L2.
pub fn select(
    foreground: &Checkpoint,
    cells: &[GridCell],
    val_in: &[EncodedSequence],
    val_ood: &[EncodedSequence],
) -> Result<SweepResult, LlrError> {
    if val_in.is_empty() {
        return Err(LlrError::Empty("in-distribution validation set"));
    }
    if val_ood.is_empty() {
        return Err(LlrError::Empty("OOD validation set"));
    }
    if cells.is_empty() {
        return Err(LlrError::Empty("hyperparameter grid"));
    }
    let (vin, vood) = (symbols(val_in), symbols(val_ood));
    let fg_in = log_likelihoods(foreground, &vin)?;
    let fg_ood = log_likelihoods(foreground, &vood)?;
    let rows = cells
        .par_iter()
        .map(|c| {
            let bg_in = log_likelihoods(&c.background, &vin)?;
            let bg_ood = log_likelihoods(&c.background, &vood)?;
            let s_in: Vec<f64> = fg_in.iter().zip(&bg_in).map(|(f, b)| f - b).collect();
            let s_ood: Vec<f64> = fg_ood.iter().zip(&bg_ood).map(|(f, b)| f - b).collect();
            Ok(SweepRow {
                mu: c.mu,
                lambda: c.lambda,
                val_auroc: auroc(&s_in, &s_ood)?,
            })
        })
        .collect::<Result<Vec<_>, LlrError>>()?;
    let selected = (0..rows.len())
        .reduce(|best, i| {
            let (a, b) = (&rows[best], &rows[i]);
            let better =
                b.val_auroc > a.val_auroc || (b.val_auroc == a.val_auroc && (b.mu, b.lambda) < (a.mu, a.lambda));
            if better {
                i
            } else {
                best
            }
        })
        .expect("non-empty grid");
    Ok(SweepResult { rows, selected })
}

/// Trained artifacts of a full sweep.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub foreground: Checkpoint,
    pub cells: Vec<GridCell>,
    pub result: SweepResult,
}

impl Sweep {
    pub fn scorer(&self) -> Result<LlrScorer, LlrError> {
        LlrScorer::new(
            self.foreground.clone(),
            self.cells[self.result.selected].background.clone(),
        )
    }
}

/// Trains the foreground once, one background per cell, and selects on
/// real validation OOD data. The foreground uses `seed`; cells use
/// [`cell_seed`].
pub fn sweep(
    train: &[EncodedSequence],
    grid: &SweepGrid,
    val_in: &[EncodedSequence],
    val_ood: &[EncodedSequence],
    base: &ARConfig,
    seed: u64,
) -> Result<Sweep, LlrError> {
    if val_in.is_empty() || val_ood.is_empty() {
        return Err(LlrError::Empty("validation set"));
    }
    let mut fg_cfg = base.clone();
    fg_cfg.perturb = None;
    let foreground = train_ar(train, &fg_cfg, seed)?;
    let cells = train_backgrounds(train, grid, base, seed)?;
    let result = select(&foreground, &cells, val_in, val_ood)?;
    Ok(Sweep {
        foreground,
        cells,
        result,
    })
}

/// Mutated copies of `val_in` standing in for OOD validation data.
pub fn simulated_ood(
    val_in: &[EncodedSequence],
    alphabet_size: usize,
    rate: f64,
    semantics: MutationSemantics,
    seed: u64,
) -> Result<Vec<EncodedSequence>, LlrError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(LlrError::InvalidArgument(format!(
            "simulation mutation rate {rate} outside (0, 1]"
        )));
    }
    let cfg = PerturbConfig {
        mutation_rate: rate,
        semantics,
        seed,
    };
    let mut r = rng::stream(seed, 3);
    Ok(val_in
        .iter()
        .map(|s| EncodedSequence {
            id: format!("{}:sim", s.id),
            class_label: s.class_label,
            origin: Origin::Ood,
            symbols: perturb_symbols(&s.symbols, alphabet_size, &cfg, &mut r),
        })
        .collect())
}

/// Default simulation mutation rate for DNA.
pub const DEFAULT_SIM_RATE: f64 = 0.1;

/// [`sweep`] with the OOD validation set replaced by mutated in-distribution
/// validation sequences. No real OOD data is consulted.
pub fn simulated_ood_tune(
    train: &[EncodedSequence],
    val_in: &[EncodedSequence],
    rate: f64,
    grid: &SweepGrid,
    base: &ARConfig,
    seed: u64,
) -> Result<Sweep, LlrError> {
    let sim = simulated_ood(val_in, base.alphabet_size, rate, grid.semantics, seed)?;
    sweep(train, grid, val_in, &sim, base, seed)
}
