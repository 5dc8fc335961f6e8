use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Alphabet, EncodedSequence, SeqError};

/// How a position selected for mutation picks its replacement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationSemantics {
    /// Uniform over the whole alphabet; the original symbol may be redrawn.
    #[default]
    FullAlphabet,
    /// Uniform over the other `|A| - 1` symbols; a selected position always changes.
    OtherSymbols,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub mutation_rate: f64,
    #[serde(default)]
    pub semantics: MutationSemantics,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbConfig {
    pub fn new(mutation_rate: f64, semantics: MutationSemantics) -> Result<Self, SeqError> {
        let cfg = Self {
            mutation_rate,
            semantics,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SeqError> {
        if (0.0..=1.0).contains(&self.mutation_rate) {
            Ok(())
        } else {
            Err(SeqError::InvalidArgument(format!(
                "mutation rate {} outside [0, 1]",
                self.mutation_rate
            )))
        }
    }

    /// Per-position probability that the output differs from the input.
    pub fn change_probability(&self, alphabet_size: usize) -> f64 {
        match self.semantics {
            MutationSemantics::FullAlphabet => self.mutation_rate * (alphabet_size - 1) as f64 / alphabet_size as f64,
            MutationSemantics::OtherSymbols => self.mutation_rate,
        }
    }
}

/// Selects positions i.i.d. with probability `mutation_rate` and resamples
/// them; every other position is copied.
pub fn perturb_symbols<R: Rng + ?Sized>(
    symbols: &[u8],
    alphabet_size: usize,
    config: &PerturbConfig,
    rng: &mut R,
) -> Vec<u8> {
    debug_assert!((0.0..=1.0).contains(&config.mutation_rate));
    let mu = config.mutation_rate;
    let k = alphabet_size as u8;
    symbols
        .iter()
        .map(|&x| {
            if mu > 0.0 && rng.random::<f64>() < mu {
                match config.semantics {
                    MutationSemantics::FullAlphabet => rng.random_range(0..k),
                    MutationSemantics::OtherSymbols => {
                        let r = rng.random_range(0..k - 1);
                        if r >= x {
                            r + 1
                        } else {
                            r
                        }
                    }
                }
            } else {
                x
            }
        })
        .collect()
}

pub fn perturb<R: Rng + ?Sized>(
    seq: &EncodedSequence,
    alphabet_size: usize,
    config: &PerturbConfig,
    rng: &mut R,
) -> EncodedSequence {
    EncodedSequence {
        id: seq.id.clone(),
        class_label: seq.class_label,
        origin: seq.origin,
        symbols: perturb_symbols(&seq.symbols, alphabet_size, config, rng),
    }
}

/// Fraction of G or C among the symbols of a DNA-encoded sequence.
pub fn gc_content(seq: &EncodedSequence, alphabet: &Alphabet) -> Result<f64, SeqError> {
    if !alphabet.is_dna() {
        return Err(SeqError::InvalidAlphabet("GC content needs the ACGT alphabet".into()));
    }
    if seq.symbols.is_empty() {
        return Err(SeqError::EmptySequence(seq.id.clone()));
    }
    Ok(gc_fraction(&seq.symbols))
}

/// GC fraction of ACGT codes (C = 1, G = 2).
pub fn gc_fraction(codes: &[u8]) -> f64 {
    let gc = codes.iter().filter(|&&c| c == 1 || c == 2).count();
    gc as f64 / codes.len() as f64
}
