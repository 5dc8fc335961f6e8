//! Planted-motif synthetic benchmark.
//!
//! Each class draws i.i.d. background symbols at a class-specific GC
//! fraction and overwrites short class-specific motifs at random
//! non-overlapping offsets. Background composition is the nuisance
//! statistic; motifs carry the class identity.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Alphabet, DatasetSplit, EncodedSequence, Origin, SeqError, SplitName};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassRole {
    InDistribution,
    ValOod,
    TestOod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: u32,
    pub name: String,
    pub role: ClassRole,
    /// Target fraction of G + C in the background.
    pub gc: f64,
    pub motifs: Vec<String>,
    /// Probability that each motif is planted in a given sequence.
    pub planting_rate: f64,
}

/// Sequences per class and split. In-distribution classes fill train, val
/// and test; validation-OOD classes fill `val`, test-OOD classes fill `test`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seq_len: usize,
    pub counts: SplitCounts,
    pub classes: Vec<ClassSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifSpan {
    pub start: usize,
    pub len: usize,
    /// Index into the class's motif list.
    pub motif: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub split: DatasetSplit,
    /// Ground-truth planted spans per sequence id.
    pub motif_spans: BTreeMap<String, Vec<MotifSpan>>,
}

impl SyntheticDataset {
    /// Per-position mask marking planted motif symbols.
    pub fn motif_mask(&self, seq: &EncodedSequence) -> Vec<bool> {
        let mut mask = vec![false; seq.len()];
        if let Some(spans) = self.motif_spans.get(&seq.id) {
            for s in spans {
                mask[s.start..s.start + s.len].iter_mut().for_each(|m| *m = true);
            }
        }
        mask
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SeqError> {
        let bad = |msg: String| Err(SeqError::InvalidSpec(msg));
        if self.seq_len == 0 {
            return bad("sequence length must be positive".into());
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        let dna = Alphabet::dna();
        let mut labels = BTreeSet::new();
        let mut in_motifs = BTreeSet::new();
        let mut ood_motifs = BTreeSet::new();
        for c in &self.classes {
            if !labels.insert(c.label) {
                return bad(format!("duplicate class label {}", c.label));
            }
            if !(c.gc > 0.0 && c.gc < 1.0) {
                return bad(format!("class {}: GC target {} outside (0, 1)", c.name, c.gc));
            }
            if !(0.0..=1.0).contains(&c.planting_rate) {
                return bad(format!(
                    "class {}: planting rate {} outside [0, 1]",
                    c.name, c.planting_rate
                ));
            }
            let mut total = 0;
            for m in &c.motifs {
                if m.is_empty() || m.len() >= self.seq_len {
                    return Err(SeqError::MotifTooLong {
                        motif: m.clone(),
                        seq_len: self.seq_len,
                    });
                }
                dna.encode(m.as_bytes())?;
                total += m.len();
                let set = if c.role == ClassRole::InDistribution {
                    &mut in_motifs
                } else {
                    &mut ood_motifs
                };
                set.insert(m.clone());
            }
            if total > self.seq_len {
                return Err(SeqError::MotifPlacement {
                    class: c.name.clone(),
                    total,
                    seq_len: self.seq_len,
                });
            }
        }
        if let Some(m) = in_motifs.intersection(&ood_motifs).next() {
            return bad(format!("motif {m} shared by in-distribution and OOD classes"));
        }
        if !self.classes.iter().any(|c| c.role == ClassRole::InDistribution) {
            return bad("no in-distribution class".into());
        }
        Ok(())
    }

    /// GC-confounded planted-motif benchmark: `n_in` in-distribution classes
    /// with GC targets spread over [0.50, 0.62], and `n_val_ood` validation-OOD
    /// plus `n_test_ood` test-OOD classes spread over [0.60, 0.85]. Each class
    /// has three random 12-mer motifs (drawn from `motif_seed`), each planted
    /// with probability 0.75. Since the in-distribution data lean GC-rich, a
    /// density model fitted to them rates GC-richer OOD sequences as more
    /// likely.
    pub fn gc_confounded(
        n_in: usize,
        n_val_ood: usize,
        n_test_ood: usize,
        seq_len: usize,
        counts: SplitCounts,
        motif_seed: u64,
    ) -> Self {
        const MOTIFS_PER_CLASS: usize = 3;
        const MOTIF_LEN: usize = 12;
        const PLANTING_RATE: f64 = 0.75;
        let mut rng = rng::stream(motif_seed, 0);
        let mut used = BTreeSet::new();
        let mut motif_set = |rng: &mut rng::Rng| -> Vec<String> {
            (0..MOTIFS_PER_CLASS)
                .map(|_| loop {
                    let m: String = (0..MOTIF_LEN)
                        .map(|_| b"ACGT"[rng.random_range(0..4)] as char)
                        .collect();
                    if used.insert(m.clone()) {
                        break m;
                    }
                })
                .collect()
        };
        let spread = |i: usize, n: usize, lo: f64, hi: f64| {
            if n <= 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut classes = Vec::new();
        let mut label = 0u32;
        for i in 0..n_in {
            classes.push(ClassSpec {
                label,
                name: format!("in{i:02}"),
                role: ClassRole::InDistribution,
                gc: spread(i, n_in, 0.50, 0.62),
                motifs: motif_set(&mut rng),
                planting_rate: PLANTING_RATE,
            });
            label += 1;
        }
        for i in 0..n_val_ood {
            classes.push(ClassSpec {
                label,
                name: format!("valood{i:02}"),
                role: ClassRole::ValOod,
                gc: spread(i, n_val_ood, 0.60, 0.85),
                motifs: motif_set(&mut rng),
                planting_rate: PLANTING_RATE,
            });
            label += 1;
        }
        for i in 0..n_test_ood {
            classes.push(ClassSpec {
                label,
                name: format!("testood{i:02}"),
                role: ClassRole::TestOod,
                gc: spread(i, n_test_ood, 0.60, 0.85),
                motifs: motif_set(&mut rng),
                planting_rate: PLANTING_RATE,
            });
            label += 1;
        }
        Self {
            seq_len,
            counts,
            classes,
        }
    }
}

/// I.i.d. background with `P(G) = P(C) = gc / 2` and `P(A) = P(T) = (1 - gc) / 2`.
pub fn sample_background<R: Rng + ?Sized>(gc: f64, len: usize, rng: &mut R) -> Vec<u8> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random();
            if u < gc {
                // C = 1, G = 2
                if u < gc / 2.0 {
                    1
                } else {
                    2
                }
            } else if u < gc + (1.0 - gc) / 2.0 {
                0
            } else {
                3
            }
        })
        .collect()
}

/// Plants each motif independently with probability `rate` at uniformly
/// random non-overlapping offsets. Returns the planted spans by start.
pub fn plant_motifs<R: Rng + ?Sized>(
    seq: &mut [u8],
    motifs: &[Vec<u8>],
    rate: f64,
    rng: &mut R,
) -> Result<Vec<MotifSpan>, SeqError> {
    let mut chosen: Vec<usize> = (0..motifs.len()).filter(|_| rng.random::<f64>() < rate).collect();
    if chosen.is_empty() {
        return Ok(Vec::new());
    }
    let total: usize = chosen.iter().map(|&i| motifs[i].len()).sum();
    if total > seq.len() {
        return Err(SeqError::MotifPlacement {
            class: String::new(),
            total,
            seq_len: seq.len(),
        });
    }
    // Random order, then uniform gaps: choosing k sorted distinct slots out
    // of (free + k) places the k blocks uniformly without overlap.
    for i in (1..chosen.len()).rev() {
        let j = rng.random_range(0..=i);
        chosen.swap(i, j);
    }
    let free = seq.len() - total;
    let k = chosen.len();
    let mut slots: Vec<usize> = rand::seq::index::sample(rng, free + k, k).into_vec();
    slots.sort_unstable();
    let mut spans = Vec::with_capacity(k);
    let mut used = 0;
    for (rank, (&slot, &m)) in slots.iter().zip(&chosen).enumerate() {
        let start = slot - rank + used;
        let motif = &motifs[m];
        seq[start..start + motif.len()].copy_from_slice(motif);
        spans.push(MotifSpan {
            start,
            len: motif.len(),
            motif: m,
        });
        used += motif.len();
    }
    Ok(spans)
}

/// Generates the benchmark corpus. Each class uses its own random stream
/// derived from `seed`, so the output does not depend on class order.
pub fn synth_generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset, SeqError> {
    spec.validate()?;
    let dna = Alphabet::dna();
    let mut split = DatasetSplit::default();
    let mut motif_spans = BTreeMap::new();
    for class in &spec.classes {
        let motifs: Vec<Vec<u8>> = class
            .motifs
            .iter()
            .map(|m| dna.encode(m.as_bytes()))
            .collect::<Result<_, _>>()?;
        let mut rng = rng::stream(seed, class.label as u64);
        let (origin, parts): (Origin, Vec<(SplitName, usize)>) = match class.role {
            ClassRole::InDistribution => (
                Origin::InDistribution,
                vec![
                    (SplitName::Train, spec.counts.train),
                    (SplitName::ValIn, spec.counts.val),
                    (SplitName::TestIn, spec.counts.test),
                ],
            ),
            ClassRole::ValOod => (Origin::Ood, vec![(SplitName::ValOod, spec.counts.val)]),
            ClassRole::TestOod => (Origin::Ood, vec![(SplitName::TestOod, spec.counts.test)]),
        };
        for (part, count) in parts {
            let tag = match part {
                SplitName::Train => "train",
                SplitName::ValIn | SplitName::ValOod => "val",
                SplitName::TestIn | SplitName::TestOod => "test",
            };
            for i in 0..count {
                let mut symbols = sample_background(class.gc, spec.seq_len, &mut rng);
                let spans =
                    plant_motifs(&mut symbols, &motifs, class.planting_rate, &mut rng).map_err(|e| match e {
                        SeqError::MotifPlacement { total, seq_len, .. } => SeqError::MotifPlacement {
                            class: class.name.clone(),
                            total,
                            seq_len,
                        },
                        other => other,
                    })?;
                let id = format!("{}-{tag}-{i:05}", class.name);
                motif_spans.insert(id.clone(), spans);
                split
                    .part_mut(part)
                    .push(EncodedSequence::new(id, symbols).with_label(class.label, origin));
            }
        }
    }
    split.validate()?;
    Ok(SyntheticDataset { split, motif_spans })
}
