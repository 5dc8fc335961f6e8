use rand::Rng;

use super::{Alphabet, EncodedSequence, SeqError};

/// Start offsets of every length-`len` window made only of alphabet symbols.
fn valid_starts(genome: &[u8], alphabet: &Alphabet, len: usize) -> Vec<usize> {
    if len == 0 || genome.len() < len {
        return Vec::new();
    }
    let mut starts = Vec::new();
    // Number of invalid symbols in the current window.
    let mut bad = genome[..len].iter().filter(|&&b| alphabet.code(b).is_none()).count();
    for s in 0..=genome.len() - len {
        if s > 0 {
            if alphabet.code(genome[s - 1]).is_none() {
                bad -= 1;
            }
            if alphabet.code(genome[s + len - 1]).is_none() {
                bad += 1;
            }
        }
        if bad == 0 {
            starts.push(s);
        }
    }
    starts
}

/// Samples `count` fragments of length `len` at distinct, uniformly random
/// start positions. Windows containing symbols outside the alphabet (e.g.
/// `N`) are never returned. Fragments may overlap; start positions do not
/// repeat. Ids are `{id_prefix}:{start}` and fragments come back sorted by
/// start.
pub fn fragment<R: Rng + ?Sized>(
    genome: &[u8],
    alphabet: &Alphabet,
    len: usize,
    count: usize,
    id_prefix: &str,
    rng: &mut R,
) -> Result<Vec<EncodedSequence>, SeqError> {
    if len == 0 {
        return Err(SeqError::InvalidArgument("fragment length must be positive".into()));
    }
    if genome.len() < len {
        return Err(SeqError::GenomeTooShort {
            id: id_prefix.to_string(),
            len: genome.len(),
            need: len,
        });
    }
    let starts = valid_starts(genome, alphabet, len);
    if starts.len() < count {
        return Err(SeqError::NotEnoughFragments {
            id: id_prefix.to_string(),
            available: starts.len(),
            requested: count,
        });
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, starts.len(), count)
        .into_iter()
        .map(|i| starts[i])
        .collect();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|s| {
            let symbols = alphabet.encode(&genome[s..s + len])?;
            Ok(EncodedSequence::new(format!("{id_prefix}:{s}"), symbols))
        })
        .collect()
}

/// Deterministic alternative to [`fragment`]: windows at offsets
/// `0, stride, 2*stride, ...`, skipping windows with foreign symbols.
pub fn tile(
    genome: &[u8],
    alphabet: &Alphabet,
    len: usize,
    stride: usize,
    id_prefix: &str,
) -> Result<Vec<EncodedSequence>, SeqError> {
    if len == 0 || stride == 0 {
        return Err(SeqError::InvalidArgument(
            "tile length and stride must be positive".into(),
        ));
    }
    if genome.len() < len {
        return Err(SeqError::GenomeTooShort {
            id: id_prefix.to_string(),
            len: genome.len(),
            need: len,
        });
    }
    let mut out = Vec::new();
    for s in (0..=genome.len() - len).step_by(stride) {
        if let Ok(symbols) = alphabet.encode(&genome[s..s + len]) {
            out.push(EncodedSequence::new(format!("{id_prefix}:{s}"), symbols));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_valid_start_returns_genome() {
        let a = Alphabet::dna();
        let frags = fragment(b"ACGTACGT", &a, 8, 1, "g", &mut rng::stream(1, 0)).unwrap();
        assert_eq!(frags.len(), 1);
        assert_eq!(a.decode(&frags[0].symbols), "ACGTACGT");
    }

    #[test]
    fn deterministic_under_seed() {
        let a = Alphabet::dna();
        let genome: Vec<u8> = (0..1000).map(|i| b"ACGT"[(i * 7 + i / 3) % 4]).collect();
        let f1 = fragment(&genome, &a, 250, 10, "g", &mut rng::stream(9, 0)).unwrap();
        let f2 = fragment(&genome, &a, 250, 10, "g", &mut rng::stream(9, 0)).unwrap();
        assert_eq!(f1, f2);
        assert!(f1.iter().all(|f| f.len() == 250));
        let f3 = fragment(&genome, &a, 250, 10, "g", &mut rng::stream(10, 0)).unwrap();
        assert_ne!(f1, f3);
    }

    #[test]
    fn ambiguous_windows_skipped() {
        let a = Alphabet::dna();
        let mut genome: Vec<u8> = (0..600).map(|i| b"ACGT"[(i * 5 + 1) % 4]).collect();
        genome[300] = b'N';
        let valid = valid_starts(&genome, &a, 100);
        // Windows covering index 300 are starts 201..=300.
        assert_eq!(valid.len(), 501 - 100);
        for seed in 0..20 {
            let frags = fragment(&genome, &a, 100, 50, "g", &mut rng::stream(seed, 0)).unwrap();
            for f in &frags {
                let start: usize = f.id.rsplit(':').next().unwrap().parse().unwrap();
                assert!(start + 100 <= 300 || start > 300, "window {start} covers N");
                assert!(f.symbols.iter().all(|&s| s < 4));
            }
        }
        // Exhausting the valid starts still works; one more does not.
        assert!(fragment(&genome, &a, 100, 401, "g", &mut rng::stream(0, 0)).is_ok());
        assert!(matches!(
            fragment(&genome, &a, 100, 402, "g", &mut rng::stream(0, 0)),
            Err(SeqError::NotEnoughFragments { available: 401, .. })
        ));
    }

    #[test]
    fn short_genome_rejected() {
        let a = Alphabet::dna();
        assert!(matches!(
            fragment(b"ACGT", &a, 8, 1, "g", &mut rng::stream(0, 0)),
            Err(SeqError::GenomeTooShort { .. })
        ));
    }

    #[test]
    fn tiling() {
        let a = Alphabet::dna();
        let t = tile(b"ACGTNACGTACG", &a, 4, 4, "g").unwrap();
        let ids: Vec<_> = t.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["g:0", "g:8"]);
    }
}
