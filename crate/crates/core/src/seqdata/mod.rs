//! Sequence ingestion and manipulation: FASTA, encoding, fragmentation,
//! GC content, random mutation, the synthetic benchmark and d2S distance.

mod alphabet;
pub mod d2s;
mod fasta;
mod fragment;
mod perturb;
mod record;
pub mod synth;

pub use alphabet::Alphabet;
pub use d2s::{d2s_distance, min_distance_to_set};
pub use fasta::{parse_fasta, parse_fasta_str, write_fasta, FastaRecord};
pub use fragment::{fragment, tile};
pub use perturb::{gc_content, gc_fraction, perturb, perturb_symbols, MutationSemantics, PerturbConfig};
pub use record::{DatasetSplit, EncodedSequence, ManifestRecord, Origin, SplitName};
pub use synth::{
    plant_motifs, sample_background, synth_generate, ClassRole, ClassSpec, MotifSpan, SplitCounts, SyntheticDataset,
    SyntheticSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum SeqError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("symbol {symbol:?} at position {pos} is not in the alphabet")]
    UnknownSymbol { symbol: char, pos: usize },
    #[error("sequence {id}: code {code} out of range for alphabet of size {size}")]
    CodeOutOfRange { id: String, code: u8, size: usize },
    #[error("sequence {0} is empty")]
    EmptySequence(String),
    #[error("FASTA line {line}: sequence data before the first header")]
    DataBeforeHeader { line: usize },
    #[error("FASTA record {0:?} has no sequence")]
    EmptyRecord(String),
    #[error("genome {id} has length {len}, shorter than fragment length {need}")]
    GenomeTooShort { id: String, len: usize, need: usize },
    #[error("genome {id}: {available} valid fragment starts, {requested} requested")]
    NotEnoughFragments {
        id: String,
        available: usize,
        requested: usize,
    },
    #[error("motif {motif:?} is not shorter than the sequence length {seq_len}")]
    MotifTooLong { motif: String, seq_len: usize },
    #[error("class {class}: motifs need {total} positions but sequences have {seq_len}")]
    MotifPlacement {
        class: String,
        total: usize,
        seq_len: usize,
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("dataset split violates class disjointness: {0}")]
    SplitOverlap(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("{0}")]
    InvalidArgument(String),
}
