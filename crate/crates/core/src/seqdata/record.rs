use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Alphabet, SeqError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    InDistribution,
    Ood,
    Unknown,
}

/// Integer-encoded sequence; the unit every model consumes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSequence {
    pub id: String,
    pub class_label: Option<u32>,
    pub origin: Origin,
    pub symbols: Vec<u8>,
}

impl EncodedSequence {
    pub fn new(id: impl Into<String>, symbols: Vec<u8>) -> Self {
        Self {
            id: id.into(),
            class_label: None,
            origin: Origin::Unknown,
            symbols,
        }
    }

    pub fn with_label(mut self, label: u32, origin: Origin) -> Self {
        self.class_label = Some(label);
        self.origin = origin;
        self
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn validate(&self, alphabet_size: usize) -> Result<(), SeqError> {
        if self.symbols.is_empty() {
            return Err(SeqError::EmptySequence(self.id.clone()));
        }
        if let Some(&bad) = self.symbols.iter().find(|&&s| s as usize >= alphabet_size) {
            return Err(SeqError::CodeOutOfRange {
                id: self.id.clone(),
                code: bad,
                size: alphabet_size,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    ValIn,
    ValOod,
    TestIn,
    TestOod,
}

impl SplitName {
    pub const ALL: [SplitName; 5] = [
        SplitName::Train,
        SplitName::ValIn,
        SplitName::ValOod,
        SplitName::TestIn,
        SplitName::TestOod,
    ];
}

/// Train / validation / test partitions of a labelled corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<EncodedSequence>,
    pub val_in: Vec<EncodedSequence>,
    pub val_ood: Vec<EncodedSequence>,
    pub test_in: Vec<EncodedSequence>,
    pub test_ood: Vec<EncodedSequence>,
}

impl DatasetSplit {
    pub fn part(&self, name: SplitName) -> &[EncodedSequence] {
        match name {
            SplitName::Train => &self.train,
            SplitName::ValIn => &self.val_in,
            SplitName::ValOod => &self.val_ood,
            SplitName::TestIn => &self.test_in,
            SplitName::TestOod => &self.test_ood,
        }
    }

    pub fn part_mut(&mut self, name: SplitName) -> &mut Vec<EncodedSequence> {
        match name {
            SplitName::Train => &mut self.train,
            SplitName::ValIn => &mut self.val_in,
            SplitName::ValOod => &mut self.val_ood,
            SplitName::TestIn => &mut self.test_in,
            SplitName::TestOod => &mut self.test_ood,
        }
    }

    /// Class-disjointness rules: validation OOD classes never appear among
    /// test OOD classes, and no OOD class appears in training.
    pub fn validate(&self) -> Result<(), SeqError> {
        let labels = |v: &[EncodedSequence]| -> BTreeSet<u32> { v.iter().filter_map(|s| s.class_label).collect() };
        let train = labels(&self.train);
        let val_ood = labels(&self.val_ood);
        let test_ood = labels(&self.test_ood);
        if let Some(&c) = val_ood.intersection(&test_ood).next() {
            return Err(SeqError::SplitOverlap(format!(
                "class {c} is in both validation and test OOD sets"
            )));
        }
        if let Some(&c) = train.intersection(&val_ood.union(&test_ood).copied().collect()).next() {
            return Err(SeqError::SplitOverlap(format!(
                "OOD class {c} also appears in the training set"
            )));
        }
        Ok(())
    }

    pub fn write_manifest<W: Write>(&self, mut out: W, alphabet: &Alphabet) -> Result<(), SeqError> {
        for name in SplitName::ALL {
            for seq in self.part(name) {
                let rec = ManifestRecord {
                    id: seq.id.clone(),
                    class: seq.class_label,
                    origin: seq.origin,
                    split: name,
                    sequence: alphabet.decode(&seq.symbols),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_manifest<R: BufRead>(reader: R, alphabet: &Alphabet) -> Result<Self, SeqError> {
        let mut split = DatasetSplit::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| SeqError::Manifest {
                line: i + 1,
                reason: e.to_string(),
            })?;
            let symbols = alphabet
                .encode(rec.sequence.as_bytes())
                .map_err(|e| SeqError::Manifest {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            if symbols.is_empty() {
                return Err(SeqError::EmptySequence(rec.id));
            }
            split.part_mut(rec.split).push(EncodedSequence {
                id: rec.id,
                class_label: rec.class,
                origin: rec.origin,
                symbols,
            });
        }
        split.validate()?;
        Ok(split)
    }
}

/// One line of a JSON-lines dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub class: Option<u32>,
    pub origin: Origin,
    pub split: SplitName,
    pub sequence: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(id: &str, label: u32, origin: Origin) -> EncodedSequence {
        EncodedSequence::new(id, vec![0, 1, 2, 3]).with_label(label, origin)
    }

    #[test]
    fn overlap_detection() {
        let mut split = DatasetSplit {
            train: vec![seq("a", 0, Origin::InDistribution)],
            val_ood: vec![seq("b", 5, Origin::Ood)],
            test_ood: vec![seq("c", 6, Origin::Ood)],
            ..Default::default()
        };
        assert!(split.validate().is_ok());
        split.test_ood.push(seq("d", 5, Origin::Ood));
        assert!(split.validate().is_err());
        split.test_ood.pop();
        split.train.push(seq("e", 6, Origin::InDistribution));
        assert!(split.validate().is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let a = Alphabet::dna();
        let split = DatasetSplit {
            train: vec![seq("a", 0, Origin::InDistribution)],
            test_ood: vec![seq("c", 6, Origin::Ood)],
            ..Default::default()
        };
        let mut buf = Vec::new();
        split.write_manifest(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains(r#""origin":"in_distribution""#));
        assert_eq!(DatasetSplit::read_manifest(buf.as_slice(), &a).unwrap(), split);
    }

    #[test]
    fn corrupt_manifest_line_reported() {
        let a = Alphabet::dna();
        let bad = b"{\"id\":\"x\",\"class\":1,\"origin\":\"ood\",\"split\":\"train\",\"sequence\":\"ACXT\"}\n";
        assert!(matches!(
            DatasetSplit::read_manifest(&bad[..], &a),
            Err(SeqError::Manifest { line: 1, .. })
        ));
    }
}
