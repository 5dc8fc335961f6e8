use serde::{Deserialize, Serialize};

use super::SeqError;

/// Ordered symbol set; a symbol's position is its integer code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<u8>,
    lookup: [Option<u8>; 256],
}

impl Alphabet {
    pub fn new(symbols: &[u8]) -> Result<Self, SeqError> {
        if symbols.len() < 2 || symbols.len() > 255 {
            return Err(SeqError::InvalidAlphabet(format!(
                "alphabet needs 2..=255 symbols, got {}",
                symbols.len()
            )));
        }
        let mut lookup = [None; 256];
        for (i, &s) in symbols.iter().enumerate() {
            if lookup[s as usize].is_some() {
                return Err(SeqError::InvalidAlphabet(format!("duplicate symbol {:?}", s as char)));
            }
            lookup[s as usize] = Some(i as u8);
        }
        Ok(Self {
            symbols: symbols.to_vec(),
            lookup,
        })
    }

    /// `A, C, G, T`.
    pub fn dna() -> Self {
        Self::new(b"ACGT").expect("DNA alphabet is valid")
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn code(&self, symbol: u8) -> Option<u8> {
        self.lookup[symbol as usize]
    }

    pub fn symbol(&self, code: u8) -> u8 {
        self.symbols[code as usize]
    }

    pub fn is_dna(&self) -> bool {
        self.symbols == b"ACGT"
    }

    pub fn encode(&self, raw: &[u8]) -> Result<Vec<u8>, SeqError> {
        raw.iter()
            .enumerate()
            .map(|(pos, &b)| self.code(b).ok_or(SeqError::UnknownSymbol { symbol: b as char, pos }))
            .collect()
    }

    pub fn decode(&self, codes: &[u8]) -> String {
        codes.iter().map(|&c| self.symbol(c) as char).collect()
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::dna()
    }
}

impl TryFrom<String> for Alphabet {
    type Error = SeqError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value.as_bytes())
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> Self {
        String::from_utf8_lossy(&a.symbols).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dna_roundtrip() {
        let a = Alphabet::dna();
        let codes = a.encode(b"GATTACA").unwrap();
        assert_eq!(codes, vec![2, 0, 3, 3, 0, 1, 0]);
        assert_eq!(a.decode(&codes), "GATTACA");
        assert!(a.encode(b"ACN").is_err());
    }

    #[test]
    fn rejects_duplicates_and_tiny() {
        assert!(Alphabet::new(b"AA").is_err());
        assert!(Alphabet::new(b"A").is_err());
    }
}
