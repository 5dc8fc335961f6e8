use std::io::{BufRead, Write};

use super::SeqError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub id: String,
    pub sequence: String,
}

/// Parses FASTA text. Header lines (`>`) are kept verbatim as ids, wrapped
/// sequence lines are joined and upper-cased. Ambiguity codes pass through.
pub fn parse_fasta<R: BufRead>(reader: R) -> Result<Vec<FastaRecord>, SeqError> {
    let mut records: Vec<FastaRecord> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            if let Some(prev) = records.last() {
                if prev.sequence.is_empty() {
                    return Err(SeqError::EmptyRecord(prev.id.clone()));
                }
            }
            records.push(FastaRecord {
                id: header.to_string(),
                sequence: String::new(),
            });
        } else {
            let chunk = line.trim();
            if chunk.is_empty() {
                continue;
            }
            match records.last_mut() {
                Some(rec) => rec.sequence.push_str(&chunk.to_ascii_uppercase()),
                None => return Err(SeqError::DataBeforeHeader { line: lineno + 1 }),
            }
        }
    }
    if let Some(last) = records.last() {
        if last.sequence.is_empty() {
            return Err(SeqError::EmptyRecord(last.id.clone()));
        }
    }
    Ok(records)
}

pub fn parse_fasta_str(text: &str) -> Result<Vec<FastaRecord>, SeqError> {
    parse_fasta(text.as_bytes())
}

/// Writes records with sequence lines wrapped at `width` columns.
pub fn write_fasta<W: Write>(mut out: W, records: &[FastaRecord], width: usize) -> std::io::Result<()> {
    let width = width.max(1);
    for rec in records {
        writeln!(out, ">{}", rec.id)?;
        for chunk in rec.sequence.as_bytes().chunks(width) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
