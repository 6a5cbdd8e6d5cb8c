//! FASTA reading and writing.
//!
//! The parser is line-wrap agnostic; the writer wraps at [`LINE_WIDTH`].

use std::io::Write;

use crate::error::{Error, Result};
use crate::seqdata::AminoAcidSequence;

pub const LINE_WIDTH: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub header: String,
    pub sequence: AminoAcidSequence,
}

impl FastaRecord {
    pub fn new(header: impl Into<String>, sequence: AminoAcidSequence) -> Self {
        Self { header: header.into(), sequence }
    }

    /// First whitespace-delimited word of the header.
    pub fn id(&self) -> &str {
        self.header.split_whitespace().next().unwrap_or("")
    }
}

/// Records rejected by [`parse_fasta_lenient`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub header: String,
    pub reason: String,
}

struct RawRecord {
    header: String,
    residues: Vec<u8>,
}

fn split_records(bytes: &[u8]) -> Result<Vec<RawRecord>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(format!("not UTF-8: {e}")))?;
    let mut records: Vec<RawRecord> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            records.push(RawRecord { header: header.trim().to_string(), residues: Vec::new() });
        } else if line.trim().is_empty() {
            continue;
        } else {
            let rec = records.last_mut().ok_or_else(|| {
                Error::Format(format!("line {}: sequence data before first '>' header", lineno + 1))
            })?;
            rec.residues.extend(line.bytes().filter(|b| !b.is_ascii_whitespace()));
        }
    }
    for rec in &records {
        if rec.residues.is_empty() {
            return Err(Error::Format(format!("record '{}' is empty", rec.header)));
        }
    }
    Ok(records)
}

/// Parse FASTA text; every residue must be one of the 20 standard symbols.
pub fn parse_fasta(bytes: &[u8]) -> Result<Vec<FastaRecord>> {
    split_records(bytes)?
        .into_iter()
        .map(|r| {
            let sequence = AminoAcidSequence::from_bytes(&r.residues, &r.header)?;
            Ok(FastaRecord { header: r.header, sequence })
        })
        .collect()
}

/// Like [`parse_fasta`] but drops records containing non-standard residues
/// (X, U, B, Z, ...) instead of failing. Structural problems are still errors.
pub fn parse_fasta_lenient(bytes: &[u8]) -> Result<(Vec<FastaRecord>, Vec<Rejected>)> {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for r in split_records(bytes)? {
        match AminoAcidSequence::from_bytes(&r.residues, &r.header) {
            Ok(sequence) => kept.push(FastaRecord { header: r.header, sequence }),
            Err(e) => rejected.push(Rejected { header: r.header, reason: e.to_string() }),
        }
    }
    Ok((kept, rejected))
}

pub fn write_fasta<W: Write>(mut out: W, records: &[FastaRecord]) -> Result<()> {
    for rec in records {
        writeln!(out, ">{}", rec.header)?;
        for chunk in rec.sequence.as_bytes().chunks(LINE_WIDTH) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn to_fasta_string(records: &[FastaRecord]) -> String {
    let mut buf = Vec::new();
    write_fasta(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii")
}

pub fn read_fasta_file(path: &std::path::Path) -> Result<Vec<FastaRecord>> {
    parse_fasta(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_record() {
        let recs = parse_fasta(b">x\nGGA\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].header, "x");
        assert_eq!(recs[0].sequence.as_str(), "GGA");
    }

    #[test]
    fn multiline_join() {
        let recs = parse_fasta(b">x\nGG\nA\n>y\nAAA\n").unwrap();
        let seqs: Vec<_> = recs.iter().map(|r| r.sequence.as_str()).collect();
        assert_eq!(seqs, ["GGA", "AAA"]);
    }

    #[test]
    fn invalid_symbol_position() {
        match parse_fasta(b">x\nGGZ\n") {
            Err(Error::Validation { position: 3, ref record, .. }) if record == "x" => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_record_is_format_error() {
        assert!(matches!(parse_fasta(b">x\n>y\nAA\n"), Err(Error::Format(_))));
        assert!(matches!(parse_fasta(b"GGA\n"), Err(Error::Format(_))));
    }

    #[test]
    fn crlf_and_blank_lines() {
        let recs = parse_fasta(b">x desc\r\nGG\r\n\r\nA\r\n").unwrap();
        assert_eq!(recs[0].sequence.as_str(), "GGA");
        assert_eq!(recs[0].id(), "x");
    }

    #[test]
    fn lenient_drops_nonstandard() {
        let (kept, rejected) = parse_fasta_lenient(b">a\nGGA\n>b\nGXA\n").unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].header, "b");
    }

    #[test]
    fn writer_wraps_at_sixty() {
        let seq = AminoAcidSequence::new(&"G".repeat(130)).unwrap();
        let text = to_fasta_string(&[FastaRecord::new("x", seq)]);
        let lens: Vec<usize> = text.lines().skip(1).map(str::len).collect();
        assert_eq!(lens, [60, 60, 10]);
    }

    proptest! {
        #[test]
        fn round_trip(seqs in proptest::collection::vec("[ARNDCQEGHILKMFPSTWYV]{1,200}", 1..6)) {
            let records: Vec<FastaRecord> = seqs
                .iter()
                .enumerate()
                .map(|(i, s)| FastaRecord::new(format!("r{i}"), AminoAcidSequence::new(s).unwrap()))
                .collect();
            let text = to_fasta_string(&records);
            let back = parse_fasta(text.as_bytes()).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
