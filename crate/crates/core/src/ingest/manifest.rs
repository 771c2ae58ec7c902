//! JSONL manifest: one [`PeptideRecord`] object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::record::PeptideRecord;

pub fn write_records<W: Write>(records: &[PeptideRecord], mut out: W) -> Result<()> {
    for r in records {
        r.validate()?;
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<manifest>", e))?;
    }
    out.flush().map_err(|e| Error::io("<manifest>", e))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<PeptideRecord>> {
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PeptideRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("invalid JSON: {e}"),
        })?;
        record.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(records: &[PeptideRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, BufWriter::new(file))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<PeptideRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::record_of_len;

    #[test]
    fn round_trip_with_labels() {
        let mut r = record_of_len("p1", 3);
        r.labels.insert("cpp".into(), 1.0);
        let mut buf = Vec::new();
        write_records(std::slice::from_ref(&r), &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn order_is_preserved() {
        let recs: Vec<_> = (1..=3)
            .map(|n| record_of_len(&format!("r{n}"), n))
            .collect();
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        let ids: Vec<_> = back.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["r1", "r2", "r3"]);
    }

    #[test]
    fn line_format_matches_schema() {
        let mut buf = Vec::new();
        write_records(&[record_of_len("p", 1)], &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line.trim_end(),
            r#"{"id":"p","sequence":"A","coords":[[0.0,0.0,0.0]],"plddt":null,"labels":{},"split":"train","source":"experimental"}"#
        );
    }

    #[test]
    fn coords_length_mismatch_rejected() {
        let line = r#"{"id":"p","sequence":"AA","coords":[[0,0,0]],"plddt":null,"labels":{},"split":"train","source":"experimental"}"#;
        let err = read_records(line.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1") && msg.contains("coords"), "{msg}");
    }

    #[test]
    fn invalid_json_reports_line() {
        let good = r#"{"id":"p","sequence":"A","coords":[[0,0,0]],"plddt":null,"labels":{},"split":"test","source":"predicted"}"#;
        let text = format!("{good}\n{{not json\n");
        match read_records(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
