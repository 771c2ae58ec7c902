use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residue vocabulary: the 20 standard amino acids plus `X` for anything else.
pub const ALPHABET: &[u8; 21] = b"ACDEFGHIKLMNPQRSTVWYX";
pub const VOCAB_SIZE: usize = 21;
pub const UNKNOWN_RESIDUE: char = 'X';

pub fn residue_index(code: char) -> Option<usize> {
    ALPHABET.iter().position(|&c| c as char == code)
}

/// Map a three-letter residue name onto the one-letter vocabulary.
pub fn three_to_one(name: &str) -> char {
    match name.trim().to_ascii_uppercase().as_str() {
        "ALA" => 'A',
        "CYS" => 'C',
        "ASP" => 'D',
        "GLU" => 'E',
        "PHE" => 'F',
        "GLY" => 'G',
        "HIS" => 'H',
        "ILE" => 'I',
        "LYS" => 'K',
        "LEU" => 'L',
        "MET" => 'M',
        "ASN" => 'N',
        "PRO" => 'P',
        "GLN" => 'Q',
        "ARG" => 'R',
        "SER" => 'S',
        "THR" => 'T',
        "VAL" => 'V',
        "TRP" => 'W',
        "TYR" => 'Y',
        _ => UNKNOWN_RESIDUE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Experimental,
    Predicted,
}

impl std::str::FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experimental" => Ok(Source::Experimental),
            "predicted" => Ok(Source::Predicted),
            other => Err(Error::Config(format!(
                "unknown source `{other}` (expected experimental|predicted)"
            ))),
        }
    }
}

/// One peptide chain: sequence, one Cα per residue, optional confidence.
///
/// Field layout is also the manifest line layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeptideRecord {
    pub id: String,
    pub sequence: String,
    pub coords: Vec<[f64; 3]>,
    pub plddt: Option<Vec<f64>>,
    #[serde(default)]
    pub labels: BTreeMap<String, f64>,
    #[serde(default)]
    pub split: Split,
    pub source: Source,
}

impl PeptideRecord {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Token indices into [`ALPHABET`]. Errors on codes outside the vocabulary.
    pub fn tokens(&self) -> Result<Vec<usize>> {
        self.sequence
            .chars()
            .map(|c| {
                residue_index(c).ok_or_else(|| {
                    self.field_error("sequence", format!("unknown residue code `{c}`"))
                })
            })
            .collect()
    }

    fn field_error(&self, field: &'static str, message: String) -> Error {
        Error::Record {
            id: self.id.clone(),
            field,
            message,
        }
    }

    /// Check the record invariants, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        let n = self.sequence.chars().count();
        if self.id.is_empty() {
            return Err(self.field_error("id", "empty id".into()));
        }
        if n == 0 {
            return Err(self.field_error("sequence", "empty sequence".into()));
        }
        self.tokens()?;
        if self.coords.len() != n {
            return Err(self.field_error(
                "coords",
                format!("{} rows for a sequence of length {n}", self.coords.len()),
            ));
        }
        if let Some(i) = self
            .coords
            .iter()
            .position(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(self.field_error("coords", format!("non-finite coordinate at residue {i}")));
        }
        if let Some(i) = self.coords.windows(2).position(|w| w[0] == w[1]) {
            return Err(self.field_error(
                "coords",
                format!("residues {i} and {} share a position", i + 1),
            ));
        }
        if let Some(p) = &self.plddt {
            if p.len() != n {
                return Err(self.field_error(
                    "plddt",
                    format!("{} values for a sequence of length {n}", p.len()),
                ));
            }
            if let Some(v) = p.iter().find(|v| !(0.0..=100.0).contains(*v)) {
                return Err(self.field_error("plddt", format!("value {v} outside [0, 100]")));
            }
        }
        if let Some((k, _)) = self.labels.iter().find(|(_, v)| !v.is_finite()) {
            return Err(self.field_error("labels", format!("label `{k}` is not finite")));
        }
        Ok(())
    }
}

/// Keep records strictly shorter than `max_len`, preserving order.
pub fn filter_peptides(records: Vec<PeptideRecord>, max_len: usize) -> Result<Vec<PeptideRecord>> {
    if max_len < 2 {
        return Err(Error::Config(format!(
            "max_len must be at least 2, got {max_len}"
        )));
    }
    Ok(records.into_iter().filter(|r| r.len() < max_len).collect())
}

#[cfg(test)]
pub(crate) fn record_of_len(id: &str, n: usize) -> PeptideRecord {
    PeptideRecord {
        id: id.to_string(),
        sequence: "A".repeat(n),
        coords: (0..n).map(|i| [3.8 * i as f64, 0.0, 0.0]).collect(),
        plddt: None,
        labels: BTreeMap::new(),
        split: Split::Train,
        source: Source::Experimental,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_is_strict_at_max_len() {
        let recs = vec![
            record_of_len("a", 49),
            record_of_len("b", 50),
            record_of_len("c", 51),
        ];
        let kept = filter_peptides(recs, 50).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
    }

    #[test]
    fn filter_empty_and_short() {
        assert!(filter_peptides(vec![], 50).unwrap().is_empty());
        let kept = filter_peptides(vec![record_of_len("a", 1), record_of_len("b", 2)], 50).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn filter_is_idempotent() {
        let recs: Vec<_> = (1..70).map(|n| record_of_len(&n.to_string(), n)).collect();
        let once = filter_peptides(recs, 50).unwrap();
        let twice = filter_peptides(once.clone(), 50).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn validate_catches_length_mismatch() {
        let mut r = record_of_len("a", 3);
        r.coords.pop();
        match r.validate() {
            Err(Error::Record { field, .. }) => assert_eq!(field, "coords"),
            other => panic!("expected coords error, got {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_repeated_consecutive_positions() {
        let mut r = record_of_len("a", 3);
        r.coords[1] = r.coords[0];
        assert!(r.validate().is_err());
    }

    #[test]
    fn three_letter_mapping() {
        assert_eq!(three_to_one("ALA"), 'A');
        assert_eq!(three_to_one("XYZ"), 'X');
        assert_eq!(three_to_one("MSE"), 'X');
    }
}
