//! Fixed-column PDB `ATOM` parsing, reduced to one Cα per residue per chain.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};

use super::record::{three_to_one, PeptideRecord, Source, Split};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<PeptideRecord>,
    /// Chains that had ATOM lines but no usable Cα trace.
    pub skipped_chains: Vec<String>,
}

#[derive(Default)]
struct ChainAcc {
    sequence: String,
    coords: Vec<[f64; 3]>,
    bfactors: Vec<f64>,
    seen: HashSet<(i32, char)>,
}

fn column(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive columns; short lines yield a truncated/empty slice.
    let bytes = line.as_bytes();
    let s = (start - 1).min(bytes.len());
    let e = end.min(bytes.len());
    line.get(s..e).unwrap_or("")
}

fn number<T: std::str::FromStr>(
    line: &str,
    start: usize,
    end: usize,
    what: &str,
    line_no: usize,
) -> Result<T> {
    let field = column(line, start, end).trim();
    field.parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("bad {what} field `{field}` in columns {start}-{end}"),
    })
}

/// Parse PDB text into one record per chain.
///
/// Only `ATOM` records with atom name `CA` are used, and parsing stops at the
/// first `ENDMDL`. A residue is keyed by (sequence number, insertion code); a
/// repeated key (alternate locations) keeps the first Cα seen. For predicted
/// structures the B-factor column carries per-residue pLDDT. Record ids are
/// `{name}_{chain}`.
pub fn parse_structure_file(bytes: &[u8], name: &str, source: Source) -> Result<ParseOutcome> {
    let text = String::from_utf8_lossy(bytes);
    let mut chains: BTreeMap<usize, (char, ChainAcc)> = BTreeMap::new();
    let mut order: Vec<char> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM") {
            continue;
        }
        if line.len() < 54 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("ATOM record has {} columns, need at least 54", line.len()),
            });
        }
        let chain_id = column(line, 22, 22).chars().next().unwrap_or(' ');
        let slot = match order.iter().position(|&c| c == chain_id) {
            Some(i) => i,
            None => {
                order.push(chain_id);
                chains.insert(order.len() - 1, (chain_id, ChainAcc::default()));
                order.len() - 1
            }
        };
        if column(line, 13, 16).trim() != "CA" {
            continue;
        }
        let res_seq: i32 = number(line, 23, 26, "residue number", line_no)?;
        let icode = column(line, 27, 27).chars().next().unwrap_or(' ');
        let x: f64 = number(line, 31, 38, "x", line_no)?;
        let y: f64 = number(line, 39, 46, "y", line_no)?;
        let z: f64 = number(line, 47, 54, "z", line_no)?;
        let bfactor = match source {
            Source::Predicted => Some(number::<f64>(line, 61, 66, "B-factor", line_no)?),
            Source::Experimental => None,
        };
        let acc = &mut chains.get_mut(&slot).expect("slot exists").1;
        if !acc.seen.insert((res_seq, icode)) {
            continue;
        }
        acc.sequence.push(three_to_one(column(line, 18, 20)));
        acc.coords.push([x, y, z]);
        if let Some(b) = bfactor {
            acc.bfactors.push(b);
        }
    }

    let mut outcome = ParseOutcome::default();
    for (_, (chain_id, acc)) in chains {
        let label = if chain_id == ' ' {
            "_".to_string()
        } else {
            chain_id.to_string()
        };
        let id = format!("{name}_{label}");
        if acc.coords.is_empty() {
            outcome.skipped_chains.push(id);
            continue;
        }
        let record = PeptideRecord {
            id: id.clone(),
            sequence: acc.sequence,
            coords: acc.coords,
            plddt: (source == Source::Predicted).then_some(acc.bfactors),
            labels: BTreeMap::new(),
            split: Split::Train,
            source,
        };
        // Chains violating record invariants (stacked Cα, pLDDT out of range)
        // are reported as skipped rather than aborting the whole file.
        if record.validate().is_err() {
            outcome.skipped_chains.push(id);
            continue;
        }
        outcome.records.push(record);
    }
    Ok(outcome)
}

#[cfg(test)]
fn atom_line(
    serial: usize,
    atom: &str,
    res: &str,
    chain: char,
    seq: i32,
    xyz: [f64; 3],
    b: f64,
) -> String {
    format!(
        "ATOM  {serial:>5} {atom:<4} {res:>3} {chain}{seq:>4}    {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}           C",
        xyz[0], xyz[1], xyz[2], 1.0, b
    )
}
