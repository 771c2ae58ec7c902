//! Structure parsing, peptide filtering, confidence bucketing and the
//! JSONL manifest.

mod confidence;
mod manifest;
mod pdb;
mod record;

pub use confidence::{
    bucket_by_confidence, bucket_name, mean_plddt, ConfidenceBuckets, DEFAULT_THRESHOLDS,
    RANDOM_BUCKET,
};
pub use manifest::{read_manifest, read_records, write_manifest, write_records};
pub use pdb::{parse_structure_file, ParseOutcome};
pub use record::{
    filter_peptides, residue_index, three_to_one, PeptideRecord, Source, Split, ALPHABET,
    UNKNOWN_RESIDUE, VOCAB_SIZE,
};

#[cfg(test)]
pub(crate) use record::record_of_len;

pub const DEFAULT_MAX_LEN: usize = 50;
