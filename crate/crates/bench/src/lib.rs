//! Benchmark fixtures shared by the Criterion targets.

use pepalign_core::ingest::PeptideRecord;
use pepalign_core::synthetic::{generate, SyntheticConfig};

/// `count` synthetic peptides of exactly `len` residues.
pub fn peptides(count: usize, len: usize, seed: u64) -> Vec<PeptideRecord> {
    generate(&SyntheticConfig {
        train: count,
        test: 0,
        min_len: len,
        max_len: len,
        seed,
        ..SyntheticConfig::default()
    })
    .expect("valid synthetic config")
}
