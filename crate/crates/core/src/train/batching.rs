use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PeptideRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchStrategy {
    Random,
    /// Group similar lengths so pairs cannot be matched on length alone.
    LengthSorted,
}

impl BatchStrategy {
    pub fn label(self) -> &'static str {
        match self {
            BatchStrategy::Random => "random",
            BatchStrategy::LengthSorted => "sorted",
        }
    }
}

/// Index batches over `(id, length)` pairs. The random strategy shuffles
/// with `rng`; the sorted strategy ignores it. The final short batch is kept.
pub fn batch_indices<R: Rng + ?Sized>(
    keys: &[(&str, usize)],
    batch_size: usize,
    strategy: BatchStrategy,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..keys.len()).collect();
    match strategy {
        BatchStrategy::Random => order.shuffle(rng),
        BatchStrategy::LengthSorted => order.sort_by(|&a, &b| {
            keys[a]
                .1
                .cmp(&keys[b].1)
                .then_with(|| keys[a].0.cmp(keys[b].0))
        }),
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn make_batches(
    records: &[PeptideRecord],
    batch_size: usize,
    strategy: BatchStrategy,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    let keys: Vec<(&str, usize)> = records.iter().map(|r| (r.id.as_str(), r.len())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = batch_indices(&keys, batch_size, strategy, &mut rng)?;
    Ok(batches
        .into_iter()
        .map(|b| b.into_iter().map(|i| records[i].id.clone()).collect())
        .collect())
}
