use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::record::PeptideRecord;

pub const DEFAULT_THRESHOLDS: [f64; 2] = [90.0, 80.0];
/// Name of the confidence-agnostic uniform sample bucket.
pub const RANDOM_BUCKET: &str = "af50w";

pub fn mean_plddt(record: &PeptideRecord) -> Result<f64> {
    match &record.plddt {
        Some(p) if !p.is_empty() => Ok(p.iter().sum::<f64>() / p.len() as f64),
        _ => Err(Error::Data(format!(
            "record {}: no confidence data",
            record.id
        ))),
    }
}

pub fn bucket_name(threshold: f64) -> String {
    if threshold.fract() == 0.0 {
        format!("af{}", threshold as i64)
    } else {
        format!("af{threshold}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBuckets {
    pub thresholds: Vec<f64>,
    pub buckets: BTreeMap<String, Vec<String>>,
}

/// Threshold buckets use a strict `mean > t`. When `sample_size` is given, an
/// extra [`RANDOM_BUCKET`] holds a seeded uniform sample (without replacement)
/// of all records regardless of confidence, clamped to the record count.
/// Every bucket lists ids in input order.
pub fn bucket_by_confidence(
    records: &[PeptideRecord],
    thresholds: &[f64],
    sample_size: Option<usize>,
    seed: u64,
) -> Result<ConfidenceBuckets> {
    if thresholds.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Config(format!(
            "thresholds must be strictly descending, got {thresholds:?}"
        )));
    }
    let means = records.iter().map(mean_plddt).collect::<Result<Vec<_>>>()?;
    let mut buckets = BTreeMap::new();
    for &t in thresholds {
        let ids = records
            .iter()
            .zip(&means)
            .filter(|(_, &m)| m > t)
            .map(|(r, _)| r.id.clone())
            .collect();
        buckets.insert(bucket_name(t), ids);
    }
    if let Some(k) = sample_size {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked =
            rand::seq::index::sample(&mut rng, records.len(), k.min(records.len())).into_vec();
        picked.sort_unstable();
        buckets.insert(
            RANDOM_BUCKET.to_string(),
            picked.into_iter().map(|i| records[i].id.clone()).collect(),
        );
    }
    Ok(ConfidenceBuckets {
        thresholds: thresholds.to_vec(),
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::record_of_len;

    fn with_plddt(id: &str, values: Vec<f64>) -> PeptideRecord {
        let mut r = record_of_len(id, values.len());
        r.plddt = Some(values);
        r
    }

    #[test]
    fn means() {
        assert_eq!(
            mean_plddt(&with_plddt("a", vec![80.0, 100.0])).unwrap(),
            90.0
        );
        assert_eq!(mean_plddt(&with_plddt("a", vec![70.0; 3])).unwrap(), 70.0);
        let m = mean_plddt(&with_plddt("a", vec![91.2, 88.8, 95.4, 92.6])).unwrap();
        assert!((m - 92.0).abs() < 1e-12);
    }

    #[test]
    fn missing_plddt_is_an_error() {
        let err = mean_plddt(&record_of_len("nope", 2)).unwrap_err();
        assert!(err.to_string().contains("no confidence data"));
    }

    #[test]
    fn thresholds_are_strict_and_nested() {
        let recs = vec![
            with_plddt("a", vec![92.5]),
            with_plddt("b", vec![85.0]),
            with_plddt("c", vec![60.0]),
            with_plddt("d", vec![90.0]),
        ];
        let b = bucket_by_confidence(&recs, &DEFAULT_THRESHOLDS, None, 0).unwrap();
        assert_eq!(b.buckets["af90"], vec!["a"]);
        assert_eq!(b.buckets["af80"], vec!["a", "b", "d"]);
        assert!(!b.buckets.contains_key(RANDOM_BUCKET));
    }

    #[test]
    fn random_bucket_is_seeded() {
        let recs: Vec<_> = (0..10)
            .map(|i| with_plddt(&format!("r{i}"), vec![50.0 + i as f64]))
            .collect();
        let a = bucket_by_confidence(&recs, &DEFAULT_THRESHOLDS, Some(3), 11).unwrap();
        let b = bucket_by_confidence(&recs, &DEFAULT_THRESHOLDS, Some(3), 11).unwrap();
        assert_eq!(a.buckets[RANDOM_BUCKET].len(), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn error_names_record_without_plddt() {
        let recs = vec![with_plddt("a", vec![99.0]), record_of_len("bare", 2)];
        let err = bucket_by_confidence(&recs, &DEFAULT_THRESHOLDS, None, 0).unwrap_err();
        assert!(err.to_string().contains("bare"));
    }

    #[test]
    fn ascending_thresholds_rejected() {
        assert!(bucket_by_confidence(&[], &[80.0, 90.0], None, 0).is_err());
    }
}
