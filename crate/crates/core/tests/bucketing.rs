use std::collections::BTreeSet;

use pepalign_core::ingest::{
    bucket_by_confidence, PeptideRecord, Source, Split, DEFAULT_THRESHOLDS, RANDOM_BUCKET,
};
use proptest::prelude::*;

/// Three residues whose confidences average exactly to `mean`.
fn with_mean(id: &str, mean: f64) -> PeptideRecord {
    PeptideRecord {
        id: id.into(),
        sequence: "GAG".into(),
        coords: vec![[0.0, 0.0, 0.0], [3.8, 0.0, 0.0], [7.6, 0.0, 0.0]],
        plddt: Some(vec![mean, mean, mean]),
        labels: Default::default(),
        split: Split::Train,
        source: Source::Predicted,
    }
}

fn ids(v: &[String]) -> BTreeSet<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn thresholds_are_strict_and_nested() {
    let means = [79.99, 80.0, 80.01, 85.0, 89.99, 90.0, 90.01, 99.0];
    let records: Vec<_> = means
        .iter()
        .enumerate()
        .map(|(i, &m)| with_mean(&format!("r{i}"), m))
        .collect();
    let b = bucket_by_confidence(&records, &DEFAULT_THRESHOLDS, None, 0).unwrap();
    let af90 = ids(&b.buckets["af90"]);
    let af80 = ids(&b.buckets["af80"]);
    assert_eq!(af90, BTreeSet::from(["r6", "r7"]));
    assert_eq!(af80, BTreeSet::from(["r2", "r3", "r4", "r5", "r6", "r7"]));
    assert!(af90.is_subset(&af80));
    assert!(!af80.contains("r1"), "exactly 80 is excluded");
    assert!(!af90.contains("r5"), "exactly 90 is excluded");
}

#[test]
fn mean_is_over_residues() {
    let mut r = with_mean("mix", 0.0);
    r.plddt = Some(vec![95.0, 95.0, 71.0]); // mean 87
    let b = bucket_by_confidence(&[r], &DEFAULT_THRESHOLDS, None, 0).unwrap();
    assert_eq!(b.buckets["af80"], vec!["mix".to_string()]);
    assert!(b.buckets["af90"].is_empty());
}

#[test]
fn missing_confidence_is_a_data_error() {
    let mut r = with_mean("x", 90.0);
    r.plddt = None;
    let err = bucket_by_confidence(&[r], &DEFAULT_THRESHOLDS, None, 0).unwrap_err();
    assert!(err.to_string().contains('x'), "{err}");
}

proptest! {
    #[test]
    fn nesting_holds_for_any_means(means in prop::collection::vec(0.0..=100.0f64, 0..60), k in 0usize..80, seed in 0u64..1000) {
        let records: Vec<_> = means.iter().enumerate().map(|(i, &m)| with_mean(&format!("r{i}"), m)).collect();
        let b = bucket_by_confidence(&records, &DEFAULT_THRESHOLDS, Some(k), seed).unwrap();
        let af90 = ids(&b.buckets["af90"]);
        let af80 = ids(&b.buckets["af80"]);
        prop_assert!(af90.is_subset(&af80));
        for (r, m) in records.iter().zip(&means) {
            prop_assert_eq!(af80.contains(r.id.as_str()), *m > 80.0);
        }
        let sample = &b.buckets[RANDOM_BUCKET];
        prop_assert_eq!(sample.len(), k.min(records.len()));
        prop_assert_eq!(ids(sample).len(), sample.len());
        let again = bucket_by_confidence(&records, &DEFAULT_THRESHOLDS, Some(k), seed).unwrap();
        prop_assert_eq!(again, b);
    }
}
