use std::collections::BTreeMap;

use pepalign_core::graph::GraphConfig;
use pepalign_core::ingest::{read_records, write_records, PeptideRecord, Source, Split, ALPHABET};
use pepalign_core::model::ModelConfig;
use pepalign_core::nn::Parameters;
use pepalign_core::synthetic::{generate, SyntheticConfig};
use pepalign_core::train::{
    decode_container, encode_container, load_checkpoint, pretrain, save_checkpoint, TrainConfig,
};
use pepalign_core::ContainerError;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3..1e3f64,
        prop::num::f64::NORMAL.prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
    ]
}

fn record() -> impl Strategy<Value = PeptideRecord> {
    (1usize..50).prop_flat_map(|n| {
        (
            "[a-zA-Z0-9_|:.-]{1,16}",
            prop::collection::vec(prop::sample::select(ALPHABET.to_vec()), n),
            prop::collection::vec([finite(), finite(), finite()], n),
            prop::option::of(prop::collection::vec(0.0..=100.0f64, n)),
            prop::collection::btree_map("[a-z]{1,8}", finite(), 0..4),
            prop::sample::select(vec![Split::Train, Split::Valid, Split::Test]),
            prop::sample::select(vec![Source::Experimental, Source::Predicted]),
        )
            .prop_map(
                |(id, seq, coords, plddt, labels, split, source)| PeptideRecord {
                    id,
                    sequence: seq.into_iter().map(char::from).collect(),
                    coords,
                    plddt,
                    labels,
                    split,
                    source,
                },
            )
            .prop_filter("valid", |r| r.validate().is_ok())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn manifest_round_trip_is_identity(records in prop::collection::vec(record(), 1..4)) {
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &records);
        // Bit-level, including signed zeros.
        for (a, b) in back.iter().zip(&records) {
            for (p, q) in a.coords.iter().flatten().zip(b.coords.iter().flatten()) {
                prop_assert_eq!(p.to_bits(), q.to_bits());
            }
        }
        let mut again = Vec::new();
        write_records(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn container_round_trip_is_bit_exact(
        tensors in prop::collection::vec(("[a-z.]{1,12}", prop::collection::vec(finite(), 0..20)), 0..6)
    ) {
        let mut seen = BTreeMap::new();
        let entries: Vec<(String, pepalign_core::Tensor)> = tensors
            .into_iter()
            .filter(|(name, _)| seen.insert(name.clone(), ()).is_none())
            .map(|(name, data)| {
                let n = data.len();
                (name, pepalign_core::Tensor::from_vec(vec![n], data).unwrap())
            })
            .collect();
        let meta = serde_json::json!({"kind": "test"});
        let bytes = encode_container(&meta, &entries).unwrap();
        let (meta_back, back) = decode_container(&bytes).unwrap();
        prop_assert_eq!(meta_back, meta);
        prop_assert_eq!(back.len(), entries.len());
        for ((n1, t1), (n2, t2)) in entries.iter().zip(&back) {
            prop_assert_eq!(n1, n2);
            let bits: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let back_bits: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, back_bits);
        }
    }
}

#[test]
fn manifest_rejects_bad_line_with_its_number() {
    let text = "{\"id\":\"a\",\"sequence\":\"AC\",\"coords\":[[0,0,0],[3.8,0,0]],\"plddt\":null,\"source\":\"predicted\"}\nnot json\n";
    let err = read_records(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn container_rejects_foreign_bytes() {
    let err = decode_container(b"GIF89a not a checkpoint at all").unwrap_err();
    assert!(matches!(err, ContainerError::BadMagic), "{err}");
}

fn tiny_train(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        model: ModelConfig {
            hidden_dim: 8,
            structure_layers: 1,
            sequence_blocks: 1,
            heads: 2,
            ff_mult: 2,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn checkpoint_file_round_trip_is_bit_exact() {
    let records = generate(&SyntheticConfig {
        train: 32,
        test: 0,
        seed: 4,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let out = pretrain(&records, &tiny_train(1, 9), &GraphConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&out.checkpoint, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.step, out.checkpoint.step);
    assert_eq!(back.train, out.checkpoint.train);
    let a = out.checkpoint.params.named_tensors();
    let b = back.params.named_tensors();
    assert_eq!(a.len(), b.len());
    for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(
            ta.data()
                .iter()
                .zip(tb.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()),
            "{na}"
        );
    }
    // Re-saving the loaded checkpoint reproduces the file byte for byte.
    let path2 = dir.path().join("again.ckpt");
    save_checkpoint(&back, &path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}
