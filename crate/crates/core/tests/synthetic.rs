use protograde::dataset::{
    gen_synthetic, Payload, Split, SplitCounts, SynthParams, ICNALE_TEST_COUNTS, ICNALE_TRAIN_COUNTS,
    ICNALE_VALID_COUNTS,
};
use protograde::linalg::norm;

fn level_counts(params: &SynthParams, split: Split) -> Vec<usize> {
    let ds = gen_synthetic(params).unwrap();
    let mut counts = vec![0; ds.levels()];
    for r in ds.split(split) {
        counts[r.label] += 1;
    }
    counts
}

#[test]
fn default_counts_are_quartered_icnale_counts() {
    let p = SynthParams::default();
    assert_eq!(level_counts(&p, Split::Train), [75, 198, 420, 147, 135]);
    assert_eq!(level_counts(&p, Split::Valid), [4, 11, 24, 8, 8]);
    assert_eq!(level_counts(&p, Split::Test), [4, 11, 23, 8, 8]);

    let tenth = SplitCounts::icnale_scaled(10.0);
    assert_eq!(tenth.train, [30, 79, 168, 59, 54]);
}

#[test]
fn icnale_frequencies() {
    let total: usize = ICNALE_TRAIN_COUNTS.iter().sum();
    assert_eq!(total, 3898);
    let expected = [0.07671, 0.20318, 0.43125, 0.15033, 0.13853];
    for (c, e) in ICNALE_TRAIN_COUNTS.iter().zip(expected) {
        assert!((*c as f64 / total as f64 - e).abs() < 1e-5);
    }
    assert_eq!(ICNALE_VALID_COUNTS.iter().sum::<usize>(), 217);
    assert_eq!(ICNALE_TEST_COUNTS.iter().sum::<usize>(), 217);
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let a = gen_synthetic(&SynthParams::default()).unwrap();
    let b = gen_synthetic(&SynthParams::default()).unwrap();
    assert_eq!(a, b);
    let c = gen_synthetic(&SynthParams {
        seed: 7,
        ..SynthParams::default()
    })
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn vanishing_noise_collapses_onto_level_centres() {
    let p = SynthParams {
        noise_sigma: 1e-14,
        ..SynthParams::default()
    };
    let ds = gen_synthetic(&p).unwrap();
    // The shared direction is recoverable from any record of the last level.
    let top = ds.records().iter().find(|r| r.label == 4).unwrap();
    let Payload::Vec(v) = &top.payload else { panic!("pooled payload expected") };
    let u: Vec<f64> = v.iter().map(|x| x / p.gap_positions[4]).collect();
    assert!((norm(&u) - 1.0).abs() < 1e-9);
    for r in ds.records() {
        let Payload::Vec(v) = &r.payload else { panic!("pooled payload expected") };
        let g = p.gap_positions[r.label];
        for (x, ui) in v.iter().zip(&u) {
            assert!((x - g * ui).abs() < 1e-9);
        }
    }
}

#[test]
fn records_carry_ids_groups_and_split() {
    let ds = gen_synthetic(&SynthParams::default()).unwrap();
    let first = ds.split(Split::Valid).next().unwrap();
    assert_eq!(first.id, "syn-valid-00000");
    assert!(ds.records().iter().all(|r| r.group.is_some()));
    let mut ids: Vec<&str> = ds.records().iter().map(|r| r.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), ds.len());
}

#[test]
fn invalid_parameters_rejected() {
    let bad_gaps = SynthParams {
        gap_positions: vec![0.0, 1.0, 1.0, 2.0, 3.0],
        ..SynthParams::default()
    };
    assert!(gen_synthetic(&bad_gaps).is_err());
    let bad_sigma = SynthParams {
        noise_sigma: 0.0,
        ..SynthParams::default()
    };
    assert!(gen_synthetic(&bad_sigma).is_err());
    let short_counts = SynthParams {
        counts: SplitCounts {
            train: vec![1, 2],
            ..SplitCounts::icnale_scaled(4.0)
        },
        ..SynthParams::default()
    };
    assert!(gen_synthetic(&short_counts).is_err());
}
