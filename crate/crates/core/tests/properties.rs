//! Invariants of pooling, heads, weighting and metrics under random inputs.

use proptest::collection::vec;
use proptest::prelude::*;

use protograde::dataset::{class_frequencies, mean_pool, Dataset, EmbeddingRecord, LevelSchema, Payload, Split};
use protograde::linalg::Matrix;
use protograde::loss::{weighted_ce, weights_alpha, weights_inverse, ClassWeights};
use protograde::metrics::{confusion_matrix, macro_metrics, standard_metrics};
use protograde::model::{
    aggregate_similarity, predict, proto_forward, sim_sed, Aggregation, Distribution, Head, HeadKind,
    HeadModel, ModelSpec, PrototypeBank, ProjectionKind, Similarity,
};

const DIM: usize = 4;
const LEVELS: usize = 5;

fn finite(range: f64) -> impl Strategy<Value = f64> {
    -range..range
}

fn nonzero_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(finite(3.0), dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn bank(k: usize) -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    vec(vec(nonzero_vector(DIM), k), LEVELS)
}

fn proto_model(head: HeadKind, aggregation: Aggregation, rows: &[Vec<Vec<f64>>]) -> HeadModel {
    let mut spec = ModelSpec::new(DIM, LEVELS, head);
    spec.projection = ProjectionKind::Identity;
    spec.aggregation = aggregation;
    spec.prototypes_per_level = rows[0].len();
    let mut model = HeadModel::new(&spec, 0).unwrap();
    let mats = rows.iter().map(|r| Matrix::from_rows(r).unwrap()).collect();
    if let Head::Prototypical(p) = &mut model.head {
        p.set_prototypes(PrototypeBank::new(mats).unwrap()).unwrap();
    }
    model
}

fn set_bias(model: &mut HeadModel, bias: f64) {
    if let Head::Prototypical(p) = &mut model.head {
        p.scaling.bias = bias;
    }
}

fn positive_frequencies() -> impl Strategy<Value = Vec<f64>> {
    vec(0.01f64..1.0, 2..8).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    })
}

fn labelled_pairs() -> impl Strategy<Value = Vec<(usize, usize)>> {
    vec((0..LEVELS, 0..LEVELS), 1..100)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mean_pool_is_linear(
        frames in vec(vec(finite(5.0), DIM), 1..6),
        a in finite(3.0),
        c in finite(3.0),
    ) {
        let other: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|v| v * 0.5 - 1.0).collect()).collect();
        let combined: Vec<Vec<f64>> = frames
            .iter()
            .zip(&other)
            .map(|(x, y)| x.iter().zip(y).map(|(x, y)| a * x + c * y).collect())
            .collect();
        let lhs = mean_pool(&combined).unwrap();
        let (px, py) = (mean_pool(&frames).unwrap(), mean_pool(&other).unwrap());
        for i in 0..DIM {
            prop_assert!((lhs[i] - (a * px[i] + c * py[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn class_frequencies_ignore_record_order(labels in vec(0..LEVELS, 1..60), rotate in 0usize..60) {
        let build = |labels: &[usize]| {
            let mut ds = Dataset::new(LevelSchema::cefr(), 1).unwrap();
            for (i, &label) in labels.iter().enumerate() {
                ds.push(EmbeddingRecord {
                    id: format!("r{i}"),
                    group: None,
                    label,
                    split: Split::Train,
                    payload: Payload::Vec(vec![i as f64]),
                }).unwrap();
            }
            class_frequencies(&ds, Split::Train).unwrap()
        };
        let mut permuted = labels.clone();
        let n = permuted.len();
        permuted.rotate_left(rotate % n);
        permuted.reverse();
        let (f, g) = (build(&labels), build(&permuted));
        prop_assert_eq!(&f, &g);
        prop_assert!((f.frequencies.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn distributions_normalize(logits in vec(finite(400.0), 2..10)) {
        let d = Distribution::from_logits(&logits).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(d.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn shared_bias_leaves_outputs_bit_identical(
        rows in bank(2),
        x in nonzero_vector(DIM),
        bias in finite(1e6),
        cos in any::<bool>(),
    ) {
        let head = if cos { HeadKind::ProtoCos } else { HeadKind::ProtoSed };
        let mut model = proto_model(head, Aggregation::MeanSim, &rows);
        let before = proto_forward(&x, &model).unwrap();
        set_bias(&mut model, bias);
        let after = proto_forward(&x, &model).unwrap();
        prop_assert_eq!(before.probs(), after.probs());
    }

    #[test]
    fn cosine_prediction_ignores_input_scale(rows in bank(3), x in nonzero_vector(DIM), c in 0.01f64..100.0) {
        let model = proto_model(HeadKind::ProtoCos, Aggregation::MeanSim, &rows);
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let p = proto_forward(&x, &model).unwrap();
        let q = proto_forward(&scaled, &model).unwrap();
        prop_assert_eq!(predict(&p), predict(&q));
        for (a, b) in p.probs().iter().zip(q.probs()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_prototype_aggregations_agree(rows in bank(1), x in nonzero_vector(DIM), cos in any::<bool>()) {
        let head = if cos { HeadKind::ProtoCos } else { HeadKind::ProtoSed };
        let mean = proto_forward(&x, &proto_model(head, Aggregation::MeanSim, &rows)).unwrap();
        let centroid = proto_forward(&x, &proto_model(head, Aggregation::Centroid, &rows)).unwrap();
        for (a, b) in mean.probs().iter().zip(centroid.probs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn coincident_prototypes_make_aggregations_agree(
        proto in nonzero_vector(DIM),
        x in nonzero_vector(DIM),
        k in 1usize..5,
        cos in any::<bool>(),
    ) {
        let m = Matrix::from_rows(&vec![proto; k]).unwrap();
        let sim = if cos { Similarity::Cos } else { Similarity::Sed };
        let a = aggregate_similarity(&x, &m, sim, Aggregation::MeanSim).unwrap();
        let b = aggregate_similarity(&x, &m, sim, Aggregation::Centroid).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn squared_distance_is_symmetric(x in vec(finite(10.0), DIM), c in vec(finite(10.0), DIM)) {
        prop_assert_eq!(sim_sed(&x, &c).unwrap(), sim_sed(&c, &x).unwrap());
        prop_assert!(sim_sed(&x, &c).unwrap() >= 0.0);
    }

    #[test]
    fn alpha_one_gives_unit_weights(p in positive_frequencies()) {
        let w = weights_alpha(&p, 1.0).unwrap();
        prop_assert!(w.as_slice().iter().all(|&v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn inverse_weight_times_count_is_constant(counts in vec(1usize..5000, 2..8)) {
        let total: usize = counts.iter().sum();
        let w = weights_inverse(&counts).unwrap();
        for (c, q) in counts.iter().zip(w.as_slice()) {
            prop_assert!((*c as f64 * q - total as f64).abs() <= 1e-9 * total as f64);
        }
    }

    #[test]
    fn rarer_levels_weigh_more(p in positive_frequencies(), alpha in 0.0f64..0.99) {
        let w = weights_alpha(&p, alpha).unwrap();
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(w.as_slice()[i] > w.as_slice()[j]);
                }
            }
        }
    }

    #[test]
    fn weighted_ce_scales_with_its_weight(
        logits in vec(finite(20.0), LEVELS),
        label in 0..LEVELS,
        w in 0.01f64..50.0,
    ) {
        let d = Distribution::from_logits(&logits).unwrap();
        let unit = weighted_ce(&d, label, &ClassWeights::uniform(LEVELS)).unwrap();
        let mut raw = vec![1.0; LEVELS];
        raw[label] = w;
        let scaled = weighted_ce(&d, label, &ClassWeights::new(raw).unwrap()).unwrap();
        prop_assert!((scaled - w * unit).abs() <= 1e-12 * scaled.abs().max(1.0));
    }

    #[test]
    fn metric_invariants(pairs in labelled_pairs(), rotate in 0usize..100) {
        let (preds, truths): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let m = standard_metrics(&preds, &truths).unwrap();
        prop_assert!(m.adj >= m.acc);
        let c = confusion_matrix(&preds, &truths, LEVELS).unwrap();
        prop_assert_eq!(c.total(), preds.len() as u64);
        prop_assert!((m.acc - c.trace() as f64 / c.total() as f64).abs() <= 1e-15);

        let mut shuffled = pairs.clone();
        let n = shuffled.len();
        shuffled.rotate_left(rotate % n);
        let (sp, st): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        let m2 = standard_metrics(&sp, &st).unwrap();
        prop_assert_eq!(m.acc, m2.acc);
        prop_assert_eq!(m.adj, m2.adj);
        prop_assert!((m.rmse - m2.rmse).abs() <= 1e-12);
        let (a, b) = (macro_metrics(&preds, &truths).unwrap(), macro_metrics(&sp, &st).unwrap());
        prop_assert!((a.acc_macro - b.acc_macro).abs() <= 1e-12);
        prop_assert!((a.rmse_macro - b.rmse_macro).abs() <= 1e-12);
        match (m.pcc, m2.pcc) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
            (x, y) => prop_assert_eq!(x, y),
        }
    }
}
