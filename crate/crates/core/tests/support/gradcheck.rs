//! Finite-difference oracle for the analytic gradients of the batch loss.

use protograde::dataset::Sample;
use protograde::loss::{loss_and_grads, mean_loss, ClassWeightScheme, ClassWeights};
use protograde::model::{Aggregation, HeadKind, HeadModel, ModelSpec, ProjectionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-5;
/// Denominator floor of the relative error, per unit of loss. A step-1e-6
/// central difference of a loss `L` carries ~1e-10·|L| absolute round-off,
/// so components below `REL_FLOOR · max(1, |L|)` are judged against that
/// resolution instead of their own vanishing magnitude.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
    let floor = REL_FLOOR * loss.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub struct Case {
    pub head: HeadKind,
    pub aggregation: Aggregation,
    pub scheme: ClassWeightScheme,
}

pub fn all_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    for head in [HeadKind::Baseline, HeadKind::ProtoCos, HeadKind::ProtoSed] {
        for aggregation in [Aggregation::MeanSim, Aggregation::Centroid] {
            for scheme in [
                ClassWeightScheme::None,
                ClassWeightScheme::Alpha(0.5),
                ClassWeightScheme::Inverse,
            ] {
                cases.push(Case {
                    head,
                    aggregation,
                    scheme,
                });
            }
        }
    }
    cases
}

/// Random model, batch and weights for one parameter point.
fn random_point(case: &Case, point: u64) -> (HeadModel, Vec<Sample>, ClassWeights) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9 ^ point);
    let (dim, levels) = (4, 5);
    let mut spec = ModelSpec::new(dim, levels, case.head);
    spec.aggregation = case.aggregation;
    spec.projection = [ProjectionKind::Identity, ProjectionKind::Linear, ProjectionKind::Mlp][point as usize % 3];
    spec.projected_dim = 3;
    spec.projection_hidden = 6;
    spec.baseline_hidden = if point % 2 == 0 { 5 } else { 0 };
    spec.prototypes_per_level = 1 + (point as usize % 3);
    let mut model = HeadModel::new(&spec, point).unwrap();
    for p in model.parameters_mut() {
        if p.trainable {
            for v in p.values.iter_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
    }
    let samples = (0..6)
        .map(|_| Sample {
            input: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            label: rng.random_range(0..levels),
        })
        .collect();
    let counts: Vec<usize> = (0..levels).map(|_| rng.random_range(1..50)).collect();
    let weights = case.scheme.weights(&counts).unwrap();
    (model, samples, weights)
}

/// Largest relative error over every trainable scalar of the model.
pub fn max_gradient_error(case: &Case, point: u64) -> f64 {
    let (model, samples, weights) = random_point(case, point);
    let batch: Vec<&Sample> = samples.iter().collect();
    let (loss, grads) = loss_and_grads(&model, &batch, &weights).unwrap();
    let analytic = grads.tensors();

    let mut worst: f64 = 0.0;
    let names: Vec<(String, usize, bool)> = model
        .parameters()
        .into_iter()
        .map(|p| (p.name, p.values.len(), p.trainable))
        .collect();
    for (t, (name, len, trainable)) in names.iter().enumerate() {
        if !trainable {
            continue;
        }
        assert_eq!(analytic[t].name, *name);
        for i in 0..*len {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.parameters_mut()[t].values[i] += delta;
                mean_loss(&m, &samples, &weights).unwrap()
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            worst = worst.max(relative_error(analytic[t].values[i], numeric, loss));
        }
    }
    worst
}
