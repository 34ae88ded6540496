//! Classification heads over pooled embeddings.
//!
//! A [`HeadModel`] is a trainable [`Projection`] (standing in for encoder
//! adaptation) followed by either a small MLP classifier or a prototypical
//! head. The prototypical head keeps `K` prototype vectors per level and
//! scores an input against each level with
//!
//! ```text
//! logit_j = s · Sim(x', level j) + b,    p = softmax(logit)
//! ```
//!
//! where `Sim` is cosine similarity (COS, `s` and `b` learnable) or the
//! negated squared Euclidean distance (SED, `s = 1`, `b = 0` fixed). With
//! `K > 1` a level's similarity is either the mean of the `K` similarities
//! or the similarity to the mean prototype.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution as _, StandardNormal};

use crate::dataset::Sample;
use crate::kmeans::{self, DEFAULT_MAX_ITER};
use crate::linalg::{axpy, dot, norm, squared_distance, Dense, Matrix};
use crate::math;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Initial cosine scale; cosine values in `[-1, 1]` give a near-uniform
/// softmax without it.
pub const DEFAULT_COS_SCALE: f64 = 10.0;
pub const DEFAULT_MLP_HIDDEN: usize = 256;
pub const DEFAULT_BASELINE_HIDDEN: usize = 32;

string_enum!(Similarity { Cos => "cos", Sed => "sed" });
string_enum!(Aggregation { MeanSim => "mean_sim", Centroid => "centroid" });
string_enum!(ProjectionKind { Identity => "identity", Linear => "linear", Mlp => "mlp" });
string_enum!(HeadKind { Baseline => "baseline", ProtoCos => "proto_cos", ProtoSed => "proto_sed" });
string_enum!(InitMode { Random => "random", ClassKmeans => "class_kmeans" });

impl HeadKind {
    pub fn similarity(self) -> Option<Similarity> {
        match self {
            HeadKind::Baseline => None,
            HeadKind::ProtoCos => Some(Similarity::Cos),
            HeadKind::ProtoSed => Some(Similarity::Sed),
        }
    }
}

/// Cosine similarity `x·c / (‖x‖‖c‖)`.
pub fn sim_cos(x: &[f64], c: &[f64]) -> Result<f64> {
    check_same_len(x, c)?;
    let nx = norm(x);
    let nc = norm(c);
    if nx == 0.0 {
        return Err(Error::ZeroNorm("cosine input"));
    }
    if nc == 0.0 {
        return Err(Error::ZeroNorm("cosine prototype"));
    }
    Ok((dot(x, c) / (nx * nc)).clamp(-1.0, 1.0))
}

/// Squared Euclidean distance `‖x − c‖²`.
pub fn sim_sed(x: &[f64], c: &[f64]) -> Result<f64> {
    check_same_len(x, c)?;
    Ok(squared_distance(x, c))
}

fn check_same_len(x: &[f64], c: &[f64]) -> Result<()> {
    if x.len() != c.len() {
        return Err(Error::DimensionMismatch {
            context: "similarity operands".into(),
            expected: x.len(),
            found: c.len(),
        });
    }
    Ok(())
}

/// Raw similarity of `x` to one level's `K × d′` prototypes.
///
/// Returns the plain cosine or squared distance; the sign flip that turns a
/// distance into a logit happens in the head.
pub fn aggregate_similarity(
    x: &[f64],
    prototypes: &Matrix,
    similarity: Similarity,
    aggregation: Aggregation,
) -> Result<f64> {
    let k = prototypes.rows();
    if k == 0 {
        return Err(Error::Empty("prototype set"));
    }
    let sim = |c: &[f64]| match similarity {
        Similarity::Cos => sim_cos(x, c),
        Similarity::Sed => sim_sed(x, c),
    };
    match aggregation {
        Aggregation::MeanSim => {
            let mut total = 0.0;
            for i in 0..k {
                total += sim(prototypes.row(i))?;
            }
            Ok(total / k as f64)
        }
        Aggregation::Centroid => {
            if k == 1 {
                return sim(prototypes.row(0));
            }
            sim(&prototypes.row_mean())
        }
    }
}

/// A probability vector over levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Numerically stable softmax.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::Empty("logits"));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|l| math::exp(l - max)).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(Distribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Arg-max level; ties go to the lowest index.
pub fn predict(dist: &Distribution) -> usize {
    let mut best = 0;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p > dist.probs[best] {
            best = i;
        }
    }
    best
}

/// Trainable map from the pooled input space to the head's space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Projection {
    Identity { dim: usize },
    Linear(Dense),
    /// One hidden layer with rectified activation.
    Mlp { hidden: Dense, output: Dense },
}

impl Projection {
    pub fn kind(&self) -> ProjectionKind {
        match self {
            Projection::Identity { .. } => ProjectionKind::Identity,
            Projection::Linear(_) => ProjectionKind::Linear,
            Projection::Mlp { .. } => ProjectionKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Projection::Identity { dim } => *dim,
            Projection::Linear(layer) => layer.input_dim(),
            Projection::Mlp { hidden, .. } => hidden.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Projection::Identity { dim } => *dim,
            Projection::Linear(layer) => layer.output_dim(),
            Projection::Mlp { output, .. } => output.output_dim(),
        }
    }

    /// Shape summary used in diagnostics, e.g. `linear 16x16`.
    pub fn shape(&self) -> String {
        match self {
            Projection::Identity { dim } => format!("identity {dim}"),
            Projection::Linear(l) => format!("linear {}x{}", l.input_dim(), l.output_dim()),
            Projection::Mlp { hidden, output } => format!(
                "mlp {}x{}x{}",
                hidden.input_dim(),
                hidden.output_dim(),
                output.output_dim()
            ),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).1
    }

    fn forward_trace(&self, x: &[f64]) -> (Option<Vec<f64>>, Vec<f64>) {
        match self {
            Projection::Identity { .. } => (None, x.to_vec()),
            Projection::Linear(layer) => (None, layer.forward(x)),
            Projection::Mlp { hidden, output } => {
                let pre = hidden.forward(x);
                let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
                let out = output.forward(&act);
                (Some(pre), out)
            }
        }
    }

    fn backward(&self, x: &[f64], pre: Option<&[f64]>, grad_out: &[f64], grad: &mut Projection) {
        match (self, grad) {
            (Projection::Identity { .. }, Projection::Identity { .. }) => {}
            (Projection::Linear(layer), Projection::Linear(g)) => {
                layer.backward(x, grad_out, g);
            }
            (Projection::Mlp { hidden, output }, Projection::Mlp { hidden: gh, output: go }) => {
                let pre = pre.expect("mlp trace carries pre-activations");
                let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
                let mut g_act = output.backward(&act, grad_out, go);
                g_act
                    .iter_mut()
                    .zip(pre)
                    .for_each(|(g, &p)| if p <= 0.0 { *g = 0.0 });
                hidden.backward(x, &g_act, gh);
            }
            _ => unreachable!("gradient projection shaped like the model"),
        }
    }
}

/// `J × K × d′` prototype tensor, stored as one `K × d′` matrix per level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrototypeBank {
    levels: Vec<Matrix>,
}

impl PrototypeBank {
    pub fn new(levels: Vec<Matrix>) -> Result<Self> {
        let first = levels.first().ok_or(Error::Empty("prototype bank"))?;
        let (k, dim) = (first.rows(), first.cols());
        if k == 0 || dim == 0 {
            return Err(Error::InvalidParameter("prototype bank needs K >= 1 and d' >= 1".into()));
        }
        for (j, m) in levels.iter().enumerate() {
            if m.rows() != k || m.cols() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("prototypes of level {j}"),
                    expected: k * dim,
                    found: m.rows() * m.cols(),
                });
            }
            if m.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("prototype"));
            }
        }
        Ok(PrototypeBank { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    /// Prototypes per level.
    pub fn k(&self) -> usize {
        self.levels[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].cols()
    }

    pub fn level(&self, j: usize) -> &Matrix {
        &self.levels[j]
    }
}

/// Scale `s` and shared bias `b` of the prototypical logits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScaledSimilarityParams {
    pub scale: f64,
    pub bias: f64,
    pub learnable: bool,
}

impl ScaledSimilarityParams {
    pub fn for_similarity(similarity: Similarity, cos_scale: f64) -> Self {
        match similarity {
            Similarity::Cos => ScaledSimilarityParams {
                scale: cos_scale,
                bias: 0.0,
                learnable: true,
            },
            Similarity::Sed => ScaledSimilarityParams {
                scale: 1.0,
                bias: 0.0,
                learnable: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineHead {
    pub hidden: Option<Dense>,
    pub output: Dense,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrototypeHead {
    pub similarity: Similarity,
    pub aggregation: Aggregation,
    pub scaling: ScaledSimilarityParams,
    pub prototypes: PrototypeBank,
}

impl PrototypeHead {
    /// Per-level effective similarity: aggregated cosine, or the negated
    /// aggregated squared distance.
    pub fn effective_similarities(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.prototypes.levels())
            .map(|j| {
                let raw = aggregate_similarity(
                    x,
                    self.prototypes.level(j),
                    self.similarity,
                    self.aggregation,
                )?;
                Ok(match self.similarity {
                    Similarity::Cos => raw,
                    Similarity::Sed => -raw,
                })
            })
            .collect()
    }

    /// Accumulates prototype gradients into `grad` and returns `∂L/∂x` for
    /// `∂L/∂effsim_j = g[j]`.
    fn backward(&self, x: &[f64], g: &[f64], grad: &mut PrototypeHead) -> Vec<f64> {
        let mut gx = vec![0.0; x.len()];
        let k = self.prototypes.k();
        let nx = norm(x);
        for (j, &gj) in g.iter().enumerate() {
            let protos = self.prototypes.level(j);
            let gp = &mut grad.prototypes.levels[j];
            match self.aggregation {
                Aggregation::MeanSim => {
                    let w = gj / k as f64;
                    for i in 0..k {
                        let c = protos.row(i);
                        self.similarity_backward(x, nx, c, w, &mut gx, gp.row_mut(i));
                    }
                }
                Aggregation::Centroid => {
                    let c = protos.row_mean();
                    let mut gc = vec![0.0; c.len()];
                    self.similarity_backward(x, nx, &c, gj, &mut gx, &mut gc);
                    for i in 0..k {
                        axpy(1.0 / k as f64, &gc, gp.row_mut(i));
                    }
                }
            }
        }
        gx
    }

    /// Adds `w · ∂effsim(x, c)/∂x` to `gx` and `w · ∂effsim/∂c` to `gc`.
    fn similarity_backward(&self, x: &[f64], nx: f64, c: &[f64], w: f64, gx: &mut [f64], gc: &mut [f64]) {
        match self.similarity {
            Similarity::Cos => {
                let nc = norm(c);
                let cos = dot(x, c) / (nx * nc);
                let inv = 1.0 / (nx * nc);
                for i in 0..x.len() {
                    gx[i] += w * (c[i] * inv - cos * x[i] / (nx * nx));
                    gc[i] += w * (x[i] * inv - cos * c[i] / (nc * nc));
                }
            }
            Similarity::Sed => {
                // effsim = -‖x − c‖²
                for i in 0..x.len() {
                    let diff = x[i] - c[i];
                    gx[i] -= 2.0 * w * diff;
                    gc[i] += 2.0 * w * diff;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Head {
    Baseline(BaselineHead),
    Prototypical(PrototypeHead),
}

/// Architecture selection for a fresh [`HeadModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub levels: usize,
    pub projection: ProjectionKind,
    /// Output width of the projection; ignored for identity.
    pub projected_dim: usize,
    pub projection_hidden: usize,
    pub head: HeadKind,
    pub aggregation: Aggregation,
    pub prototypes_per_level: usize,
    pub cos_scale: f64,
    pub baseline_hidden: usize,
    pub normalize_input: bool,
}

impl ModelSpec {
    pub fn new(input_dim: usize, levels: usize, head: HeadKind) -> Self {
        ModelSpec {
            input_dim,
            levels,
            projection: ProjectionKind::Linear,
            projected_dim: input_dim,
            projection_hidden: DEFAULT_MLP_HIDDEN,
            head,
            aggregation: Aggregation::MeanSim,
            prototypes_per_level: 3,
            cos_scale: DEFAULT_COS_SCALE,
            baseline_hidden: DEFAULT_BASELINE_HIDDEN,
            normalize_input: false,
        }
    }
}

/// A projection plus classification head.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeadModel {
    pub input_dim: usize,
    pub levels: usize,
    /// L2-normalize pooled inputs before projecting.
    pub normalize_input: bool,
    pub projection: Projection,
    pub head: Head,
}

/// Read-only view of one parameter tensor.
#[derive(Debug)]
pub struct ParamView<'a> {
    pub name: String,
    pub values: &'a [f64],
    pub trainable: bool,
}

#[derive(Debug)]
pub struct ParamViewMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
    pub trainable: bool,
}

/// Intermediate values of one forward pass, consumed by backprop.
pub(crate) struct Trace {
    input: Vec<f64>,
    proj_pre: Option<Vec<f64>>,
    projected: Vec<f64>,
    head_pre: Option<Vec<f64>>,
    /// Effective similarities (prototypical heads only).
    effsim: Vec<f64>,
    pub(crate) dist: Distribution,
}

impl HeadModel {
    /// Fresh model with seeded parameters. Prototypes start from the
    /// `random` initializer; see [`init_prototypes`] for data-driven init.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        if spec.input_dim == 0 || spec.levels < 2 {
            return Err(Error::InvalidParameter("model needs input_dim >= 1 and >= 2 levels".into()));
        }
        let mut rng = rng::stream(seed, Stream::ModelInit);
        let d = spec.input_dim;
        let projection = match spec.projection {
            ProjectionKind::Identity => Projection::Identity { dim: d },
            ProjectionKind::Linear => {
                check_positive(spec.projected_dim, "projected_dim")?;
                if spec.projected_dim == d {
                    Projection::Linear(Dense::new(Matrix::identity(d), vec![0.0; d])?)
                } else {
                    Projection::Linear(Dense::gaussian(d, spec.projected_dim, 1.0, &mut rng))
                }
            }
            ProjectionKind::Mlp => {
                check_positive(spec.projected_dim, "projected_dim")?;
                check_positive(spec.projection_hidden, "projection_hidden")?;
                Projection::Mlp {
                    hidden: Dense::gaussian(d, spec.projection_hidden, 2.0, &mut rng),
                    output: Dense::gaussian(spec.projection_hidden, spec.projected_dim, 1.0, &mut rng),
                }
            }
        };
        let d_out = projection.output_dim();
        let head = match spec.head.similarity() {
            None => {
                let hidden = (spec.baseline_hidden > 0)
                    .then(|| Dense::gaussian(d_out, spec.baseline_hidden, 2.0, &mut rng));
                let width = hidden.as_ref().map_or(d_out, Dense::output_dim);
                Head::Baseline(BaselineHead {
                    hidden,
                    output: Dense::gaussian(width, spec.levels, 1.0, &mut rng),
                })
            }
            Some(similarity) => {
                check_positive(spec.prototypes_per_level, "prototypes per level")?;
                let prototypes = random_bank(spec.levels, spec.prototypes_per_level, d_out, seed)?;
                Head::Prototypical(PrototypeHead {
                    similarity,
                    aggregation: spec.aggregation,
                    scaling: ScaledSimilarityParams::for_similarity(similarity, spec.cos_scale),
                    prototypes,
                })
            }
        };
        Ok(HeadModel {
            input_dim: d,
            levels: spec.levels,
            normalize_input: spec.normalize_input,
            projection,
            head,
        })
    }

    /// Checks internal shape consistency and the SED scaling invariant.
    pub fn validate(&self) -> Result<()> {
        if self.projection.input_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "projection input".into(),
                expected: self.input_dim,
                found: self.projection.input_dim(),
            });
        }
        let shapes_ok = match &self.projection {
            Projection::Identity { .. } => true,
            Projection::Linear(l) => l.bias.len() == l.output_dim(),
            Projection::Mlp { hidden, output } => {
                hidden.bias.len() == hidden.output_dim()
                    && output.input_dim() == hidden.output_dim()
                    && output.bias.len() == output.output_dim()
            }
        };
        if !shapes_ok {
            return Err(Error::IncompatibleModel("inconsistent projection shapes".into()));
        }
        let d_out = self.projection.output_dim();
        match &self.head {
            Head::Baseline(b) => {
                let width = match &b.hidden {
                    Some(h) => {
                        if h.input_dim() != d_out || h.bias.len() != h.output_dim() {
                            return Err(Error::IncompatibleModel("baseline hidden layer shape".into()));
                        }
                        h.output_dim()
                    }
                    None => d_out,
                };
                if b.output.input_dim() != width
                    || b.output.output_dim() != self.levels
                    || b.output.bias.len() != self.levels
                {
                    return Err(Error::IncompatibleModel("baseline output layer shape".into()));
                }
            }
            Head::Prototypical(p) => {
                if p.prototypes.levels() != self.levels || p.prototypes.dim() != d_out {
                    return Err(Error::IncompatibleModel(format!(
                        "prototype bank {}x{}x{} does not match {} levels, d'={}",
                        p.prototypes.levels(),
                        p.prototypes.k(),
                        p.prototypes.dim(),
                        self.levels,
                        d_out
                    )));
                }
                if p.similarity == Similarity::Sed
                    && p.scaling != ScaledSimilarityParams::for_similarity(Similarity::Sed, 1.0)
                {
                    return Err(Error::IncompatibleModel("SED head requires fixed s = 1, b = 0".into()));
                }
            }
        }
        if self.parameters().iter().any(|p| p.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(())
    }

    pub fn head_kind(&self) -> HeadKind {
        match &self.head {
            Head::Baseline(_) => HeadKind::Baseline,
            Head::Prototypical(p) => match p.similarity {
                Similarity::Cos => HeadKind::ProtoCos,
                Similarity::Sed => HeadKind::ProtoSed,
            },
        }
    }

    fn prepare_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "model input".into(),
                expected: self.input_dim,
                found: x.len(),
            });
        }
        if self.normalize_input {
            let n = norm(x);
            if n == 0.0 {
                return Err(Error::ZeroNorm("model input"));
            }
            Ok(x.iter().map(|v| v / n).collect())
        } else {
            Ok(x.to_vec())
        }
    }

    /// Projected embedding `x′` of a pooled input.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = self.prepare_input(x)?;
        Ok(self.projection.forward(&input))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Distribution> {
        Ok(self.trace(x)?.dist)
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Result<Trace> {
        let input = self.prepare_input(x)?;
        let (proj_pre, projected) = self.projection.forward_trace(&input);
        let (head_pre, effsim, dist) = match &self.head {
            Head::Baseline(b) => {
                let (pre, logits) = match &b.hidden {
                    Some(h) => {
                        let pre = h.forward(&projected);
                        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
                        (Some(pre), b.output.forward(&act))
                    }
                    None => (None, b.output.forward(&projected)),
                };
                (pre, Vec::new(), Distribution::from_logits(&logits)?)
            }
            Head::Prototypical(p) => {
                let effsim = p.effective_similarities(&projected)?;
                // b is shared by every level and cancels inside the softmax.
                let logits: Vec<f64> = effsim.iter().map(|e| p.scaling.scale * e).collect();
                let dist = Distribution::from_logits(&logits)?;
                (None, effsim, dist)
            }
        };
        Ok(Trace {
            input,
            proj_pre,
            projected,
            head_pre,
            effsim,
            dist,
        })
    }

    /// Backpropagates `∂L/∂logits` through the model, accumulating into `grad`.
    pub(crate) fn backward(&self, trace: &Trace, dlogits: &[f64], grad: &mut HeadModel) {
        let g_proj = match (&self.head, &mut grad.head) {
            (Head::Baseline(b), Head::Baseline(gb)) => match (&b.hidden, &mut gb.hidden) {
                (Some(h), Some(gh)) => {
                    let pre = trace.head_pre.as_deref().expect("baseline trace has hidden layer");
                    let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
                    let mut g_act = b.output.backward(&act, dlogits, &mut gb.output);
                    g_act
                        .iter_mut()
                        .zip(pre)
                        .for_each(|(g, &p)| if p <= 0.0 { *g = 0.0 });
                    h.backward(&trace.projected, &g_act, gh)
                }
                _ => b.output.backward(&trace.projected, dlogits, &mut gb.output),
            },
            (Head::Prototypical(p), Head::Prototypical(gp)) => {
                let s = p.scaling.scale;
                gp.scaling.scale += dot(dlogits, &trace.effsim);
                // ∂L/∂b = Σ_j ∂L/∂logit_j, identically zero for softmax
                // cross-entropy; left untouched.
                let g_eff: Vec<f64> = dlogits.iter().map(|g| s * g).collect();
                p.backward(&trace.projected, &g_eff, gp)
            }
            _ => unreachable!("gradient head shaped like the model"),
        };
        self.projection
            .backward(&trace.input, trace.proj_pre.as_deref(), &g_proj, &mut grad.projection);
    }

    /// Copy of the model with every parameter set to zero.
    pub fn zeroed(&self) -> HeadModel {
        let mut z = self.clone();
        for p in z.parameters_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn parameters(&self) -> Vec<ParamView<'_>> {
        let mut views = Vec::new();
        self.visit_params(&mut |name, values, trainable| {
            views.push(ParamView {
                name,
                values,
                trainable,
            })
        });
        views
    }

    pub fn parameters_mut(&mut self) -> Vec<ParamViewMut<'_>> {
        let mut views = Vec::new();
        visit_params_mut(self, &mut |name, values, trainable| {
            views.push(ParamViewMut {
                name,
                values,
                trainable,
            })
        });
        views
    }

    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(String, &'a [f64], bool)) {
        match &self.projection {
            Projection::Identity { .. } => {}
            Projection::Linear(l) => {
                f("projection.weight".into(), l.weight.as_slice(), true);
                f("projection.bias".into(), &l.bias, true);
            }
            Projection::Mlp { hidden, output } => {
                f("projection.hidden.weight".into(), hidden.weight.as_slice(), true);
                f("projection.hidden.bias".into(), &hidden.bias, true);
                f("projection.output.weight".into(), output.weight.as_slice(), true);
                f("projection.output.bias".into(), &output.bias, true);
            }
        }
        match &self.head {
            Head::Baseline(b) => {
                if let Some(h) = &b.hidden {
                    f("head.hidden.weight".into(), h.weight.as_slice(), true);
                    f("head.hidden.bias".into(), &h.bias, true);
                }
                f("head.output.weight".into(), b.output.weight.as_slice(), true);
                f("head.output.bias".into(), &b.output.bias, true);
            }
            Head::Prototypical(p) => {
                for (j, m) in p.prototypes.levels.iter().enumerate() {
                    f(format!("head.prototypes.{j}"), m.as_slice(), true);
                }
                let learnable = p.scaling.learnable;
                f("head.scale".into(), core::slice::from_ref(&p.scaling.scale), learnable);
                f("head.bias".into(), core::slice::from_ref(&p.scaling.bias), learnable);
            }
        }
    }
}

fn visit_params_mut<'a>(model: &'a mut HeadModel, f: &mut dyn FnMut(String, &'a mut [f64], bool)) {
    match &mut model.projection {
        Projection::Identity { .. } => {}
        Projection::Linear(l) => {
            f("projection.weight".into(), l.weight.as_mut_slice(), true);
            f("projection.bias".into(), &mut l.bias, true);
        }
        Projection::Mlp { hidden, output } => {
            f("projection.hidden.weight".into(), hidden.weight.as_mut_slice(), true);
            f("projection.hidden.bias".into(), &mut hidden.bias, true);
            f("projection.output.weight".into(), output.weight.as_mut_slice(), true);
            f("projection.output.bias".into(), &mut output.bias, true);
        }
    }
    match &mut model.head {
        Head::Baseline(b) => {
            if let Some(h) = &mut b.hidden {
                f("head.hidden.weight".into(), h.weight.as_mut_slice(), true);
                f("head.hidden.bias".into(), &mut h.bias, true);
            }
            f("head.output.weight".into(), b.output.weight.as_mut_slice(), true);
            f("head.output.bias".into(), &mut b.output.bias, true);
        }
        Head::Prototypical(p) => {
            for (j, m) in p.prototypes.levels.iter_mut().enumerate() {
                f(format!("head.prototypes.{j}"), m.as_mut_slice(), true);
            }
            let learnable = p.scaling.learnable;
            f("head.scale".into(), core::slice::from_mut(&mut p.scaling.scale), learnable);
            f("head.bias".into(), core::slice::from_mut(&mut p.scaling.bias), learnable);
        }
    }
}

fn check_positive(v: usize, what: &str) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("{what} must be positive")));
    }
    Ok(())
}

/// Softmax over a prototypical head's scaled similarities.
pub fn proto_forward(x: &[f64], model: &HeadModel) -> Result<Distribution> {
    match model.head {
        Head::Prototypical(_) => model.forward(x),
        Head::Baseline(_) => Err(Error::IncompatibleModel("expected a prototypical head".into())),
    }
}

/// Softmax over the baseline MLP's logits.
pub fn baseline_forward(x: &[f64], model: &HeadModel) -> Result<Distribution> {
    match model.head {
        Head::Baseline(_) => model.forward(x),
        Head::Prototypical(_) => Err(Error::IncompatibleModel("expected a baseline head".into())),
    }
}

fn random_bank(levels: usize, k: usize, dim: usize, seed: u64) -> Result<PrototypeBank> {
    let mut rng = rng::stream(seed, Stream::Prototypes);
    let mats = (0..levels)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            Matrix::from_rows(&rows)
        })
        .collect::<Result<Vec<_>>>()?;
    PrototypeBank::new(mats)
}

/// Builds a prototype bank for `model`'s projection.
///
/// `random` draws standard Gaussian prototypes. `class_kmeans` projects the
/// training samples of each level and runs k-means with `K` clusters; every
/// level must have at least one sample.
pub fn init_prototypes(
    train: &[Sample],
    model: &HeadModel,
    k: usize,
    mode: InitMode,
    seed: u64,
) -> Result<PrototypeBank> {
    check_positive(k, "prototypes per level")?;
    let dim = model.projection.output_dim();
    match mode {
        InitMode::Random => random_bank(model.levels, k, dim, seed),
        InitMode::ClassKmeans => {
            let mut per_level: Vec<Vec<Vec<f64>>> = vec![Vec::new(); model.levels];
            for s in train {
                if s.label >= model.levels {
                    return Err(Error::LabelOutOfRange {
                        label: s.label,
                        levels: model.levels,
                    });
                }
                per_level[s.label].push(model.project(&s.input)?);
            }
            let mut rng = rng::stream(seed, Stream::Prototypes);
            let mats = per_level
                .iter()
                .enumerate()
                .map(|(level, pts)| {
                    if pts.is_empty() {
                        return Err(Error::EmptyLevel { level });
                    }
                    Matrix::from_rows(&kmeans::kmeans(pts, k, DEFAULT_MAX_ITER, &mut rng)?)
                })
                .collect::<Result<Vec<_>>>()?;
            PrototypeBank::new(mats)
        }
    }
}

impl PrototypeHead {
    pub fn set_prototypes(&mut self, bank: PrototypeBank) -> Result<()> {
        if bank.levels() != self.prototypes.levels() || bank.dim() != self.prototypes.dim() {
            return Err(Error::IncompatibleModel("replacement prototype bank shape".into()));
        }
        self.prototypes = bank;
        Ok(())
    }
}
