//! Level schemas, embedding records, pooling, class statistics and the
//! synthetic imbalanced-data generator.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};

use crate::linalg::{axpy, norm};
use crate::math;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// CEFR level names used by the bundled presets, lowest proficiency first.
pub const DEFAULT_LEVELS: [&str; 5] = ["A2", "B1_1", "B1_2", "B2", "native"];

/// Per-level response counts of the ICNALE monologue corpus.
pub const ICNALE_TRAIN_COUNTS: [usize; 5] = [299, 792, 1681, 586, 540];
pub const ICNALE_VALID_COUNTS: [usize; 5] = [16, 44, 94, 33, 30];
pub const ICNALE_TEST_COUNTS: [usize; 5] = [17, 44, 93, 33, 30];

/// L1 tags attached to synthetic records.
pub const SYNTHETIC_GROUPS: [&str; 10] = [
    "TWN", "HKG", "JPN", "KOR", "SIN", "CHN", "IND", "PAK", "PHL", "THA",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidParameter(format!("unknown split value '{other}'"))),
        }
    }
}

/// Ordered level names; a level's ordinal index is its position.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<String>", into = "Vec<String>"))]
pub struct LevelSchema {
    names: Vec<String>,
}

impl LevelSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "need at least 2 levels, got {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidSchema(format!("level {i} has an empty name")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidSchema(format!("duplicate level name '{name}'")));
            }
        }
        Ok(LevelSchema { names })
    }

    pub fn cefr() -> Self {
        LevelSchema {
            names: DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl TryFrom<Vec<String>> for LevelSchema {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        LevelSchema::new(names)
    }
}

impl From<LevelSchema> for Vec<String> {
    fn from(schema: LevelSchema) -> Self {
        schema.names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// A pooled embedding of length `d`.
    Vec(Vec<f64>),
    /// Frame-level representations, `T × d` with `T ≥ 1`; pool with [`mean_pool`].
    Frames(Vec<Vec<f64>>),
}

impl Payload {
    fn check_dim(&self, dim: usize) -> core::result::Result<(), usize> {
        match self {
            Payload::Vec(v) if v.len() != dim => Err(v.len()),
            Payload::Vec(_) => Ok(()),
            Payload::Frames(frames) => match frames.iter().find(|f| f.len() != dim) {
                Some(f) => Err(f.len()),
                None => Ok(()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub group: Option<String>,
    pub label: usize,
    pub split: Split,
    pub payload: Payload,
}

impl EmbeddingRecord {
    /// The pooled vector: the payload itself, or the frame mean.
    pub fn pooled(&self) -> Result<Vec<f64>> {
        match &self.payload {
            Payload::Vec(v) => Ok(v.clone()),
            Payload::Frames(frames) => mean_pool(frames),
        }
    }
}

/// A pooled input paired with its ordinal label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: LevelSchema,
    dim: usize,
    records: Vec<EmbeddingRecord>,
}

impl Dataset {
    pub fn new(schema: LevelSchema, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dataset dim must be positive".into()));
        }
        Ok(Dataset {
            schema,
            dim,
            records: Vec::new(),
        })
    }

    pub fn with_records(
        schema: LevelSchema,
        dim: usize,
        records: impl IntoIterator<Item = EmbeddingRecord>,
    ) -> Result<Self> {
        let mut ds = Dataset::new(schema, dim)?;
        for record in records {
            ds.push(record)?;
        }
        Ok(ds)
    }

    /// Validates and appends a record.
    pub fn push(&mut self, record: EmbeddingRecord) -> Result<()> {
        if record.label >= self.schema.len() {
            return Err(Error::LabelOutOfRange {
                label: record.label,
                levels: self.schema.len(),
            });
        }
        if let Payload::Frames(frames) = &record.payload {
            if frames.is_empty() {
                return Err(Error::Empty("frame matrix"));
            }
        }
        if let Err(found) = record.payload.check_dim(self.dim) {
            return Err(Error::DimensionMismatch {
                context: format!("record '{}'", record.id),
                expected: self.dim,
                found,
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn schema(&self) -> &LevelSchema {
        &self.schema
    }

    pub fn levels(&self) -> usize {
        self.schema.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &EmbeddingRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Pooled samples of one split, in file order.
    pub fn samples(&self, split: Split) -> Result<Vec<Sample>> {
        self.split(split)
            .map(|r| {
                Ok(Sample {
                    input: r.pooled()?,
                    label: r.label,
                })
            })
            .collect()
    }
}

/// Column-wise arithmetic mean of a `T × d` frame matrix.
pub fn mean_pool(frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or(Error::Empty("frame matrix"))?;
    let dim = first.len();
    let mut acc = vec![0.0; dim];
    for frame in frames {
        if frame.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "frame row".into(),
                expected: dim,
                found: frame.len(),
            });
        }
        axpy(1.0, frame, &mut acc);
    }
    let t = frames.len() as f64;
    acc.iter_mut().for_each(|v| *v /= t);
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassFrequencies {
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
}

/// Per-level counts and relative frequencies of one split.
pub fn class_frequencies(dataset: &Dataset, split: Split) -> Result<ClassFrequencies> {
    let mut counts = vec![0usize; dataset.levels()];
    for record in dataset.split(split) {
        counts[record.label] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptySplit(split));
    }
    let frequencies = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(ClassFrequencies {
        counts,
        frequencies,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitCounts {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// ICNALE counts divided by `divisor`, rounded half away from zero.
    pub fn icnale_scaled(divisor: f64) -> Self {
        let scale = |counts: &[usize]| {
            counts
                .iter()
                .map(|&c| math::round(c as f64 / divisor) as usize)
                .collect()
        };
        SplitCounts {
            train: scale(&ICNALE_TRAIN_COUNTS),
            valid: scale(&ICNALE_VALID_COUNTS),
            test: scale(&ICNALE_TEST_COUNTS),
        }
    }
}

/// Parameters of the synthetic ordinal Gaussian generator.
///
/// Level `j` is centred at `gap_positions[j] · u` for a seed-derived random
/// unit direction `u`, with isotropic noise of standard deviation
/// `noise_sigma` in all `dim` coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthParams {
    pub levels: Vec<String>,
    pub dim: usize,
    pub counts: SplitCounts,
    pub gap_positions: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            levels: DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect(),
            dim: 16,
            counts: SplitCounts::icnale_scaled(4.0),
            gap_positions: vec![0.0, 1.0, 1.6, 2.6, 4.0],
            noise_sigma: 0.9,
            seed: 42,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<LevelSchema> {
        let schema = LevelSchema::new(self.levels.iter().cloned())?;
        let j = schema.len();
        if self.dim == 0 {
            return Err(Error::InvalidParameter("synthetic dim must be positive".into()));
        }
        for split in Split::ALL {
            let counts = self.counts.get(split);
            if counts.len() != j {
                return Err(Error::DimensionMismatch {
                    context: format!("synthetic {split} counts"),
                    expected: j,
                    found: counts.len(),
                });
            }
        }
        if self.gap_positions.len() != j {
            return Err(Error::DimensionMismatch {
                context: "gap positions".into(),
                expected: j,
                found: self.gap_positions.len(),
            });
        }
        if self.gap_positions.iter().any(|g| !g.is_finite())
            || self.gap_positions.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter(
                "gap positions must be finite and strictly increasing".into(),
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter("noise_sigma must be positive".into()));
        }
        Ok(schema)
    }
}

/// Draws a deterministic synthetic dataset; record order within each split
/// is a seeded shuffle.
pub fn gen_synthetic(params: &SynthParams) -> Result<Dataset> {
    let schema = params.validate()?;
    let mut rng = rng::stream(params.seed, Stream::Synthetic);
    let direction = random_unit(params.dim, &mut rng);
    let mut dataset = Dataset::new(schema, params.dim)?;

    for split in Split::ALL {
        let mut drawn: Vec<(usize, Vec<f64>, &str)> = Vec::new();
        for (level, &count) in params.counts.get(split).iter().enumerate() {
            let gap = params.gap_positions[level];
            for _ in 0..count {
                let v: Vec<f64> = direction
                    .iter()
                    .map(|&u| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        gap * u + params.noise_sigma * z
                    })
                    .collect();
                let group = SYNTHETIC_GROUPS[rng.random_range(0..SYNTHETIC_GROUPS.len())];
                drawn.push((level, v, group));
            }
        }
        drawn.shuffle(&mut rng);
        for (i, (label, v, group)) in drawn.into_iter().enumerate() {
            dataset.push(EmbeddingRecord {
                id: format!("syn-{split}-{i:05}"),
                group: Some(group.to_string()),
                label,
                split,
                payload: Payload::Vec(v),
            })?;
        }
    }
    Ok(dataset)
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: usize, split: Split, v: Vec<f64>) -> EmbeddingRecord {
        EmbeddingRecord {
            id: id.into(),
            group: None,
            label,
            split,
            payload: Payload::Vec(v),
        }
    }

    #[test]
    fn schema_rejects_duplicates_and_short() {
        assert!(LevelSchema::new(["A"]).is_err());
        assert!(LevelSchema::new(["A", "A"]).is_err());
        assert!(LevelSchema::new(["A", ""]).is_err());
        let s = LevelSchema::new(["A", "B"]).unwrap();
        assert_eq!(s.index_of("B"), Some(1));
    }

    #[test]
    fn push_validates_dim_and_label() {
        let mut ds = Dataset::new(LevelSchema::new(["A", "B"]).unwrap(), 2).unwrap();
        ds.push(rec("ok", 0, Split::Train, vec![1.0, 2.0])).unwrap();
        let err = ds.push(rec("r7", 0, Split::Train, vec![1.0, 2.0, 3.0])).unwrap_err();
        assert!(alloc::format!("{err}").contains("r7"));
        assert!(matches!(
            ds.push(rec("r8", 2, Split::Train, vec![1.0, 2.0])),
            Err(Error::LabelOutOfRange { label: 2, levels: 2 })
        ));
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn mean_pool_examples() {
        assert_eq!(mean_pool(&[vec![5.0, -1.0]]).unwrap(), vec![5.0, -1.0]);
        assert_eq!(
            mean_pool(&[vec![1.0, 3.0], vec![3.0, 5.0]]).unwrap(),
            vec![2.0, 4.0]
        );
        let r = vec![0.25, -7.5, 3.0];
        assert_eq!(mean_pool(&[r.clone(), r.clone(), r.clone()]).unwrap(), r);
        assert_eq!(mean_pool(&[]), Err(Error::Empty("frame matrix")));
    }

    #[test]
    fn frequencies_single_level() {
        let ds = Dataset::with_records(
            LevelSchema::new(["A", "B", "C"]).unwrap(),
            1,
            [
                rec("a", 0, Split::Train, vec![0.0]),
                rec("b", 0, Split::Train, vec![0.0]),
            ],
        )
        .unwrap();
        let f = class_frequencies(&ds, Split::Train).unwrap();
        assert_eq!(f.counts, vec![2, 0, 0]);
        assert_eq!(f.frequencies, vec![1.0, 0.0, 0.0]);
        assert_eq!(
            class_frequencies(&ds, Split::Test),
            Err(Error::EmptySplit(Split::Test))
        );
    }

    #[test]
    fn scaled_icnale_counts() {
        let c = SplitCounts::icnale_scaled(4.0);
        assert_eq!(c.train, vec![75, 198, 420, 147, 135]);
        assert_eq!(c.valid, vec![4, 11, 24, 8, 8]);
        assert_eq!(c.test, vec![4, 11, 23, 8, 8]);
    }

    #[test]
    fn synthetic_rejects_bad_params() {
        let mut p = SynthParams::default();
        p.gap_positions = vec![0.0, 1.0, 1.0, 2.0, 3.0];
        assert!(gen_synthetic(&p).is_err());
        let mut p = SynthParams::default();
        p.noise_sigma = 0.0;
        assert!(gen_synthetic(&p).is_err());
        let mut p = SynthParams::default();
        p.counts.valid.pop();
        assert!(gen_synthetic(&p).is_err());
    }
}
