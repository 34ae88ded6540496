//! Ordinal classification metrics.
//!
//! All quantities work on ordinal level indices `0..J`:
//!
//! * `acc`: exact-match fraction
//! * `adj`: fraction with `|pred − truth| ≤ 1`
//! * `acc_macro`: mean per-level recall over levels present in the truths
//! * `rmse`, `rmse_macro`: root mean squared index error, overall and
//!   averaged per present level
//! * `pcc`: Pearson correlation of the two index sequences, `None` when
//!   either sequence is constant

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Bucket name for records without a group tag.
pub const UNKNOWN_GROUP: &str = "unknown";

/// `J × J` counts; rows are true levels, columns predicted levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    levels: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.levels + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.levels..(truth + 1) * self.levels]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.levels).map(|i| self.get(i, i)).sum()
    }
}

fn check_pair(preds: &[usize], truths: &[usize]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("prediction sequence"));
    }
    Ok(())
}

pub fn confusion_matrix(preds: &[usize], truths: &[usize], levels: usize) -> Result<ConfusionMatrix> {
    check_pair(preds, truths)?;
    let mut counts = vec![0u64; levels * levels];
    for (&p, &t) in preds.iter().zip(truths) {
        if let Some(&label) = [p, t].iter().find(|&&v| v >= levels) {
            return Err(Error::LabelOutOfRange { label, levels });
        }
        counts[t * levels + p] += 1;
    }
    Ok(ConfusionMatrix { levels, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardMetrics {
    pub acc: f64,
    pub adj: f64,
    pub rmse: f64,
    pub pcc: Option<f64>,
}

pub fn standard_metrics(preds: &[usize], truths: &[usize]) -> Result<StandardMetrics> {
    check_pair(preds, truths)?;
    let n = preds.len() as f64;
    let mut exact = 0usize;
    let mut adjacent = 0usize;
    let mut sq = 0.0;
    for (&p, &t) in preds.iter().zip(truths) {
        let diff = p.abs_diff(t);
        exact += (diff == 0) as usize;
        adjacent += (diff <= 1) as usize;
        sq += (diff * diff) as f64;
    }
    Ok(StandardMetrics {
        acc: exact as f64 / n,
        adj: adjacent as f64 / n,
        rmse: math::sqrt(sq / n),
        pcc: pearson(preds, truths),
    })
}

fn pearson(a: &[usize], b: &[usize]) -> Option<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<usize>() as f64 / n;
    let mean_b = b.iter().sum::<usize>() as f64 / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x as f64 - mean_a;
        let dy = y as f64 - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return None;
    }
    Some((cov / math::sqrt(var_a * var_b)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroMetrics {
    pub acc_macro: f64,
    pub rmse_macro: f64,
}

pub fn macro_metrics(preds: &[usize], truths: &[usize]) -> Result<MacroMetrics> {
    check_pair(preds, truths)?;
    // level -> (count, hits, squared error)
    let mut per_level: BTreeMap<usize, (usize, usize, f64)> = BTreeMap::new();
    for (&p, &t) in preds.iter().zip(truths) {
        let entry = per_level.entry(t).or_insert((0, 0, 0.0));
        let diff = p.abs_diff(t);
        entry.0 += 1;
        entry.1 += (diff == 0) as usize;
        entry.2 += (diff * diff) as f64;
    }
    let present = per_level.len() as f64;
    let (mut recall, mut rmse) = (0.0, 0.0);
    for (n, hits, sq) in per_level.values() {
        recall += *hits as f64 / *n as f64;
        rmse += math::sqrt(sq / *n as f64);
    }
    Ok(MacroMetrics {
        acc_macro: recall / present,
        rmse_macro: rmse / present,
    })
}

/// Per-group exact-match accuracy; `None` groups are bucketed as
/// [`UNKNOWN_GROUP`].
pub fn group_accuracy(
    preds: &[usize],
    truths: &[usize],
    groups: &[Option<&str>],
) -> Result<BTreeMap<String, f64>> {
    check_pair(preds, truths)?;
    if groups.len() != preds.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: groups.len(),
        });
    }
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ((&p, &t), g) in preds.iter().zip(truths).zip(groups) {
        let entry = tally.entry(g.unwrap_or(UNKNOWN_GROUP)).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += (p == t) as usize;
    }
    Ok(tally
        .into_iter()
        .map(|(g, (n, hits))| (g.to_string(), hits as f64 / n as f64))
        .collect())
}

/// Everything reported for one evaluation split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub adj: f64,
    pub acc_macro: f64,
    pub rmse: f64,
    pub rmse_macro: f64,
    pub pcc: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub group_acc: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn compute(
        preds: &[usize],
        truths: &[usize],
        groups: &[Option<&str>],
        levels: usize,
    ) -> Result<Self> {
        let confusion = confusion_matrix(preds, truths, levels)?;
        let std = standard_metrics(preds, truths)?;
        let mac = macro_metrics(preds, truths)?;
        Ok(EvalReport {
            acc: std.acc,
            adj: std.adj,
            acc_macro: mac.acc_macro,
            rmse: std.rmse,
            rmse_macro: mac.rmse_macro,
            pcc: std.pcc,
            confusion,
            group_acc: group_accuracy(preds, truths, groups)?,
        })
    }

    /// Recall of one level, `None` if the level is absent from the truths.
    pub fn recall(&self, level: usize) -> Option<f64> {
        let row = self.confusion.row(level);
        let n: u64 = row.iter().sum();
        (n > 0).then(|| row[level] as f64 / n as f64)
    }
}
