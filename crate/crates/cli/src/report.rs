//! Evaluation and training reports.

use std::collections::BTreeMap;

use protograde::dataset::Split;
use protograde::metrics::{ConfusionMatrix, EvalReport};
use protograde::trainer::TrainHistory;
use serde::Serialize;

use crate::error::CliError;
use crate::json::{self, Floats};

/// Significant digits of every scalar in `metrics.json` and `groups.json`.
pub const METRIC_DIGITS: usize = 12;

#[derive(Serialize)]
struct Metrics {
    seed: u64,
    split: Split,
    records: u64,
    acc: f64,
    adj: f64,
    acc_macro: f64,
    rmse: f64,
    rmse_macro: f64,
    /// `null` when either sequence is constant.
    pcc: Option<f64>,
}

pub fn metrics_json(report: &EvalReport, split: Split, seed: u64) -> Result<Vec<u8>, CliError> {
    let m = Metrics {
        seed,
        split,
        records: report.confusion.total(),
        acc: report.acc,
        adj: report.adj,
        acc_macro: report.acc_macro,
        rmse: report.rmse,
        rmse_macro: report.rmse_macro,
        pcc: report.pcc,
    };
    json::to_file_bytes(&m, Floats::Significant(METRIC_DIGITS))
}

#[derive(Serialize)]
struct Groups<'a> {
    seed: u64,
    split: Split,
    group_acc: &'a BTreeMap<String, f64>,
}

pub fn groups_json(report: &EvalReport, split: Split, seed: u64) -> Result<Vec<u8>, CliError> {
    let g = Groups {
        seed,
        split,
        group_acc: &report.group_acc,
    };
    json::to_file_bytes(&g, Floats::Significant(METRIC_DIGITS))
}

#[derive(Serialize)]
struct History<'a> {
    seed: u64,
    #[serde(flatten)]
    history: &'a TrainHistory,
}

pub fn history_json(history: &TrainHistory, seed: u64) -> Result<Vec<u8>, CliError> {
    json::to_file_bytes(&History { seed, history }, Floats::Exact)
}

/// A `# seed=N` comment line followed by CSV rows.
pub(crate) fn csv_with_seed(seed: u64, rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut out = format!("# seed={seed}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        for row in rows {
            w.write_record(row).map_err(|e| CliError::Data(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| CliError::Data(format!("csv: {e}")))?;
    }
    Ok(out)
}

/// Rows are true levels, columns predicted levels; the first row and
/// column carry the level names.
pub fn confusion_csv(confusion: &ConfusionMatrix, levels: &[String], seed: u64) -> Result<Vec<u8>, CliError> {
    let mut rows = Vec::with_capacity(levels.len() + 1);
    rows.push(std::iter::once("truth/pred".to_string()).chain(levels.iter().cloned()).collect());
    for (t, name) in levels.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(confusion.row(t).iter().map(u64::to_string));
        rows.push(row);
    }
    csv_with_seed(seed, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use protograde::metrics::EvalReport;

    #[test]
    fn metrics_file_shape() {
        let report = EvalReport::compute(&[2, 2], &[1, 3], &[None, Some("KOR")], 5).unwrap();
        let text = String::from_utf8(metrics_json(&report, Split::Test, 7).unwrap()).unwrap();
        assert_eq!(
            text,
            "{\"seed\":7,\"split\":\"test\",\"records\":2,\"acc\":0,\"adj\":1.00000000000,\
             \"acc_macro\":0,\"rmse\":1.00000000000,\"rmse_macro\":1.00000000000,\"pcc\":null}\n"
        );
        let groups = String::from_utf8(groups_json(&report, Split::Test, 7).unwrap()).unwrap();
        assert!(groups.contains("\"group_acc\":{\"KOR\":0,\"unknown\":0}"), "{groups}");
    }

    #[test]
    fn confusion_layout() {
        let report = EvalReport::compute(&[0, 1, 1], &[0, 1, 0], &[None; 3], 2).unwrap();
        let names = vec!["lo".to_string(), "hi,x".to_string()];
        let text = String::from_utf8(confusion_csv(&report.confusion, &names, 3).unwrap()).unwrap();
        assert_eq!(text, "# seed=3\ntruth/pred,lo,\"hi,x\"\nlo,1,1\n\"hi,x\",0,1\n");
    }
}
