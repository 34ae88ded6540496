//! The `.embl` embedding file: one JSON header line, then one JSON record
//! per line.
//!
//! ```text
//! {"schema":"emb-v1","dim":2,"levels":["A2","B1_1"]}
//! {"id":"s1","group":"JPN","split":"train","label":0,"vec":[0.1,-2]}
//! {"id":"s2","group":null,"split":"test","label":1,"frames":[[0,1],[1,1]]}
//! ```
//!
//! Numbers are written as the shortest plain decimal that reads back to the
//! same `f64`, so files round-trip exactly.

use std::fs;
use std::path::Path;

use protograde::dataset::{Dataset, EmbeddingRecord, LevelSchema, Payload, Split};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::json::{self, Floats};

pub const SCHEMA: &str = "emb-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    dim: usize,
    levels: LevelSchema,
    /// Generator seed, present in synthetic files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    id: String,
    #[serde(default)]
    group: Option<String>,
    split: Split,
    label: usize,
    #[serde(default)]
    vec: Option<Vec<f64>>,
    #[serde(default)]
    frames: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    group: Option<&'a str>,
    split: Split,
    label: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    vec: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frames: Option<&'a [Vec<f64>]>,
}

fn at_line(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {msg}"))
}

/// Parses `.embl` text. A header with no records gives an empty dataset.
pub fn parse(text: &str) -> Result<Dataset, CliError> {
    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty());

    let (n, first) = lines.next().ok_or_else(|| CliError::Data("missing header line".into()))?;
    let header: Header = serde_json::from_str(first).map_err(|e| at_line(n, format!("bad header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(at_line(n, format!("unsupported schema '{}', expected '{SCHEMA}'", header.schema)));
    }
    let mut dataset = Dataset::new(header.levels, header.dim).map_err(|e| at_line(n, e))?;

    for (n, line) in lines {
        let rec: RecordIn = serde_json::from_str(line).map_err(|e| at_line(n, e))?;
        let payload = match (rec.vec, rec.frames) {
            (Some(v), None) => Payload::Vec(v),
            (None, Some(f)) => Payload::Frames(f),
            _ => return Err(at_line(n, "record needs exactly one of 'vec' or 'frames'")),
        };
        dataset
            .push(EmbeddingRecord {
                id: rec.id,
                group: rec.group,
                label: rec.label,
                split: rec.split,
                payload,
            })
            .map_err(|e| at_line(n, e))?;
    }
    Ok(dataset)
}

pub fn load(path: &Path) -> Result<Dataset, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| e.context(path.display()))
}

/// Serializes `dataset`; `seed` is recorded in the header when given.
pub fn to_string(dataset: &Dataset, seed: Option<u64>) -> Result<String, CliError> {
    let header = Header {
        schema: SCHEMA.into(),
        dim: dataset.dim(),
        levels: dataset.schema().clone(),
        seed,
    };
    let mut out = json::to_string(&header, Floats::Exact)?;
    out.push('\n');
    for r in dataset.records() {
        let (vec, frames) = match &r.payload {
            Payload::Vec(v) => (Some(v.as_slice()), None),
            Payload::Frames(f) => (None, Some(f.as_slice())),
        };
        let values = vec.into_iter().flatten().chain(frames.into_iter().flatten().flatten());
        if values.clone().any(|v| !v.is_finite()) {
            return Err(CliError::Numeric(format!("record '{}' has a non-finite value", r.id)));
        }
        out.push_str(&json::to_string(
            &RecordOut {
                id: &r.id,
                group: r.group.as_deref(),
                split: r.split,
                label: r.label,
                vec,
                frames,
            },
            Floats::Exact,
        )?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{"schema":"emb-v1","dim":2,"levels":["A2","B1_1"]}
{"id":"s1","group":"JPN","split":"train","label":0,"vec":[0.1,-2]}
{"id":"s2","group":null,"split":"test","label":1,"frames":[[0,1],[1,1]]}
"#;

    #[test]
    fn parses_both_payload_forms() {
        let ds = parse(DOC).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[1].pooled().unwrap(), vec![0.5, 1.0]);
        assert_eq!(ds.records()[1].group, None);
        assert_eq!(to_string(&ds, None).unwrap(), DOC);
    }

    #[test]
    fn header_only_is_empty() {
        let ds = parse("{\"schema\":\"emb-v1\",\"dim\":3,\"levels\":[\"a\",\"b\"]}\n").unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.dim(), 3);
    }

    #[test]
    fn errors_name_the_line() {
        let bad_dim = DOC.replace("[0.1,-2]", "[0.1]");
        let msg = parse(&bad_dim).unwrap_err().to_string();
        assert!(msg.starts_with("line 2:") && msg.contains("expected 2, found 1"), "{msg}");

        let both = DOC.replace(r#""vec":[0.1,-2]"#, r#""vec":[0.1,-2],"frames":[[1,2]]"#);
        assert!(parse(&both).unwrap_err().to_string().starts_with("line 2:"));

        let bad_label = DOC.replace(r#""label":1"#, r#""label":7"#);
        assert!(parse(&bad_label).unwrap_err().to_string().starts_with("line 3:"));

        let unknown = DOC.replace("emb-v1", "emb-v9");
        assert!(parse(&unknown).unwrap_err().to_string().contains("emb-v9"));

        let extra = DOC.replace(r#""label":0,"#, r#""label":0,"lable":0,"#);
        assert!(parse(&extra).is_err());
        assert!(parse("").is_err());
    }
}
