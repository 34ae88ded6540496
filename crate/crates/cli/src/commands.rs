use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use protograde::dataset::{class_frequencies, gen_synthetic, Dataset, Split, SynthParams};
use protograde::embed2d::PrincipalPlane;
use protograde::model::predict;
use protograde::trainer::{self, TrainConfig, Weighting};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::error::CliError;
use crate::json::{self, Floats};
use crate::output::Staged;
use crate::{embl, report};

pub const CHECKPOINT_FILE: &str = "model.ckpt.json";
pub const HISTORY_FILE: &str = "train.history.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const GROUPS_FILE: &str = "groups.json";

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn gen_synth(out: &Path, config: Option<&Path>, seed: Option<u64>) -> Result<Staged, CliError> {
    let mut params: SynthParams = config.map(read_json).transpose()?.unwrap_or_default();
    if let Some(seed) = seed {
        params.seed = seed;
    }
    let dataset = gen_synthetic(&params)?;
    let mut staged = Staged::default();
    staged.add(out, embl::to_string(&dataset, Some(params.seed))?);
    Ok(staged)
}

#[derive(Serialize)]
struct WeightsOut<'a> {
    scheme: Weighting,
    alpha: Option<f64>,
    weights: &'a [f64],
    seed: u64,
}

/// Returns the weights object as a JSON line plus any file to write.
pub fn class_weights(
    data: &Path,
    scheme: Weighting,
    alpha: f64,
    split: Split,
    out: Option<&Path>,
    seed: u64,
) -> Result<(String, Staged), CliError> {
    let dataset = embl::load(data)?;
    let config = TrainConfig {
        weighting: scheme,
        alpha,
        ..TrainConfig::default()
    };
    let counts = class_frequencies(&dataset, split)?.counts;
    let weights = config.scheme().weights(&counts)?;
    let text = json::to_string(
        &WeightsOut {
            scheme,
            alpha: config.scheme().alpha(),
            weights: weights.as_slice(),
            seed,
        },
        Floats::Exact,
    )?;
    let mut staged = Staged::default();
    if let Some(path) = out {
        staged.add(path, format!("{text}\n"));
    }
    Ok((text, staged))
}

pub struct TrainArgs<'a> {
    pub config: Option<&'a Path>,
    pub data: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub scheme: Option<Weighting>,
    pub alpha: Option<f64>,
    pub warm_start: Option<&'a Path>,
    pub split: Split,
}

pub fn train(args: TrainArgs<'_>) -> Result<Staged, CliError> {
    let mut config: TrainConfig = args.config.map(read_json).transpose()?.unwrap_or_default();
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(scheme) = args.scheme {
        config.weighting = scheme;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    config.validate().map_err(|e| CliError::from(e).context("config"))?;
    let dataset = embl::load(args.data)?;
    let warm = args.warm_start.map(Checkpoint::load).transpose()?;
    if let Some(w) = &warm {
        w.check_compatible(dataset.schema(), dataset.dim())
            .map_err(|e| e.context("warm start"))?;
    }

    let (model, history) = trainer::train(&config, &dataset, warm.as_ref().map(|c| &c.model))?;
    let seed = config.seed;
    let ckpt = Checkpoint::new(config, dataset.schema().clone(), model);

    let mut staged = Staged::default();
    staged.add(args.out.join(CHECKPOINT_FILE), ckpt.to_bytes()?);
    staged.add(args.out.join(HISTORY_FILE), report::history_json(&history, seed)?);
    if dataset.split(args.split).next().is_some() {
        add_eval_reports(&mut staged, args.out, &ckpt, &dataset, args.split, seed)?;
    }
    Ok(staged)
}

fn add_eval_reports(
    staged: &mut Staged,
    dir: &Path,
    ckpt: &Checkpoint,
    dataset: &Dataset,
    split: Split,
    seed: u64,
) -> Result<(), CliError> {
    let (_, rep) = trainer::evaluate(&ckpt.model, dataset, split)?;
    staged.add(dir.join(METRICS_FILE), report::metrics_json(&rep, split, seed)?);
    staged.add(
        dir.join(CONFUSION_FILE),
        report::confusion_csv(&rep.confusion, dataset.schema().names(), seed)?,
    );
    staged.add(dir.join(GROUPS_FILE), report::groups_json(&rep, split, seed)?);
    Ok(())
}

fn load_pair(model: &Path, data: &Path) -> Result<(Checkpoint, Dataset), CliError> {
    let ckpt = Checkpoint::load(model)?;
    let dataset = embl::load(data)?;
    ckpt.check_compatible(dataset.schema(), dataset.dim())?;
    Ok((ckpt, dataset))
}

pub fn eval(model: &Path, data: &Path, split: Split, out: &Path, seed: Option<u64>) -> Result<Staged, CliError> {
    let (ckpt, dataset) = load_pair(model, data)?;
    let mut staged = Staged::default();
    add_eval_reports(&mut staged, out, &ckpt, &dataset, split, seed.unwrap_or(ckpt.seed))?;
    Ok(staged)
}

pub fn project(model: &Path, data: &Path, split: Split, out: &Path, seed: Option<u64>) -> Result<Staged, CliError> {
    let (ckpt, dataset) = load_pair(model, data)?;
    let seed = seed.unwrap_or(ckpt.seed);
    let records: Vec<_> = dataset.split(split).collect();
    if records.is_empty() {
        return Err(protograde::Error::EmptySplit(split).into());
    }
    let names = dataset.schema().names();
    let mut projected = Vec::with_capacity(records.len());
    let mut preds = Vec::with_capacity(records.len());
    for r in &records {
        let x = r.pooled()?;
        projected.push(ckpt.model.project(&x)?);
        preds.push(predict(&ckpt.model.forward(&x)?));
    }
    let plane = PrincipalPlane::fit(&projected, seed)?;

    let mut rows = vec![["id", "label", "pred", "x", "y"].map(String::from).to_vec()];
    for ((r, p), pred) in records.iter().zip(&projected).zip(preds) {
        let [x, y] = plane.transform(p);
        rows.push(vec![
            r.id.clone(),
            names[r.label].clone(),
            names[pred].clone(),
            json::format_f64(x, Floats::Exact),
            json::format_f64(y, Floats::Exact),
        ]);
    }
    let mut staged = Staged::default();
    staged.add(out, report::csv_with_seed(seed, &rows)?);
    Ok(staged)
}

pub(crate) fn announce(out: &mut dyn Write, written: &[PathBuf]) {
    for path in written {
        let _ = writeln!(out, "wrote {}", path.display());
    }
}
