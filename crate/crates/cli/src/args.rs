use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Parser, Subcommand};
use protograde::dataset::Split;
use protograde::trainer::Weighting;

fn split_parser() -> impl TypedValueParser<Value = Split> {
    PossibleValuesParser::new(["train", "valid", "test"]).map(|s| s.parse().expect("listed value"))
}

fn scheme_parser() -> impl TypedValueParser<Value = Weighting> {
    PossibleValuesParser::new(["none", "alpha", "inverse"]).map(|s| s.parse().expect("listed value"))
}

/// Prototypical classification heads and class re-weighting for ordinal
/// proficiency grading over pooled embeddings.
#[derive(Debug, Parser)]
#[command(name = "protograde", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic ordinal dataset as an .embl file.
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        /// Generator parameters (JSON); defaults to the built-in preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in --config [default: 42].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the class weights derived from one split's level counts.
    ClassWeights {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "inverse", value_parser = scheme_parser())]
        scheme: Weighting,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value = "train", value_parser = split_parser())]
        split: Split,
        /// Also write the weights object to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train a model; writes the checkpoint, history and a report on --split.
    Train {
        /// Training configuration (JSON); defaults to the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in --config [default: 42].
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the weighting in --config.
        #[arg(long, value_parser = scheme_parser())]
        scheme: Option<Weighting>,
        /// Overrides alpha in --config.
        #[arg(long)]
        alpha: Option<f64>,
        /// Checkpoint whose projection initializes this run.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Split reported after training; skipped when it has no records.
        #[arg(long, default_value = "test", value_parser = split_parser())]
        split: Split,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test", value_parser = split_parser())]
        split: Split,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Seed echoed into the outputs [default: the checkpoint's seed].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Export 2-D principal-plane coordinates of projected embeddings as CSV.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test", value_parser = split_parser())]
        split: Split,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Seeds the power iteration [default: the checkpoint's seed].
        #[arg(long)]
        seed: Option<u64>,
    },
}
