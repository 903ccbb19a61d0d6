//! `mslayout`: harmonize manuscript layout corpora, export training data and
//! evaluate detections.
//!
//! Exit status is 0 on success, 1 on data errors and 2 on usage or
//! configuration errors. Logs go to stderr; reports go to stdout.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mslayout::corpus::{CorpusId, Split};
use mslayout::eval::GeometryKind;
use mslayout::export::ExportFormat;
use mslayout::io::SourceFormat;
use mslayout::pipeline::FilterRules;

/// Misuse of the command line or of a config file.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser)]
#[command(name = "mslayout", version, about = "Manuscript layout dataset harmonization and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert PAGE XML or COCO annotations into training formats.
    Convert(ConvertArgs),
    /// Filter, label-expand and merge the corpora declared in a run config.
    Harmonize(HarmonizeArgs),
    /// Assign images to trainval/test by seeded shuffle or from a manifest.
    Split(SplitArgs),
    /// Print image and class-instance counts.
    Stats(StatsArgs),
    /// Score detections with COCO-style mAP over axis-aligned or oriented boxes.
    Eval(EvalArgs),
    /// Write the per-category aspect-ratio profile as CSV and SVG.
    Profile(ProfileArgs),
}

/// Where a dataset comes from.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// PAGE XML files or directories, a COCO JSON file, or a dataset.json.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Input format; detected from the input when omitted.
    #[arg(long = "from", value_name = "FORMAT")]
    pub from: Option<SourceFormat>,
    /// Corpus the input belongs to (endp, catmus, horae); needed for PAGE XML
    /// and COCO inputs.
    #[arg(long)]
    pub corpus: Option<CorpusId>,
    /// Only keep regions with these tags (repeatable); others are reported.
    #[arg(long = "allow", value_name = "TAG")]
    pub allow: Vec<String>,
    /// Test image ids, one per line; all other images become trainval.
    #[arg(long, value_name = "PATH")]
    pub split_manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FilterArgs {
    /// Drop line-level categories (TextLine, DefaultLine, ...).
    #[arg(long)]
    pub drop_line_level: bool,
    /// Keep only categories with an instance in this split.
    #[arg(long, value_name = "SPLIT")]
    pub retain_present_in: Option<Split>,
    /// Keep only these categories (repeatable).
    #[arg(long = "keep", value_name = "TAG")]
    pub keep: Vec<String>,
    /// Drop registered categories without any instance.
    #[arg(long)]
    pub drop_empty: bool,
}

impl FilterArgs {
    pub fn rules(&self) -> FilterRules {
        FilterRules {
            drop_line_level: self.drop_line_level,
            retain_only_tags_present_in: self.retain_present_in,
            explicit_keep_tags: (!self.keep.is_empty()).then(|| self.keep.clone()),
            drop_empty: self.drop_empty,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rules() == FilterRules::default()
    }
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
    /// Output format (repeatable).
    #[arg(long = "to", visible_alias = "format", value_name = "FORMAT", default_value = "yolo-obb")]
    pub to: Vec<ExportFormat>,
    /// Label level: leaf, or a hierarchy depth (1 = top level).
    #[arg(long, default_value = "leaf")]
    pub level: String,
    /// Ontology JSON used for levels above leaf; defaults to the built-in one.
    #[arg(long, value_name = "PATH")]
    pub ontology: Option<PathBuf>,
    /// Decimal places for normalized YOLO coordinates.
    #[arg(long, default_value_t = 6)]
    pub precision: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct HarmonizeArgs {
    /// Run config JSON declaring corpora, filters, split and exports.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for corpora split by shuffle; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Export format (repeatable); replaces the config's exports.
    #[arg(long, value_name = "FORMAT")]
    pub format: Vec<ExportFormat>,
    /// Label levels for --format exports (repeatable).
    #[arg(long, value_name = "LEVEL")]
    pub level: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// A dataset.json written by convert or harmonize.
    pub dataset: PathBuf,
    /// Run config whose `split` section supplies defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of images assigned to trainval.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Take the test set from this manifest instead of shuffling.
    #[arg(long, value_name = "PATH")]
    pub split_manifest: Option<PathBuf>,
    /// Overwrite existing split assignments.
    #[arg(long)]
    pub reassign: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub filters: FilterArgs,
    /// Split for the class counts: trainval, test, unassigned or all.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "leaf")]
    pub level: String,
    #[arg(long, value_name = "PATH")]
    pub ontology: Option<PathBuf>,
    /// Also write the counts as JSON to this file.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Ground-truth dataset.json (or any input accepted by convert).
    pub dataset: PathBuf,
    /// Detections JSON: a list of {image_id, category_id, bbox | obb, score}.
    #[arg(long, value_name = "PATH")]
    pub detections: PathBuf,
    /// Run config whose `eval` section supplies defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub geometry: Option<GeometryKind>,
    /// Evaluate at this level; detections keep leaf category ids.
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub max_dets: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub ontology: Option<PathBuf>,
    /// Corpus for COCO ground truth.
    #[arg(long)]
    pub corpus: Option<CorpusId>,
    /// Write eval.json here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "all")]
    pub split: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<mslayout::Error>() {
            return match e {
                mslayout::Error::Config(_) | mslayout::Error::UnknownSplit(_) => 2,
                mslayout::Error::Empty(m) if m == "no input documents" => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => commands::convert(&a),
        Command::Harmonize(a) => commands::harmonize(&a),
        Command::Split(a) => commands::split(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Profile(a) => commands::profile(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
