use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use mslayout::corpus::{CategoryPolicy, CorpusDataset, CorpusId, LabelLevel, Split, SplitFilter};
use mslayout::eval::{evaluate, evaluate_rollup, load_detections, EvalConfig};
use mslayout::export::{export, write_files, write_manifest, ExportFiles, ExportFormat, ExportSpec};
use mslayout::io::{load_dataset, load_source, save_dataset, SourceFormat};
use mslayout::ontology::{expand_labels, load_ontology, Ontology};
use mslayout::par::Execution;
use mslayout::pipeline::{
    apply_split_manifest, class_counts, filter_dataset, merge_corpora, parse_split_manifest, split_dataset,
    write_split_manifest, SplitSpec,
};
use mslayout::profile::{emit_profile_csv, emit_profile_svg, profiles_by_source};

use crate::config::RunConfig;
use crate::{ConvertArgs, EvalArgs, HarmonizeArgs, InputArgs, ProfileArgs, SplitArgs, StatsArgs, UsageError};

const EXEC: Execution = Execution::Parallel;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_ontology_or_default(path: Option<&Path>) -> Result<Ontology> {
    match path {
        Some(p) => Ok(load_ontology(&read(p)?).with_context(|| format!("ontology {}", p.display()))?),
        None => Ok(Ontology::default_ontology()),
    }
}

fn apply_manifest(ds: CorpusDataset, manifest: Option<&Path>) -> Result<CorpusDataset> {
    match manifest {
        Some(p) => {
            let ids = parse_split_manifest(&String::from_utf8_lossy(&read(p)?));
            Ok(apply_split_manifest(&ds, &ids).with_context(|| format!("split manifest {}", p.display()))?)
        }
        None => Ok(ds),
    }
}

fn log_warnings(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

/// Loads the dataset described by `args`, applying the split manifest.
fn load_input(args: &InputArgs) -> Result<CorpusDataset> {
    let format = match args.from {
        Some(f) => f,
        None => mslayout::io::detect_format(&args.inputs[0])
            .with_context(|| format!("detecting format of {}", args.inputs[0].display()))?,
    };
    let corpus = match (format, args.corpus) {
        (SourceFormat::Dataset, c) => c.unwrap_or(CorpusId::Merged),
        (_, Some(c)) => c,
        (_, None) => return Err(UsageError(format!("--corpus is required for {format} input")).into()),
    };
    let policy = CategoryPolicy {
        allowed: (!args.allow.is_empty()).then(|| args.allow.iter().cloned().collect()),
        ..Default::default()
    };
    let loaded = load_source(&args.inputs, Some(format), corpus, &policy, EXEC)?;
    log_warnings(&loaded.warnings);
    apply_manifest(loaded.dataset, args.split_manifest.as_deref())
}

fn parse_level(s: &str) -> Result<LabelLevel> {
    Ok(s.parse::<LabelLevel>()?)
}

/// Label-expands `ds` when a level above leaf is requested.
fn for_level(ds: CorpusDataset, level: LabelLevel, ontology: Option<&Path>) -> Result<CorpusDataset> {
    if level == LabelLevel::Leaf || ds.is_expanded() {
        return Ok(ds);
    }
    Ok(expand_labels(&ds, &load_ontology_or_default(ontology)?)?)
}

fn level_dir(level: LabelLevel) -> String {
    match level {
        LabelLevel::Leaf => "leaf".into(),
        LabelLevel::Depth(d) => format!("level-{d}"),
    }
}

/// Export `format` under `prefix/<format>/`.
fn export_into(
    files: &mut ExportFiles,
    prefix: &Path,
    ds: &CorpusDataset,
    format: ExportFormat,
    level: LabelLevel,
    precision: usize,
) -> Result<()> {
    let spec = ExportSpec { label_level: level, coordinate_precision: precision, ..ExportSpec::new(format, prefix) };
    for (path, bytes) in export(ds, &spec, EXEC)? {
        files.insert(prefix.join(format.as_str()).join(path), bytes);
    }
    Ok(())
}

fn split_counts(ds: &CorpusDataset) -> (usize, usize, usize) {
    let n = |s| ds.images_in(SplitFilter::Only(s)).count();
    (n(Split::Trainval), n(Split::Test), n(Split::Unassigned))
}

fn summary_line(ds: &CorpusDataset) -> String {
    let (tv, te, un) = split_counts(ds);
    format!(
        "{} images (trainval {tv}, test {te}, unassigned {un}), {} instances, {} categories",
        ds.images.len(),
        ds.instance_count(),
        ds.categories.len()
    )
}

fn write_outputs(root: &Path, files: &ExportFiles) -> Result<()> {
    write_files(root, files).with_context(|| format!("writing outputs to {}", root.display()))?;
    log::info!("wrote {} files under {}", files.len(), root.display());
    Ok(())
}

pub fn convert(args: &ConvertArgs) -> Result<()> {
    let level = parse_level(&args.level)?;
    let mut ds = load_input(&args.input)?;
    if !args.filters.is_empty() {
        ds = filter_dataset(&ds, &args.filters.rules())?;
    }
    let ds = for_level(ds, level, args.ontology.as_deref())?;
    let ds = if ds.is_expanded() { ds } else { load_ontology_or_default(args.ontology.as_deref())?.attach_phrases(&ds) };
    let mut files = ExportFiles::new();
    let formats: BTreeSet<ExportFormat> = args.to.iter().copied().collect();
    for &format in &formats {
        export_into(&mut files, Path::new(""), &ds, format, level, args.precision)?;
    }
    let spec = ExportSpec { label_level: level, ..ExportSpec::new(ExportFormat::CocoAabb, &args.out) };
    files.insert("manifest.json".into(), write_manifest(&ds, &spec)?);
    files.insert("dataset.json".into(), save_dataset(&ds)?);
    write_outputs(&args.out, &files)?;
    println!("{}: {}", ds.corpus_id, summary_line(&ds));
    Ok(())
}

pub fn harmonize(args: &HarmonizeArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    if cfg.corpora.is_empty() {
        return Err(UsageError("run config declares no corpora".into()).into());
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| UsageError("no output directory (use --out or `output` in the config)".into()))?;
    let ontology = load_ontology_or_default(cfg.ontology.as_deref())?;

    let mut parts = Vec::new();
    for c in &cfg.corpora {
        let loaded = load_source(&c.inputs, c.format, c.id, &c.policy, EXEC).with_context(|| format!("corpus {}", c.id))?;
        log_warnings(&loaded.warnings);
        let mut ds = apply_manifest(loaded.dataset, c.split_manifest.as_deref())?;
        if let Some(mut spec) = cfg.split {
            // only corpora that arrive without any assignment are shuffled
            if ds.images.iter().all(|i| i.split == Split::Unassigned) {
                spec.seed = args.seed.unwrap_or(spec.seed);
                ds = split_dataset(&ds, &spec)?;
            }
        }
        let ds = filter_dataset(&ds, c.filters.as_ref().unwrap_or(&cfg.filters))?;
        log::info!("{}: {}", c.id, summary_line(&ds));
        parts.push(ds);
    }
    let merged = merge_corpora(&parts, &ontology)?;

    // (format, level, precision) requests; flags replace the config's list
    let mut requests: Vec<(ExportFormat, LabelLevel, usize)> = Vec::new();
    if args.format.is_empty() {
        for e in &cfg.exports {
            for l in &e.levels {
                requests.push((e.format, parse_level(l)?, e.precision));
            }
        }
    } else {
        let levels = if args.level.is_empty() { vec!["leaf".to_string()] } else { args.level.clone() };
        for &f in &args.format {
            for l in &levels {
                requests.push((f, parse_level(l)?, 6));
            }
        }
    }
    let mut levels: BTreeMap<String, LabelLevel> = BTreeMap::from([(level_dir(LabelLevel::Leaf), LabelLevel::Leaf)]);
    levels.extend(requests.iter().map(|r| (level_dir(r.1), r.1)));

    let mut files = ExportFiles::new();
    files.insert("dataset.json".into(), save_dataset(&merged)?);
    files.insert("split_test.txt".into(), write_split_manifest(&merged).into_bytes());
    for (dir, &level) in &levels {
        let spec = ExportSpec { label_level: level, ..ExportSpec::new(ExportFormat::CocoAabb, &out) };
        files.insert(Path::new(dir).join("manifest.json"), write_manifest(&merged, &spec)?);
    }
    for &(format, level, precision) in &requests {
        export_into(&mut files, Path::new(&level_dir(level)), &merged, format, level, precision)?;
    }
    write_outputs(&out, &files)?;

    println!("merged: {}", summary_line(&merged));
    for (dir, &level) in &levels {
        let names: Vec<String> = merged.at_level(level)?.categories.into_iter().map(|c| c.name).collect();
        println!("{dir}: {}", names.join(", "));
    }
    Ok(())
}

pub fn split(args: &SplitArgs) -> Result<()> {
    let ds = load_dataset(&read(&args.dataset)?).with_context(|| format!("dataset {}", args.dataset.display()))?;
    let ds = if args.split_manifest.is_some() {
        apply_manifest(ds, args.split_manifest.as_deref())?
    } else {
        let mut spec = match &args.config {
            Some(p) => RunConfig::load(p)?.split.unwrap_or_default(),
            None => SplitSpec::default(),
        };
        spec.seed = args.seed.unwrap_or(spec.seed);
        spec.trainval_fraction = args.fraction.unwrap_or(spec.trainval_fraction);
        spec.reassign |= args.reassign;
        split_dataset(&ds, &spec)?
    };
    let mut files = ExportFiles::new();
    files.insert("dataset.json".into(), save_dataset(&ds)?);
    files.insert("split_test.txt".into(), write_split_manifest(&ds).into_bytes());
    write_outputs(&args.out, &files)?;
    println!("{}: {}", ds.corpus_id, summary_line(&ds));
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let level = parse_level(&args.level)?;
    let split: SplitFilter = args.split.parse()?;
    let mut ds = load_input(&args.input)?;
    if !args.filters.is_empty() {
        ds = filter_dataset(&ds, &args.filters.rules())?;
    }
    let ds = for_level(ds, level, args.ontology.as_deref())?;

    let mut by_corpus: BTreeMap<CorpusId, [usize; 4]> = BTreeMap::new();
    for img in &ds.images {
        let row = by_corpus.entry(img.source_corpus).or_default();
        row[match img.split {
            Split::Trainval => 0,
            Split::Test => 1,
            Split::Unassigned => 2,
        }] += 1;
        row[3] += img.instances.len();
    }
    let counts = class_counts(&ds, split, level)?;
    let total: usize = counts.iter().map(|c| c.count).sum();

    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<10} {:>9} {:>6} {:>11} {:>10}", "corpus", "trainval", "test", "unassigned", "instances")?;
    for (c, r) in &by_corpus {
        writeln!(out, "{:<10} {:>9} {:>6} {:>11} {:>10}", c.as_str(), r[0], r[1], r[2], r[3])?;
    }
    writeln!(out)?;
    let split_name = match split {
        SplitFilter::All => "all",
        SplitFilter::Only(s) => s.as_str(),
    };
    writeln!(out, "class instances (split {split_name}, level {level})")?;
    let w = counts.iter().map(|c| c.category.len()).chain([5]).max().unwrap_or(5);
    for c in &counts {
        writeln!(out, "  {:<w$}  {:>6}", c.category, c.count)?;
    }
    writeln!(out, "  {:<w$}  {:>6}", "Total", total)?;

    if let Some(path) = &args.json {
        let images: Vec<_> = by_corpus
            .iter()
            .map(|(c, r)| json!({"corpus": c, "trainval": r[0], "test": r[1], "unassigned": r[2], "instances": r[3]}))
            .collect();
        let doc = json!({
            "images": images,
            "split": split_name,
            "level": level.to_string(),
            "counts": counts,
            "total": total,
        });
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let section = match &args.config {
        Some(p) => RunConfig::load(p)?.eval,
        None => None,
    };
    let mut cfg = EvalConfig { execution: EXEC, ..Default::default() };
    let mut level = LabelLevel::Leaf;
    if let Some(s) = &section {
        cfg.geometry = s.geometry.unwrap_or(cfg.geometry);
        cfg.max_dets = s.max_dets.unwrap_or(cfg.max_dets);
        if let Some(sp) = &s.split {
            cfg.split = sp.parse()?;
        }
        if let Some(l) = &s.level {
            level = parse_level(l)?;
        }
    }
    cfg.geometry = args.geometry.unwrap_or(cfg.geometry);
    cfg.max_dets = args.max_dets.unwrap_or(cfg.max_dets);
    if let Some(sp) = &args.split {
        cfg.split = sp.parse()?;
    }
    if let Some(l) = &args.level {
        level = parse_level(l)?;
    }
    if cfg.max_dets == 0 {
        return Err(UsageError("--max-dets must be positive".into()).into());
    }

    let corpus = args.corpus.unwrap_or(CorpusId::Merged);
    let gt = load_source(std::slice::from_ref(&args.dataset), None, corpus, &CategoryPolicy::default(), EXEC)?;
    log_warnings(&gt.warnings);
    let ds = gt.dataset;
    let dets = load_detections(&read(&args.detections)?).with_context(|| format!("detections {}", args.detections.display()))?;
    let summary = match level {
        LabelLevel::Leaf => evaluate(&ds, &dets, &cfg)?,
        LabelLevel::Depth(_) if !ds.is_expanded() => {
            return Err(UsageError("levels above leaf need a harmonized (label-expanded) dataset".into()).into())
        }
        LabelLevel::Depth(_) => evaluate_rollup(&ds, &dets, &load_ontology_or_default(args.ontology.as_deref())?, level, &cfg)?,
    };
    print!("{}", summary.to_table());
    println!(
        "mAP@.50:.95 = {:.3}  mAP@.50 = {:.3}  mAP@.75 = {:.3}  AR = {:.3}",
        summary.map, summary.map50, summary.map75, summary.ar
    );
    if let Some(out) = &args.out {
        let files = ExportFiles::from([(PathBuf::from("eval.json"), summary.to_json()?)]);
        write_outputs(out, &files)?;
    }
    Ok(())
}

pub fn profile(args: &ProfileArgs) -> Result<()> {
    let split: SplitFilter = args.split.parse()?;
    let ds = load_input(&args.input)?;
    let profiles = profiles_by_source(&ds, split)?;
    let rows: usize = profiles.iter().map(|p| p.rows.len()).sum();
    if rows == 0 {
        return Err(mslayout::Error::Empty("no instances to profile".into()).into());
    }
    let files = ExportFiles::from([
        (PathBuf::from("profile.csv"), emit_profile_csv(&profiles)?),
        (PathBuf::from("profile.svg"), emit_profile_svg(&profiles)?),
    ]);
    write_outputs(&args.out, &files)?;
    for p in &profiles {
        for r in &p.rows {
            println!("{:<8} {:<32} n={:<6} mean={:.3} p25={:.3} p75={:.3}", p.corpus_id, r.category, r.n, r.mean_ar, r.p25_ar, r.p75_ar);
        }
    }
    Ok(())
}
