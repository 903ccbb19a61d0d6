//! Writers for COCO-AABB JSON, YOLO-AABB and YOLO-OBB label files, and the
//! dataset manifest, plus readers for the YOLO formats.
//!
//! Writers build their files in memory; [`write_files`] puts them on disk.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::coco::{CocoAnnotation, CocoCategory, CocoFile, CocoImage};
use crate::corpus::{coco_image_ids, CorpusDataset, ImageRecord, LabelLevel, Split, SplitFilter};
use crate::error::{Error, Result};
use crate::geometry::{obb_corners, polygon_area, Point2};
use crate::par::{self, Execution};
use crate::pipeline::class_counts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    CocoAabb,
    YoloAabb,
    YoloObb,
}

impl ExportFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExportFormat::CocoAabb => "coco-aabb",
            ExportFormat::YoloAabb => "yolo-aabb",
            ExportFormat::YoloObb => "yolo-obb",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "coco-aabb" => Ok(ExportFormat::CocoAabb),
            "yolo-aabb" => Ok(ExportFormat::YoloAabb),
            "yolo-obb" => Ok(ExportFormat::YoloObb),
            _ => Err(Error::Config(format!("unknown export format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSpec {
    pub format: ExportFormat,
    pub label_level: LabelLevel,
    pub output_root: PathBuf,
    pub coordinate_precision: usize,
}

impl ExportSpec {
    pub fn new(format: ExportFormat, output_root: impl Into<PathBuf>) -> Self {
        ExportSpec { format, label_level: LabelLevel::Leaf, output_root: output_root.into(), coordinate_precision: 6 }
    }

    pub fn check(&self) -> Result<()> {
        if self.coordinate_precision < 4 {
            return Err(Error::Config(format!("coordinate precision {} < 4", self.coordinate_precision)));
        }
        Ok(())
    }
}

/// Files produced by a writer, keyed by path relative to the output root.
pub type ExportFiles = BTreeMap<PathBuf, Vec<u8>>;

fn round_to(v: f64, places: usize) -> f64 {
    let s = 10f64.powi(places as i32);
    (v * s).round() / s + 0.0
}

/// `+ 0.0` turns a negative zero into a positive one before formatting.
fn fmt_unit(v: f64, places: usize) -> String {
    format!("{:.*}", places, v.clamp(0.0, 1.0) + 0.0)
}

/// COCO JSON with `bbox = [x, y, w, h]`, the polygon ring as segmentation
/// and the polygon area. Category ids are registry index + 1; annotation ids
/// run from 1.
pub fn write_coco_aabb(ds: &CorpusDataset, spec: &ExportSpec) -> Result<Vec<u8>> {
    spec.check()?;
    let ds = ds.at_level(spec.label_level)?;
    let p = spec.coordinate_precision;
    let ids = coco_image_ids(&ds);
    let cat_ids = ds.category_ids();
    let mut annotations = Vec::with_capacity(ds.instance_count());
    for (img, &image_id) in ds.images.iter().zip(&ids) {
        for inst in &img.instances {
            let b = inst.aabb;
            let ring: Vec<f64> =
                inst.polygon.vertices().iter().flat_map(|q| [round_to(q.x, p), round_to(q.y, p)]).collect();
            annotations.push(CocoAnnotation {
                id: json!(annotations.len() + 1),
                image_id: json!(image_id),
                category_id: cat_ids[inst.category()] as i64 + 1,
                bbox: Some(vec![round_to(b.x, p), round_to(b.y, p), round_to(b.w, p), round_to(b.h, p)]),
                segmentation: Some(json!([ring])),
                area: Some(round_to(polygon_area(&inst.polygon), p)),
                iscrowd: Some(0),
            });
        }
    }
    let file = CocoFile {
        images: ds
            .images
            .iter()
            .zip(&ids)
            .map(|(img, &id)| CocoImage {
                id: json!(id),
                file_name: img.file_name.clone(),
                width: img.width,
                height: img.height,
                image_key: Some(img.image_id.clone()),
                split: Some(img.split),
                source_corpus: Some(img.source_corpus),
            })
            .collect(),
        annotations,
        categories: ds
            .categories
            .iter()
            .map(|c| CocoCategory {
                id: c.id as i64 + 1,
                name: c.name.clone(),
                supercategory: c.parent.clone(),
                phrase: c.phrase.clone(),
                level: c.level,
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file)?;
    out.push(b'\n');
    Ok(out)
}

/// Relative path of an image's label file: `<stem>.txt`, or
/// `<corpus>/<stem>.txt` for merged image ids.
pub fn label_file_path(img: &ImageRecord) -> PathBuf {
    let base = img.file_name.rsplit(['/', '\\']).next().unwrap_or(&img.file_name);
    let stem = match base.rfind('.') {
        Some(i) if i > 0 => &base[..i],
        _ => base,
    };
    match img.image_id.split_once('/') {
        Some((corpus, _)) => PathBuf::from(corpus).join(format!("{stem}.txt")),
        None => PathBuf::from(format!("{stem}.txt")),
    }
}

fn names_file(ds: &CorpusDataset) -> Vec<u8> {
    let mut s = String::new();
    for c in &ds.categories {
        s.push_str(&c.name);
        s.push('\n');
    }
    s.into_bytes()
}

fn yolo_files(
    ds: &CorpusDataset,
    spec: &ExportSpec,
    exec: Execution,
    line: impl Fn(usize, &crate::corpus::InstanceRecord, f64, f64) -> String + Sync + Send,
) -> Result<ExportFiles> {
    spec.check()?;
    let ds = ds.at_level(spec.label_level)?;
    if let Some(img) = ds.images.iter().find(|i| i.width == 0 || i.height == 0) {
        return Err(Error::Invalid(format!("image {} has zero dimension", img.image_id)));
    }
    let cat_ids = ds.category_ids();
    let bodies = par::map(exec, &ds.images, |img| {
        let (w, h) = (img.width as f64, img.height as f64);
        let mut body = String::new();
        for inst in &img.instances {
            body.push_str(&line(cat_ids[inst.category()], inst, w, h));
            body.push('\n');
        }
        (label_file_path(img), body.into_bytes())
    });
    let mut files = ExportFiles::new();
    for (path, body) in bodies {
        let path = Path::new("labels").join(path);
        if files.insert(path.clone(), body).is_some() {
            return Err(Error::Invalid(format!("two images map to label file {}", path.display())));
        }
    }
    files.insert(PathBuf::from("names.txt"), names_file(&ds));
    Ok(files)
}

/// One `labels/<stem>.txt` per image with lines
/// `class x1 y1 x2 y2 x3 y3 x4 y4` (normalized, clamped), plus `names.txt`.
///
/// Corners run counter-clockwise starting from the corner with the smallest
/// `(y, x)` after rounding.
pub fn write_yolo_obb(ds: &CorpusDataset, spec: &ExportSpec, exec: Execution) -> Result<ExportFiles> {
    let p = spec.coordinate_precision;
    yolo_files(ds, spec, exec, |class, inst, w, h| {
        let corners = obb_corners(&inst.obb);
        let norm: Vec<(String, String)> = corners.iter().map(|c| (fmt_unit(c.x / w, p), fmt_unit(c.y / h, p))).collect();
        let key = |i: usize| {
            let (x, y) = (&norm[i].0, &norm[i].1);
            (y.parse::<f64>().unwrap_or(0.0), x.parse::<f64>().unwrap_or(0.0))
        };
        let start = (0..4).min_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap()).unwrap_or(0);
        let mut s = class.to_string();
        for k in 0..4 {
            let (x, y) = &norm[(start + k) % 4];
            s.push(' ');
            s.push_str(x);
            s.push(' ');
            s.push_str(y);
        }
        s
    })
}

/// One `labels/<stem>.txt` per image with lines `class cx cy w h`
/// (normalized, clamped), plus `names.txt`.
pub fn write_yolo_aabb(ds: &CorpusDataset, spec: &ExportSpec, exec: Execution) -> Result<ExportFiles> {
    let p = spec.coordinate_precision;
    yolo_files(ds, spec, exec, |class, inst, w, h| {
        let b = inst.aabb;
        format!(
            "{class} {} {} {} {}",
            fmt_unit((b.x + 0.5 * b.w) / w, p),
            fmt_unit((b.y + 0.5 * b.h) / h, p),
            fmt_unit(b.w / w, p),
            fmt_unit(b.h / h, p)
        )
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct YoloObbLine {
    pub class: usize,
    /// Corners in pixels.
    pub corners: [Point2; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct YoloAabbLine {
    pub class: usize,
    /// `cx, cy, w, h` in pixels.
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

fn fields(line: &str, n: usize, lineno: usize) -> Result<(usize, Vec<f64>)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != n + 1 {
        return Err(Error::Invalid(format!("line {lineno}: expected {} fields, got {}", n + 1, parts.len())));
    }
    let class = parts[0].parse().map_err(|_| Error::Invalid(format!("line {lineno}: bad class index")))?;
    let vals = parts[1..]
        .iter()
        .map(|v| v.parse::<f64>().map_err(|_| Error::Invalid(format!("line {lineno}: bad number {v:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((class, vals))
}

pub fn parse_yolo_obb(text: &str, width: u32, height: u32) -> Result<Vec<YoloObbLine>> {
    let (w, h) = (width as f64, height as f64);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (class, v) = fields(l, 8, i + 1)?;
            let c = |k: usize| Point2::new(v[2 * k] * w, v[2 * k + 1] * h);
            Ok(YoloObbLine { class, corners: [c(0), c(1), c(2), c(3)] })
        })
        .collect()
}

pub fn parse_yolo_aabb(text: &str, width: u32, height: u32) -> Result<Vec<YoloAabbLine>> {
    let (w, h) = (width as f64, height as f64);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (class, v) = fields(l, 4, i + 1)?;
            Ok(YoloAabbLine { class, cx: v[0] * w, cy: v[1] * h, w: v[2] * w, h: v[3] * h })
        })
        .collect()
}

fn split_counts(f: impl Fn(Split) -> usize) -> Value {
    let (tv, te, un) = (f(Split::Trainval), f(Split::Test), f(Split::Unassigned));
    json!({ "trainval": tv, "test": te, "unassigned": un, "total": tv + te + un })
}

/// Dataset manifest: corpus, label level, per-split image and instance
/// counts, the category table with per-split counts, and split membership.
pub fn write_manifest(ds: &CorpusDataset, spec: &ExportSpec) -> Result<Vec<u8>> {
    let ds = ds.at_level(spec.label_level)?;
    let per_split = |s: Split| -> Result<BTreeMap<String, usize>> {
        Ok(class_counts(&ds, SplitFilter::Only(s), LabelLevel::Leaf)?.into_iter().map(|c| (c.category, c.count)).collect())
    };
    let counts: BTreeMap<&str, BTreeMap<String, usize>> = [
        ("trainval", per_split(Split::Trainval)?),
        ("test", per_split(Split::Test)?),
        ("unassigned", per_split(Split::Unassigned)?),
    ]
    .into_iter()
    .collect();
    let categories: Vec<Value> = ds
        .categories
        .iter()
        .map(|c| {
            let get = |s: &str| counts[s].get(&c.name).copied().unwrap_or(0);
            json!({
                "id": c.id,
                "name": c.name,
                "phrase": c.phrase,
                "level": c.level,
                "parent": c.parent,
                "counts": split_counts(|s| get(s.as_str())),
            })
        })
        .collect();
    let members = |s: Split| -> Vec<&str> { ds.images_in(SplitFilter::Only(s)).map(|i| i.image_id.as_str()).collect() };
    let manifest = json!({
        "corpus_id": ds.corpus_id,
        "label_level": spec.label_level.to_string(),
        "images": split_counts(|s| ds.images_in(SplitFilter::Only(s)).count()),
        "instances": split_counts(|s| ds.images_in(SplitFilter::Only(s)).map(|i| i.instances.len()).sum::<usize>()),
        "categories": categories,
        "splits": {
            "trainval": members(Split::Trainval),
            "test": members(Split::Test),
            "unassigned": members(Split::Unassigned),
        },
    });
    let mut out = serde_json::to_vec_pretty(&manifest)?;
    out.push(b'\n');
    Ok(out)
}

/// Runs the writer selected by `spec.format`.
pub fn export(ds: &CorpusDataset, spec: &ExportSpec, exec: Execution) -> Result<ExportFiles> {
    match spec.format {
        ExportFormat::CocoAabb => {
            let mut files = ExportFiles::new();
            files.insert(PathBuf::from("annotations.json"), write_coco_aabb(ds, spec)?);
            Ok(files)
        }
        ExportFormat::YoloAabb => write_yolo_aabb(ds, spec, exec),
        ExportFormat::YoloObb => write_yolo_obb(ds, spec, exec),
    }
}

/// Writes `files` under `root`. On failure every file written by this call
/// is removed again.
pub fn write_files(root: &Path, files: &ExportFiles) -> Result<()> {
    let mut written: Vec<PathBuf> = Vec::new();
    let mut made_dirs: HashSet<PathBuf> = HashSet::new();
    let result = (|| -> Result<()> {
        for (rel, body) in files {
            let path = root.join(rel);
            if let Some(dir) = path.parent() {
                if !dir.exists() {
                    fs::create_dir_all(dir)?;
                    made_dirs.insert(dir.to_path_buf());
                }
            }
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(())
    })();
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        for d in &made_dirs {
            let _ = fs::remove_dir(d);
        }
    }
    result
}
