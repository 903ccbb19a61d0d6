//! COCO-protocol detection evaluation for axis-aligned and oriented boxes.
//!
//! Matching, accumulation and 101-point interpolation follow the reference
//! COCO evaluator: per image and category the top `max_dets` detections by
//! score are matched greedily, a detection takes the still-unmatched ground
//! truth with the highest IoU (later ground truths win exact ties), and the
//! precision envelope is sampled at recall `0.00, 0.01, ..., 1.00`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::coco::id_key;
use crate::corpus::{coco_image_ids, CorpusDataset, LabelLevel, Split, SplitFilter};
use crate::error::{Error, Result};
use crate::geometry::{iou_aabb, iou_obb, obb_corners, Aabb, Obb};
use crate::ontology::Ontology;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Aabb,
    Obb,
}

impl GeometryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeometryKind::Aabb => "aabb",
            GeometryKind::Obb => "obb",
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aabb" => Ok(GeometryKind::Aabb),
            "obb" => Ok(GeometryKind::Obb),
            _ => Err(Error::Config(format!("unknown geometry {s:?} (expected aabb or obb)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Aabb(Aabb),
    Obb(Obb),
}

impl Geometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            Geometry::Aabb(_) => GeometryKind::Aabb,
            Geometry::Obb(_) => GeometryKind::Obb,
        }
    }

    /// Bounding envelope `[x0, y0, x1, y1]`; shared by both kinds so that an
    /// axis-aligned OBB sorts like the equivalent AABB.
    fn envelope(&self) -> [f64; 4] {
        match *self {
            Geometry::Aabb(b) => [b.x, b.y, b.x + b.w, b.y + b.h],
            Geometry::Obb(b) => {
                let c = obb_corners(&b);
                let xs = c.map(|p| p.x);
                let ys = c.map(|p| p.y);
                let min = |v: [f64; 4]| v.into_iter().fold(f64::INFINITY, f64::min);
                let max = |v: [f64; 4]| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
                [min(xs), min(ys), max(xs), max(ys)]
            }
        }
    }

    fn tie_order(&self, other: &Geometry) -> std::cmp::Ordering {
        let (a, b) = (self.envelope(), other.envelope());
        a.iter().zip(&b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or_else(|| self.key().cmp(&other.key()))
    }

    fn key(&self) -> [u64; 5] {
        match *self {
            Geometry::Aabb(b) => [b.x, b.y, b.w, b.h, 0.0].map(f64::to_bits),
            Geometry::Obb(b) => [b.cx, b.cy, b.w, b.h, b.theta].map(f64::to_bits),
        }
    }
}

/// One scored prediction. `image_id` is either the COCO image id used by the
/// exporter or the dataset's own image id; `category_id` is 1-based, as in
/// exported COCO files.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub category_id: u64,
    pub geometry: Geometry,
    pub score: f64,
}

#[derive(Deserialize)]
struct RawDetection {
    image_id: Value,
    category_id: u64,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    obb: Option<[f64; 5]>,
    score: f64,
}

/// Parses a COCO results array, optionally extended with
/// `"obb": [cx, cy, w, h, theta]`. An entry with `obb` is oriented even if it
/// also carries `bbox`. All entries must have the same kind.
pub fn load_detections(document: &[u8]) -> Result<Vec<Detection>> {
    let raw: Vec<RawDetection> = serde_json::from_slice(document)?;
    let mut kind: Option<GeometryKind> = None;
    let mut out = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        if !r.score.is_finite() || !(0.0..=1.0).contains(&r.score) {
            return Err(Error::Invalid(format!("detection {i}: score {} outside [0, 1]", r.score)));
        }
        let geometry = match (r.obb, r.bbox) {
            (Some(o), _) => {
                if o.iter().any(|v| !v.is_finite()) || o[2] < 0.0 || o[3] < 0.0 {
                    return Err(Error::Invalid(format!("detection {i}: bad obb {o:?}")));
                }
                Geometry::Obb(Obb::new(o[0], o[1], o[2], o[3], o[4]))
            }
            (None, Some(b)) => {
                if b.iter().any(|v| !v.is_finite()) || b[2] < 0.0 || b[3] < 0.0 {
                    return Err(Error::Invalid(format!("detection {i}: bad bbox {b:?}")));
                }
                Geometry::Aabb(Aabb { x: b[0], y: b[1], w: b[2], h: b[3] })
            }
            (None, None) => return Err(Error::Invalid(format!("detection {i}: neither bbox nor obb"))),
        };
        match kind {
            None => kind = Some(geometry.kind()),
            Some(k) if k != geometry.kind() => {
                return Err(Error::GeometryMismatch(format!(
                    "detection {i} is {} but earlier detections are {k}",
                    geometry.kind()
                )))
            }
            _ => {}
        }
        out.push(Detection { image_id: id_key(&r.image_id), category_id: r.category_id, geometry, score: r.score });
    }
    Ok(out)
}

/// Serializes detections in the format read by [`load_detections`].
pub fn write_detections(dets: &[Detection]) -> Result<Vec<u8>> {
    let arr: Vec<Value> = dets
        .iter()
        .map(|d| {
            let image_id = match d.image_id.parse::<u64>() {
                Ok(n) => json!(n),
                Err(_) => json!(d.image_id),
            };
            let mut v = json!({"image_id": image_id, "category_id": d.category_id, "score": d.score});
            match d.geometry {
                Geometry::Aabb(b) => v["bbox"] = json!([b.x, b.y, b.w, b.h]),
                Geometry::Obb(b) => v["obb"] = json!([b.cx, b.cy, b.w, b.h, b.theta]),
            }
            v
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&arr)?;
    out.push(b'\n');
    Ok(out)
}

/// Every ground-truth instance of the selected split echoed back with score
/// 1.0, using the category ids of `level`.
pub fn detections_from_ground_truth(
    ds: &CorpusDataset,
    split: SplitFilter,
    level: LabelLevel,
    kind: GeometryKind,
) -> Result<Vec<Detection>> {
    let view = ds.at_level(level)?;
    let ids = coco_image_ids(&view);
    let cat_ids = view.category_ids();
    let mut out = Vec::new();
    for (img, id) in view.images.iter().zip(ids) {
        if !split.accepts(img.split) {
            continue;
        }
        for inst in &img.instances {
            let geometry = match kind {
                GeometryKind::Aabb => Geometry::Aabb(inst.aabb),
                GeometryKind::Obb => Geometry::Obb(inst.obb),
            };
            out.push(Detection {
                image_id: id.to_string(),
                category_id: cat_ids[inst.category()] as u64 + 1,
                geometry,
                score: 1.0,
            });
        }
    }
    Ok(out)
}

/// Outcome of greedy matching on one image and category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matches {
    /// Detection indices in processing order.
    pub order: Vec<usize>,
    /// Per detection, in input order: index of the matched ground truth.
    pub det_match: Vec<Option<usize>>,
    /// Per ground truth: index of the matching detection.
    pub gt_match: Vec<Option<usize>>,
}

impl Matches {
    pub fn is_tp(&self, det: usize) -> bool {
        self.det_match[det].is_some()
    }
}

/// Stable descending order by score.
fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching over an IoU matrix whose rows are already in processing
/// order. Returns the matched ground truth per row.
fn greedy(ious: &[Vec<f64>], n_gt: usize, threshold: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; n_gt];
    ious.iter()
        .map(|row| {
            let mut best = threshold.min(1.0 - 1e-10);
            let mut m = None;
            for (g, &iou) in row.iter().enumerate() {
                if taken[g] || iou < best {
                    continue;
                }
                best = iou;
                m = Some(g);
            }
            if let Some(g) = m {
                taken[g] = true;
            }
            m
        })
        .collect()
}

/// Matches one image's detections of one category against its ground truth.
/// Detections are taken in descending score, ties by input index.
pub fn match_detections<D, G>(
    dets: &[(D, f64)],
    gts: &[G],
    iou_threshold: f64,
    iou_fn: impl Fn(&D, &G) -> f64,
) -> Matches {
    let scores: Vec<f64> = dets.iter().map(|d| d.1).collect();
    let order = score_order(&scores);
    let ious: Vec<Vec<f64>> = order.iter().map(|&d| gts.iter().map(|g| iou_fn(&dets[d].0, g)).collect()).collect();
    let rows = greedy(&ious, gts.len(), iou_threshold);
    let mut det_match = vec![None; dets.len()];
    let mut gt_match = vec![None; gts.len()];
    for (&d, m) in order.iter().zip(rows) {
        det_match[d] = m;
        if let Some(g) = m {
            gt_match[g] = Some(d);
        }
    }
    Matches { order, det_match, gt_match }
}

/// Ranked detections of one category at one IoU threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub scores: Vec<f64>,
    pub tp: Vec<bool>,
    pub n_gt: usize,
}

impl PrCurve {
    /// Builds a curve from unordered `(score, is_tp)` pairs; ties keep the
    /// given order.
    pub fn from_ranked(mut items: Vec<(f64, bool)>, n_gt: usize) -> Self {
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        PrCurve { scores: items.iter().map(|x| x.0).collect(), tp: items.iter().map(|x| x.1).collect(), n_gt }
    }

    /// `(recall, precision)` after each rank.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut tp = 0usize;
        self.tp
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                tp += t as usize;
                (tp as f64 / self.n_gt as f64, tp as f64 / (i + 1) as f64)
            })
            .collect()
    }

    pub fn final_recall(&self) -> f64 {
        if self.n_gt == 0 {
            return 0.0;
        }
        self.tp.iter().filter(|&&t| t).count() as f64 / self.n_gt as f64
    }
}

/// The 101 recall sample points.
pub fn recall_thresholds() -> [f64; 101] {
    std::array::from_fn(|i| i as f64 * 0.01)
}

/// `0.50, 0.55, ..., 0.95`, bit-identical to the reference evaluator's
/// thresholds.
pub fn iou_thresholds() -> [f64; 10] {
    let step = (0.95 - 0.5) / 9.0;
    std::array::from_fn(|i| if i == 9 { 0.95 } else { i as f64 * step + 0.5 })
}

/// 101-point interpolated AP; `None` when the curve has no positives.
pub fn average_precision(curve: &PrCurve) -> Option<f64> {
    if curve.n_gt == 0 {
        return None;
    }
    let pts = curve.points();
    let mut env: Vec<f64> = pts.iter().map(|p| p.1).collect();
    for i in (1..env.len()).rev() {
        if env[i] > env[i - 1] {
            env[i - 1] = env[i];
        }
    }
    let mut sum = 0.0;
    let mut k = 0;
    for r in recall_thresholds() {
        while k < pts.len() && pts[k].0 < r {
            k += 1;
        }
        if k == pts.len() {
            break;
        }
        sum += env[k];
    }
    Some(sum / 101.0)
}

/// Operating point maximizing F1 over score cut-offs. Cuts fall only after
/// the last detection of an equal-score run; the earliest best cut wins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Lowest score kept at this cut; `None` when nothing is kept.
    pub score_threshold: Option<f64>,
}

pub fn best_f1(curve: &PrCurve) -> OperatingPoint {
    let mut best = OperatingPoint { precision: 0.0, recall: 0.0, f1: 0.0, score_threshold: None };
    let pts = curve.points();
    for (i, &(r, p)) in pts.iter().enumerate() {
        if i + 1 < pts.len() && curve.scores[i + 1] == curve.scores[i] {
            continue;
        }
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        if best.score_threshold.is_none() || f1 > best.f1 {
            best = OperatingPoint { precision: p, recall: r, f1, score_threshold: Some(curve.scores[i]) };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub split: SplitFilter,
    pub geometry: GeometryKind,
    pub level: LabelLevel,
    pub max_dets: usize,
    pub execution: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            split: SplitFilter::Only(Split::Test),
            geometry: GeometryKind::Aabb,
            level: LabelLevel::Leaf,
            max_dets: 100,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryReport {
    pub name: String,
    pub n_gt: usize,
    pub n_det: usize,
    /// AP per IoU threshold; absent when the category has no ground truth.
    pub ap: Option<Vec<f64>>,
    pub map: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    /// Best-F1 operating point on the IoU 0.50 curve.
    pub operating_point: Option<OperatingPoint>,
    /// Mean over thresholds of recall with `max_dets` per image.
    pub ar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub geometry: GeometryKind,
    pub split: String,
    pub label_level: String,
    pub max_dets: usize,
    pub iou_thresholds: Vec<f64>,
    pub categories: Vec<CategoryReport>,
    pub map: f64,
    pub map50: f64,
    pub map75: f64,
    /// Mean best-F1 precision over categories with ground truth.
    pub precision: f64,
    /// Mean best-F1 recall over categories with ground truth.
    pub recall: f64,
    pub ar: f64,
}

impl EvalSummary {
    pub fn category(&self, name: &str) -> Option<&CategoryReport> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    /// Aligned text table: one row per category and a final `all` row.
    pub fn to_table(&self) -> String {
        let name_w = self.categories.iter().map(|c| c.name.len()).chain([8]).max().unwrap_or(8);
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>6}  {:>6}  {:>8}  {:>7}  {:>6}  {:>6}  {:>6}",
            "category", "gt", "mAP50", "mAP50-95", "mAP75", "P", "R", "AR"
        );
        for c in &self.categories {
            let op = c.operating_point;
            let _ = writeln!(
                s,
                "{:<name_w$}  {:>6}  {:>6}  {:>8}  {:>7}  {:>6}  {:>6}  {:>6}",
                c.name,
                c.n_gt,
                cell(c.ap50),
                cell(c.map),
                cell(c.ap75),
                cell(op.map(|o| o.precision)),
                cell(op.map(|o| o.recall)),
                cell(c.ar)
            );
        }
        let n_gt: usize = self.categories.iter().map(|c| c.n_gt).sum();
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>6}  {:>6.3}  {:>8.3}  {:>7.3}  {:>6.3}  {:>6.3}  {:>6.3}",
            "all", n_gt, self.map50, self.map, self.map75, self.precision, self.recall, self.ar
        );
        s
    }
}

/// A detection bound to dataset indices.
#[derive(Debug, Clone, Copy)]
struct Bound {
    image: usize,
    category: usize,
    geometry: Geometry,
    score: f64,
}

fn image_lookup(ds: &CorpusDataset) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for (i, (img, id)) in ds.images.iter().zip(coco_image_ids(ds)).enumerate() {
        m.insert(id.to_string(), i);
        m.entry(img.image_id.clone()).or_insert(i);
    }
    m
}

/// Resolves ids against `view` and puts detections in canonical order:
/// image, category, score descending, then geometry. Only exact duplicates
/// keep their input order, which makes the result independent of it.
fn bind(view: &CorpusDataset, dets: &[Detection], kind: GeometryKind) -> Result<Vec<Bound>> {
    let images = image_lookup(view);
    let mut out = Vec::with_capacity(dets.len());
    for (i, d) in dets.iter().enumerate() {
        if d.geometry.kind() != kind {
            return Err(Error::GeometryMismatch(format!(
                "evaluating {kind} geometry but detection {i} is {}",
                d.geometry.kind()
            )));
        }
        let image = *images.get(&d.image_id).ok_or_else(|| {
            Error::Invalid(format!("detection {i}: unknown image id {:?}", d.image_id))
        })?;
        let category = d.category_id.checked_sub(1).filter(|&c| (c as usize) < view.categories.len()).ok_or_else(
            || Error::Invalid(format!("detection {i}: unknown category id {}", d.category_id)),
        )? as usize;
        out.push(Bound { image, category, geometry: d.geometry, score: d.score });
    }
    canonicalize(&mut out);
    Ok(out)
}

fn canonicalize(dets: &mut [Bound]) {
    dets.sort_by(|a, b| {
        a.image
            .cmp(&b.image)
            .then(a.category.cmp(&b.category))
            .then(b.score.total_cmp(&a.score))
            .then_with(|| a.geometry.tie_order(&b.geometry))
    });
}

/// Per (image, category) result: for each threshold, `(score, tp)` of the
/// kept detections in processing order.
struct Cell {
    category: usize,
    n_gt: usize,
    ranked: Vec<Vec<(f64, bool)>>,
}

fn iou(a: &Geometry, b: &Geometry) -> f64 {
    match (a, b) {
        (Geometry::Aabb(x), Geometry::Aabb(y)) => iou_aabb(x, y),
        (Geometry::Obb(x), Geometry::Obb(y)) => iou_obb(x, y),
        _ => 0.0,
    }
}

fn run(view: &CorpusDataset, dets: Vec<Bound>, cfg: &EvalConfig) -> Result<EvalSummary> {
    let thresholds = iou_thresholds();
    let n_cat = view.categories.len();
    let cat_ids = view.category_ids();

    // images in reference order: ascending COCO id
    let coco_ids = coco_image_ids(view);
    let mut image_order: Vec<usize> =
        (0..view.images.len()).filter(|&i| cfg.split.accepts(view.images[i].split)).collect();
    image_order.sort_by_key(|&i| coco_ids[i]);

    let mut gts: HashMap<(usize, usize), Vec<Geometry>> = HashMap::new();
    for &i in &image_order {
        for inst in &view.images[i].instances {
            let g = match cfg.geometry {
                GeometryKind::Aabb => Geometry::Aabb(inst.aabb),
                GeometryKind::Obb => Geometry::Obb(inst.obb),
            };
            gts.entry((i, cat_ids[inst.category()])).or_default().push(g);
        }
    }
    let mut by_cell: HashMap<(usize, usize), Vec<Bound>> = HashMap::new();
    for d in dets {
        by_cell.entry((d.image, d.category)).or_default().push(d);
    }
    let mut n_det = vec![0usize; n_cat];

    let mut cells: Vec<(usize, usize)> = Vec::new();
    for c in 0..n_cat {
        for &i in &image_order {
            if gts.contains_key(&(i, c)) || by_cell.contains_key(&(i, c)) {
                cells.push((i, c));
            }
        }
    }
    for &(i, c) in &cells {
        n_det[c] += by_cell.get(&(i, c)).map_or(0, Vec::len);
    }

    let results: Vec<Cell> = par::map(cfg.execution, &cells, |&(i, c)| {
        let g = gts.get(&(i, c)).map_or(&[][..], Vec::as_slice);
        let d = by_cell.get(&(i, c)).map_or(&[][..], Vec::as_slice);
        // canonical order is already descending by score
        let kept = &d[..d.len().min(cfg.max_dets)];
        let ious: Vec<Vec<f64>> = kept.iter().map(|x| g.iter().map(|y| iou(&x.geometry, y)).collect()).collect();
        let ranked = thresholds
            .iter()
            .map(|&t| {
                greedy(&ious, g.len(), t).iter().zip(kept).map(|(m, x)| (x.score, m.is_some())).collect()
            })
            .collect();
        Cell { category: c, n_gt: g.len(), ranked }
    });

    let mut per_cat: Vec<Vec<&Cell>> = vec![Vec::new(); n_cat];
    for cell in &results {
        per_cat[cell.category].push(cell);
    }

    let mut categories = Vec::with_capacity(n_cat);
    for (c, cells) in per_cat.iter().enumerate() {
        let name = view.categories[c].name.clone();
        let n_gt: usize = cells.iter().map(|x| x.n_gt).sum();
        if n_gt == 0 {
            categories.push(CategoryReport {
                name,
                n_gt,
                n_det: n_det[c],
                ap: None,
                map: None,
                ap50: None,
                ap75: None,
                operating_point: None,
                ar: None,
            });
            continue;
        }
        let curves: Vec<PrCurve> = (0..thresholds.len())
            .map(|t| PrCurve::from_ranked(cells.iter().flat_map(|x| x.ranked[t].iter().copied()).collect(), n_gt))
            .collect();
        let ap: Vec<f64> = curves.iter().map(|k| average_precision(k).unwrap_or(0.0)).collect();
        let map = ap.iter().sum::<f64>() / ap.len() as f64;
        let ar = curves.iter().map(PrCurve::final_recall).sum::<f64>() / curves.len() as f64;
        categories.push(CategoryReport {
            name,
            n_gt,
            n_det: n_det[c],
            ap50: Some(ap[0]),
            ap75: Some(ap[5]),
            ap: Some(ap),
            map: Some(map),
            operating_point: Some(best_f1(&curves[0])),
            ar: Some(ar),
        });
    }

    let scored: Vec<&CategoryReport> = categories.iter().filter(|c| c.ap.is_some()).collect();
    if scored.is_empty() {
        return Err(Error::Empty("no ground truth in the evaluated split".into()));
    }
    let mean = |f: &dyn Fn(&CategoryReport) -> f64| scored.iter().map(|c| f(c)).sum::<f64>() / scored.len() as f64;
    let op = |c: &CategoryReport| c.operating_point.expect("scored category");
    Ok(EvalSummary {
        geometry: cfg.geometry,
        split: match cfg.split {
            SplitFilter::All => "all".into(),
            SplitFilter::Only(s) => s.to_string(),
        },
        label_level: cfg.level.to_string(),
        max_dets: cfg.max_dets,
        iou_thresholds: thresholds.to_vec(),
        map: mean(&|c| c.map.unwrap_or(0.0)),
        map50: mean(&|c| c.ap50.unwrap_or(0.0)),
        map75: mean(&|c| c.ap75.unwrap_or(0.0)),
        precision: mean(&|c| op(c).precision),
        recall: mean(&|c| op(c).recall),
        ar: mean(&|c| c.ar.unwrap_or(0.0)),
        categories,
    })
}

/// Evaluates detections whose category ids refer to the registry of
/// `ds.at_level(cfg.level)`.
pub fn evaluate(ds: &CorpusDataset, dets: &[Detection], cfg: &EvalConfig) -> Result<EvalSummary> {
    if cfg.max_dets == 0 {
        return Err(Error::Config("max_dets must be positive".into()));
    }
    let view = ds.at_level(cfg.level)?;
    let bound = bind(&view, dets, cfg.geometry)?;
    run(&view, bound, cfg)
}

/// Evaluates leaf-level detections after relabeling both ground truth and
/// detections to their ancestor at `level`. A leaf shallower than `level`
/// keeps its own label.
pub fn evaluate_rollup(
    ds: &CorpusDataset,
    dets: &[Detection],
    o: &Ontology,
    level: LabelLevel,
    cfg: &EvalConfig,
) -> Result<EvalSummary> {
    if !ds.is_expanded() {
        return Err(Error::NotExpanded);
    }
    let leaf = ds.at_level(LabelLevel::Leaf)?;
    let target = ds.at_level(level)?;
    let target_ids = target.category_ids();
    let mut relabeled = Vec::with_capacity(dets.len());
    for (i, d) in dets.iter().enumerate() {
        let name = d
            .category_id
            .checked_sub(1)
            .and_then(|c| leaf.categories.get(c as usize))
            .ok_or_else(|| Error::Invalid(format!("detection {i}: unknown category id {}", d.category_id)))?
            .name
            .clone();
        let path = o.path(&name)?;
        let up = match level {
            LabelLevel::Leaf => name,
            LabelLevel::Depth(k) => path.at_depth(k).to_string(),
        };
        let id = *target_ids
            .get(up.as_str())
            .ok_or_else(|| Error::Invalid(format!("detection {i}: {up:?} is not a category at level {level}")))?;
        relabeled.push(Detection { category_id: id as u64 + 1, ..d.clone() });
    }
    let cfg = EvalConfig { level, ..cfg.clone() };
    evaluate(ds, &relabeled, &cfg)
}
