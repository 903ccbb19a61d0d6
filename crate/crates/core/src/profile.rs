//! Aspect-ratio complexity profile: per-category mean and quartiles of the
//! OBB aspect ratio, emitted as CSV and as a log-scale SVG chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusDataset, CorpusId, SplitFilter};
use crate::error::{Error, Result};
use crate::geometry::aspect_ratio;

/// Linear-interpolation percentile, rank `q / 100 * (n - 1)`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of an empty sequence".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Invalid(format!("percentile {q} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    let rank = q / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let (_, &mut a, right) = v.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || right.is_empty() {
        return Ok(a);
    }
    let b = right.iter().copied().min_by(f64::total_cmp).expect("non-empty");
    Ok(a + frac * (b - a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub category: String,
    pub n: usize,
    pub mean_ar: f64,
    pub p25_ar: f64,
    pub p75_ar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub corpus_id: String,
    pub rows: Vec<ProfileRow>,
}

fn row(category: &str, mut ratios: Vec<f64>) -> Result<ProfileRow> {
    // summing in sorted order keeps the mean independent of instance order
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    Ok(ProfileRow {
        category: category.to_string(),
        n,
        mean_ar: ratios.iter().sum::<f64>() / n as f64,
        p25_ar: percentile(&ratios, 25.0)?,
        p75_ar: percentile(&ratios, 75.0)?,
    })
}

fn profile_of<'a>(
    corpus_id: String,
    ds: &CorpusDataset,
    images: impl Iterator<Item = &'a crate::corpus::ImageRecord>,
) -> Result<ComplexityProfile> {
    let mut ratios: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for img in images {
        for inst in &img.instances {
            ratios.entry(inst.category()).or_default().push(aspect_ratio(&inst.obb));
        }
    }
    let order = ds.category_ids();
    let mut rows = ratios.into_iter().map(|(c, r)| row(c, r)).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        b.mean_ar
            .total_cmp(&a.mean_ar)
            .then_with(|| order.get(a.category.as_str()).cmp(&order.get(b.category.as_str())))
            .then_with(|| a.category.cmp(&b.category))
    });
    Ok(ComplexityProfile { corpus_id, rows })
}

/// Profile over the images of `split`; categories ordered by descending mean.
pub fn complexity_profile(ds: &CorpusDataset, split: SplitFilter) -> Result<ComplexityProfile> {
    profile_of(ds.corpus_id.to_string(), ds, ds.images_in(split))
}

/// One profile per source corpus, in corpus order.
pub fn profiles_by_source(ds: &CorpusDataset, split: SplitFilter) -> Result<Vec<ComplexityProfile>> {
    let mut corpora: Vec<CorpusId> = ds.images.iter().map(|i| i.source_corpus).collect();
    corpora.sort();
    corpora.dedup();
    corpora
        .into_iter()
        .map(|c| profile_of(c.to_string(), ds, ds.images_in(split).filter(move |i| i.source_corpus == c)))
        .collect()
}

pub const CSV_HEADER: [&str; 6] = ["corpus", "category", "n", "mean_ar", "p25_ar", "p75_ar"];

pub fn emit_profile_csv(profiles: &[ComplexityProfile]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for p in profiles {
        for r in &p.rows {
            w.write_record([
                p.corpus_id.clone(),
                r.category.clone(),
                r.n.to_string(),
                format!("{:.6}", r.mean_ar),
                format!("{:.6}", r.p25_ar),
                format!("{:.6}", r.p75_ar),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Reads CSV written by [`emit_profile_csv`], grouping consecutive rows of
/// the same corpus.
pub fn parse_profile_csv(bytes: &[u8]) -> Result<Vec<ComplexityProfile>> {
    let mut r = csv::Reader::from_reader(bytes);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Invalid("unexpected profile CSV header".into()));
    }
    let mut out: Vec<ComplexityProfile> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Invalid(format!("bad number {:?} in profile CSV", &rec[i])))
        };
        let row = ProfileRow {
            category: rec[1].to_string(),
            n: rec[2].parse().map_err(|_| Error::Invalid(format!("bad count {:?}", &rec[2])))?,
            mean_ar: num(3)?,
            p25_ar: num(4)?,
            p75_ar: num(5)?,
        };
        match out.last_mut() {
            Some(p) if p.corpus_id == rec[0] => p.rows.push(row),
            _ => out.push(ComplexityProfile { corpus_id: rec[0].to_string(), rows: vec![row] }),
        }
    }
    Ok(out)
}

/// Base-10 logarithmic vertical axis mapping `[lo, hi]` onto
/// `[bottom, top]` pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogAxis {
    pub lo: f64,
    pub hi: f64,
    pub top: f64,
    pub bottom: f64,
}

impl LogAxis {
    /// Decade-aligned axis covering `[min, max]`.
    pub fn covering(min: f64, max: f64, top: f64, bottom: f64) -> Self {
        let lo = 10f64.powf(min.max(1.0).log10().floor());
        let mut hi = 10f64.powf(max.max(1.0).log10().ceil());
        if hi <= lo {
            hi = lo * 10.0;
        }
        LogAxis { lo, hi, top, bottom }
    }

    pub fn y_of(&self, v: f64) -> f64 {
        let t = (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10());
        self.bottom - t * (self.bottom - self.top)
    }

    pub fn decades(&self) -> Vec<f64> {
        let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
        (a..=b).map(|e| 10f64.powi(e)).collect()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const COL_W: f64 = 28.0;
const GROUP_GAP: f64 = 24.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 30.0;
const PLOT_H: f64 = 300.0;
const LABEL_H: f64 = 170.0;

/// Standalone SVG: categories along x grouped by corpus, aspect ratio on a
/// log y axis, a dot for the mean and ticks for the 25th/75th percentiles.
pub fn emit_profile_svg(profiles: &[ComplexityProfile]) -> Result<Vec<u8>> {
    if profiles.is_empty() {
        return Err(Error::Empty("no profiles to plot".into()));
    }
    let rows = || profiles.iter().flat_map(|p| p.rows.iter());
    let min = rows().map(|r| r.p25_ar.min(r.mean_ar)).fold(f64::INFINITY, f64::min);
    let max = rows().map(|r| r.p75_ar.max(r.mean_ar)).fold(1.0, f64::max);
    let axis = LogAxis::covering(if min.is_finite() { min } else { 1.0 }, max, TOP, TOP + PLOT_H);

    let n_rows: usize = profiles.iter().map(|p| p.rows.len()).sum();
    let plot_w = n_rows as f64 * COL_W + (profiles.len() - 1) as f64 * GROUP_GAP;
    let width = LEFT + plot_w + 20.0;
    let height = TOP + PLOT_H + LABEL_H;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<style>.mean{{fill:#1f4e79}} .p25,.p75{{stroke:#c55a11;stroke-width:2}} .range{{stroke:#999}} .grid{{stroke:#ddd}}</style>"#
    );
    for d in axis.decades() {
        let y = axis.y_of(d);
        let _ = writeln!(s, r#"<line class="grid" x1="{LEFT:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}"/>"#, LEFT + plot_w);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{d}</text>"#, LEFT - 6.0, y + 3.0);
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">aspect ratio (log)</text>"#,
        TOP + PLOT_H / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{:.1}" stroke="black"/>"#,
        TOP + PLOT_H
    );

    let mut x0 = LEFT;
    for p in profiles {
        let group_w = p.rows.len() as f64 * COL_W;
        let _ = writeln!(s, r#"<g class="corpus" data-corpus="{}">"#, esc(&p.corpus_id));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{}</text>"#,
            x0 + group_w / 2.0,
            TOP - 10.0,
            esc(&p.corpus_id)
        );
        for (i, r) in p.rows.iter().enumerate() {
            let x = x0 + (i as f64 + 0.5) * COL_W;
            let (y25, y75, ym) = (axis.y_of(r.p25_ar), axis.y_of(r.p75_ar), axis.y_of(r.mean_ar));
            let _ = writeln!(s, r#"<line class="range" x1="{x:.2}" y1="{y25:.2}" x2="{x:.2}" y2="{y75:.2}"/>"#);
            let _ = writeln!(
                s,
                r#"<line class="p25" x1="{:.2}" y1="{y25:.2}" x2="{:.2}" y2="{y25:.2}"/>"#,
                x - 6.0,
                x + 6.0
            );
            let _ = writeln!(
                s,
                r#"<line class="p75" x1="{:.2}" y1="{y75:.2}" x2="{:.2}" y2="{y75:.2}"/>"#,
                x - 6.0,
                x + 6.0
            );
            let _ = writeln!(s, r#"<circle class="mean" cx="{x:.2}" cy="{ym:.2}" r="3.5"/>"#);
            let _ = writeln!(
                s,
                r#"<text transform="translate({:.2} {:.1}) rotate(-60)" text-anchor="end">{}</text>"#,
                x + 3.0,
                TOP + PLOT_H + 12.0,
                esc(&r.category)
            );
        }
        let _ = writeln!(s, "</g>");
        x0 += group_w + GROUP_GAP;
    }
    s.push_str("</svg>\n");
    Ok(s.into_bytes())
}
