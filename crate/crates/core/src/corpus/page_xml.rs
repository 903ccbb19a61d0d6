//! PAGE XML reader.
//!
//! Every element below `Page` whose local name ends in `Region` becomes an
//! instance; line-level content (`TextLine`, `Word`, `Glyph`) is never read.
//! The region type comes from `custom="... structure {type:X;} ..."` when
//! present, otherwise from the `type` attribute.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{CorpusId, ImageRecord, InstanceRecord, Split};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};

/// How raw region types become source tags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryPolicy {
    /// Raw type -> tag renames, applied before the allow-list.
    #[serde(default)]
    pub rename: BTreeMap<String, String>,
    /// When set, regions whose tag is not listed are reported and skipped.
    #[serde(default)]
    pub allowed: Option<BTreeSet<String>>,
    /// Registry order for the assembled dataset.
    #[serde(default)]
    pub order: Option<Vec<String>>,
}

impl CategoryPolicy {
    fn resolve(&self, raw: &str) -> Option<String> {
        let tag = self.rename.get(raw).cloned().unwrap_or_else(|| raw.to_string());
        match &self.allowed {
            Some(set) if !set.contains(&tag) => None,
            _ => Some(tag),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedPage {
    pub image: ImageRecord,
    pub warnings: Vec<String>,
}

fn structure_type_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"structure\s*\{[^}]*?\btype\s*:\s*([^;}]+)").unwrap())
}

/// Decodes `\uXXXX` escapes as written by some PAGE producers.
fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("\\u") {
        out.push_str(&rest[..pos]);
        let hex = rest.get(pos + 2..pos + 6);
        match hex.and_then(|h| u32::from_str_radix(h, 16).ok()).and_then(char::from_u32) {
            Some(c) => {
                out.push(c);
                rest = &rest[pos + 6..];
            }
            None => {
                out.push_str("\\u");
                rest = &rest[pos + 2..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn region_type(node: roxmltree::Node) -> Option<String> {
    if let Some(custom) = node.attribute("custom") {
        if let Some(c) = structure_type_re().captures(custom) {
            let t = unescape(c[1].trim());
            if !t.is_empty() {
                return Some(t);
            }
        }
    }
    node.attribute("type").map(str::trim).filter(|t| !t.is_empty()).map(str::to_string)
}

fn parse_points(s: &str) -> Option<Vec<Point2>> {
    s.split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some(Point2::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
        })
        .collect()
}

fn file_stem(path: &str) -> String {
    let base = path.rsplit(['/', '\\']).next().unwrap_or(path);
    match base.rfind('.') {
        Some(i) if i > 0 => base[..i].to_string(),
        _ => base.to_string(),
    }
}

fn is_line_level(name: &str) -> bool {
    matches!(name, "TextLine" | "Word" | "Glyph")
}

/// Parses one PAGE XML document into an image record.
pub fn parse_page_xml(document: &[u8], policy: &CategoryPolicy, corpus: CorpusId) -> Result<ParsedPage> {
    let text = std::str::from_utf8(document).map_err(|e| Error::Xml { line: 0, message: e.to_string() })?;
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Xml { line: e.pos().row, message: e.to_string() })?;
    let page = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "Page")
        .ok_or_else(|| Error::Invalid("no Page element".into()))?;
    let line = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row;

    let file_name = page
        .attribute("imageFilename")
        .ok_or_else(|| Error::Invalid(format!("Page without imageFilename (line {})", line(page))))?
        .to_string();
    let dim = |attr: &str| -> Result<u32> {
        let v = page
            .attribute(attr)
            .ok_or_else(|| Error::Invalid(format!("Page without {attr}")))?
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Invalid(format!("Page {attr} is not a number")))?;
        if !(v >= 1.0 && v <= u32::MAX as f64) {
            return Err(Error::Invalid(format!("Page {attr} must be positive, got {v}")));
        }
        Ok(v.round() as u32)
    };
    let (width, height) = (dim("imageWidth")?, dim("imageHeight")?);

    let mut warnings = Vec::new();
    let mut instances = Vec::new();
    for node in page.descendants().filter(|n| n.is_element() && n.tag_name().name().ends_with("Region")) {
        if node.ancestors().any(|a| is_line_level(a.tag_name().name())) {
            continue;
        }
        let where_ = format!("{} {} (line {})", node.tag_name().name(), node.attribute("id").unwrap_or("?"), line(node));
        let Some(raw) = region_type(node) else {
            warnings.push(format!("{where_}: no region type, skipped"));
            continue;
        };
        let Some(tag) = policy.resolve(&raw) else {
            warnings.push(format!("{where_}: unresolvable region type {raw:?}, skipped"));
            continue;
        };
        let coords = node.children().find(|c| c.is_element() && c.tag_name().name() == "Coords");
        let Some(points) = coords.and_then(|c| c.attribute("points")) else {
            warnings.push(format!("{where_}: missing Coords, skipped"));
            continue;
        };
        let Some(pts) = parse_points(points) else {
            warnings.push(format!("{where_}: malformed Coords points, skipped"));
            continue;
        };
        let clamped = Polygon::from_vertices_unchecked(pts).clamped(width as f64, height as f64);
        match Polygon::new(clamped.vertices().to_vec()).and_then(|p| InstanceRecord::from_polygon(p, tag)) {
            Ok(inst) => instances.push(inst),
            Err(e) => warnings.push(format!("{where_}: {e}, skipped")),
        }
    }

    Ok(ParsedPage {
        image: ImageRecord {
            image_id: file_stem(&file_name),
            file_name,
            width,
            height,
            split: Split::Unassigned,
            source_corpus: corpus,
            instances,
        },
        warnings,
    })
}
