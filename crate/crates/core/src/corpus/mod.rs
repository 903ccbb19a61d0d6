//! Canonical annotation model shared by every stage of the toolkit.

pub(crate) mod coco;
mod page_xml;
mod validate;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{aabb_of, min_area_obb, Aabb, Obb, Polygon};

pub use coco::{coco_image_ids, parse_coco, ParsedCoco};
pub use page_xml::{parse_page_xml, CategoryPolicy, ParsedPage};
pub use validate::{validate_dataset, Issue, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusId {
    Endp,
    Catmus,
    Horae,
    Merged,
}

impl CorpusId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorpusId::Endp => "endp",
            CorpusId::Catmus => "catmus",
            CorpusId::Horae => "horae",
            CorpusId::Merged => "merged",
        }
    }
}

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorpusId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "endp" => Ok(CorpusId::Endp),
            "catmus" => Ok(CorpusId::Catmus),
            "horae" => Ok(CorpusId::Horae),
            "merged" => Ok(CorpusId::Merged),
            _ => Err(Error::Config(format!("unknown corpus id {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[serde(alias = "train")]
    Trainval,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Trainval => "trainval",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trainval" | "train" => Ok(Split::Trainval),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            _ => Err(Error::UnknownSplit(s.to_string())),
        }
    }
}

/// Image selection by split; `All` covers every image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitFilter {
    Only(Split),
    All,
}

impl SplitFilter {
    pub fn accepts(&self, s: Split) -> bool {
        match self {
            SplitFilter::Only(x) => *x == s,
            SplitFilter::All => true,
        }
    }
}

impl FromStr for SplitFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(SplitFilter::All)
        } else {
            s.parse().map(SplitFilter::Only)
        }
    }
}

impl From<Split> for SplitFilter {
    fn from(s: Split) -> Self {
        SplitFilter::Only(s)
    }
}

/// Which labels to use as categories: the source/leaf categories, or the
/// ancestor at a given hierarchy depth (1 = top level).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LabelLevel {
    #[default]
    Leaf,
    Depth(u32),
}

impl fmt::Display for LabelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelLevel::Leaf => f.write_str("leaf"),
            LabelLevel::Depth(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for LabelLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "leaf" {
            return Ok(LabelLevel::Leaf);
        }
        match s.parse::<u32>() {
            Ok(d) if d >= 1 => Ok(LabelLevel::Depth(d)),
            _ => Err(Error::Config(format!("invalid label level {s:?} (expected leaf or an integer >= 1)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDef {
    pub id: usize,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phrase: Option<String>,
    /// Hierarchy depth, present once the dataset is label-expanded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl CategoryDef {
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        CategoryDef { id, name: name.into(), phrase: None, level: None, parent: None }
    }
}

/// Root-to-node ontology path of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelPath(pub Vec<String>);

impl LabelPath {
    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn leaf(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or("")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Label at `depth` (1-based); paths shorter than `depth` yield their leaf.
    pub fn at_depth(&self, depth: u32) -> &str {
        let i = (depth as usize).min(self.0.len()).saturating_sub(1);
        &self.0[i]
    }

    pub fn truncated(&self, depth: u32) -> LabelPath {
        LabelPath(self.0[..(depth as usize).min(self.0.len())].to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub polygon: Polygon,
    pub source_tag: String,
    pub aabb: Aabb,
    pub obb: Obb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelPath>,
}

impl InstanceRecord {
    /// Derives both boxes from a validated polygon.
    pub fn from_polygon(polygon: Polygon, source_tag: impl Into<String>) -> Result<Self> {
        polygon.check()?;
        let obb = min_area_obb(&polygon)?;
        Ok(InstanceRecord { aabb: aabb_of(&polygon), obb, polygon, source_tag: source_tag.into(), labels: None })
    }

    /// Category name: the deepest label once expanded, else the source tag.
    pub fn category(&self) -> &str {
        match &self.labels {
            Some(p) if !p.is_empty() => p.leaf(),
            _ => &self.source_tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub split: Split,
    pub source_corpus: CorpusId,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDataset {
    pub corpus_id: CorpusId,
    pub categories: Vec<CategoryDef>,
    pub images: Vec<ImageRecord>,
}

impl CorpusDataset {
    pub fn empty(corpus_id: CorpusId) -> Self {
        CorpusDataset { corpus_id, categories: Vec::new(), images: Vec::new() }
    }

    /// Builds the category registry from the instances. With `order`, those
    /// names come first (unused ones included) and unseen tags are appended
    /// alphabetically; without it the registry is alphabetical.
    pub fn assemble(corpus_id: CorpusId, images: Vec<ImageRecord>, order: Option<&[String]>) -> Self {
        let mut names: Vec<String> = order.map(|o| o.to_vec()).unwrap_or_default();
        let mut known: HashSet<String> = names.iter().cloned().collect();
        let seen: BTreeSet<&str> = images.iter().flat_map(|i| i.instances.iter().map(|x| x.category())).collect();
        for s in seen {
            if known.insert(s.to_string()) {
                names.push(s.to_string());
            }
        }
        let categories = names.into_iter().enumerate().map(|(i, n)| CategoryDef::new(i, n)).collect();
        CorpusDataset { corpus_id, categories, images }
    }

    pub fn category_ids(&self) -> HashMap<&str, usize> {
        self.categories.iter().map(|c| (c.name.as_str(), c.id)).collect()
    }

    pub fn category_id(&self, name: &str) -> Option<usize> {
        self.categories.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn instance_count(&self) -> usize {
        self.images.iter().map(|i| i.instances.len()).sum()
    }

    pub fn images_in(&self, filter: SplitFilter) -> impl Iterator<Item = &ImageRecord> {
        self.images.iter().filter(move |i| filter.accepts(i.split))
    }

    pub fn is_expanded(&self) -> bool {
        self.categories.iter().all(|c| c.level.is_some())
            && self.images.iter().all(|i| i.instances.iter().all(|x| x.labels.is_some()))
    }

    /// Renumbers category ids to their positions.
    pub(crate) fn reindex(&mut self) {
        for (i, c) in self.categories.iter_mut().enumerate() {
            c.id = i;
        }
    }

    /// Relabels the dataset at a hierarchy level.
    ///
    /// `Leaf` keeps the leaf categories (dropping pure ancestor nodes from an
    /// expanded registry). `Depth(k)` replaces every label path by its
    /// prefix of length `k`; paths shorter than `k` keep their leaf.
    pub fn at_level(&self, level: LabelLevel) -> Result<CorpusDataset> {
        let expanded = self.is_expanded();
        match level {
            LabelLevel::Leaf if !expanded => Ok(self.clone()),
            LabelLevel::Depth(_) if !expanded => Err(Error::NotExpanded),
            LabelLevel::Leaf => {
                let leaves = self.leafish();
                let mut out = self.clone();
                out.categories.retain(|c| leaves.contains(c.name.as_str()));
                out.reindex();
                Ok(out)
            }
            LabelLevel::Depth(k) => {
                let leaves = self.leafish();
                let mut out = self.clone();
                out.categories.retain(|c| {
                    let l = c.level.unwrap_or(0);
                    l == k || (l < k && leaves.contains(c.name.as_str()))
                });
                out.reindex();
                for img in &mut out.images {
                    for inst in &mut img.instances {
                        if let Some(p) = &inst.labels {
                            inst.labels = Some(p.truncated(k));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Names that are some instance's leaf or have no child in the registry.
    fn leafish(&self) -> HashSet<String> {
        let parents: HashSet<&str> = self.categories.iter().filter_map(|c| c.parent.as_deref()).collect();
        let mut out: HashSet<String> = self
            .categories
            .iter()
            .filter(|c| !parents.contains(c.name.as_str()))
            .map(|c| c.name.clone())
            .collect();
        for img in &self.images {
            for inst in &img.instances {
                out.insert(inst.category().to_string());
            }
        }
        out
    }
}
