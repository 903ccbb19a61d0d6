use std::collections::{HashMap, HashSet};
use std::fmt;

use super::CorpusDataset;
use crate::geometry::{aabb_of, CONTAIN_EPS};

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    DegeneratePolygon { image_id: String, index: usize, reason: String },
    OutOfBounds { image_id: String, index: usize },
    DerivedBoxMismatch { image_id: String, index: usize },
    UnregisteredTag { image_id: String, index: usize, tag: String },
    EmptyCategory { name: String },
    DuplicateImageId { image_id: String },
    DuplicateCategoryName { name: String },
    NonContiguousCategoryIds,
    ZeroDimension { image_id: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DegeneratePolygon { image_id, index, reason } => {
                write!(f, "{image_id}#{index}: degenerate polygon ({reason})")
            }
            Issue::OutOfBounds { image_id, index } => write!(f, "{image_id}#{index}: coordinates outside the image"),
            Issue::DerivedBoxMismatch { image_id, index } => {
                write!(f, "{image_id}#{index}: stored box differs from its polygon")
            }
            Issue::UnregisteredTag { image_id, index, tag } => {
                write!(f, "{image_id}#{index}: category {tag:?} not registered")
            }
            Issue::EmptyCategory { name } => write!(f, "empty category {name:?}"),
            Issue::DuplicateImageId { image_id } => write!(f, "duplicate image id {image_id:?}"),
            Issue::DuplicateCategoryName { name } => write!(f, "duplicate category name {name:?}"),
            Issue::NonContiguousCategoryIds => f.write_str("category ids are not 0..n in order"),
            Issue::ZeroDimension { image_id } => write!(f, "{image_id}: zero image dimension"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Inspects a dataset without modifying it.
pub fn validate_dataset(ds: &CorpusDataset) -> ValidationReport {
    let mut issues = Vec::new();

    if ds.categories.iter().enumerate().any(|(i, c)| c.id != i) {
        issues.push(Issue::NonContiguousCategoryIds);
    }
    let mut names = HashSet::new();
    for c in &ds.categories {
        if !names.insert(c.name.as_str()) {
            issues.push(Issue::DuplicateCategoryName { name: c.name.clone() });
        }
    }

    let mut ids = HashSet::new();
    let mut used: HashMap<&str, usize> = HashMap::new();
    for img in &ds.images {
        if !ids.insert(img.image_id.as_str()) {
            issues.push(Issue::DuplicateImageId { image_id: img.image_id.clone() });
        }
        if img.width == 0 || img.height == 0 {
            issues.push(Issue::ZeroDimension { image_id: img.image_id.clone() });
        }
        let (w, h) = (img.width as f64, img.height as f64);
        for (index, inst) in img.instances.iter().enumerate() {
            let image_id = img.image_id.clone();
            // every label on the path counts as a use
            match &inst.labels {
                Some(p) => p.labels().iter().for_each(|l| *used.entry(l.as_str()).or_default() += 1),
                None => *used.entry(inst.category()).or_default() += 1,
            }
            if !names.contains(inst.category()) {
                issues.push(Issue::UnregisteredTag { image_id: image_id.clone(), index, tag: inst.category().into() });
            }
            if let Err(e) = inst.polygon.check() {
                issues.push(Issue::DegeneratePolygon { image_id, index, reason: e.to_string() });
                continue;
            }
            let oob = inst.polygon.vertices().iter().any(|p| {
                p.x < -CONTAIN_EPS || p.y < -CONTAIN_EPS || p.x > w + CONTAIN_EPS || p.y > h + CONTAIN_EPS
            });
            if oob {
                issues.push(Issue::OutOfBounds { image_id: image_id.clone(), index });
            }
            let a = aabb_of(&inst.polygon);
            let b = inst.aabb;
            if [a.x - b.x, a.y - b.y, a.w - b.w, a.h - b.h].iter().any(|d| d.abs() > CONTAIN_EPS) {
                issues.push(Issue::DerivedBoxMismatch { image_id, index });
            }
        }
    }

    for c in &ds.categories {
        if !used.contains_key(c.name.as_str()) {
            issues.push(Issue::EmptyCategory { name: c.name.clone() });
        }
    }
    ValidationReport { issues }
}
