//! COCO JSON reader and the shared COCO document types.
//!
//! Besides the standard fields, images may carry `image_key`, `split` and
//! `source_corpus`, and categories may carry `phrase` and `level`; these are
//! written by the exporter so that a round trip keeps identifiers and splits.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CategoryDef, CorpusDataset, CorpusId, ImageRecord, InstanceRecord, Split};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CocoFile {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CocoImage {
    pub id: Value,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_corpus: Option<CorpusId>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CocoAnnotation {
    #[serde(default)]
    pub id: Value,
    pub image_id: Value,
    pub category_id: i64,
    #[serde(default)]
    pub bbox: Option<Vec<f64>>,
    #[serde(default)]
    pub segmentation: Option<Value>,
    #[serde(default)]
    pub area: Option<f64>,
    #[serde(default)]
    pub iscrowd: Option<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CocoCategory {
    pub id: i64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phrase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct ParsedCoco {
    pub dataset: CorpusDataset,
    pub warnings: Vec<String>,
}

pub(crate) fn id_key(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Numeric image ids used in COCO files for `ds`: the image ids themselves
/// when they are all distinct integers, otherwise `1..=n` in image order.
pub fn coco_image_ids(ds: &CorpusDataset) -> Vec<u64> {
    let parsed: Option<Vec<u64>> = ds.images.iter().map(|i| i.image_id.parse::<u64>().ok()).collect();
    if let Some(ids) = parsed {
        let uniq: HashSet<u64> = ids.iter().copied().collect();
        if uniq.len() == ids.len() {
            return ids;
        }
    }
    (1..=ds.images.len() as u64).collect()
}

fn first_ring(seg: &Value) -> Option<Vec<f64>> {
    let arr = seg.as_array()?;
    let ring = match arr.first()? {
        Value::Array(inner) => inner,
        Value::Number(_) => arr,
        _ => return None,
    };
    ring.iter().map(Value::as_f64).collect()
}

/// Parses a COCO detection-annotation document.
///
/// Category ids are compacted to `0..n` in ascending COCO id order. The
/// instance polygon is the first segmentation ring when there is one,
/// otherwise the bbox rectangle; coordinates are clamped to the image.
pub fn parse_coco(document: &[u8], corpus: CorpusId) -> Result<ParsedCoco> {
    let file: CocoFile = serde_json::from_slice(document)?;
    let mut warnings = Vec::new();

    let mut cats: Vec<&CocoCategory> = file.categories.iter().collect();
    cats.sort_by_key(|c| c.id);
    let mut cat_index: HashMap<i64, usize> = HashMap::new();
    let mut names = HashSet::new();
    let mut categories = Vec::with_capacity(cats.len());
    for (i, c) in cats.iter().enumerate() {
        if cat_index.insert(c.id, i).is_some() {
            return Err(Error::Invalid(format!("duplicate category id {}", c.id)));
        }
        if !names.insert(c.name.as_str()) {
            return Err(Error::Invalid(format!("duplicate category name {:?}", c.name)));
        }
        categories.push(CategoryDef {
            id: i,
            name: c.name.clone(),
            phrase: c.phrase.clone(),
            level: c.level,
            parent: c.supercategory.clone().filter(|s| c.level.is_some() && !s.is_empty()),
        });
    }

    let mut image_index: HashMap<String, usize> = HashMap::new();
    let mut images = Vec::with_capacity(file.images.len());
    for im in &file.images {
        let key = id_key(&im.id);
        if image_index.insert(key.clone(), images.len()).is_some() {
            return Err(Error::Invalid(format!("duplicate image id {key}")));
        }
        if im.width == 0 || im.height == 0 {
            return Err(Error::Invalid(format!("image {key} has zero dimension")));
        }
        images.push(ImageRecord {
            image_id: im.image_key.clone().unwrap_or(key),
            file_name: im.file_name.clone(),
            width: im.width,
            height: im.height,
            split: im.split.unwrap_or_default(),
            source_corpus: im.source_corpus.unwrap_or(corpus),
            instances: Vec::new(),
        });
    }

    let mut dangling = Vec::new();
    for (k, a) in file.annotations.iter().enumerate() {
        let aid = if a.id.is_null() { format!("#{k}") } else { id_key(&a.id) };
        if !image_index.contains_key(&id_key(&a.image_id)) {
            dangling.push(format!("annotation {aid}: image_id {}", id_key(&a.image_id)));
        }
        if !cat_index.contains_key(&a.category_id) {
            dangling.push(format!("annotation {aid}: category_id {}", a.category_id));
        }
    }
    if !dangling.is_empty() {
        return Err(Error::Dangling(dangling));
    }

    for (k, a) in file.annotations.iter().enumerate() {
        let aid = if a.id.is_null() { format!("#{k}") } else { id_key(&a.id) };
        let img = &mut images[image_index[&id_key(&a.image_id)]];
        let tag = categories[cat_index[&a.category_id]].name.clone();
        if a.iscrowd.unwrap_or(0) != 0 {
            warnings.push(format!("annotation {aid}: iscrowd flag ignored"));
        }
        let (w, h) = (img.width as f64, img.height as f64);
        let from_seg = a.segmentation.as_ref().and_then(|s| {
            let ring = first_ring(s);
            if ring.is_none() && !s.as_array().is_some_and(|v| v.is_empty()) {
                warnings.push(format!("annotation {aid}: unsupported segmentation, using bbox"));
            }
            ring
        });
        let from_seg = from_seg.and_then(|ring| {
            match Polygon::from_flat(&ring).and_then(|p| Polygon::new(p.clamped(w, h).vertices().to_vec())) {
                Ok(p) => Some(p),
                Err(e) => {
                    warnings.push(format!("annotation {aid}: segmentation {e}, using bbox"));
                    None
                }
            }
        });
        let poly = match from_seg {
            Some(p) => Ok(p),
            None => match a.bbox.as_deref() {
                Some([x, y, bw, bh]) => Polygon::new(vec![
                    Point2::new(*x, *y),
                    Point2::new(x + bw, *y),
                    Point2::new(x + bw, y + bh),
                    Point2::new(*x, y + bh),
                ])
                .and_then(|p| Polygon::new(p.clamped(w, h).vertices().to_vec())),
                _ => Err(Error::Invalid("no usable bbox".into())),
            },
        };
        match poly.and_then(|p| InstanceRecord::from_polygon(p, tag)) {
            Ok(inst) => img.instances.push(inst),
            Err(e) => warnings.push(format!("annotation {aid}: {e}, skipped")),
        }
    }

    Ok(ParsedCoco { dataset: CorpusDataset { corpus_id: corpus, categories, images }, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn bbox_only_annotation() {
        let doc = r#"{"images":[{"id":1,"file_name":"a.jpg","width":100,"height":100}],
            "annotations":[{"id":1,"image_id":1,"category_id":3,"bbox":[10,20,30,40],"area":1200,"iscrowd":0}],
            "categories":[{"id":3,"name":"MainZone"}]}"#;
        let p = parse_coco(doc.as_bytes(), CorpusId::Catmus).unwrap();
        let ds = p.dataset;
        assert_eq!(ds.categories[0].id, 0);
        let o = ds.images[0].instances[0].obb;
        assert_eq!((o.cx, o.cy, o.w, o.h), (25.0, 40.0, 40.0, 30.0));
        assert!((o.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn diamond_segmentation() {
        let doc = r#"{"images":[{"id":"p1","file_name":"a.jpg","width":10,"height":10}],
            "annotations":[{"id":1,"image_id":"p1","category_id":1,"bbox":[0,0,2,2],
                            "segmentation":[[0,1,1,0,2,1,1,2],[5,5,6,5,6,6]]}],
            "categories":[{"id":1,"name":"GraphicZone"}]}"#;
        let ds = parse_coco(doc.as_bytes(), CorpusId::Catmus).unwrap().dataset;
        assert_eq!(ds.images[0].image_id, "p1");
        let i = &ds.images[0].instances[0];
        assert_eq!(i.polygon.len(), 4);
        assert!((i.obb.theta - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn dangling_references_listed() {
        let doc = r#"{"images":[{"id":1,"file_name":"a.jpg","width":10,"height":10}],
            "annotations":[{"id":7,"image_id":2,"category_id":1,"bbox":[0,0,1,1]},
                           {"id":8,"image_id":1,"category_id":9,"bbox":[0,0,1,1]}],
            "categories":[{"id":1,"name":"A"}]}"#;
        match parse_coco(doc.as_bytes(), CorpusId::Catmus) {
            Err(Error::Dangling(v)) => {
                assert_eq!(v.len(), 2);
                assert!(v[0].contains("annotation 7") && v[1].contains("category_id 9"));
            }
            other => panic!("expected dangling error, got {other:?}"),
        }
    }

    #[test]
    fn crowd_and_rle_warn() {
        let doc = r#"{"images":[{"id":1,"file_name":"a.jpg","width":10,"height":10}],
            "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[0,0,4,4],"iscrowd":1,
                            "segmentation":{"counts":"abc","size":[10,10]}}],
            "categories":[{"id":1,"name":"A"}]}"#;
        let p = parse_coco(doc.as_bytes(), CorpusId::Catmus).unwrap();
        assert_eq!(p.dataset.instance_count(), 1);
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn image_ids_for_export() {
        let doc = r#"{"images":[{"id":5,"file_name":"a","width":1,"height":1},{"id":2,"file_name":"b","width":1,"height":1}],
            "annotations":[],"categories":[]}"#;
        let ds = parse_coco(doc.as_bytes(), CorpusId::Catmus).unwrap().dataset;
        assert_eq!(coco_image_ids(&ds), vec![5, 2]);
        let mut ds2 = ds.clone();
        ds2.images[0].image_id = "x".into();
        assert_eq!(coco_image_ids(&ds2), vec![1, 2]);
    }
}
