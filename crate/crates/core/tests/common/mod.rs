//! Synthetic corpora shaped like the three source collections: same tag
//! vocabularies, image counts and test-set class counts, random geometry.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use mslayout::corpus::{CorpusDataset, CorpusId, ImageRecord, InstanceRecord, Split};
use mslayout::geometry::{Point2, Polygon};
use mslayout::ontology::Ontology;
use mslayout::pipeline::merge_corpora;

pub const ENDP_TEST: [(&str, usize); 5] = [
    ("Primary Text Region", 91),
    ("Page Number", 57),
    ("Date Line", 54),
    ("Columnar Name List", 48),
    ("Marginal Index Notes", 25),
];
pub const ENDP_IMAGES: (usize, usize) = (327, 37);

pub const CATMUS_TEST: [(&str, usize); 9] = [
    ("MainZone", 275),
    ("MarginTextZone", 199),
    ("DropCapitalZone", 124),
    ("NumberingZone", 94),
    ("RunningTitleZone", 18),
    ("GraphicZone", 10),
    ("QuireMarksZone", 8),
    ("StampZone", 4),
    ("TitlePageZone", 1),
];
/// Present in trainval only, or line-level; all removed by filtering.
pub const CATMUS_DROPPED: [&str; 4] = ["DefaultLine", "InterlinearLine", "SealZone", "DamageZone"];
pub const CATMUS_IMAGES: (usize, usize) = (1525, 158);

pub const HORAE_TEST: [(&str, usize); 8] = [
    ("Decorated Initial", 282),
    ("Line Filler", 112),
    ("Decorated Border", 77),
    ("Simple Initial", 57),
    ("Miniature", 15),
    ("Illustrated Border", 10),
    ("Border Text", 4),
    ("Historiated Initial", 1),
];
/// Registered in the HORAE tag order but never used.
pub const HORAE_UNUSED: &str = "Unused Class";
pub const HORAE_IMAGES: (usize, usize) = (418, 45);

pub struct Region {
    pub tag: String,
    pub points: Vec<(i64, i64)>,
}

/// Random rotated rectangle well inside a `w x h` page, integer corners.
pub fn random_region(rng: &mut impl Rng, w: u32, h: u32, tag: &str) -> Region {
    let (w, h) = (w as f64, h as f64);
    let bw = rng.gen_range(0.05..0.4) * w;
    let bh = rng.gen_range(0.02..0.2) * h;
    let cx = rng.gen_range(0.3..0.7) * w;
    let cy = rng.gen_range(0.3..0.7) * h;
    let t: f64 = rng.gen_range(-0.3..0.3);
    let (c, s) = (t.cos(), t.sin());
    let points = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|&(u, v): &(f64, f64)| {
            let (dx, dy) = (u * bw / 2.0, v * bh / 2.0);
            ((cx + dx * c - dy * s).round() as i64, (cy + dx * s + dy * c).round() as i64)
        })
        .collect();
    Region { tag: tag.to_string(), points }
}

/// PAGE document; every other region carries its type in `custom`, the rest
/// in `@type`. Each region gets a text line that must not be read.
pub fn page_xml(file_name: &str, w: u32, h: u32, regions: &[Region]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<PcGts xmlns="http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15">"#);
    let _ = writeln!(s, r#"  <Page imageFilename="{file_name}" imageWidth="{w}" imageHeight="{h}">"#);
    for (i, r) in regions.iter().enumerate() {
        let pts: Vec<String> = r.points.iter().map(|(x, y)| format!("{x},{y}")).collect();
        let pts = pts.join(" ");
        let attr = if i % 2 == 0 {
            format!(r#"custom="readingOrder {{index:{i};}} structure {{type:{};}}""#, r.tag)
        } else {
            format!(r#"type="{}""#, r.tag)
        };
        let _ = writeln!(s, r#"    <TextRegion id="r{i}" {attr}>"#);
        let _ = writeln!(s, r#"      <Coords points="{pts}"/>"#);
        let _ = writeln!(
            s,
            r#"      <TextLine id="r{i}l0" custom="structure {{type:DefaultLine;}}"><Coords points="{pts}"/></TextLine>"#
        );
        let _ = writeln!(s, "    </TextRegion>");
    }
    s.push_str("  </Page>\n</PcGts>\n");
    s
}

/// Spreads `counts` over `n` bins at random.
fn spread(rng: &mut impl Rng, counts: &[(&str, usize)], n: usize) -> Vec<Vec<String>> {
    let mut bins = vec![Vec::new(); n];
    for &(tag, k) in counts {
        for _ in 0..k {
            bins[rng.gen_range(0..n)].push(tag.to_string());
        }
    }
    bins
}

pub struct PageCorpus {
    pub test_ids: Vec<String>,
    pub n_images: usize,
}

/// Writes one PAGE file per image to `dir` and returns the test ids.
fn page_corpus(
    dir: &Path,
    prefix: &str,
    seed: u64,
    (n_train, n_test): (usize, usize),
    test_counts: &[(&str, usize)],
    train_tags: &[&str],
) -> PageCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_train + n_test;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let test: Vec<usize> = idx[..n_test].to_vec();
    let test_bins = spread(&mut rng, test_counts, n_test);
    let mut tags_of: Vec<Vec<String>> = vec![Vec::new(); n];
    for (b, &i) in test.iter().enumerate() {
        tags_of[i] = test_bins[b].clone();
    }
    for &i in &idx[n_test..] {
        let k = rng.gen_range(0..5);
        tags_of[i] = (0..k).map(|_| train_tags[rng.gen_range(0..train_tags.len())].to_string()).collect();
    }
    fs::create_dir_all(dir).unwrap();
    for (i, tags) in tags_of.iter().enumerate() {
        let name = format!("{prefix}_{:04}", i + 1);
        let (w, h) = (rng.gen_range(1200..2400), rng.gen_range(1600..3200));
        let regions: Vec<Region> = tags.iter().map(|t| random_region(&mut rng, w, h, t)).collect();
        fs::write(dir.join(format!("{name}.xml")), page_xml(&format!("{name}.jpg"), w, h, &regions)).unwrap();
    }
    let mut test_ids: Vec<String> = test.iter().map(|i| format!("{prefix}_{:04}", i + 1)).collect();
    test_ids.sort();
    PageCorpus { test_ids, n_images: n }
}

/// e-NDP-like PAGE corpus. Trainval pages also contain a sixth region type
/// that the corpus policy leaves out.
pub fn endp_corpus(dir: &Path) -> PageCorpus {
    let mut train: Vec<&str> = ENDP_TEST.iter().map(|c| c.0).collect();
    train.push("Signature");
    page_corpus(dir, "endp", 11, ENDP_IMAGES, &ENDP_TEST, &train)
}

pub fn horae_corpus(dir: &Path) -> PageCorpus {
    let train: Vec<&str> = HORAE_TEST.iter().map(|c| c.0).collect();
    page_corpus(dir, "horae", 13, HORAE_IMAGES, &HORAE_TEST, &train)
}

/// CATMuS-like COCO file with `split` on every image.
pub fn catmus_coco() -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let names: Vec<&str> = CATMUS_TEST.iter().map(|c| c.0).chain(CATMUS_DROPPED).collect();
    let categories: Vec<_> = names.iter().enumerate().map(|(i, n)| json!({"id": i + 1, "name": n})).collect();
    let (n_train, n_test) = CATMUS_IMAGES;
    let n = n_train + n_test;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut test_counts: Vec<(&str, usize)> = CATMUS_TEST.to_vec();
    test_counts.push(("DefaultLine", 300));
    test_counts.push(("InterlinearLine", 12));
    let test_bins = spread(&mut rng, &test_counts, n_test);
    let mut tags_of: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut is_test = vec![false; n];
    for (b, &i) in idx[..n_test].iter().enumerate() {
        tags_of[i] = test_bins[b].clone();
        is_test[i] = true;
    }
    for &i in &idx[n_test..] {
        let k = rng.gen_range(0..4);
        tags_of[i] = (0..k).map(|_| names[rng.gen_range(0..names.len())].to_string()).collect();
    }
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (i, tags) in tags_of.iter().enumerate() {
        let (w, h) = (rng.gen_range(1000..3000u32), rng.gen_range(1400..4000u32));
        images.push(json!({
            "id": i + 1,
            "file_name": format!("catmus_{:05}.jpg", i + 1),
            "width": w,
            "height": h,
            "split": if is_test[i] { "test" } else { "trainval" },
        }));
        for t in tags {
            let r = random_region(&mut rng, w, h, t);
            let flat: Vec<i64> = r.points.iter().flat_map(|&(x, y)| [x, y]).collect();
            let xs = r.points.iter().map(|p| p.0);
            let ys = r.points.iter().map(|p| p.1);
            let (x0, x1) = (xs.clone().min().unwrap(), xs.max().unwrap());
            let (y0, y1) = (ys.clone().min().unwrap(), ys.max().unwrap());
            annotations.push(json!({
                "id": annotations.len() + 1,
                "image_id": i + 1,
                "category_id": names.iter().position(|n| n == t).unwrap() + 1,
                "bbox": [x0, y0, x1 - x0, y1 - y0],
                "segmentation": [flat],
                "area": ((x1 - x0) * (y1 - y0)),
                "iscrowd": 0,
            }));
        }
    }
    serde_json::to_vec(&json!({"images": images, "annotations": annotations, "categories": categories})).unwrap()
}

pub mod eval {
    use mslayout::corpus::{CorpusDataset, CorpusId, ImageRecord, InstanceRecord, Split};
    use mslayout::eval::{Detection, Geometry};
    use mslayout::geometry::{Aabb, Obb, Point2, Polygon};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub const TAGS: [&str; 3] = ["MainZone", "MarginTextZone", "DropCapitalZone"];

    fn rect(x: f64, y: f64, w: f64, h: f64) -> Polygon {
        Polygon::new(vec![Point2::new(x, y), Point2::new(x + w, y), Point2::new(x + w, y + h), Point2::new(x, y + h)])
            .unwrap()
    }

    /// Axis-aligned ground truth on a few test images, and detections that
    /// jitter, duplicate, mislabel or invent boxes. Scores are quantized so
    /// ties occur.
    pub fn fixture(seed: u64) -> (CorpusDataset, Vec<Detection>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_img = rng.gen_range(1..5);
        let mut images = Vec::new();
        let mut dets = Vec::new();
        for i in 0..n_img {
            let mut instances = Vec::new();
            for _ in 0..rng.gen_range(0..7) {
                let tag = TAGS[rng.gen_range(0..TAGS.len())];
                let (w, h) = (rng.gen_range(10.0..200.0), rng.gen_range(10.0..200.0));
                let (x, y) = (rng.gen_range(0.0..600.0), rng.gen_range(0.0..600.0));
                instances.push(InstanceRecord::from_polygon(rect(x, y, w, h), tag).unwrap());
                for _ in 0..rng.gen_range(0..3) {
                    let j = |r: &mut ChaCha8Rng, s: f64| r.gen_range(-0.25..0.25) * s;
                    let b = Aabb { x: x + j(&mut rng, w), y: y + j(&mut rng, h), w: w * rng.gen_range(0.7..1.3), h: h * rng.gen_range(0.7..1.3) };
                    let cat = if rng.gen_bool(0.15) { rng.gen_range(0..TAGS.len()) } else { TAGS.iter().position(|t| *t == tag).unwrap() };
                    dets.push(Detection { image_id: (i + 1).to_string(), category_id: cat as u64 + 1, geometry: Geometry::Aabb(b), score: (rng.gen_range(0..20) as f64) / 20.0 });
                }
            }
            for _ in 0..rng.gen_range(0..3) {
                let b = Aabb { x: rng.gen_range(0.0..600.0), y: rng.gen_range(0.0..600.0), w: rng.gen_range(10.0..100.0), h: rng.gen_range(10.0..100.0) };
                dets.push(Detection { image_id: (i + 1).to_string(), category_id: rng.gen_range(1..=TAGS.len() as u64), geometry: Geometry::Aabb(b), score: (rng.gen_range(0..20) as f64) / 20.0 });
            }
            images.push(ImageRecord {
                image_id: (i + 1).to_string(),
                file_name: format!("{}.jpg", i + 1),
                width: 1000,
                height: 1000,
                split: Split::Test,
                source_corpus: CorpusId::Catmus,
                instances,
            });
        }
        // every category must exist in the registry even if unused
        let order: Vec<String> = TAGS.iter().map(|s| s.to_string()).collect();
        (CorpusDataset::assemble(CorpusId::Catmus, images, Some(&order)), dets)
    }

    /// The same boxes as zero-angle oriented boxes.
    pub fn as_obb(dets: &[Detection]) -> Vec<Detection> {
        dets.iter()
            .map(|d| match d.geometry {
                Geometry::Aabb(b) => Detection {
                    geometry: Geometry::Obb(Obb::new(b.x + b.w / 2.0, b.y + b.h / 2.0, b.w, b.h, 0.0)),
                    ..d.clone()
                },
                Geometry::Obb(_) => d.clone(),
            })
            .collect()
    }
}

/// Split dataset of random rotated regions drawn from `tags`;
/// every fourth image is test.
pub fn random_dataset(seed: u64, corpus: CorpusId, tags: &[&str], n_images: usize) -> CorpusDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..n_images)
        .map(|i| {
            let (w, h) = (rng.gen_range(800..2000), rng.gen_range(900..3000));
            let instances = (0..rng.gen_range(1..8))
                .map(|_| {
                    let tag = *tags.choose(&mut rng).unwrap();
                    let r = random_region(&mut rng, w, h, tag);
                    let pts = r.points.iter().map(|&(x, y)| Point2::new(x as f64, y as f64)).collect();
                    InstanceRecord::from_polygon(Polygon::new(pts).unwrap(), r.tag).unwrap()
                })
                .collect();
            ImageRecord {
                image_id: format!("{corpus}_{i:03}"),
                file_name: format!("{corpus}_{i:03}.jpg"),
                width: w,
                height: h,
                split: if i % 4 == 0 { Split::Test } else { Split::Trainval },
                source_corpus: corpus,
                instances,
            }
        })
        .collect();
    CorpusDataset::assemble(corpus, images, None)
}

/// All three vocabularies merged over the default ontology.
pub fn merged_dataset(seed: u64, images_per_corpus: usize) -> CorpusDataset {
    let names = |t: &[(&'static str, usize)]| t.iter().map(|c| c.0).collect::<Vec<_>>();
    let parts = [
        random_dataset(seed, CorpusId::Endp, &names(&ENDP_TEST), images_per_corpus),
        random_dataset(seed + 1, CorpusId::Catmus, &names(&CATMUS_TEST), images_per_corpus),
        random_dataset(seed + 2, CorpusId::Horae, &names(&HORAE_TEST), images_per_corpus),
    ];
    merge_corpora(&parts, &Ontology::default_ontology()).unwrap()
}
