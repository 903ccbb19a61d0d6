mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use mslayout::corpus::{CorpusId, Split, SplitFilter};
use mslayout::pipeline::{
    apply_split_manifest, filter_dataset, parse_split_manifest, seeded_shuffle, split_dataset, trainval_count,
    write_split_manifest, FilterRules, SplitSpec,
};

const CATMUS_ALL: [&str; 13] = [
    "MainZone", "MarginTextZone", "DropCapitalZone", "NumberingZone", "RunningTitleZone", "GraphicZone",
    "QuireMarksZone", "StampZone", "DigitizationArtefactZone", "DefaultLine", "InterlinearLine", "SealZone", "DamageZone",
];

fn rules() -> impl Strategy<Value = FilterRules> {
    (any::<bool>(), 0u8..3, any::<bool>(), prop::collection::btree_set(prop::sample::select(CATMUS_ALL.to_vec()), 0..6))
        .prop_map(|(drop_line_level, mode, drop_empty, keep)| FilterRules {
            drop_line_level,
            retain_only_tags_present_in: (mode == 1).then_some(Split::Test),
            explicit_keep_tags: (mode == 2).then(|| keep.into_iter().map(String::from).collect()),
            drop_empty,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn filtering_is_idempotent(seed in 0u64..1000, n in 1usize..20, r in rules()) {
        let ds = common::random_dataset(seed, CorpusId::Catmus, &CATMUS_ALL, n);
        let once = filter_dataset(&ds, &r).unwrap();
        prop_assert_eq!(filter_dataset(&once, &r).unwrap(), once.clone());
        // nothing left that a rule would drop
        let names: BTreeSet<&str> = once.categories.iter().map(|c| c.name.as_str()).collect();
        for img in &once.images {
            prop_assert!(img.instances.iter().all(|i| names.contains(i.category())));
        }
        if r.drop_line_level {
            prop_assert!(!names.contains("DefaultLine") && !names.contains("InterlinearLine"));
        }
        prop_assert_eq!(once.images.len(), ds.images.len());
    }

    #[test]
    fn split_is_deterministic_and_partitions(seed in any::<u64>(), n in 1usize..60, f in 0.05..0.95f64) {
        let mut ds = common::random_dataset(7, CorpusId::Endp, &["Page Number", "Date Line"], n);
        for img in &mut ds.images {
            img.split = Split::Unassigned;
        }
        let spec = SplitSpec { trainval_fraction: f, seed, reassign: false };
        let a = split_dataset(&ds, &spec).unwrap();
        prop_assert_eq!(&split_dataset(&ds, &spec).unwrap(), &a);
        let train = a.images_in(SplitFilter::Only(Split::Trainval)).count();
        let test = a.images_in(SplitFilter::Only(Split::Test)).count();
        prop_assert_eq!(train, trainval_count(n, f));
        prop_assert_eq!(train + test, n);
        // independent of image order
        let mut reversed = ds.clone();
        reversed.images.reverse();
        let b = split_dataset(&reversed, &spec).unwrap();
        for img in &a.images {
            let other = b.images.iter().find(|i| i.image_id == img.image_id).unwrap();
            prop_assert_eq!(other.split, img.split);
        }
        // the manifest reproduces the assignment
        let manifest = parse_split_manifest(&write_split_manifest(&a));
        prop_assert_eq!(apply_split_manifest(&ds, &manifest).unwrap(), a);
    }

    #[test]
    fn shuffle_is_a_permutation(seed in any::<u64>(), n in 0usize..200) {
        let mut v: Vec<usize> = (0..n).collect();
        seeded_shuffle(&mut v, seed);
        let mut w = v.clone();
        w.sort();
        prop_assert_eq!(w, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn trainval_count_handles_inexact_products() {
    assert_eq!(trainval_count(100, 0.29), 29);
    assert_eq!(trainval_count(364, 0.9), 327);
    assert_eq!(trainval_count(10, 0.5), 5);
}
