mod common;

use std::fs;

use common::{oracle_bpr, oracle_fitness};
use gaanet::autoanchor::{
    best_possible_recall, evolve_anchors, fitness, fitness_with, kmeans_anchors_from_sizes, load_labels, AnchorSet,
    FitnessKind, GaConfig,
};
use gaanet::pnm::Image;
use gaanet::Error;
use proptest::prelude::*;

fn sizes_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((1.0f64..200.0, 1.0f64..200.0).prop_map(|(w, h)| [w, h]), 1..60)
}

fn anchors_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((2.0f64..300.0, 2.0f64..300.0).prop_map(|(w, h)| [w, h]), 1..13)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fitness_equals_oracle(sizes in sizes_strategy(), anchors in anchors_strategy(), thr in 0.05f64..0.6) {
        let a = AnchorSet::new(anchors.clone()).unwrap();
        prop_assert_eq!(fitness(&a, &sizes, thr).unwrap(), oracle_fitness(&anchors, &sizes, thr));
        prop_assert_eq!(best_possible_recall(&a, &sizes, thr).unwrap(), oracle_bpr(&anchors, &sizes, thr));
    }

    #[test]
    fn fitness_permutation_invariant(sizes in sizes_strategy(), anchors in anchors_strategy(), rot in 0usize..60) {
        let a = AnchorSet::new(anchors.clone()).unwrap();
        let mut shuffled = sizes.clone();
        let n = shuffled.len();
        shuffled.rotate_left(rot % n);
        shuffled.reverse();
        let mut rev = anchors.clone();
        rev.reverse();
        let b = AnchorSet::new(rev).unwrap();
        let f0 = fitness(&a, &sizes, 0.25).unwrap();
        prop_assert!((f0 - fitness(&a, &shuffled, 0.25).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(f0, fitness(&b, &sizes, 0.25).unwrap());
    }

    #[test]
    fn fitness_scale_invariant(sizes in sizes_strategy(), anchors in anchors_strategy(), s in 0.1f64..10.0) {
        let a = AnchorSet::new(anchors).unwrap();
        let scaled: Vec<[f64; 2]> = sizes.iter().map(|[w, h]| [w * s, h * s]).collect();
        let f0 = fitness(&a, &sizes, 0.25).unwrap();
        let f1 = fitness(&a.scaled(s), &scaled, 0.25).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-12, "{} vs {}", f0, f1);
        prop_assert!((0.0..=1.0).contains(&f0));
    }

    #[test]
    fn evolution_never_regresses(sizes in sizes_strategy(), seed in any::<u64>()) {
        let k = sizes.len().min(6);
        let km = kmeans_anchors_from_sizes(&sizes, k, seed);
        let Ok(km) = km else { return Ok(()) };
        let ga = GaConfig { generations: 60, seed, ..GaConfig::default() };
        let ev = evolve_anchors(&km.anchors, &sizes, &ga).unwrap();
        prop_assert!(ev.history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(ev.history[0], fitness(&km.anchors, &sizes, 0.25).unwrap());
        prop_assert_eq!(ev.fitness(), fitness(&ev.anchors, &sizes, 0.25).unwrap());
        prop_assert!(ev.anchors.sizes().iter().flatten().all(|&v| v >= 2.0));
    }

    #[test]
    fn kmeans_inertia_never_rises(sizes in sizes_strategy(), seed in any::<u64>()) {
        if let Ok(km) = kmeans_anchors_from_sizes(&sizes, 3.min(sizes.len()), seed) {
            prop_assert!(km.inertia.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        }
    }
}

#[test]
fn ciou_fitness_is_one_for_exact_anchors() {
    let sizes = vec![[10.0, 20.0], [40.0, 8.0]];
    let a = AnchorSet::new(sizes.clone()).unwrap();
    assert_eq!(fitness_with(FitnessKind::Ciou, &a, &sizes, 0.25).unwrap(), 1.0);
    let off = AnchorSet::new(vec![[10.0, 10.0]]).unwrap();
    assert!(fitness_with(FitnessKind::Ciou, &off, &sizes, 0.0).unwrap() < 1.0);
}

#[test]
fn seeded_pipeline_is_reproducible() {
    let sizes: Vec<[f64; 2]> = (0..80)
        .map(|i| [3.0 + (i * 7 % 50) as f64, 4.0 + (i * 11 % 60) as f64])
        .collect();
    let run = || {
        let km = kmeans_anchors_from_sizes(&sizes, 12, 4).unwrap();
        evolve_anchors(
            &km.anchors,
            &sizes,
            &GaConfig {
                generations: 200,
                seed: 4,
                ..GaConfig::default()
            },
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

fn write_tree(root: &std::path::Path) {
    for split in ["train", "valid"] {
        fs::create_dir_all(root.join(split).join("images")).unwrap();
        fs::create_dir_all(root.join(split).join("labels")).unwrap();
    }
    let img = Image::filled(640, 320, 1, 0).to_pnm();
    fs::write(root.join("train/images/a.pgm"), &img).unwrap();
    fs::write(root.join("train/images/b.pgm"), &img).unwrap();
    fs::write(
        root.join("train/labels/a.txt"),
        "0 0.5 0.5 0.1 0.2\n3 0.2 0.2 0.05 0.05\n",
    )
    .unwrap();
    fs::write(root.join("valid/images/c.pgm"), &img).unwrap();
    fs::write(
        root.join("valid/labels/c.txt"),
        "1 0.5 0.5 0.25 0.5\n9 0.5 0.5 0.1 0.1\nnonsense\n",
    )
    .unwrap();
}

#[test]
fn split_layout_loads_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write_tree(dir.path());
    let set = load_labels(dir.path(), Some(4)).unwrap();
    let ids: Vec<&str> = set.images.iter().map(|i| i.id.as_str()).collect();
    assert_eq!(ids, vec!["a", "b", "c"]);
    assert_eq!(set.images[1].boxes.len(), 0);
    assert_eq!(set.images[0].size, Some((640, 320)));
    assert_eq!(set.box_count(), 3);
    assert_eq!(set.rejected.len(), 2);
    assert!(set.rejected.iter().all(|r| r.file.ends_with("valid/labels/c.txt")));
    // long side 640 → 256: factor 0.4 on both axes
    let s = set.box_sizes(256);
    assert!((s[0][0] - 25.6).abs() < 1e-9 && (s[0][1] - 25.6).abs() < 1e-9);
}

#[test]
fn missing_and_empty_roots() {
    let dir = tempfile::tempdir().unwrap();
    let set = load_labels(dir.path(), None).unwrap();
    assert!(set.images.is_empty() && !set.warnings.is_empty());
    fs::write(dir.path().join("stray.txt"), "x").unwrap();
    assert!(matches!(load_labels(dir.path(), None), Err(Error::MissingLabelDir(_))));
    assert!(matches!(
        load_labels(&dir.path().join("nope"), None),
        Err(Error::MissingLabelDir(_))
    ));
}
