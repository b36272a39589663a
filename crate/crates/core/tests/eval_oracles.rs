mod common;

use common::{oracle_ap, oracle_evaluate, oracle_iou, oracle_match, oracle_nms};
use gaanet::eval::{average_precision, ciou, evaluate, iou, match_predictions, nms, EvalConfig};
use gaanet::{BBox, Detection, GroundTruth};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BBox> {
    (0u8..20, 0u8..20, 1u8..12, 1u8..12)
        .prop_map(|(x, y, w, h)| BBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64))
}

fn dets(max: usize, classes: usize) -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec(
        (bbox(), 0..classes, 1u8..=10).prop_map(|(b, c, p)| Detection::new(b, c, p as f64 / 10.0)),
        0..=max,
    )
}

fn gts(max: usize, classes: usize) -> impl Strategy<Value = Vec<GroundTruth>> {
    prop::collection::vec((bbox(), 0..classes).prop_map(|(b, c)| GroundTruth::new(b, c)), 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn iou_matches_oracle_and_is_symmetric(a in bbox(), b in bbox(), dx in -5.0f64..5.0, s in 0.1f64..8.0) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, oracle_iou(&a, &b));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - iou(&a.translate(dx, -dx), &b.translate(dx, -dx))).abs() < 1e-12);
        prop_assert!((v - iou(&a.scale(s), &b.scale(s))).abs() < 1e-12);
    }

    #[test]
    fn ciou_bounded_by_iou(a in bbox(), b in bbox(), dx in -5.0f64..5.0) {
        let c = ciou(&a, &b);
        prop_assert!(c <= iou(&a, &b) + 1e-15);
        prop_assert!(c > -1.0);
        prop_assert!((c - ciou(&b, &a)).abs() < 1e-15);
        prop_assert!((c - ciou(&a.translate(dx, dx), &b.translate(dx, dx))).abs() < 1e-12);
        let (ax, ay) = a.center();
        let (bx, by) = b.center();
        let same_aspect = (a.width() * b.height() - b.width() * a.height()).abs() < 1e-12;
        if ax == bx && ay == by && same_aspect {
            prop_assert!((c - iou(&a, &b)).abs() < 1e-15);
        } else {
            prop_assert!(c < iou(&a, &b));
        }
    }

    #[test]
    fn nms_equals_oracle(d in dets(10, 3), thr in 0.0f64..1.0) {
        prop_assert_eq!(nms(&d, thr), oracle_nms(&d, thr));
    }

    #[test]
    fn nms_ignores_input_order(d in dets(10, 2), rot in 0usize..10) {
        let mut shuffled = d.clone();
        if !shuffled.is_empty() {
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
        }
        prop_assert_eq!(nms(&d, 0.45), nms(&shuffled, 0.45));
    }

    #[test]
    fn matching_equals_oracle(d in dets(10, 2), g in gts(10, 2)) {
        let m = match_predictions(&d, &g, 0.5);
        prop_assert_eq!(m.det_match.clone(), oracle_match(&d, &g, 0.5));
        for (gi, dm) in m.gt_match.iter().enumerate() {
            if let Some(di) = dm {
                prop_assert_eq!(m.det_match[*di], Some(gi));
            }
        }
    }

    #[test]
    fn ap_equals_oracle(flags in prop::collection::vec(any::<bool>(), 0..12), extra in 0usize..4) {
        let n_gt = flags.iter().filter(|&&f| f).count() + extra;
        let ap = average_precision(&flags, n_gt);
        prop_assert!((ap - oracle_ap(&flags, n_gt)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn evaluate_equals_oracle(
        images in prop::collection::vec((dets(10, 3), gts(10, 3)), 1..4)
    ) {
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let d: Vec<Vec<Detection>> = images.iter().map(|x| x.0.clone()).collect();
        let g: Vec<Vec<GroundTruth>> = images.iter().map(|x| x.1.clone()).collect();
        let r = evaluate(&d, &g, &names, &EvalConfig::default()).unwrap();
        let o = oracle_evaluate(&d, &g, 3);
        for (c, oc) in r.classes.iter().zip(&o.classes) {
            prop_assert_eq!((c.gt_count, c.det_count, c.tp_count), (oc.gt_count, oc.det_count, oc.tp_count));
            prop_assert_eq!(c.confidence, oc.confidence);
            prop_assert!((c.precision - oc.precision).abs() <= 1e-12);
            prop_assert!((c.recall - oc.recall).abs() <= 1e-12);
            prop_assert!((c.ap50 - oc.ap50).abs() <= 1e-12);
        }
        prop_assert!((r.overall.precision - o.overall[0]).abs() <= 1e-12);
        prop_assert!((r.overall.recall - o.overall[1]).abs() <= 1e-12);
        prop_assert!((r.overall.ap50 - o.overall[2]).abs() <= 1e-12);
        prop_assert_eq!(&r.confusion.counts, &o.counts);
    }

    #[test]
    fn ap_invariant_to_monotone_confidence_rescaling(d in dets(10, 1), g in gts(10, 1)) {
        let names = vec!["x".to_string()];
        let base = evaluate(std::slice::from_ref(&d), std::slice::from_ref(&g), &names, &EvalConfig::default()).unwrap();
        let squashed: Vec<Detection> = d
            .iter()
            .map(|x| Detection::new(x.bbox, x.class, x.confidence.powi(3) * 0.5))
            .collect();
        let other = evaluate(&[squashed], &[g], &names, &EvalConfig::default()).unwrap();
        prop_assert_eq!(base.classes[0].ap50, other.classes[0].ap50);
    }
}

#[test]
fn predictions_equal_to_truth_score_perfectly() {
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let g = vec![
        vec![
            GroundTruth::new(BBox::new(0.0, 0.0, 5.0, 5.0), 0),
            GroundTruth::new(BBox::new(10.0, 0.0, 15.0, 9.0), 1),
        ],
        vec![GroundTruth::new(BBox::new(3.0, 3.0, 9.0, 9.0), 2)],
    ];
    let d: Vec<Vec<Detection>> = g
        .iter()
        .map(|im| im.iter().map(|t| Detection::new(t.bbox, t.class, 1.0)).collect())
        .collect();
    let r = evaluate(&d, &g, &names, &EvalConfig::default()).unwrap();
    assert!(r
        .classes
        .iter()
        .all(|c| (c.precision, c.recall, c.ap50) == (1.0, 1.0, 1.0)));
    assert_eq!((r.overall.precision, r.overall.recall, r.overall.ap50), (1.0, 1.0, 1.0));
}
