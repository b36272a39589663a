//! Box overlap, suppression, matching and AP@0.5 reporting.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::boxes::{BBox, Detection, GroundTruth};
use crate::error::{Error, Result};

pub const DEFAULT_NMS_IOU: f64 = 0.45;
pub const DEFAULT_MATCH_IOU: f64 = 0.5;
/// Confidence floor for confusion counts.
pub const CONFUSION_CONF: f64 = 0.25;

/// Published overall precision / recall / mAP@0.5 (%) of the trained
/// detector, shown for context only.
pub const REFERENCE_OVERALL: [f64; 3] = [96.2, 90.2, 97.6];

fn intersection(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    w * h
}

/// Intersection over union; 0 for disjoint or zero-area pairs.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn aspect(b: &BBox) -> f64 {
    let h = b.height();
    if h > 0.0 {
        b.width() / h
    } else {
        0.0
    }
}

/// Complete IoU: `iou − ρ²/c² − α·v`. A zero-height box has aspect ratio 0.
pub fn ciou(a: &BBox, b: &BBox) -> f64 {
    let iou = iou(a, b);
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let rho2 = (ax - bx).powi(2) + (ay - by).powi(2);
    let cw = a.x2.max(b.x2) - a.x1.min(b.x1);
    let ch = a.y2.max(b.y2) - a.y1.min(b.y1);
    let c2 = cw * cw + ch * ch;
    let dist = if c2 > 0.0 { rho2 / c2 } else { 0.0 };
    let v = 4.0 / (PI * PI) * (aspect(a).atan() - aspect(b).atan()).powi(2);
    let denom = (1.0 - iou) + v;
    let alpha_v = if denom > 0.0 { v * v / denom } else { 0.0 };
    iou - dist - alpha_v
}

fn ranked_indices(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| dets[i].rank(&dets[j]));
    order
}

/// Per-class greedy suppression. Output follows [`Detection::rank`].
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut kept: Vec<Detection> = Vec::new();
    for i in ranked_indices(dets) {
        let d = dets[i];
        if kept
            .iter()
            .filter(|k| k.class == d.class)
            .all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold)
        {
            kept.push(d);
        }
    }
    kept
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// Detection indices in ranked order.
    pub order: Vec<usize>,
    /// Per input detection: matched ground-truth index.
    pub det_match: Vec<Option<usize>>,
    /// Per ground truth: matched detection index.
    pub gt_match: Vec<Option<usize>>,
}

impl Matching {
    pub fn is_tp(&self, det: usize) -> bool {
        self.det_match[det].is_some()
    }

    /// TP flags in ranked order.
    pub fn ranked_flags(&self) -> Vec<bool> {
        self.order.iter().map(|&i| self.is_tp(i)).collect()
    }

    pub fn false_negatives(&self) -> usize {
        self.gt_match.iter().filter(|m| m.is_none()).count()
    }
}

/// Greedy matching in ranked order: each detection takes the unmatched
/// same-class ground truth of highest IoU (lowest index on ties) when that
/// IoU reaches `iou_threshold`.
pub fn match_predictions(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Matching {
    let order = ranked_indices(dets);
    let mut det_match = vec![None; dets.len()];
    let mut gt_match = vec![None; gts.len()];
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.class != dets[d].class || gt_match[g].is_some() {
                continue;
            }
            let o = iou(&dets[d].bbox, &gt.bbox);
            if o >= iou_threshold && best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            det_match[d] = Some(g);
            gt_match[g] = Some(d);
        }
    }
    Matching {
        order,
        det_match,
        gt_match,
    }
}

/// All-point interpolated AP over TP flags sorted by descending confidence.
pub fn average_precision(tp_flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let n = tp_flags.len();
    let mut mrec = Vec::with_capacity(n + 2);
    let mut mpre = Vec::with_capacity(n + 2);
    mrec.push(0.0);
    mpre.push(1.0);
    let mut tp = 0usize;
    for (i, &f) in tp_flags.iter().enumerate() {
        tp += f as usize;
        mrec.push(tp as f64 / n_gt as f64);
        mpre.push(tp as f64 / (i + 1) as f64);
    }
    mrec.push(1.0);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    let mut ap = 0.0;
    for i in 1..mrec.len() {
        if mrec[i] != mrec[i - 1] {
            ap += (mrec[i] - mrec[i - 1]) * mpre[i];
        }
    }
    ap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall at the confidence cut with the best F1. Cuts sit at
/// distinct confidences; ties go to the higher confidence.
pub fn best_f1(ranked: &[(f64, bool)], n_gt: usize) -> Option<OperatingPoint> {
    let mut best: Option<OperatingPoint> = None;
    let mut tp = 0usize;
    for (i, &(conf, f)) in ranked.iter().enumerate() {
        tp += f as usize;
        if ranked.get(i + 1).is_some_and(|next| next.0 == conf) {
            continue;
        }
        let precision = tp as f64 / (i + 1) as f64;
        let recall = if n_gt > 0 { tp as f64 / n_gt as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(OperatingPoint {
                confidence: conf,
                precision,
                recall,
                f1,
            });
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub name: String,
    pub gt_count: usize,
    pub det_count: usize,
    pub tp_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Confidence of the max-F1 cut; absent without detections.
    pub confidence: Option<f64>,
    pub ap50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overall {
    pub precision: f64,
    pub recall: f64,
    pub ap50: f64,
    /// Classes with at least one ground truth.
    pub classes: usize,
}

/// Rows are predicted class, columns true class; the last index of each
/// axis is background.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    /// Counts divided by their column sum.
    pub normalized: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, counts: Vec<Vec<usize>>) -> Self {
        let n = counts.len();
        let mut normalized = vec![vec![0.0; n]; n];
        for col in 0..n {
            let sum: usize = counts.iter().map(|r| r[col]).sum();
            if sum > 0 {
                for row in 0..n {
                    normalized[row][col] = counts[row][col] as f64 / sum as f64;
                }
            }
        }
        Self {
            labels,
            counts,
            normalized,
        }
    }

    /// Diagonal of the normalized matrix for the object classes.
    pub fn tp_rates(&self) -> Vec<f64> {
        (0..self.counts.len() - 1).map(|i| self.normalized[i][i]).collect()
    }
}

/// Class-agnostic confusion counts for one image: pairs with IoU ≥
/// `iou_threshold` are taken in descending IoU order, one-to-one.
pub fn confusion_counts(
    dets: &[Detection],
    gts: &[GroundTruth],
    class_count: usize,
    conf_threshold: f64,
    iou_threshold: f64,
    counts: &mut [Vec<usize>],
) {
    let bg = class_count;
    let dets: Vec<&Detection> = dets.iter().filter(|d| d.confidence >= conf_threshold).collect();
    let mut pairs = Vec::new();
    for (g, gt) in gts.iter().enumerate() {
        for (d, det) in dets.iter().enumerate() {
            let o = iou(&det.bbox, &gt.bbox);
            if o >= iou_threshold {
                pairs.push((o, d, g));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; gts.len()];
    for (_, d, g) in pairs {
        if !det_used[d] && !gt_used[g] {
            det_used[d] = true;
            gt_used[g] = true;
            counts[dets[d].class][gts[g].class] += 1;
        }
    }
    for (g, gt) in gts.iter().enumerate() {
        if !gt_used[g] {
            counts[bg][gt.class] += 1;
        }
    }
    for (d, det) in dets.iter().enumerate() {
        if !det_used[d] {
            counts[det.class][bg] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub overall: Overall,
    pub confusion: ConfusionMatrix,
    pub images: usize,
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

impl MetricsReport {
    /// Aligned text table: per-class P/R/mAP@0.5 (%) and an overall row,
    /// followed by normalized confusion counts.
    pub fn to_table(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.name.len())
            .chain(["background".len(), "overall".len()])
            .max()
            .unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>6}  {:>9}  {:>9}  {:>8}  {:>6}",
            "class", "gts", "dets", "precision", "recall", "mAP@0.5", "conf"
        );
        for c in &self.classes {
            let conf = c.confidence.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                s,
                "{:<width$}  {:>6}  {:>6}  {:>9}  {:>9}  {:>8}  {:>6}",
                c.name,
                c.gt_count,
                c.det_count,
                pct(c.precision),
                pct(c.recall),
                pct(c.ap50),
                conf
            );
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>6}  {:>9}  {:>9}  {:>8}",
            "overall",
            self.classes.iter().map(|c| c.gt_count).sum::<usize>(),
            self.classes.iter().map(|c| c.det_count).sum::<usize>(),
            pct(self.overall.precision),
            pct(self.overall.recall),
            pct(self.overall.ap50)
        );
        let _ = writeln!(
            s,
            "reference overall (published): P {:.1} R {:.1} mAP@0.5 {:.1}",
            REFERENCE_OVERALL[0], REFERENCE_OVERALL[1], REFERENCE_OVERALL[2]
        );
        let _ = writeln!(s, "\nconfusion (rows predicted, columns true, column-normalized)");
        let _ = write!(s, "{:<width$}", "");
        for l in &self.confusion.labels {
            let _ = write!(s, "  {:>w$}", l, w = width.max(5));
        }
        s.push('\n');
        for (label, row) in self.confusion.labels.iter().zip(&self.confusion.normalized) {
            let _ = write!(s, "{label:<width$}");
            for v in row {
                let _ = write!(s, "  {:>w$.2}", v, w = width.max(5));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub match_iou: f64,
    pub confusion_conf: f64,
    pub confusion_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_iou: DEFAULT_MATCH_IOU,
            confusion_conf: CONFUSION_CONF,
            confusion_iou: DEFAULT_MATCH_IOU,
        }
    }
}

fn check_classes<'a>(ids: impl Iterator<Item = usize> + 'a, count: usize) -> Result<()> {
    for id in ids {
        if id >= count {
            return Err(Error::UnknownClass { id, count });
        }
    }
    Ok(())
}

/// Scores detections against ground truths image by image.
/// Classes without ground truths stay in the table but are left out of the
/// overall means.
pub fn evaluate(
    dets: &[Vec<Detection>],
    gts: &[Vec<GroundTruth>],
    class_names: &[String],
    config: &EvalConfig,
) -> Result<MetricsReport> {
    if dets.len() != gts.len() {
        return Err(Error::Shape(format!(
            "{} prediction lists for {} images",
            dets.len(),
            gts.len()
        )));
    }
    let nc = class_names.len();
    check_classes(dets.iter().flatten().map(|d| d.class), nc)?;
    check_classes(gts.iter().flatten().map(|g| g.class), nc)?;

    // (confidence, image, rank within image, tp) per class
    let mut scored: Vec<Vec<(f64, usize, usize, bool)>> = vec![Vec::new(); nc];
    let mut gt_counts = vec![0usize; nc];
    let mut counts = vec![vec![0usize; nc + 1]; nc + 1];
    for (img, (d, g)) in dets.iter().zip(gts).enumerate() {
        let m = match_predictions(d, g, config.match_iou);
        for (r, &i) in m.order.iter().enumerate() {
            scored[d[i].class].push((d[i].confidence, img, r, m.is_tp(i)));
        }
        for gt in g {
            gt_counts[gt.class] += 1;
        }
        confusion_counts(d, g, nc, config.confusion_conf, config.confusion_iou, &mut counts);
    }

    let mut classes = Vec::with_capacity(nc);
    for (c, mut s) in scored.into_iter().enumerate() {
        s.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let flags: Vec<bool> = s.iter().map(|x| x.3).collect();
        let ranked: Vec<(f64, bool)> = s.iter().map(|x| (x.0, x.3)).collect();
        let op = best_f1(&ranked, gt_counts[c]);
        classes.push(ClassMetrics {
            name: class_names[c].clone(),
            gt_count: gt_counts[c],
            det_count: s.len(),
            tp_count: flags.iter().filter(|&&f| f).count(),
            precision: op.map_or(0.0, |o| o.precision),
            recall: op.map_or(0.0, |o| o.recall),
            f1: op.map_or(0.0, |o| o.f1),
            confidence: op.map(|o| o.confidence),
            ap50: average_precision(&flags, gt_counts[c]),
        });
    }

    let present: Vec<&ClassMetrics> = classes.iter().filter(|c| c.gt_count > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if present.is_empty() {
            0.0
        } else {
            present.iter().map(|c| f(c)).sum::<f64>() / present.len() as f64
        }
    };
    let overall = Overall {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        ap50: mean(|c| c.ap50),
        classes: present.len(),
    };
    let mut labels: Vec<String> = class_names.to_vec();
    labels.push("background".into());
    Ok(MetricsReport {
        classes,
        overall,
        confusion: ConfusionMatrix::new(labels, counts),
        images: dets.len(),
    })
}

/// Prediction rows, one per detection: `image_id class conf x1 y1 x2 y2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub image_id: String,
    pub detection: Detection,
}

/// Serializes rows sorted by image id, then [`Detection::rank`].
pub fn format_predictions(rows: &[PredictionRow]) -> String {
    let mut sorted: Vec<&PredictionRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id).then_with(|| a.detection.rank(&b.detection)));
    let mut s = String::new();
    for r in sorted {
        let d = &r.detection;
        let _ = writeln!(
            s,
            "{} {} {:.6} {:.2} {:.2} {:.2} {:.2}",
            r.image_id, d.class, d.confidence, d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2
        );
    }
    s
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Predictions { line: i + 1, msg };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        let class = f[1]
            .parse::<usize>()
            .map_err(|_| err(format!("bad class id `{}`", f[1])))?;
        let mut v = [0.0f64; 5];
        for (slot, s) in v.iter_mut().zip(&f[2..]) {
            *slot = s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("bad number `{s}`")))?;
        }
        let bbox = BBox::new(v[1], v[2], v[3], v[4]);
        if !bbox.is_valid() {
            return Err(err("box corners out of order".into()));
        }
        rows.push(PredictionRow {
            image_id: f[0].to_string(),
            detection: Detection::new(bbox, class, v[0]),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2)
    }

    #[test]
    fn iou_hand_values() {
        assert_eq!(iou(&b(0., 0., 2., 2.), &b(0., 0., 2., 2.)), 1.0);
        assert_eq!(iou(&b(0., 0., 1., 1.), &b(2., 2., 3., 3.)), 0.0);
        assert!((iou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.)) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(iou(&b(1., 1., 1., 1.), &b(1., 1., 1., 1.)), 0.0);
    }

    #[test]
    fn ciou_scalar_expansion() {
        // touching corners: iou = 0, ρ² = 18, c² = 72, v = 0
        let v = ciou(&b(0., 0., 2., 2.), &b(2., 2., 6., 6.));
        assert_eq!(v, -0.25);
        // iou = 1/7, ρ² = 2, c² = 18, equal aspect
        let v = ciou(&b(0., 0., 2., 2.), &b(1., 1., 3., 3.));
        assert!((v - (1.0 / 7.0 - 2.0 / 18.0)).abs() < 1e-15, "{v}");
        assert_eq!(ciou(&b(1., 2., 4., 8.), &b(1., 2., 4., 8.)), 1.0);
    }

    #[test]
    fn nms_keeps_best_duplicate() {
        let d = [
            Detection::new(b(0., 0., 10., 10.), 0, 0.8),
            Detection::new(b(0., 0., 10., 10.), 0, 0.9),
            Detection::new(b(0., 0., 10., 10.), 1, 0.7),
        ];
        let kept = nms(&d, 0.45);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].confidence, 0.9);
        assert_eq!(kept[1].class, 1);
    }

    #[test]
    fn two_detections_one_truth() {
        let gt = [GroundTruth::new(b(0., 0., 10., 10.), 0)];
        let d = [
            Detection::new(b(0., 0., 10., 10.), 0, 0.6),
            Detection::new(b(0., 0., 10., 10.), 0, 0.9),
        ];
        let m = match_predictions(&d, &gt, 0.5);
        assert!(m.is_tp(1) && !m.is_tp(0));
        assert_eq!(m.ranked_flags(), vec![true, false]);
    }

    #[test]
    fn ap_envelope_examples() {
        assert_eq!(average_precision(&[true, false], 1), 1.0);
        assert_eq!(average_precision(&[false, true], 1), 0.5);
        assert_eq!(average_precision(&[true, true], 2), 1.0);
        assert_eq!(average_precision(&[], 3), 0.0);
        assert_eq!(average_precision(&[true], 0), 0.0);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let gts = vec![vec![
            GroundTruth::new(b(0., 0., 10., 10.), 0),
            GroundTruth::new(b(20., 20., 30., 40.), 1),
        ]];
        let dets: Vec<Vec<Detection>> = gts
            .iter()
            .map(|g| g.iter().map(|t| Detection::new(t.bbox, t.class, 1.0)).collect())
            .collect();
        let r = evaluate(&dets, &gts, &names, &EvalConfig::default()).unwrap();
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.ap50), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.confusion.tp_rates(), vec![1.0, 1.0]);

        let r = evaluate(&[vec![]], &gts, &names, &EvalConfig::default()).unwrap();
        assert_eq!((r.overall.recall, r.overall.ap50), (0.0, 0.0));
    }

    #[test]
    fn unknown_class_rejected() {
        let gts = vec![vec![GroundTruth::new(b(0., 0., 1., 1.), 3)]];
        let err = evaluate(&[vec![]], &gts, &["a".into()], &EvalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownClass { id: 3, count: 1 }));
    }

    #[test]
    fn predictions_round_trip() {
        let rows = vec![
            PredictionRow {
                image_id: "b".into(),
                detection: Detection::new(b(1., 2., 3., 4.), 1, 0.5),
            },
            PredictionRow {
                image_id: "a".into(),
                detection: Detection::new(b(1.25, 2., 30., 40.5), 0, 0.75),
            },
        ];
        let text = format_predictions(&rows);
        assert!(text.starts_with("a 0 0.750000 1.25"));
        let back = parse_predictions(&text).unwrap();
        assert_eq!(back[1], rows[0]);
        assert!(parse_predictions("a 0 0.5 1 2 3").is_err());
    }
}
