//! Slow, obviously-correct reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use gaanet::boxes::{BBox, Detection, GroundTruth};
use gaanet::tensor::{ConvParams, Tensor};

/// Direct six-loop convolution with f64 accumulation.
pub fn naive_conv2d(x: &Tensor, w: &Tensor, bias: Option<&[f32]>, p: &ConvParams) -> Tensor {
    let [n, _, h, wd] = x.shape();
    let k = p.kernel;
    let oh = (h + 2 * p.padding - k) / p.stride + 1;
    let ow = (wd + 2 * p.padding - k) / p.stride + 1;
    let cin_g = p.in_channels / p.groups;
    let cout_g = p.out_channels / p.groups;
    let mut out = vec![0.0f32; n * p.out_channels * oh * ow];
    for b in 0..n {
        for o in 0..p.out_channels {
            let g = o / cout_g;
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = bias.map_or(0.0, |bs| bs[o] as f64);
                    for ci in 0..cin_g {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * p.stride + ky) as isize - p.padding as isize;
                                let ix = (xo * p.stride + kx) as isize - p.padding as isize;
                                if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= wd {
                                    continue;
                                }
                                acc += x.at(b, g * cin_g + ci, iy as usize, ix as usize) as f64
                                    * w.at(o, ci, ky, kx) as f64;
                            }
                        }
                    }
                    let v = acc as f32;
                    out[((b * p.out_channels + o) * oh + y) * ow + xo] = match p.activation {
                        gaanet::tensor::Activation::None => v,
                        gaanet::tensor::Activation::Silu => (acc / (1.0 + (-acc).exp())) as f32,
                    };
                }
            }
        }
    }
    Tensor::new([n, p.out_channels, oh, ow], out).unwrap()
}

pub fn naive_maxpool(x: &Tensor, k: usize, s: usize, pad: usize) -> Tensor {
    let [n, c, h, w] = x.shape();
    let oh = (h + 2 * pad - k) / s + 1;
    let ow = (w + 2 * pad - k) / s + 1;
    Tensor::from_fn([n, c, oh, ow], |b, ch, y, xo| {
        let mut m = f32::NEG_INFINITY;
        for ky in 0..k {
            for kx in 0..k {
                let iy = (y * s + ky) as isize - pad as isize;
                let ix = (xo * s + kx) as isize - pad as isize;
                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                    m = m.max(x.at(b, ch, iy as usize, ix as usize));
                }
            }
        }
        m
    })
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f32 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

/// Ratio metric of one box against one anchor.
pub fn ratio(anchor: [f64; 2], size: [f64; 2]) -> f64 {
    let r = [size[0] / anchor[0], size[1] / anchor[1]];
    let mut m = f64::INFINITY;
    for v in [r[0], 1.0 / r[0], r[1], 1.0 / r[1]] {
        if v < m {
            m = v;
        }
    }
    m
}

pub fn oracle_fitness(anchors: &[[f64; 2]], sizes: &[[f64; 2]], thr: f64) -> f64 {
    let mut total = 0.0;
    for s in sizes {
        let mut best = 0.0;
        for a in anchors {
            let r = ratio(*a, *s);
            if r > best {
                best = r;
            }
        }
        if best > thr {
            total += best;
        }
    }
    total / sizes.len() as f64
}

pub fn oracle_bpr(anchors: &[[f64; 2]], sizes: &[[f64; 2]], thr: f64) -> f64 {
    let hits = sizes
        .iter()
        .filter(|s| anchors.iter().any(|a| ratio(*a, **s) > thr))
        .count();
    hits as f64 / sizes.len() as f64
}

pub fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let iy = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = ix * iy;
    let union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Index of the best-ranked detection among `alive`.
fn top(dets: &[Detection], alive: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..dets.len() {
        if alive[i] && best.is_none_or(|b| dets[i].rank(&dets[b]).is_lt()) {
            best = Some(i);
        }
    }
    best
}

/// Classic formulation: take the best remaining box, delete every
/// same-class box overlapping it by more than the threshold, repeat.
pub fn oracle_nms(dets: &[Detection], thr: f64) -> Vec<Detection> {
    let mut alive = vec![true; dets.len()];
    let mut out = Vec::new();
    while let Some(i) = top(dets, &alive) {
        alive[i] = false;
        out.push(dets[i]);
        for j in 0..dets.len() {
            if alive[j] && dets[j].class == dets[i].class && oracle_iou(&dets[i].bbox, &dets[j].bbox) > thr {
                alive[j] = false;
            }
        }
    }
    out
}

/// Per detection, the matched ground-truth index. Detections are visited by
/// repeated best-remaining selection; the full IoU matrix is built up front.
pub fn oracle_match(dets: &[Detection], gts: &[GroundTruth], thr: f64) -> Vec<Option<usize>> {
    let ious: Vec<Vec<f64>> = dets
        .iter()
        .map(|d| gts.iter().map(|g| oracle_iou(&d.bbox, &g.bbox)).collect())
        .collect();
    let mut alive = vec![true; dets.len()];
    let mut taken = vec![false; gts.len()];
    let mut out = vec![None; dets.len()];
    while let Some(i) = top(dets, &alive) {
        alive[i] = false;
        let mut cands: Vec<usize> = (0..gts.len())
            .filter(|&g| !taken[g] && gts[g].class == dets[i].class && ious[i][g] >= thr)
            .collect();
        cands.sort_by(|&a, &b| ious[i][b].total_cmp(&ious[i][a]).then(a.cmp(&b)));
        if let Some(&g) = cands.first() {
            taken[g] = true;
            out[i] = Some(g);
        }
    }
    out
}

/// AP from its definition: for each rank where recall rises, the rise
/// times the best precision at any rank with at least that recall.
pub fn oracle_ap(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let n = flags.len();
    let prec: Vec<f64> = (0..n)
        .map(|i| flags[..=i].iter().filter(|&&f| f).count() as f64 / (i + 1) as f64)
        .collect();
    let rec: Vec<f64> = (0..n)
        .map(|i| flags[..=i].iter().filter(|&&f| f).count() as f64 / n_gt as f64)
        .collect();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..n {
        if rec[i] > prev {
            let best = (0..n)
                .filter(|&j| rec[j] >= rec[i])
                .map(|j| prec[j])
                .fold(0.0, f64::max);
            ap += (rec[i] - prev) * best;
            prev = rec[i];
        }
    }
    ap
}

/// Max-F1 operating point by trying every distinct confidence as a cut.
pub fn oracle_best_f1(scored: &[(f64, bool)], n_gt: usize) -> Option<(f64, f64, f64, f64)> {
    let mut confs: Vec<f64> = scored.iter().map(|s| s.0).collect();
    confs.sort_by(|a, b| b.total_cmp(a));
    confs.dedup();
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for t in confs {
        let kept: Vec<&(f64, bool)> = scored.iter().filter(|s| s.0 >= t).collect();
        let tp = kept.iter().filter(|s| s.1).count() as f64;
        let p = tp / kept.len() as f64;
        let r = if n_gt > 0 { tp / n_gt as f64 } else { 0.0 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        if best.is_none_or(|b| f1 > b.3) {
            best = Some((t, p, r, f1));
        }
    }
    best
}

pub struct OracleClass {
    pub gt_count: usize,
    pub det_count: usize,
    pub tp_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub confidence: Option<f64>,
    pub ap50: f64,
}

pub struct OracleReport {
    pub classes: Vec<OracleClass>,
    pub overall: [f64; 3],
    pub counts: Vec<Vec<usize>>,
}

/// Every report field from first principles.
pub fn oracle_evaluate(dets: &[Vec<Detection>], gts: &[Vec<GroundTruth>], nc: usize) -> OracleReport {
    let mut per_class: Vec<Vec<(f64, usize, usize, bool)>> = vec![Vec::new(); nc];
    for (img, (d, g)) in dets.iter().zip(gts).enumerate() {
        let m = oracle_match(d, g, 0.5);
        let mut alive = vec![true; d.len()];
        let mut rank = 0;
        while let Some(i) = top(d, &alive) {
            alive[i] = false;
            per_class[d[i].class].push((d[i].confidence, img, rank, m[i].is_some()));
            rank += 1;
        }
    }
    let mut classes = Vec::new();
    for (c, mut s) in per_class.into_iter().enumerate() {
        s.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let n_gt = gts.iter().flatten().filter(|g| g.class == c).count();
        let flags: Vec<bool> = s.iter().map(|x| x.3).collect();
        let scored: Vec<(f64, bool)> = s.iter().map(|x| (x.0, x.3)).collect();
        let op = oracle_best_f1(&scored, n_gt);
        classes.push(OracleClass {
            gt_count: n_gt,
            det_count: s.len(),
            tp_count: flags.iter().filter(|&&f| f).count(),
            precision: op.map_or(0.0, |o| o.1),
            recall: op.map_or(0.0, |o| o.2),
            confidence: op.map(|o| o.0),
            ap50: oracle_ap(&flags, n_gt),
        });
    }
    let present: Vec<&OracleClass> = classes.iter().filter(|c| c.gt_count > 0).collect();
    let mean = |f: &dyn Fn(&OracleClass) -> f64| {
        if present.is_empty() {
            0.0
        } else {
            present.iter().map(|c| f(c)).sum::<f64>() / present.len() as f64
        }
    };
    let overall = [mean(&|c| c.precision), mean(&|c| c.recall), mean(&|c| c.ap50)];

    // confusion: repeatedly take the highest-IoU unused pair
    let mut counts = vec![vec![0usize; nc + 1]; nc + 1];
    for (d, g) in dets.iter().zip(gts) {
        let d: Vec<&Detection> = d.iter().filter(|x| x.confidence >= 0.25).collect();
        let mut du = vec![false; d.len()];
        let mut gu = vec![false; g.len()];
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, di) in d.iter().enumerate() {
                for (j, gj) in g.iter().enumerate() {
                    if du[i] || gu[j] {
                        continue;
                    }
                    let o = oracle_iou(&di.bbox, &gj.bbox);
                    if o >= 0.5 && best.is_none_or(|b| o > b.0) {
                        best = Some((o, i, j));
                    }
                }
            }
            let Some((_, i, j)) = best else { break };
            du[i] = true;
            gu[j] = true;
            counts[d[i].class][g[j].class] += 1;
        }
        for (j, gj) in g.iter().enumerate() {
            if !gu[j] {
                counts[nc][gj.class] += 1;
            }
        }
        for (i, di) in d.iter().enumerate() {
            if !du[i] {
                counts[di.class][nc] += 1;
            }
        }
    }
    OracleReport {
        classes,
        overall,
        counts,
    }
}
