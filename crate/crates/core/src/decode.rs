//! Raw head tensors to pixel-space detections.
//!
//! Per cell `(gx, gy)` and anchor `(aw, ah)` at stride `s`:
//!
//! ```text
//! cx = (2σ(tx) − 0.5 + gx)·s        w = (2σ(tw))²·aw
//! cy = (2σ(ty) − 0.5 + gy)·s        h = (2σ(th))²·ah
//! confidence = σ(obj)·max_c σ(cls_c)
//! ```

use crate::autoanchor::AnchorSet;
use crate::boxes::{BBox, Detection};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One decoded cell/anchor prediction before thresholding or clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPrediction {
    pub scale: usize,
    pub anchor: usize,
    pub gx: usize,
    pub gy: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub objectness: f64,
    pub class: usize,
    pub class_score: f64,
}

impl CellPrediction {
    pub fn confidence(&self) -> f64 {
        self.objectness * self.class_score
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_center(self.cx, self.cy, self.w, self.h)
    }
}

fn check_heads(heads: &[Tensor], anchors: &AnchorSet, strides: &[usize]) -> Result<(usize, usize)> {
    if heads.len() != strides.len() {
        return Err(Error::Shape(format!(
            "{} heads but {} strides",
            heads.len(),
            strides.len()
        )));
    }
    if heads.is_empty() || !anchors.len().is_multiple_of(heads.len()) {
        return Err(Error::Shape(format!(
            "{} anchors cannot be split over {} heads",
            anchors.len(),
            heads.len()
        )));
    }
    let per_scale = anchors.len() / heads.len();
    let c = heads[0].c();
    if !c.is_multiple_of(per_scale) || c / per_scale < 6 {
        return Err(Error::Shape(format!(
            "head has {c} channels, not a multiple of {per_scale}·(5 + classes)"
        )));
    }
    let classes = c / per_scale - 5;
    for h in heads {
        if h.c() != c || h.n() != 1 {
            return Err(Error::Shape(format!(
                "heads must share shape (1, {c}, ·, ·), got {:?}",
                h.shape()
            )));
        }
    }
    Ok((per_scale, classes))
}

/// Decodes every cell and anchor of every head.
pub fn decode_cells(heads: &[Tensor], anchors: &AnchorSet, strides: &[usize]) -> Result<Vec<CellPrediction>> {
    let (per_scale, classes) = check_heads(heads, anchors, strides)?;
    let mut out = Vec::new();
    for (scale, (head, &stride)) in heads.iter().zip(strides).enumerate() {
        let s = stride as f64;
        let (gh, gw) = (head.h(), head.w());
        for a in 0..per_scale {
            let [aw, ah] = anchors.sizes()[scale * per_scale + a];
            let base = a * (5 + classes);
            let ch = |j: usize| head.plane(0, base + j);
            let (tx, ty, tw, th, to) = (ch(0), ch(1), ch(2), ch(3), ch(4));
            for gy in 0..gh {
                for gx in 0..gw {
                    let i = gy * gw + gx;
                    let (class, class_score) = (0..classes).map(|c| (c, sigmoid(ch(5 + c)[i] as f64))).fold(
                        (0, f64::NEG_INFINITY),
                        |best, cur| {
                            if cur.1 > best.1 {
                                cur
                            } else {
                                best
                            }
                        },
                    );
                    let sw = 2.0 * sigmoid(tw[i] as f64);
                    let sh = 2.0 * sigmoid(th[i] as f64);
                    out.push(CellPrediction {
                        scale,
                        anchor: a,
                        gx,
                        gy,
                        cx: (2.0 * sigmoid(tx[i] as f64) - 0.5 + gx as f64) * s,
                        cy: (2.0 * sigmoid(ty[i] as f64) - 0.5 + gy as f64) * s,
                        w: sw * sw * aw,
                        h: sh * sh * ah,
                        objectness: sigmoid(to[i] as f64),
                        class,
                        class_score,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Decodes heads, drops predictions under `conf_threshold`, and clips
/// boxes to the `input_size` square. Degenerate boxes after clipping are
/// dropped.
pub fn decode_detections(
    heads: &[Tensor],
    anchors: &AnchorSet,
    strides: &[usize],
    conf_threshold: f64,
    input_size: usize,
) -> Result<Vec<Detection>> {
    let size = input_size as f64;
    Ok(decode_cells(heads, anchors, strides)?
        .into_iter()
        .filter(|p| p.confidence() >= conf_threshold)
        .filter_map(|p| {
            let b = p.bbox().clip(size, size);
            (b.x2 > b.x1 && b.y2 > b.y1).then(|| Detection::new(b, p.class, p.confidence()))
        })
        .collect())
}
