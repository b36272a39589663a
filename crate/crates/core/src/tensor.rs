//! Dense NCHW tensors and the handful of kernels the detector runs on.
//!
//! Every op here is a pure function of its inputs. Work is split across the
//! current rayon pool in fixed-size blocks so results are bitwise identical
//! for any thread count.

use std::borrow::Cow;
use std::fmt;

use rayon::prelude::*;

use crate::boxes::BBox;
use crate::error::{Error, Result};

/// Output rows handed to one GEMM call. Fixed so the arithmetic for every
/// output element never depends on how many workers are available.
const ROW_BLOCK: usize = 16;

/// Gray value used for letterbox borders.
pub const LETTERBOX_FILL: f32 = 114.0 / 255.0;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: [usize; 4], value: f32) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f(n, c, h, w)` at every index.
    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(b, ch, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn h(&self) -> usize {
        self.shape[2]
    }

    pub fn w(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.offset(n, c, h, w)]
    }

    /// The `h × w` plane of channel `c` in batch item `n`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    /// Copies channels `start..start + len` into a new tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Tensor> {
        let [n, c, h, w] = self.shape;
        if start + len > c {
            return Err(Error::Shape(format!(
                "channel slice {start}..{} out of range for {c} channels",
                start + len
            )));
        }
        let hw = h * w;
        let mut data = Vec::with_capacity(n * len * hw);
        for b in 0..n {
            let from = (b * c + start) * hw;
            data.extend_from_slice(&self.data[from..from + len * hw]);
        }
        Ok(Tensor {
            shape: [n, len, h, w],
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.par_iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise sum of two same-shaped tensors.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    None,
    Silu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub has_bias: bool,
    pub activation: Activation,
}

impl ConvParams {
    /// Stride 1, "same" padding `k / 2`, one group, with bias, no activation.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
            groups: 1,
            has_bias: true,
            activation: Activation::None,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("kernel", self.kernel),
            ("stride", self.stride),
            ("groups", self.groups),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Spec(format!("conv {name} must be positive")));
            }
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return Err(Error::Spec(format!(
                "channels {}→{} not divisible by {} groups",
                self.in_channels, self.out_channels, self.groups
            )));
        }
        Ok(())
    }

    /// Weight tensor dims: `(out, in / groups, k, k)`.
    pub fn weight_dims(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel,
            self.kernel,
        ]
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            window_out(h, self.kernel, self.stride, self.padding)?,
            window_out(w, self.kernel, self.stride, self.padding)?,
        ))
    }

    pub fn param_count(&self) -> usize {
        self.weight_dims().iter().product::<usize>() + if self.has_bias { self.out_channels } else { 0 }
    }

    /// Multiply-accumulates count as two flops; bias and activation are ignored.
    pub fn flops(&self, h: usize, w: usize) -> Result<u64> {
        let (ho, wo) = self.output_hw(h, w)?;
        let per_out = (self.in_channels / self.groups) * self.kernel * self.kernel;
        Ok(2 * (per_out * self.out_channels * ho * wo) as u64)
    }
}

fn window_out(dim: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if dim == 0 || dim + 2 * pad < k || stride == 0 {
        return Err(Error::Geometry(format!(
            "input extent {dim} with kernel {k}, padding {pad}, stride {stride} gives no output"
        )));
    }
    Ok((dim + 2 * pad - k) / stride + 1)
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu_scalar(x: f32) -> f32 {
    x * sigmoid(x)
}

pub fn silu(x: &Tensor) -> Tensor {
    x.map(silu_scalar)
}

/// 2-D cross-correlation (no kernel flip) with grouping, bias and activation.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: Option<&[f32]>, params: &ConvParams) -> Result<Tensor> {
    params.validate()?;
    let [n, cin, h, w] = input.shape();
    if cin != params.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, input has {cin}",
            params.in_channels
        )));
    }
    if weights.shape() != params.weight_dims() {
        return Err(Error::Shape(format!(
            "conv weights are {:?}, expected {:?}",
            weights.shape(),
            params.weight_dims()
        )));
    }
    match (params.has_bias, bias) {
        (true, Some(b)) if b.len() != params.out_channels => {
            return Err(Error::Shape(format!(
                "bias has {} entries, expected {}",
                b.len(),
                params.out_channels
            )))
        }
        (true, None) => return Err(Error::Shape("conv declares a bias but none given".into())),
        (false, Some(_)) => return Err(Error::Shape("bias given to a conv declared without one".into())),
        _ => {}
    }

    let (ho, wo) = params.output_hw(h, w)?;
    let cout = params.out_channels;
    let groups = params.groups;
    let cin_g = cin / groups;
    let cout_g = cout / groups;
    let k = params.kernel;
    let kdim = cin_g * k * k;
    let out_plane = ho * wo;
    let in_plane = h * w;
    let mut out = vec![0f32; n * cout * out_plane];

    for b in 0..n {
        let x = &input.data()[b * cin * in_plane..(b + 1) * cin * in_plane];
        let y = &mut out[b * cout * out_plane..(b + 1) * cout * out_plane];

        if cin_g == 1 && cout_g == 1 {
            let wdata = weights.data();
            y.par_chunks_mut(out_plane).enumerate().for_each(|(oc, yp)| {
                let xp = &x[oc * in_plane..(oc + 1) * in_plane];
                depthwise_plane(xp, &wdata[oc * k * k..(oc + 1) * k * k], yp, h, w, ho, wo, params);
            });
        } else {
            for g in 0..groups {
                let xg = &x[g * cin_g * in_plane..(g + 1) * cin_g * in_plane];
                let cols: Cow<[f32]> = if k == 1 && params.stride == 1 && params.padding == 0 {
                    Cow::Borrowed(xg)
                } else {
                    Cow::Owned(im2col(xg, cin_g, h, w, ho, wo, params))
                };
                let wg = &weights.data()[g * cout_g * kdim..(g + 1) * cout_g * kdim];
                let yg = &mut y[g * cout_g * out_plane..(g + 1) * cout_g * out_plane];
                yg.par_chunks_mut(ROW_BLOCK * out_plane)
                    .enumerate()
                    .for_each(|(block, yc)| {
                        let rows = yc.len() / out_plane;
                        let a = &wg[block * ROW_BLOCK * kdim..];
                        // SAFETY: `a` holds at least rows×kdim values, `cols` holds
                        // kdim×out_plane, `yc` holds rows×out_plane; all row-major.
                        unsafe {
                            matrixmultiply::sgemm(
                                rows,
                                kdim,
                                out_plane,
                                1.0,
                                a.as_ptr(),
                                kdim as isize,
                                1,
                                cols.as_ptr(),
                                out_plane as isize,
                                1,
                                0.0,
                                yc.as_mut_ptr(),
                                out_plane as isize,
                                1,
                            );
                        }
                    });
            }
        }

        if bias.is_some() || params.activation != Activation::None {
            y.par_chunks_mut(out_plane).enumerate().for_each(|(oc, yp)| {
                let bv = bias.map_or(0.0, |bias| bias[oc]);
                match params.activation {
                    Activation::None => yp.iter_mut().for_each(|v| *v += bv),
                    Activation::Silu => yp.iter_mut().for_each(|v| *v = silu_scalar(*v + bv)),
                }
            });
        }
    }

    Tensor::new([n, cout, ho, wo], out)
}

#[allow(clippy::too_many_arguments)]
fn depthwise_plane(
    x: &[f32],
    kernel: &[f32],
    y: &mut [f32],
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    params: &ConvParams,
) {
    let k = params.kernel;
    let (s, p) = (params.stride as isize, params.padding as isize);
    for oy in 0..ho {
        for ox in 0..wo {
            let mut acc = 0f32;
            for ky in 0..k {
                let iy = oy as isize * s + ky as isize - p;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let row = &x[iy as usize * w..(iy as usize + 1) * w];
                for kx in 0..k {
                    let ix = ox as isize * s + kx as isize - p;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    acc += kernel[ky * k + kx] * row[ix as usize];
                }
            }
            y[oy * wo + ox] = acc;
        }
    }
}

/// Unfolds `channels × h × w` into a `(channels·k·k) × (ho·wo)` matrix.
fn im2col(x: &[f32], channels: usize, h: usize, w: usize, ho: usize, wo: usize, params: &ConvParams) -> Vec<f32> {
    let k = params.kernel;
    let (s, p) = (params.stride as isize, params.padding as isize);
    let out_plane = ho * wo;
    let mut cols = vec![0f32; channels * k * k * out_plane];
    cols.par_chunks_mut(out_plane).enumerate().for_each(|(row, dst)| {
        let c = row / (k * k);
        let ky = (row / k) % k;
        let kx = row % k;
        let src = &x[c * h * w..(c + 1) * h * w];
        for oy in 0..ho {
            let iy = oy as isize * s + ky as isize - p;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
            let dst_row = &mut dst[oy * wo..(oy + 1) * wo];
            for (ox, d) in dst_row.iter_mut().enumerate() {
                let ix = ox as isize * s + kx as isize - p;
                if ix >= 0 && ix < w as isize {
                    *d = src_row[ix as usize];
                }
            }
        }
    });
    cols
}

/// Sliding-window maximum; padded cells count as negative infinity.
pub fn maxpool2d(input: &Tensor, k: usize, stride: usize, padding: usize) -> Result<Tensor> {
    if k == 0 || stride == 0 {
        return Err(Error::Geometry("pool kernel and stride must be positive".into()));
    }
    if 2 * padding > k {
        return Err(Error::Geometry(format!(
            "pool padding {padding} exceeds half of kernel {k}"
        )));
    }
    let [n, c, h, w] = input.shape();
    let ho = window_out(h, k, stride, padding)?;
    let wo = window_out(w, k, stride, padding)?;
    let (s, p) = (stride as isize, padding as isize);
    let mut out = vec![0f32; n * c * ho * wo];
    out.par_chunks_mut(ho * wo).enumerate().for_each(|(plane, dst)| {
        let src = &input.data()[plane * h * w..(plane + 1) * h * w];
        for oy in 0..ho {
            let y0 = (oy as isize * s - p).max(0) as usize;
            let y1 = ((oy as isize * s - p + k as isize).min(h as isize)) as usize;
            for ox in 0..wo {
                let x0 = (ox as isize * s - p).max(0) as usize;
                let x1 = ((ox as isize * s - p + k as isize).min(w as isize)) as usize;
                let mut m = f32::NEG_INFINITY;
                for yy in y0..y1 {
                    for &v in &src[yy * w + x0..yy * w + x1] {
                        m = m.max(v);
                    }
                }
                dst[oy * wo + ox] = m;
            }
        }
    });
    Tensor::new([n, c, ho, wo], out)
}

/// Doubles height and width, replicating each value into a 2×2 block.
pub fn upsample_nearest2x(input: &Tensor) -> Tensor {
    let [n, c, h, w] = input.shape();
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = vec![0f32; n * c * ho * wo];
    if !out.is_empty() {
        out.par_chunks_mut(ho * wo).enumerate().for_each(|(plane, dst)| {
            let src = &input.data()[plane * h * w..(plane + 1) * h * w];
            for y in 0..ho {
                for x in 0..wo {
                    dst[y * wo + x] = src[(y / 2) * w + x / 2];
                }
            }
        });
    }
    Tensor {
        shape: [n, c, ho, wo],
        data: out,
    }
}

/// Stacks tensors along the channel axis, preserving part order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
    let [n, _, h, w] = first.shape();
    for p in parts {
        let [pn, _, ph, pw] = p.shape();
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::Shape(format!(
                "concat parts disagree: {:?} vs {:?}",
                first.shape(),
                p.shape()
            )));
        }
    }
    let c: usize = parts.iter().map(|p| p.c()).sum();
    let hw = h * w;
    let mut data = Vec::with_capacity(n * c * hw);
    for b in 0..n {
        for p in parts {
            let block = p.c() * hw;
            data.extend_from_slice(&p.data()[b * block..(b + 1) * block]);
        }
    }
    Tensor::new([n, c, h, w], data)
}

/// Records how an image was placed into the square network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Letterbox {
    pub scale: f64,
    pub pad_top: usize,
    pub pad_left: usize,
    pub src_width: usize,
    pub src_height: usize,
    pub target: usize,
}

impl Letterbox {
    pub fn identity(size: usize) -> Self {
        Self {
            scale: 1.0,
            pad_top: 0,
            pad_left: 0,
            src_width: size,
            src_height: size,
            target: size,
        }
    }

    pub fn forward_box(&self, b: &BBox) -> BBox {
        let (l, t) = (self.pad_left as f64, self.pad_top as f64);
        BBox::new(
            b.x1 * self.scale + l,
            b.y1 * self.scale + t,
            b.x2 * self.scale + l,
            b.y2 * self.scale + t,
        )
    }

    /// Maps a network-space box back to source pixels, clipped to the image.
    pub fn inverse_box(&self, b: &BBox) -> BBox {
        let (l, t) = (self.pad_left as f64, self.pad_top as f64);
        let (sw, sh) = (self.src_width as f64, self.src_height as f64);
        BBox::new(
            ((b.x1 - l) / self.scale).clamp(0.0, sw),
            ((b.y1 - t) / self.scale).clamp(0.0, sh),
            ((b.x2 - l) / self.scale).clamp(0.0, sw),
            ((b.y2 - t) / self.scale).clamp(0.0, sh),
        )
    }
}

/// Aspect-preserving nearest-neighbour resize onto a `target × target`
/// canvas filled with [`LETTERBOX_FILL`].
pub fn letterbox(image: &Tensor, target: usize) -> Result<(Tensor, Letterbox)> {
    let [n, c, h, w] = image.shape();
    if n != 1 {
        return Err(Error::Shape(format!("letterbox expects one image, got batch {n}")));
    }
    if h == 0 || w == 0 || c == 0 || target == 0 {
        return Err(Error::Geometry(format!(
            "cannot letterbox a {w}×{h}×{c} image to {target}"
        )));
    }
    let scale = (target as f64 / h as f64).min(target as f64 / w as f64);
    let new_h = ((h as f64 * scale).round() as usize).clamp(1, target);
    let new_w = ((w as f64 * scale).round() as usize).clamp(1, target);
    let pad_top = (target - new_h) / 2;
    let pad_left = (target - new_w) / 2;

    let src_y: Vec<usize> = (0..new_h)
        .map(|y| (((y as f64 + 0.5) * h as f64 / new_h as f64) as usize).min(h - 1))
        .collect();
    let src_x: Vec<usize> = (0..new_w)
        .map(|x| (((x as f64 + 0.5) * w as f64 / new_w as f64) as usize).min(w - 1))
        .collect();

    let mut out = Tensor::full([1, c, target, target], LETTERBOX_FILL);
    for ch in 0..c {
        let src = image.plane(0, ch);
        let base = ch * target * target;
        for (y, &sy) in src_y.iter().enumerate() {
            let row = base + (y + pad_top) * target + pad_left;
            for (x, &sx) in src_x.iter().enumerate() {
                out.data[row + x] = src[sy * w + sx];
            }
        }
    }
    Ok((
        out,
        Letterbox {
            scale,
            pad_top,
            pad_left,
            src_width: w,
            src_height: h,
            target,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: [usize; 4]) -> Tensor {
        let len = shape.iter().product::<usize>();
        Tensor::new(shape, (0..len).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor::full([1, 1, 3, 3], 1.0);
        let k = Tensor::full([1, 1, 1, 1], 1.0);
        let p = ConvParams::new(1, 1, 1).bias(false);
        assert_eq!(conv2d(&x, &k, None, &p).unwrap(), x);
    }

    #[test]
    fn stride_two_kernel_two_halves_extent() {
        let x = ramp([1, 4, 8, 8]);
        let p = ConvParams::new(4, 6, 2).stride(2).padding(0).bias(false);
        let wt = Tensor::full(p.weight_dims(), 0.1);
        assert_eq!(conv2d(&x, &wt, None, &p).unwrap().shape(), [1, 6, 4, 4]);
    }

    #[test]
    fn conv_rejects_mismatched_shapes() {
        let x = Tensor::zeros([1, 3, 4, 4]);
        let p = ConvParams::new(2, 4, 3).bias(false);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(p.weight_dims()), None, &p),
            Err(Error::Shape(_))
        ));
        let p = ConvParams::new(3, 4, 3).bias(false);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros([4, 3, 1, 1]), None, &p),
            Err(Error::Shape(_))
        ));
        let p = ConvParams::new(3, 4, 3);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(p.weight_dims()), Some(&[0.0; 3]), &p),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn conv_rejects_empty_output() {
        let x = Tensor::zeros([1, 1, 2, 2]);
        let p = ConvParams::new(1, 1, 5).padding(0).bias(false);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(p.weight_dims()), None, &p),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn groups_must_divide_channels() {
        assert!(ConvParams::new(4, 6, 3).groups(4).validate().is_err());
        assert!(ConvParams::new(4, 8, 3).groups(4).validate().is_ok());
    }

    #[test]
    fn silu_reference_points() {
        let x = Tensor::new([1, 1, 1, 4], vec![0.0, 1.0, 40.0, -40.0]).unwrap();
        let y = silu(&x);
        assert_eq!(y.data()[0], 0.0);
        let expected = 1.0f64 / (1.0 + (-1.0f64).exp());
        assert!((y.data()[1] as f64 - expected).abs() < 1e-7);
        assert!((y.data()[2] - 40.0).abs() < 1e-5);
        assert!(y.data()[3].is_finite() && y.data()[3].abs() < 1e-5);
    }

    #[test]
    fn maxpool_ramp() {
        let y = maxpool2d(&ramp([1, 1, 4, 4]), 2, 2, 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn maxpool_constant_and_same_geometry() {
        let y = maxpool2d(&Tensor::full([1, 2, 5, 7], 3.0), 5, 1, 2).unwrap();
        assert_eq!(y.shape(), [1, 2, 5, 7]);
        assert!(y.data().iter().all(|&v| v == 3.0));
        assert!(maxpool2d(&Tensor::zeros([1, 1, 4, 4]), 3, 1, 2).is_err());
    }

    #[test]
    fn upsample_replicates_blocks() {
        let y = upsample_nearest2x(&Tensor::full([1, 1, 1, 1], 2.5));
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 2.5));

        let x = Tensor::new([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = upsample_nearest2x(&x);
        #[rustfmt::skip]
        let expected = [
            1.0, 1.0, 2.0, 2.0,
            1.0, 1.0, 2.0, 2.0,
            3.0, 3.0, 4.0, 4.0,
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(y.data(), &expected);
        let back = Tensor::from_fn([1, 1, 2, 2], |_, _, r, c| y.at(0, 0, 2 * r, 2 * c));
        assert_eq!(back, x);
    }

    #[test]
    fn concat_preserves_parts() {
        let a = ramp([2, 2, 3, 3]);
        let b = ramp([2, 3, 3, 3]).map(|v| -v);
        assert_eq!(concat_channels(&[&a]).unwrap(), a);
        let y = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(y.c(), 5);
        assert_eq!(y.slice_channels(0, 2).unwrap(), a);
        assert_eq!(y.slice_channels(2, 3).unwrap(), b);
        assert!(concat_channels(&[&a, &Tensor::zeros([2, 1, 2, 3])]).is_err());
    }

    #[test]
    fn ghost_channel_composition() {
        // two intrinsic maps, each paired with one ghost map
        let intrinsic = Tensor::zeros([1, 2, 4, 4]);
        let ghost = Tensor::zeros([1, 2, 4, 4]);
        assert_eq!(concat_channels(&[&intrinsic, &ghost]).unwrap().c(), 2 * 2);
    }

    #[test]
    fn letterbox_square_is_identity() {
        let img = ramp([1, 1, 256, 256]);
        let (out, lb) = letterbox(&img, 256).unwrap();
        assert_eq!(out, img);
        assert_eq!(lb, Letterbox::identity(256));
    }

    #[test]
    fn letterbox_pads_short_side() {
        let img = Tensor::full([1, 3, 128, 256], 0.5);
        let (out, lb) = letterbox(&img, 256).unwrap();
        assert_eq!(out.shape(), [1, 3, 256, 256]);
        assert_eq!((lb.pad_top, lb.pad_left, lb.scale), (64, 0, 1.0));
        assert_eq!(out.at(0, 0, 63, 10), LETTERBOX_FILL);
        assert_eq!(out.at(0, 0, 64, 10), 0.5);
        assert_eq!(out.at(0, 2, 191, 255), 0.5);
        assert_eq!(out.at(0, 2, 192, 255), LETTERBOX_FILL);
    }

    #[test]
    fn letterbox_rejects_empty() {
        assert!(letterbox(&Tensor::zeros([1, 1, 0, 4]), 32).is_err());
        assert!(letterbox(&Tensor::zeros([2, 1, 4, 4]), 32).is_err());
    }

    #[test]
    fn letterbox_box_round_trip() {
        let img = Tensor::zeros([1, 1, 300, 500]);
        let (_, lb) = letterbox(&img, 256).unwrap();
        let b = BBox::new(12.0, 40.5, 333.0, 299.0);
        let back = lb.inverse_box(&lb.forward_box(&b));
        for (u, v) in [(b.x1, back.x1), (b.y1, back.y1), (b.x2, back.x2), (b.y2, back.y2)] {
            assert!((u - v).abs() <= 0.5);
        }
    }
}
