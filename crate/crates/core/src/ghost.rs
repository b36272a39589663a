//! Ghost-convolution block library.
//!
//! A ghost convolution produces half of its output channels with an ordinary
//! convolution (the intrinsic maps) and the other half by running a cheap
//! 5×5 depthwise convolution over those intrinsic maps. The bottleneck, C3
//! and SPPF blocks below are compositions of that primitive and plain
//! convolutions, each with parameter and flop accounting derived from the
//! same shape tables used to bind weights.

use crate::error::{Error, Result};
use crate::tensor::{concat_channels, conv2d, maxpool2d, Activation, ConvParams, Tensor};

/// Kernel of the cheap depthwise branch.
pub const CHEAP_KERNEL: usize = 5;
/// Pool kernel used by SPPF.
pub const SPPF_POOL: usize = 5;

/// Name and dims of one scalar parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShape {
    pub name: String,
    pub dims: Vec<usize>,
}

impl ParamShape {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Inputs feeding one output unit; 1 for biases.
    pub fn fan_in(&self) -> usize {
        self.dims.iter().skip(1).product::<usize>().max(1)
    }
}

/// Anything that can hand out named parameter slices of a known shape.
pub trait ParamSource {
    fn param(&self, name: &str, dims: &[usize]) -> Result<&[f32]>;
}

/// Shared interface of every block: shapes, params, flops.
pub trait Block {
    fn out_channels(&self) -> usize;
    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]>;
    fn param_shapes(&self, prefix: &str) -> Vec<ParamShape>;
    fn count_flops(&self, input: [usize; 4]) -> Result<u64>;

    fn count_params(&self) -> usize {
        self.param_shapes("").iter().map(ParamShape::numel).sum()
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn conv_shapes(prefix: &str, p: &ConvParams) -> Vec<ParamShape> {
    let mut v = vec![ParamShape {
        name: join(prefix, "weight"),
        dims: p.weight_dims().to_vec(),
    }];
    if p.has_bias {
        v.push(ParamShape {
            name: join(prefix, "bias"),
            dims: vec![p.out_channels],
        });
    }
    v
}

fn check_channels(input: [usize; 4], expected: usize, what: &str) -> Result<()> {
    if input[1] != expected {
        return Err(Error::Shape(format!(
            "{what} expects {expected} input channels, got {}",
            input[1]
        )));
    }
    Ok(())
}

/// Weights for one convolution (BN already folded into the bias).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

impl ConvWeights {
    pub fn zeros(p: &ConvParams) -> Self {
        Self {
            weight: Tensor::zeros(p.weight_dims()),
            bias: vec![0.0; p.out_channels],
        }
    }

    pub fn load(src: &impl ParamSource, prefix: &str, p: &ConvParams) -> Result<Self> {
        let dims = p.weight_dims();
        let weight = Tensor::new(dims, src.param(&join(prefix, "weight"), &dims)?.to_vec())?;
        let bias = if p.has_bias {
            src.param(&join(prefix, "bias"), &[p.out_channels])?.to_vec()
        } else {
            Vec::new()
        };
        Ok(Self { weight, bias })
    }

    pub fn apply(&self, input: &Tensor, p: &ConvParams) -> Result<Tensor> {
        let bias = p.has_bias.then_some(self.bias.as_slice());
        conv2d(input, &self.weight, bias, p)
    }
}

/// Plain `Conv` block: convolution followed by SiLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub c1: usize,
    pub c2: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
}

impl ConvSpec {
    pub fn new(c1: usize, c2: usize, k: usize, s: usize) -> Self {
        Self { c1, c2, k, s, p: k / 2 }
    }

    pub fn with_padding(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn params(&self) -> ConvParams {
        ConvParams::new(self.c1, self.c2, self.k)
            .stride(self.s)
            .padding(self.p)
            .activation(Activation::Silu)
    }

    pub fn forward(&self, input: &Tensor, w: &ConvWeights) -> Result<Tensor> {
        w.apply(input, &self.params())
    }

    pub fn load(&self, src: &impl ParamSource, prefix: &str) -> Result<ConvWeights> {
        ConvWeights::load(src, &join(prefix, "conv"), &self.params())
    }
}

impl Block for ConvSpec {
    fn out_channels(&self) -> usize {
        self.c2
    }

    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        check_channels(input, self.c1, "Conv")?;
        let (h, w) = self.params().output_hw(input[2], input[3])?;
        Ok([input[0], self.c2, h, w])
    }

    fn param_shapes(&self, prefix: &str) -> Vec<ParamShape> {
        conv_shapes(&join(prefix, "conv"), &self.params())
    }

    fn count_flops(&self, input: [usize; 4]) -> Result<u64> {
        Ok(input[0] as u64 * self.params().flops(input[2], input[3])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GhostConvSpec {
    pub c1: usize,
    pub c2: usize,
    pub k: usize,
    pub s: usize,
    /// Activation after the primary convolution.
    pub act: Activation,
    /// Activation after the cheap depthwise branch. Linear by default.
    pub cheap_act: Activation,
}

impl GhostConvSpec {
    /// Rejects odd `c2`: the output is split evenly into intrinsic and ghost halves.
    pub fn new(c1: usize, c2: usize, k: usize, s: usize) -> Result<Self> {
        if c1 == 0 || k == 0 || s == 0 {
            return Err(Error::Spec(format!(
                "GhostConv needs positive c1, k, s (got {c1}, {k}, {s})"
            )));
        }
        if c2 < 2 || !c2.is_multiple_of(2) {
            return Err(Error::Spec(format!(
                "GhostConv output channels must be even and ≥ 2, got {c2}"
            )));
        }
        Ok(Self {
            c1,
            c2,
            k,
            s,
            act: Activation::Silu,
            cheap_act: Activation::None,
        })
    }

    pub fn with_act(mut self, act: Activation) -> Self {
        self.act = act;
        self
    }

    pub fn with_cheap_act(mut self, act: Activation) -> Self {
        self.cheap_act = act;
        self
    }

    /// Intrinsic channel count.
    pub fn hidden(&self) -> usize {
        self.c2 / 2
    }

    pub fn primary_params(&self) -> ConvParams {
        ConvParams::new(self.c1, self.hidden(), self.k)
            .stride(self.s)
            .activation(self.act)
    }

    pub fn cheap_params(&self) -> ConvParams {
        let h = self.hidden();
        ConvParams::new(h, self.c2 - h, CHEAP_KERNEL)
            .groups(h)
            .activation(self.cheap_act)
    }

    /// The plain convolution a ghost convolution replaces.
    pub fn standard_equivalent(&self) -> ConvParams {
        ConvParams::new(self.c1, self.c2, self.k).stride(self.s)
    }

    pub fn forward(&self, input: &Tensor, w: &GhostConvWeights) -> Result<Tensor> {
        ghost_conv(input, self, w)
    }

    pub fn load(&self, src: &impl ParamSource, prefix: &str) -> Result<GhostConvWeights> {
        Ok(GhostConvWeights {
            primary: ConvWeights::load(src, &join(prefix, "cv1.conv"), &self.primary_params())?,
            cheap: ConvWeights::load(src, &join(prefix, "cv2.conv"), &self.cheap_params())?,
        })
    }

    pub fn zero_weights(&self) -> GhostConvWeights {
        GhostConvWeights {
            primary: ConvWeights::zeros(&self.primary_params()),
            cheap: ConvWeights::zeros(&self.cheap_params()),
        }
    }
}

impl Block for GhostConvSpec {
    fn out_channels(&self) -> usize {
        self.c2
    }

    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        check_channels(input, self.c1, "GhostConv")?;
        let (h, w) = self.primary_params().output_hw(input[2], input[3])?;
        Ok([input[0], self.c2, h, w])
    }

    fn param_shapes(&self, prefix: &str) -> Vec<ParamShape> {
        let mut v = conv_shapes(&join(prefix, "cv1.conv"), &self.primary_params());
        v.extend(conv_shapes(&join(prefix, "cv2.conv"), &self.cheap_params()));
        v
    }

    fn count_flops(&self, input: [usize; 4]) -> Result<u64> {
        let p = self.primary_params();
        let (h, w) = p.output_hw(input[2], input[3])?;
        Ok(input[0] as u64 * (p.flops(input[2], input[3])? + self.cheap_params().flops(h, w)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhostConvWeights {
    pub primary: ConvWeights,
    pub cheap: ConvWeights,
}

/// Intrinsic maps from the primary conv, ghost maps from the depthwise
/// cheap conv over them; output is `[intrinsic, ghost]` along channels.
pub fn ghost_conv(input: &Tensor, spec: &GhostConvSpec, w: &GhostConvWeights) -> Result<Tensor> {
    check_channels(input.shape(), spec.c1, "GhostConv")?;
    let intrinsic = w.primary.apply(input, &spec.primary_params())?;
    let ghost = w.cheap.apply(&intrinsic, &spec.cheap_params())?;
    concat_channels(&[&intrinsic, &ghost])
}

/// Stride-1 ghost bottleneck: two 1×1 ghost convs, identity shortcut when
/// enabled and `c1 == c2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GhostBottleneckSpec {
    pub reduce: GhostConvSpec,
    pub expand: GhostConvSpec,
    pub shortcut: bool,
}

impl GhostBottleneckSpec {
    pub fn new(c1: usize, c2: usize, shortcut: bool) -> Result<Self> {
        if !c2.is_multiple_of(4) {
            return Err(Error::Spec(format!(
                "ghost bottleneck output channels must be a multiple of 4, got {c2}"
            )));
        }
        let mid = c2 / 2;
        Ok(Self {
            reduce: GhostConvSpec::new(c1, mid, 1, 1)?,
            expand: GhostConvSpec::new(mid, c2, 1, 1)?.with_act(Activation::None),
            shortcut: shortcut && c1 == c2,
        })
    }

    pub fn with_cheap_act(mut self, act: Activation) -> Self {
        self.reduce = self.reduce.with_cheap_act(act);
        self.expand = self.expand.with_cheap_act(act);
        self
    }

    pub fn c1(&self) -> usize {
        self.reduce.c1
    }

    pub fn c2(&self) -> usize {
        self.expand.c2
    }

    pub fn forward(&self, input: &Tensor, w: &GhostBottleneckWeights) -> Result<Tensor> {
        ghost_bottleneck(input, self, w)
    }

    pub fn load(&self, src: &impl ParamSource, prefix: &str) -> Result<GhostBottleneckWeights> {
        Ok(GhostBottleneckWeights {
            reduce: self.reduce.load(src, &join(prefix, "conv.0"))?,
            expand: self.expand.load(src, &join(prefix, "conv.2"))?,
        })
    }

    pub fn zero_weights(&self) -> GhostBottleneckWeights {
        GhostBottleneckWeights {
            reduce: self.reduce.zero_weights(),
            expand: self.expand.zero_weights(),
        }
    }
}

impl Block for GhostBottleneckSpec {
    fn out_channels(&self) -> usize {
        self.c2()
    }

    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        self.expand.output_shape(self.reduce.output_shape(input)?)
    }

    fn param_shapes(&self, prefix: &str) -> Vec<ParamShape> {
        let mut v = self.reduce.param_shapes(&join(prefix, "conv.0"));
        v.extend(self.expand.param_shapes(&join(prefix, "conv.2")));
        v
    }

    fn count_flops(&self, input: [usize; 4]) -> Result<u64> {
        let mid = self.reduce.output_shape(input)?;
        Ok(self.reduce.count_flops(input)? + self.expand.count_flops(mid)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhostBottleneckWeights {
    pub reduce: GhostConvWeights,
    pub expand: GhostConvWeights,
}

pub fn ghost_bottleneck(input: &Tensor, spec: &GhostBottleneckSpec, w: &GhostBottleneckWeights) -> Result<Tensor> {
    let mid = ghost_conv(input, &spec.reduce, &w.reduce)?;
    let branch = ghost_conv(&mid, &spec.expand, &w.expand)?;
    if spec.shortcut {
        branch.add(input)
    } else {
        Ok(branch)
    }
}

/// Number of repeats after the depth multiplier: `max(1, round(n·d))`,
/// with single blocks left alone.
pub fn scaled_repeats(nominal: usize, depth_multiple: f64) -> usize {
    if nominal > 1 {
        ((nominal as f64 * depth_multiple).round() as usize).max(1)
    } else {
        nominal
    }
}

/// CSP block with two 1×1 branches at expansion 0.5, one of which runs
/// through `n` ghost bottlenecks, fused back by a 1×1 conv.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct C3GhostSpec {
    pub c1: usize,
    pub c2: usize,
    pub n: usize,
    pub shortcut: bool,
    pub cheap_act: Activation,
}

impl C3GhostSpec {
    pub fn new(c1: usize, c2: usize, n: usize, shortcut: bool) -> Result<Self> {
        if c1 == 0 || !c2.is_multiple_of(8) || c2 == 0 {
            return Err(Error::Spec(format!(
                "C3Ghost needs c1 > 0 and c2 a positive multiple of 8, got {c1}→{c2}"
            )));
        }
        if n == 0 {
            return Err(Error::Spec("C3Ghost needs at least one bottleneck".into()));
        }
        Ok(Self {
            c1,
            c2,
            n,
            shortcut,
            cheap_act: Activation::None,
        })
    }

    pub fn with_cheap_act(mut self, act: Activation) -> Self {
        self.cheap_act = act;
        self
    }

    pub fn hidden(&self) -> usize {
        self.c2 / 2
    }

    pub fn cv1(&self) -> ConvSpec {
        ConvSpec::new(self.c1, self.hidden(), 1, 1)
    }

    pub fn cv2(&self) -> ConvSpec {
        ConvSpec::new(self.c1, self.hidden(), 1, 1)
    }

    pub fn cv3(&self) -> ConvSpec {
        ConvSpec::new(2 * self.hidden(), self.c2, 1, 1)
    }

    pub fn bottleneck(&self) -> GhostBottleneckSpec {
        GhostBottleneckSpec::new(self.hidden(), self.hidden(), self.shortcut)
            .expect("hidden channels are a multiple of 4")
            .with_cheap_act(self.cheap_act)
    }

    pub fn forward(&self, input: &Tensor, w: &C3GhostWeights) -> Result<Tensor> {
        c3ghost(input, self, w)
    }

    pub fn load(&self, src: &impl ParamSource, prefix: &str) -> Result<C3GhostWeights> {
        let b = self.bottleneck();
        Ok(C3GhostWeights {
            cv1: self.cv1().load(src, &join(prefix, "cv1"))?,
            cv2: self.cv2().load(src, &join(prefix, "cv2"))?,
            cv3: self.cv3().load(src, &join(prefix, "cv3"))?,
            bottlenecks: (0..self.n)
                .map(|i| b.load(src, &join(prefix, &format!("m.{i}"))))
                .collect::<Result<_>>()?,
        })
    }
}

impl Block for C3GhostSpec {
    fn out_channels(&self) -> usize {
        self.c2
    }

    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        let hidden = self.cv1().output_shape(input)?;
        self.cv3()
            .output_shape([hidden[0], 2 * hidden[1], hidden[2], hidden[3]])
    }

    fn param_shapes(&self, prefix: &str) -> Vec<ParamShape> {
        let mut v = self.cv1().param_shapes(&join(prefix, "cv1"));
        v.extend(self.cv2().param_shapes(&join(prefix, "cv2")));
        v.extend(self.cv3().param_shapes(&join(prefix, "cv3")));
        let b = self.bottleneck();
        for i in 0..self.n {
            v.extend(b.param_shapes(&join(prefix, &format!("m.{i}"))));
        }
        v
    }

    fn count_flops(&self, input: [usize; 4]) -> Result<u64> {
        let hidden = self.cv1().output_shape(input)?;
        let fused = [hidden[0], 2 * hidden[1], hidden[2], hidden[3]];
        Ok(self.cv1().count_flops(input)?
            + self.cv2().count_flops(input)?
            + self.n as u64 * self.bottleneck().count_flops(hidden)?
            + self.cv3().count_flops(fused)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct C3GhostWeights {
    pub cv1: ConvWeights,
    pub cv2: ConvWeights,
    pub cv3: ConvWeights,
    pub bottlenecks: Vec<GhostBottleneckWeights>,
}

pub fn c3ghost(input: &Tensor, spec: &C3GhostSpec, w: &C3GhostWeights) -> Result<Tensor> {
    if w.bottlenecks.len() != spec.n {
        return Err(Error::Shape(format!(
            "C3Ghost expects {} bottleneck weight sets, got {}",
            spec.n,
            w.bottlenecks.len()
        )));
    }
    let b = spec.bottleneck();
    let mut main = spec.cv1().forward(input, &w.cv1)?;
    for bw in &w.bottlenecks {
        main = ghost_bottleneck(&main, &b, bw)?;
    }
    let side = spec.cv2().forward(input, &w.cv2)?;
    spec.cv3().forward(&concat_channels(&[&main, &side])?, &w.cv3)
}

/// Serial spatial-pyramid pooling: three chained 5×5 stride-1 max pools
/// concatenated with their input between two 1×1 convs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SppfSpec {
    pub c1: usize,
    pub c2: usize,
    pub k: usize,
}

impl SppfSpec {
    pub fn new(c1: usize, c2: usize) -> Result<Self> {
        Self::with_kernel(c1, c2, SPPF_POOL)
    }

    pub fn with_kernel(c1: usize, c2: usize, k: usize) -> Result<Self> {
        if c1 < 2 || !c1.is_multiple_of(2) || c2 == 0 {
            return Err(Error::Spec(format!("SPPF needs even c1 ≥ 2 and c2 > 0, got {c1}→{c2}")));
        }
        if k.is_multiple_of(2) {
            return Err(Error::Spec(format!("SPPF pool kernel must be odd, got {k}")));
        }
        Ok(Self { c1, c2, k })
    }

    pub fn hidden(&self) -> usize {
        self.c1 / 2
    }

    pub fn cv1(&self) -> ConvSpec {
        ConvSpec::new(self.c1, self.hidden(), 1, 1)
    }

    pub fn cv2(&self) -> ConvSpec {
        ConvSpec::new(4 * self.hidden(), self.c2, 1, 1)
    }

    pub fn forward(&self, input: &Tensor, w: &SppfWeights) -> Result<Tensor> {
        sppf(input, self, w)
    }

    pub fn load(&self, src: &impl ParamSource, prefix: &str) -> Result<SppfWeights> {
        Ok(SppfWeights {
            cv1: self.cv1().load(src, &join(prefix, "cv1"))?,
            cv2: self.cv2().load(src, &join(prefix, "cv2"))?,
        })
    }
}

impl Block for SppfSpec {
    fn out_channels(&self) -> usize {
        self.c2
    }

    fn output_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        check_channels(input, self.c1, "SPPF")?;
        Ok([input[0], self.c2, input[2], input[3]])
    }

    fn param_shapes(&self, prefix: &str) -> Vec<ParamShape> {
        let mut v = self.cv1().param_shapes(&join(prefix, "cv1"));
        v.extend(self.cv2().param_shapes(&join(prefix, "cv2")));
        v
    }

    fn count_flops(&self, input: [usize; 4]) -> Result<u64> {
        let hidden = self.cv1().output_shape(input)?;
        Ok(self.cv1().count_flops(input)?
            + self
                .cv2()
                .count_flops([hidden[0], 4 * hidden[1], hidden[2], hidden[3]])?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SppfWeights {
    pub cv1: ConvWeights,
    pub cv2: ConvWeights,
}

pub fn sppf(input: &Tensor, spec: &SppfSpec, w: &SppfWeights) -> Result<Tensor> {
    let x = spec.cv1().forward(input, &w.cv1)?;
    let pad = spec.k / 2;
    let p1 = maxpool2d(&x, spec.k, 1, pad)?;
    let p2 = maxpool2d(&p1, spec.k, 1, pad)?;
    let p3 = maxpool2d(&p2, spec.k, 1, pad)?;
    spec.cv2().forward(&concat_channels(&[&x, &p1, &p2, &p3])?, &w.cv2)
}
