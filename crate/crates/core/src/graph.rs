//! Resolved layer graph and the forward pass.

use std::fmt::Write as _;

use crate::config::{BlockKind, NetConfig, ANCHORS_PER_SCALE};
use crate::error::{Error, Result};
use crate::ghost::{
    scaled_repeats, Block, C3GhostSpec, C3GhostWeights, ConvSpec, ConvWeights, GhostConvSpec, GhostConvWeights,
    ParamShape, ParamSource, SppfSpec, SppfWeights,
};
use crate::tensor::{concat_channels, upsample_nearest2x, ConvParams, Tensor};

/// Channel count after the width multiple, rounded up to a multiple of 8.
pub fn scale_width(nominal: usize, width_multiple: f64) -> usize {
    let scaled = nominal as f64 * width_multiple;
    ((scaled / 8.0).ceil() as usize * 8).max(8)
}

/// Per-scale 1×1 prediction convs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectSpec {
    pub in_channels: Vec<usize>,
    pub class_count: usize,
    pub anchors_per_scale: usize,
}

impl DetectSpec {
    /// Channels of each raw head: anchors × (box 4 + objectness 1 + classes).
    pub fn outputs_per_scale(&self) -> usize {
        self.anchors_per_scale * (5 + self.class_count)
    }

    pub fn head_params(&self, scale: usize) -> ConvParams {
        ConvParams::new(self.in_channels[scale], self.outputs_per_scale(), 1)
    }

    fn check_inputs(&self, inputs: &[[usize; 4]]) -> Result<()> {
        if inputs.len() != self.in_channels.len() {
            return Err(Error::Shape(format!(
                "Detect expects {} inputs, got {}",
                self.in_channels.len(),
                inputs.len()
            )));
        }
        Ok(())
    }

    pub fn count_flops(&self, inputs: &[[usize; 4]]) -> Result<u64> {
        self.check_inputs(inputs)?;
        inputs
            .iter()
            .enumerate()
            .map(|(i, s)| Ok(s[0] as u64 * self.head_params(i).flops(s[2], s[3])?))
            .sum()
    }

    pub fn param_shapes(&self, prefix: &str) -> Vec<ParamShape> {
        (0..self.in_channels.len())
            .flat_map(|i| {
                let p = self.head_params(i);
                [
                    ParamShape {
                        name: format!("{prefix}.m.{i}.weight"),
                        dims: p.weight_dims().to_vec(),
                    },
                    ParamShape {
                        name: format!("{prefix}.m.{i}.bias"),
                        dims: vec![p.out_channels],
                    },
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeOp {
    Conv(ConvSpec),
    GhostConv(GhostConvSpec),
    C3Ghost(C3GhostSpec),
    Sppf(SppfSpec),
    Upsample,
    Concat,
    Detect(DetectSpec),
}

impl NodeOp {
    pub fn name(&self) -> &'static str {
        match self {
            NodeOp::Conv(_) => "Conv",
            NodeOp::GhostConv(_) => "GhostConv",
            NodeOp::C3Ghost(_) => "C3Ghost",
            NodeOp::Sppf(_) => "SPPF",
            NodeOp::Upsample => "Upsample",
            NodeOp::Concat => "Concat",
            NodeOp::Detect(_) => "Detect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Backbone,
    Head,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub index: usize,
    pub from: Vec<usize>,
    pub op: NodeOp,
    pub section: Section,
    /// Channels produced; 0 for Detect.
    pub out_channels: usize,
    /// Input-pixel stride of this node's output.
    pub stride: usize,
}

impl Node {
    pub fn prefix(&self) -> String {
        format!("model.{}", self.index)
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let p = self.prefix();
        match &self.op {
            NodeOp::Conv(s) => s.param_shapes(&p),
            NodeOp::GhostConv(s) => s.param_shapes(&p),
            NodeOp::C3Ghost(s) => s.param_shapes(&p),
            NodeOp::Sppf(s) => s.param_shapes(&p),
            NodeOp::Detect(s) => s.param_shapes(&p),
            NodeOp::Upsample | NodeOp::Concat => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(ParamShape::numel).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    config: NetConfig,
    nodes: Vec<Node>,
}

/// Resolves channels, repeats and strides for every layer.
pub fn build_graph(config: &NetConfig) -> Result<Graph> {
    config.validate()?;
    let gw = config.width_multiple;
    let act = config.ghost_cheap_act;
    let mut nodes: Vec<Node> = Vec::with_capacity(config.layer_count());

    let backbone_len = config.backbone.len();
    for (index, layer) in config.layers().enumerate() {
        let from = layer.resolve_from(index)?;
        let source = |i: usize| -> (usize, usize) {
            if index == 0 {
                (config.input_channels, 1)
            } else {
                let n = &nodes[from[i]];
                (n.out_channels, n.stride)
            }
        };
        let bad = |msg: String| Error::Graph(format!("layer {index}: {msg}"));
        let (c1, s_in) = source(0);
        let (op, out_channels, stride) = match layer.block {
            BlockKind::Conv { c2, k, s, p } => {
                let c2 = scale_width(c2, gw);
                let mut spec = ConvSpec::new(c1, c2, k, s);
                if let Some(p) = p {
                    spec = spec.with_padding(p);
                }
                spec.params().validate()?;
                (NodeOp::Conv(spec), c2, s_in * s)
            }
            BlockKind::GhostConv { c2, k, s } => {
                let c2 = scale_width(c2, gw);
                let spec = GhostConvSpec::new(c1, c2, k, s)?.with_cheap_act(act);
                (NodeOp::GhostConv(spec), c2, s_in * s)
            }
            BlockKind::C3Ghost { c2, shortcut } => {
                let c2 = scale_width(c2, gw);
                let n = scaled_repeats(layer.repeats, config.depth_multiple);
                let spec = C3GhostSpec::new(c1, c2, n, shortcut)?.with_cheap_act(act);
                (NodeOp::C3Ghost(spec), c2, s_in)
            }
            BlockKind::Sppf { c2, k } => {
                let c2 = scale_width(c2, gw);
                (NodeOp::Sppf(SppfSpec::with_kernel(c1, c2, k)?), c2, s_in)
            }
            BlockKind::Upsample => {
                if s_in % 2 != 0 {
                    return Err(bad(format!("cannot upsample a stride-{s_in} feature")));
                }
                (NodeOp::Upsample, c1, s_in / 2)
            }
            BlockKind::Concat => {
                let mut channels = 0;
                for i in 0..from.len() {
                    let (c, s) = source(i);
                    if s != s_in {
                        return Err(bad(format!(
                            "Concat mixes strides {s_in} and {s} (layers {} and {})",
                            from[0], from[i]
                        )));
                    }
                    channels += c;
                }
                (NodeOp::Concat, channels, s_in)
            }
            BlockKind::Detect => {
                let strides: Vec<usize> = (0..from.len()).map(|i| source(i).1).collect();
                if strides.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad(format!(
                        "Detect sources must have ascending strides, got {strides:?}"
                    )));
                }
                if config.anchors.len() != from.len() * ANCHORS_PER_SCALE {
                    return Err(bad(format!(
                        "{} anchors for {} scales",
                        config.anchors.len(),
                        from.len()
                    )));
                }
                let spec = DetectSpec {
                    in_channels: (0..from.len()).map(|i| source(i).0).collect(),
                    class_count: config.class_count,
                    anchors_per_scale: ANCHORS_PER_SCALE,
                };
                (NodeOp::Detect(spec), 0, s_in)
            }
        };
        nodes.push(Node {
            index,
            from,
            op,
            section: if index < backbone_len {
                Section::Backbone
            } else {
                Section::Head
            },
            out_channels,
            stride,
        });
    }
    Ok(Graph {
        config: config.clone(),
        nodes,
    })
}

impl Graph {
    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn detect(&self) -> (&Node, &DetectSpec) {
        self.nodes
            .iter()
            .find_map(|n| match &n.op {
                NodeOp::Detect(d) => Some((n, d)),
                _ => None,
            })
            .expect("validated config has one Detect layer")
    }

    /// Strides of the feature maps feeding the detection heads.
    pub fn detect_strides(&self) -> Vec<usize> {
        let (node, _) = self.detect();
        node.from.iter().map(|&i| self.nodes[i].stride).collect()
    }

    pub fn max_stride(&self) -> usize {
        self.nodes.iter().map(|n| n.stride).max().unwrap_or(1)
    }

    /// Every named parameter tensor, in layer order.
    pub fn manifest(&self) -> Vec<ParamShape> {
        self.nodes.iter().flat_map(Node::param_shapes).collect()
    }

    pub fn count_params(&self) -> usize {
        self.nodes.iter().map(Node::param_count).sum()
    }

    /// Shapes of every node's output for a given input shape.
    pub fn shapes(&self, input: [usize; 4]) -> Result<Vec<[usize; 4]>> {
        let mut shapes: Vec<[usize; 4]> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let src = |i: usize| if node.index == 0 { input } else { shapes[node.from[i]] };
            let s = match &node.op {
                NodeOp::Conv(spec) => spec.output_shape(src(0))?,
                NodeOp::GhostConv(spec) => spec.output_shape(src(0))?,
                NodeOp::C3Ghost(spec) => spec.output_shape(src(0))?,
                NodeOp::Sppf(spec) => spec.output_shape(src(0))?,
                NodeOp::Upsample => {
                    let [n, c, h, w] = src(0);
                    [n, c, 2 * h, 2 * w]
                }
                NodeOp::Concat => {
                    let [n, _, h, w] = src(0);
                    let mut c = 0;
                    for i in 0..node.from.len() {
                        let s = src(i);
                        if (s[0], s[2], s[3]) != (n, h, w) {
                            return Err(Error::Shape(format!(
                                "Concat at layer {} joins {:?} and {:?}",
                                node.index,
                                src(0),
                                s
                            )));
                        }
                        c += s[1];
                    }
                    [n, c, h, w]
                }
                NodeOp::Detect(_) => [input[0], 0, 0, 0],
            };
            shapes.push(s);
        }
        Ok(shapes)
    }

    /// Per-node flop counts for an input shape.
    pub fn layer_flops(&self, input: [usize; 4]) -> Result<Vec<u64>> {
        let shapes = self.shapes(input)?;
        self.nodes
            .iter()
            .map(|node| {
                let src = |i: usize| if node.index == 0 { input } else { shapes[node.from[i]] };
                match &node.op {
                    NodeOp::Conv(s) => s.count_flops(src(0)),
                    NodeOp::GhostConv(s) => s.count_flops(src(0)),
                    NodeOp::C3Ghost(s) => s.count_flops(src(0)),
                    NodeOp::Sppf(s) => s.count_flops(src(0)),
                    NodeOp::Detect(d) => {
                        let inputs: Vec<_> = (0..node.from.len()).map(src).collect();
                        d.count_flops(&inputs)
                    }
                    NodeOp::Upsample | NodeOp::Concat => Ok(0),
                }
            })
            .collect()
    }

    pub fn count_flops(&self, input: [usize; 4]) -> Result<u64> {
        Ok(self.layer_flops(input)?.iter().sum())
    }

    /// Human-readable per-layer parameter table with section subtotals.
    pub fn param_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4} {:>10} {:<10} {:>5} {:>7} {:>12}",
            "idx", "from", "block", "ch", "stride", "params"
        );
        let mut backbone = 0;
        let mut head = 0;
        let mut detect = 0;
        for n in &self.nodes {
            let p = n.param_count();
            match (&n.op, n.section) {
                (NodeOp::Detect(_), _) => detect += p,
                (_, Section::Backbone) => backbone += p,
                (_, Section::Head) => head += p,
            }
            let from: Vec<String> = n.from.iter().map(|f| f.to_string()).collect();
            let _ = writeln!(
                out,
                "{:>4} {:>10} {:<10} {:>5} {:>7} {:>12}",
                n.index,
                if n.index == 0 {
                    "input".to_string()
                } else {
                    from.join(",")
                },
                n.op.name(),
                n.out_channels,
                n.stride,
                p
            );
        }
        let total = self.count_params();
        let _ = writeln!(out, "backbone  {backbone:>12}");
        let _ = writeln!(out, "neck      {head:>12}");
        let _ = writeln!(out, "detect    {detect:>12}");
        let _ = writeln!(out, "total     {total:>12} ({:.3} M)", total as f64 / 1e6);
        out
    }
}

#[derive(Debug, Clone)]
enum NodeWeights {
    Conv(ConvWeights),
    Ghost(GhostConvWeights),
    C3(C3GhostWeights),
    Sppf(SppfWeights),
    Detect(Vec<ConvWeights>),
    None,
}

/// A graph with bound weights, ready to run.
#[derive(Debug, Clone)]
pub struct Model {
    graph: Graph,
    weights: Vec<NodeWeights>,
    last_use: Vec<usize>,
}

impl Model {
    pub fn new(graph: Graph, src: &impl ParamSource) -> Result<Self> {
        let weights = graph
            .nodes
            .iter()
            .map(|n| {
                let p = n.prefix();
                Ok(match &n.op {
                    NodeOp::Conv(s) => NodeWeights::Conv(s.load(src, &p)?),
                    NodeOp::GhostConv(s) => NodeWeights::Ghost(s.load(src, &p)?),
                    NodeOp::C3Ghost(s) => NodeWeights::C3(s.load(src, &p)?),
                    NodeOp::Sppf(s) => NodeWeights::Sppf(s.load(src, &p)?),
                    NodeOp::Detect(d) => NodeWeights::Detect(
                        (0..d.in_channels.len())
                            .map(|i| ConvWeights::load(src, &format!("{p}.m.{i}"), &d.head_params(i)))
                            .collect::<Result<_>>()?,
                    ),
                    NodeOp::Upsample | NodeOp::Concat => NodeWeights::None,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut last_use: Vec<usize> = (0..graph.nodes.len()).collect();
        for n in &graph.nodes {
            for &f in &n.from {
                last_use[f] = last_use[f].max(n.index);
            }
        }
        Ok(Self {
            graph,
            weights,
            last_use,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Runs the network; returns one raw head per detection scale, shaped
    /// `(n, anchors·(5 + classes), h / stride, w / stride)`.
    pub fn forward(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        let cfg = &self.graph.config;
        let [_, c, h, w] = input.shape();
        let max_stride = self.graph.max_stride();
        if c != cfg.input_channels {
            return Err(Error::Shape(format!(
                "network takes {} input channels, got {c}",
                cfg.input_channels
            )));
        }
        if h == 0 || w == 0 || h % max_stride != 0 || w % max_stride != 0 {
            return Err(Error::Shape(format!(
                "input {h}×{w} must be a positive multiple of stride {max_stride}"
            )));
        }

        let mut outputs: Vec<Option<Tensor>> = vec![None; self.graph.nodes.len()];
        for (node, weights) in self.graph.nodes.iter().zip(&self.weights) {
            let get = |i: usize| -> &Tensor {
                if node.index == 0 {
                    input
                } else {
                    outputs[node.from[i]]
                        .as_ref()
                        .expect("source kept alive until its last use")
                }
            };
            let result = match (&node.op, weights) {
                (NodeOp::Conv(s), NodeWeights::Conv(w)) => s.forward(get(0), w)?,
                (NodeOp::GhostConv(s), NodeWeights::Ghost(w)) => s.forward(get(0), w)?,
                (NodeOp::C3Ghost(s), NodeWeights::C3(w)) => s.forward(get(0), w)?,
                (NodeOp::Sppf(s), NodeWeights::Sppf(w)) => s.forward(get(0), w)?,
                (NodeOp::Upsample, _) => upsample_nearest2x(get(0)),
                (NodeOp::Concat, _) => {
                    let parts: Vec<&Tensor> = (0..node.from.len()).map(get).collect();
                    concat_channels(&parts)?
                }
                (NodeOp::Detect(d), NodeWeights::Detect(ws)) => {
                    return (0..d.in_channels.len())
                        .map(|i| ws[i].apply(get(i), &d.head_params(i)))
                        .collect();
                }
                _ => unreachable!("weights bound per node kind"),
            };
            outputs[node.index] = Some(result);
            for &f in &node.from {
                if self.last_use[f] == node.index {
                    outputs[f] = None;
                }
            }
        }
        Err(Error::Graph("graph has no Detect layer".into()))
    }
}

/// Binds weights and runs one forward pass.
pub fn forward(graph: &Graph, weights: &impl ParamSource, input: &Tensor) -> Result<Vec<Tensor>> {
    Model::new(graph.clone(), weights)?.forward(input)
}
