//! Line-oriented network description.
//!
//! ```text
//! # comment
//! [net]
//! classes = 4
//! names = bird,drone,helicopter,plane
//! channels = 3
//! input_size = 256
//! depth_multiple = 0.25
//! width_multiple = 0.5
//! anchors = 24 comma-separated pixel values, 3 (w,h) pairs per scale
//! ghost_cheap_act = none            # or silu
//!
//! [backbone]
//! from=-1 repeats=1 type=Conv args=128,6,2,2
//! ...
//! [head]
//! from=21,24,27,30 repeats=1 type=Detect
//! ```
//!
//! Layers are numbered continuously across `[backbone]` and `[head]`.
//! `from` entries are absolute indices or negative offsets (`-1` is the
//! previous layer). Block arguments:
//!
//! | type      | args                     |
//! |-----------|--------------------------|
//! | Conv      | `c2,k,s[,p]`             |
//! | GhostConv | `c2,k,s`                 |
//! | C3Ghost   | `c2[,shortcut]`          |
//! | SPPF      | `c2[,k]`                 |
//! | Upsample  | none (factor 2)          |
//! | Concat    | none                     |
//! | Detect    | none                     |
//!
//! Channel arguments are nominal; the width multiple is applied when the
//! graph is built.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::autoanchor::AnchorSet;
use crate::error::{Error, Result};
use crate::tensor::Activation;

/// The shipped network description.
pub const GAANET_CFG: &str = include_str!("../configs/gaanet.cfg");

pub const DETECT_SCALES: usize = 4;
pub const ANCHORS_PER_SCALE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Conv {
        c2: usize,
        k: usize,
        s: usize,
        p: Option<usize>,
    },
    GhostConv {
        c2: usize,
        k: usize,
        s: usize,
    },
    C3Ghost {
        c2: usize,
        shortcut: bool,
    },
    Sppf {
        c2: usize,
        k: usize,
    },
    Upsample,
    Concat,
    Detect,
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Conv { .. } => "Conv",
            BlockKind::GhostConv { .. } => "GhostConv",
            BlockKind::C3Ghost { .. } => "C3Ghost",
            BlockKind::Sppf { .. } => "SPPF",
            BlockKind::Upsample => "Upsample",
            BlockKind::Concat => "Concat",
            BlockKind::Detect => "Detect",
        }
    }

    fn args(&self) -> String {
        match *self {
            BlockKind::Conv { c2, k, s, p: None } => format!("{c2},{k},{s}"),
            BlockKind::Conv { c2, k, s, p: Some(p) } => format!("{c2},{k},{s},{p}"),
            BlockKind::GhostConv { c2, k, s } => format!("{c2},{k},{s}"),
            BlockKind::C3Ghost { c2, shortcut } => format!("{c2},{shortcut}"),
            BlockKind::Sppf { c2, k } => format!("{c2},{k}"),
            BlockKind::Upsample | BlockKind::Concat | BlockKind::Detect => String::new(),
        }
    }

    fn parse(kind: &str, args: &[&str]) -> std::result::Result<Self, String> {
        let int = |i: usize| -> std::result::Result<usize, String> {
            let s = args[i];
            s.parse::<usize>()
                .map_err(|_| format!("{kind} argument {} `{s}` is not a non-negative integer", i + 1))
        };
        let arity = |lo: usize, hi: usize| -> std::result::Result<(), String> {
            if args.len() < lo || args.len() > hi {
                Err(format!("{kind} takes {lo}..={hi} arguments, got {}", args.len()))
            } else {
                Ok(())
            }
        };
        Ok(match kind {
            "Conv" => {
                arity(3, 4)?;
                BlockKind::Conv {
                    c2: int(0)?,
                    k: int(1)?,
                    s: int(2)?,
                    p: if args.len() == 4 { Some(int(3)?) } else { None },
                }
            }
            "GhostConv" => {
                arity(3, 3)?;
                BlockKind::GhostConv {
                    c2: int(0)?,
                    k: int(1)?,
                    s: int(2)?,
                }
            }
            "C3Ghost" => {
                arity(1, 2)?;
                let shortcut = match args.get(1).copied() {
                    None | Some("true") | Some("True") => true,
                    Some("false") | Some("False") => false,
                    Some(other) => return Err(format!("C3Ghost shortcut `{other}` is not a boolean")),
                };
                BlockKind::C3Ghost { c2: int(0)?, shortcut }
            }
            "SPPF" => {
                arity(1, 2)?;
                BlockKind::Sppf {
                    c2: int(0)?,
                    k: if args.len() == 2 { int(1)? } else { 5 },
                }
            }
            "Upsample" => {
                arity(0, 1)?;
                if args.first().is_some_and(|a| *a != "2") {
                    return Err("Upsample only supports factor 2".into());
                }
                BlockKind::Upsample
            }
            "Concat" => {
                arity(0, 0)?;
                BlockKind::Concat
            }
            "Detect" => {
                arity(0, 0)?;
                BlockKind::Detect
            }
            other => return Err(format!("unknown block type `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerDef {
    pub from: Vec<isize>,
    pub repeats: usize,
    pub block: BlockKind,
}

impl LayerDef {
    pub fn new(from: Vec<isize>, repeats: usize, block: BlockKind) -> Self {
        Self { from, repeats, block }
    }

    /// Absolute source indices for a layer sitting at `index`. The first
    /// layer reads the network input and resolves to no indices.
    pub fn resolve_from(&self, index: usize) -> Result<Vec<usize>> {
        if index == 0 {
            return if self.from == [-1] {
                Ok(Vec::new())
            } else {
                Err(Error::Graph(format!(
                    "layer 0 must read the input (-1), not {:?}",
                    self.from
                )))
            };
        }
        self.from
            .iter()
            .map(|&f| {
                let abs = if f < 0 { index as isize + f } else { f };
                if abs < 0 || abs as usize >= index {
                    Err(Error::Graph(format!(
                        "layer {index} reads from {f}, which is not an earlier layer"
                    )))
                } else {
                    Ok(abs as usize)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub class_count: usize,
    pub class_names: Vec<String>,
    pub input_channels: usize,
    pub input_size: usize,
    pub depth_multiple: f64,
    pub width_multiple: f64,
    pub anchors: AnchorSet,
    pub ghost_cheap_act: Activation,
    pub backbone: Vec<LayerDef>,
    pub head: Vec<LayerDef>,
}

impl NetConfig {
    pub fn gaanet() -> Self {
        GAANET_CFG.parse().expect("shipped config is valid")
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerDef> {
        self.backbone.iter().chain(&self.head)
    }

    pub fn layer_count(&self) -> usize {
        self.backbone.len() + self.head.len()
    }

    /// Replaces the class list; only the Detect layer shapes change.
    pub fn with_classes(mut self, names: Vec<String>) -> Self {
        self.class_count = names.len();
        self.class_names = names;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(Error::Graph("classes must be positive".into()));
        }
        if self.class_names.len() != self.class_count {
            return Err(Error::Graph(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.class_count
            )));
        }
        if !matches!(self.input_channels, 1 | 3) {
            return Err(Error::Graph(format!(
                "input channels must be 1 or 3, got {}",
                self.input_channels
            )));
        }
        if self.input_size == 0 {
            return Err(Error::Graph("input_size must be positive".into()));
        }
        for (name, m) in [
            ("depth_multiple", self.depth_multiple),
            ("width_multiple", self.width_multiple),
        ] {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Graph(format!("{name} must be positive, got {m}")));
            }
        }
        if self.anchors.len() != DETECT_SCALES * ANCHORS_PER_SCALE {
            return Err(Error::Graph(format!(
                "expected {} anchor values, got {}",
                2 * DETECT_SCALES * ANCHORS_PER_SCALE,
                2 * self.anchors.len()
            )));
        }

        let mut detects = 0;
        for (i, layer) in self.layers().enumerate() {
            let from = layer.resolve_from(i)?;
            if layer.repeats == 0 {
                return Err(Error::Graph(format!("layer {i} has zero repeats")));
            }
            if layer.repeats > 1 && !matches!(layer.block, BlockKind::C3Ghost { .. }) {
                return Err(Error::Graph(format!("layer {i}: only C3Ghost takes repeats > 1")));
            }
            match layer.block {
                BlockKind::Concat if from.len() < 2 => {
                    return Err(Error::Graph(format!("Concat at layer {i} needs ≥ 2 sources")))
                }
                BlockKind::Detect => {
                    detects += 1;
                    if from.len() != DETECT_SCALES {
                        return Err(Error::Graph(format!(
                            "Detect at layer {i} consumes {} sources, expected {DETECT_SCALES}",
                            from.len()
                        )));
                    }
                }
                BlockKind::Concat => {}
                _ if layer.from.len() != 1 => {
                    return Err(Error::Graph(format!(
                        "{} at layer {i} takes exactly one source",
                        layer.block.name()
                    )))
                }
                _ => {}
            }
        }
        if detects != 1 {
            return Err(Error::Graph(format!(
                "expected exactly one Detect layer, found {detects}"
            )));
        }
        Ok(())
    }

    fn parse_text(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Net,
            Backbone,
            Head,
        }
        let mut section = Section::None;
        let mut classes = None;
        let mut names: Option<Vec<String>> = None;
        let mut channels = None;
        let mut input_size = None;
        let mut depth = None;
        let mut width = None;
        let mut anchors = None;
        let mut cheap_act = Activation::None;
        let mut backbone = Vec::new();
        let mut head = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Config { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[net]" => Section::Net,
                    "[backbone]" => Section::Backbone,
                    "[head]" => Section::Head,
                    other => return Err(err(format!("unknown section {other}"))),
                };
                continue;
            }
            match section {
                Section::None => return Err(err("content before the first section".into())),
                Section::Net => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
                    let (key, value) = (key.trim(), value.trim());
                    fn num<T: FromStr>(v: &str, key: &str) -> std::result::Result<T, String> {
                        v.parse().map_err(|_| format!("bad value `{v}` for {key}"))
                    }
                    match key {
                        "classes" => classes = Some(num::<usize>(value, key).map_err(err)?),
                        "names" => names = Some(value.split(',').map(|s| s.trim().to_string()).collect()),
                        "channels" => channels = Some(num::<usize>(value, key).map_err(err)?),
                        "input_size" => input_size = Some(num::<usize>(value, key).map_err(err)?),
                        "depth_multiple" => depth = Some(num::<f64>(value, key).map_err(err)?),
                        "width_multiple" => width = Some(num::<f64>(value, key).map_err(err)?),
                        "anchors" => {
                            let vals = value
                                .split(',')
                                .map(|v| num::<f64>(v.trim(), key))
                                .collect::<std::result::Result<Vec<_>, _>>()
                                .map_err(err)?;
                            if vals.len() != 2 * DETECT_SCALES * ANCHORS_PER_SCALE {
                                return Err(err(format!(
                                    "anchors needs {} values, got {}",
                                    2 * DETECT_SCALES * ANCHORS_PER_SCALE,
                                    vals.len()
                                )));
                            }
                            anchors = Some(AnchorSet::from_flat(&vals).map_err(|e| err(e.to_string()))?);
                        }
                        "ghost_cheap_act" => {
                            cheap_act = match value {
                                "none" => Activation::None,
                                "silu" => Activation::Silu,
                                v => return Err(err(format!("ghost_cheap_act `{v}` is not none|silu"))),
                            }
                        }
                        other => return Err(err(format!("unknown [net] key `{other}`"))),
                    }
                }
                Section::Backbone | Section::Head => {
                    let layer = parse_layer(line).map_err(err)?;
                    if section == Section::Backbone {
                        backbone.push(layer);
                    } else {
                        head.push(layer);
                    }
                }
            }
        }

        let missing = |k: &str| Error::Graph(format!("[net] is missing `{k}`"));
        let class_count = classes.ok_or_else(|| missing("classes"))?;
        let config = NetConfig {
            class_count,
            class_names: names.unwrap_or_else(|| (0..class_count).map(|i| format!("class{i}")).collect()),
            input_channels: channels.unwrap_or(3),
            input_size: input_size.unwrap_or(256),
            depth_multiple: depth.ok_or_else(|| missing("depth_multiple"))?,
            width_multiple: width.ok_or_else(|| missing("width_multiple"))?,
            anchors: anchors.ok_or_else(|| missing("anchors"))?,
            ghost_cheap_act: cheap_act,
            backbone,
            head,
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_layer(line: &str) -> std::result::Result<LayerDef, String> {
    let mut from = None;
    let mut repeats = None;
    let mut kind = None;
    let mut args = None;
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{token}`"))?;
        let slot = match key {
            "from" => &mut from,
            "repeats" => &mut repeats,
            "type" => &mut kind,
            "args" => &mut args,
            other => return Err(format!("unknown layer key `{other}`")),
        };
        if slot.replace(value).is_some() {
            return Err(format!("duplicate key `{key}`"));
        }
    }
    let from = from
        .ok_or("layer is missing `from`")?
        .split(',')
        .map(|f| f.parse::<isize>().map_err(|_| format!("bad from index `{f}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let repeats = repeats
        .unwrap_or("1")
        .parse::<usize>()
        .map_err(|_| "bad repeats".to_string())?;
    let kind = kind.ok_or("layer is missing `type`")?;
    let args: Vec<&str> = match args {
        None | Some("") => Vec::new(),
        Some(a) => a.split(',').collect(),
    };
    Ok(LayerDef {
        from,
        repeats,
        block: BlockKind::parse(kind, &args)?,
    })
}

impl FromStr for NetConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NetConfig::parse_text(s)
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<NetConfig> {
    text.parse()
}

impl fmt::Display for NetConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[net]")?;
        writeln!(f, "classes = {}", self.class_count)?;
        writeln!(f, "names = {}", self.class_names.join(","))?;
        writeln!(f, "channels = {}", self.input_channels)?;
        writeln!(f, "input_size = {}", self.input_size)?;
        writeln!(f, "depth_multiple = {}", self.depth_multiple)?;
        writeln!(f, "width_multiple = {}", self.width_multiple)?;
        let mut anchors = String::new();
        for (i, [w, h]) in self.anchors.sizes().iter().enumerate() {
            if i > 0 {
                anchors.push_str(", ");
            }
            write!(anchors, "{w},{h}")?;
        }
        writeln!(f, "anchors = {anchors}")?;
        let act = match self.ghost_cheap_act {
            Activation::None => "none",
            Activation::Silu => "silu",
        };
        writeln!(f, "ghost_cheap_act = {act}")?;
        for (title, layers) in [("backbone", &self.backbone), ("head", &self.head)] {
            writeln!(f, "\n[{title}]")?;
            for l in layers {
                let from: Vec<String> = l.from.iter().map(|v| v.to_string()).collect();
                write!(
                    f,
                    "from={} repeats={} type={}",
                    from.join(","),
                    l.repeats,
                    l.block.name()
                )?;
                let args = l.block.args();
                if !args.is_empty() {
                    write!(f, " args={args}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_parses() {
        let cfg = NetConfig::gaanet();
        assert_eq!(cfg.class_count, 4);
        assert_eq!(cfg.depth_multiple, 0.25);
        assert_eq!(cfg.width_multiple, 0.5);
        assert_eq!(cfg.input_size, 256);
        let detect = cfg.layers().find(|l| l.block == BlockKind::Detect).unwrap();
        assert_eq!(detect.from.len(), 4);
    }

    #[test]
    fn round_trip() {
        let cfg = NetConfig::gaanet();
        let again: NetConfig = cfg.to_string().parse().unwrap();
        assert_eq!(again, cfg);
    }

    fn with_detect_line(line: &str) -> String {
        GAANET_CFG
            .lines()
            .map(|l| if l.contains("type=Detect") { line } else { l })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn three_detect_sources_rejected() {
        let text = with_detect_line("from=21,24,27 repeats=1 type=Detect");
        let err = text.parse::<NetConfig>().unwrap_err();
        assert!(err.to_string().contains("consumes 3 sources"), "{err}");
    }

    #[test]
    fn dangling_from_rejected() {
        let text = with_detect_line("from=21,24,27,99 repeats=1 type=Detect");
        assert!(matches!(text.parse::<NetConfig>(), Err(Error::Graph(_))));
    }

    #[test]
    fn unknown_block_and_key_rejected() {
        let text = GAANET_CFG.replacen("type=SPPF", "type=SPP", 1);
        assert!(matches!(text.parse::<NetConfig>(), Err(Error::Config { .. })));
        let text = GAANET_CFG.replacen("[net]", "[net]\ncolour = red", 1);
        assert!(matches!(text.parse::<NetConfig>(), Err(Error::Config { line: 8, .. })));
        let text = GAANET_CFG.replacen("type=SPPF", "type=SPPF stride=2", 1);
        assert!(text.parse::<NetConfig>().is_err());
    }

    #[test]
    fn anchor_count_checked() {
        let cfg = NetConfig::gaanet();
        let flat = cfg.anchors.flat();
        let short: Vec<String> = flat[..22].iter().map(|v| v.to_string()).collect();
        let text = cfg
            .to_string()
            .lines()
            .map(|l| {
                if l.starts_with("anchors") {
                    format!("anchors = {}", short.join(","))
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let err = text.parse::<NetConfig>().unwrap_err();
        assert!(err.to_string().contains("24 values"), "{err}");
    }

    #[test]
    fn multipliers_must_be_positive() {
        let text = GAANET_CFG.replace("depth_multiple = 0.25", "depth_multiple = 0");
        assert!(text.parse::<NetConfig>().is_err());
    }
}
