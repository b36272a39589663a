//! Library side of each CLI subcommand. Every function is deterministic in
//! its inputs; the binary only parses flags and prints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::autoanchor::{auto_anchor, load_labels, AutoAnchorReport, FitnessKind, GaConfig, LabelSet};
use crate::boxes::{Detection, GroundTruth};
use crate::config::NetConfig;
use crate::decode::decode_detections;
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_predictions, nms, parse_predictions, EvalConfig, MetricsReport, PredictionRow};
use crate::graph::{build_graph, Graph, Model};
use crate::pnm::{read_pnm, Image};
use crate::render::{render, Rendered};
use crate::tensor::letterbox;
use crate::weights::{init_random, read_weights, DType, WeightArchive};

pub const DEFAULT_IMG_SIZE: usize = 256;
pub const DEFAULT_CONF: f64 = 0.25;
pub const DEFAULT_IOU: f64 = 0.45;

/// Loads a config file, or the shipped one when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<NetConfig> {
    match path {
        None => Ok(NetConfig::gaanet()),
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?.parse(),
    }
}

#[derive(Debug, Clone)]
pub struct AnchorsOptions {
    pub labels: PathBuf,
    pub k: usize,
    pub generations: usize,
    pub seed: u64,
    pub img_size: usize,
    pub threshold: f64,
    pub fitness: FitnessKind,
    pub class_count: Option<usize>,
}

impl AnchorsOptions {
    pub fn new(labels: impl Into<PathBuf>) -> Self {
        Self {
            labels: labels.into(),
            k: 12,
            generations: 1000,
            seed: 0,
            img_size: DEFAULT_IMG_SIZE,
            threshold: crate::autoanchor::DEFAULT_THRESHOLD,
            fitness: FitnessKind::Ratio,
            class_count: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnchorsOutcome {
    pub labels: LabelSet,
    pub report: AutoAnchorReport,
}

impl AnchorsOutcome {
    /// Per-file ingestion diagnostics.
    pub fn diagnostics(&self) -> Vec<String> {
        self.labels
            .warnings
            .iter()
            .cloned()
            .chain(
                self.labels
                    .rejected
                    .iter()
                    .map(|r| format!("{}:{}: {}", r.file.display(), r.line, r.reason)),
            )
            .collect()
    }
}

pub fn run_anchors(opts: &AnchorsOptions) -> Result<AnchorsOutcome> {
    let labels = load_labels(&opts.labels, opts.class_count)?;
    let ga = GaConfig {
        generations: opts.generations,
        threshold: opts.threshold,
        fitness: opts.fitness,
        seed: opts.seed,
        ..GaConfig::default()
    };
    let report = auto_anchor(&labels, opts.k, opts.img_size, &ga)?;
    Ok(AnchorsOutcome { labels, report })
}

#[derive(Debug, Clone)]
pub struct InferOptions {
    pub config: NetConfig,
    /// Archive to load; seeded random weights when absent.
    pub weights: Option<PathBuf>,
    pub seed: u64,
    pub images: Vec<PathBuf>,
    pub img_size: Option<usize>,
    pub conf: f64,
    pub iou: f64,
    pub overlay_dir: Option<PathBuf>,
}

impl InferOptions {
    pub fn new(config: NetConfig, images: Vec<PathBuf>) -> Self {
        Self {
            config,
            weights: None,
            seed: 0,
            images,
            img_size: None,
            conf: DEFAULT_CONF,
            iou: DEFAULT_IOU,
            overlay_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImageTiming {
    pub image_id: String,
    pub millis: f64,
    pub detections: usize,
}

#[derive(Debug, Clone)]
pub struct InferOutcome {
    pub rows: Vec<PredictionRow>,
    pub timings: Vec<ImageTiming>,
    pub warnings: Vec<String>,
}

impl InferOutcome {
    /// Contents of the predictions file.
    pub fn predictions(&self) -> String {
        format_predictions(&self.rows)
    }
}

fn image_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Image(format!("no file name in {}", path.display())))
}

/// Letterbox, forward, decode and per-class NMS for one decoded image.
/// Boxes come back in source-image pixels.
pub fn detect_image(model: &Model, image: &Image, img_size: usize, conf: f64, iou: f64) -> Result<Vec<Detection>> {
    let graph = model.graph();
    let input = image.to_tensor(graph.config().input_channels)?;
    let (input, lb) = letterbox(&input, img_size)?;
    let heads = model.forward(&input)?;
    let dets = decode_detections(&heads, &graph.config().anchors, &graph.detect_strides(), conf, img_size)?;
    Ok(nms(&dets, iou)
        .into_iter()
        .map(|d| Detection::new(lb.inverse_box(&d.bbox), d.class, d.confidence))
        .filter(|d| d.bbox.width() > 0.0 && d.bbox.height() > 0.0)
        .collect())
}

pub fn load_model(graph: Graph, weights: Option<&Path>, seed: u64) -> Result<Model> {
    let archive = match weights {
        Some(p) => read_weights(p)?,
        None => init_random(&graph, seed),
    };
    Model::new(graph, &archive)
}

pub fn run_infer(opts: &InferOptions) -> Result<InferOutcome> {
    let img_size = opts.img_size.unwrap_or(opts.config.input_size);
    let graph = build_graph(&opts.config)?;
    if img_size == 0 || !img_size.is_multiple_of(graph.max_stride()) {
        return Err(Error::Geometry(format!(
            "image size {img_size} must be a positive multiple of {}",
            graph.max_stride()
        )));
    }
    let model = load_model(graph, opts.weights.as_deref(), opts.seed)?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    for path in &opts.images {
        let id = image_id(path)?;
        let image = read_pnm(path)?;
        let start = Instant::now();
        let dets = detect_image(&model, &image, img_size, opts.conf, opts.iou)?;
        timings.push(ImageTiming {
            image_id: id.clone(),
            millis: start.elapsed().as_secs_f64() * 1e3,
            detections: dets.len(),
        });
        if let Some(dir) = &opts.overlay_dir {
            let out = render(&image, &dets, &opts.config.class_names);
            warnings.extend(out.warnings.into_iter().map(|w| format!("{id}: {w}")));
            let ext = if out.image.channels == 1 { "pgm" } else { "ppm" };
            crate::pnm::write_pnm(&out.image, &dir.join(format!("{id}.{ext}")))?;
        }
        rows.extend(dets.into_iter().map(|detection| PredictionRow {
            image_id: id.clone(),
            detection,
        }));
    }
    Ok(InferOutcome {
        rows,
        timings,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub warnings: Vec<String>,
}

/// Ground truths per labelled image, keyed by image id, in load order.
pub fn ground_truths(labels: &LabelSet) -> Result<Vec<(String, Vec<GroundTruth>)>> {
    labels
        .images
        .iter()
        .map(|img| {
            img.ground_truths()
                .map(|g| (img.id.clone(), g))
                .ok_or_else(|| Error::Labels(format!("image size unknown for `{}`", img.id)))
        })
        .collect()
}

pub fn evaluate_rows(
    rows: &[PredictionRow],
    gts: &[(String, Vec<GroundTruth>)],
    class_names: &[String],
) -> Result<EvalOutcome> {
    let mut ids: Vec<String> = gts.iter().map(|(id, _)| id.clone()).collect();
    let mut truth: Vec<Vec<GroundTruth>> = gts.iter().map(|(_, g)| g.clone()).collect();
    let mut warnings = Vec::new();
    let mut dets: Vec<Vec<Detection>> = vec![Vec::new(); ids.len()];
    for r in rows {
        let slot = match ids.iter().position(|id| *id == r.image_id) {
            Some(i) => i,
            None => {
                warnings.push(format!("predictions for unlabelled image `{}`", r.image_id));
                ids.push(r.image_id.clone());
                truth.push(Vec::new());
                dets.push(Vec::new());
                ids.len() - 1
            }
        };
        dets[slot].push(r.detection);
    }
    let report = evaluate(&dets, &truth, class_names, &EvalConfig::default())?;
    Ok(EvalOutcome { report, warnings })
}

pub fn run_eval(predictions: &Path, labels: &Path, class_names: &[String]) -> Result<EvalOutcome> {
    let text = fs::read_to_string(predictions).map_err(|e| Error::io(predictions, e))?;
    let rows = parse_predictions(&text)?;
    let set = load_labels(labels, Some(class_names.len()))?;
    if let Some(r) = set.rejected.first() {
        return Err(Error::Labels(format!("{}:{}: {}", r.file.display(), r.line, r.reason)));
    }
    let mut out = evaluate_rows(&rows, &ground_truths(&set)?, class_names)?;
    out.warnings.splice(0..0, set.warnings);
    Ok(out)
}

/// Draws the rows of `predictions` whose image id matches the image stem.
pub fn run_render(image: &Path, predictions: &Path, class_names: &[String]) -> Result<Rendered> {
    let id = image_id(image)?;
    let img = read_pnm(image)?;
    let text = fs::read_to_string(predictions).map_err(|e| Error::io(predictions, e))?;
    let dets: Vec<Detection> = parse_predictions(&text)?
        .into_iter()
        .filter(|r| r.image_id == id)
        .map(|r| r.detection)
        .collect();
    Ok(render(&img, &dets, class_names))
}

/// Parameter table, section totals and archive sizes.
pub fn run_params(config: &NetConfig) -> Result<String> {
    let graph = build_graph(config)?;
    let mut s = graph.param_report();
    let manifest = graph.manifest();
    let archive_bytes = |dtype: DType| {
        crate::weights::HEADER_LEN
            + manifest
                .iter()
                .map(|p| 4 + p.name.len() + 4 * p.dims.len() + p.numel() * dtype.size())
                .sum::<usize>()
    };
    let _ = writeln!(s, "tensors   {:>12}", manifest.len());
    let _ = writeln!(s, "layers    {:>12}", graph.nodes().len());
    for (label, dtype) in [("f32", DType::F32), ("f16", DType::F16)] {
        let b = archive_bytes(dtype);
        let _ = writeln!(s, "archive {label} {b:>12} bytes ({:.2} MB)", b as f64 / 1e6);
    }
    Ok(s)
}

/// Per-layer FLOP table (2 × multiply-accumulate) for a square input.
pub fn run_flops(config: &NetConfig, img_size: usize) -> Result<String> {
    let graph = build_graph(config)?;
    let input = [1, config.input_channels, img_size, img_size];
    let shapes = graph.shapes(input)?;
    let flops = graph.layer_flops(input)?;
    let mut s = String::new();
    let _ = writeln!(s, "{:>4} {:<10} {:>20} {:>14}", "idx", "block", "output", "GFLOPs");
    for ((n, shape), f) in graph.nodes().iter().zip(&shapes).zip(&flops) {
        let out = if n.index + 1 == graph.nodes().len() {
            "heads".to_string()
        } else {
            format!("{}x{}x{}", shape[1], shape[2], shape[3])
        };
        let _ = writeln!(
            s,
            "{:>4} {:<10} {:>20} {:>14.4}",
            n.index,
            n.op.name(),
            out,
            *f as f64 / 1e9
        );
    }
    let total: u64 = flops.iter().sum();
    let _ = writeln!(s, "input {}x{}x{}", config.input_channels, img_size, img_size);
    let _ = writeln!(s, "total {total} FLOPs ({:.3} GFLOPs)", total as f64 / 1e9);
    Ok(s)
}

/// Archive with every tensor the config needs, for tests and demos.
pub fn random_archive(config: &NetConfig, seed: u64) -> Result<WeightArchive> {
    Ok(init_random(&build_graph(config)?, seed))
}
