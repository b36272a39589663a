//! Dataset-driven anchors: YOLO label ingestion, k-means seeding and a
//! mutation-only genetic refinement scored by the anchor/box ratio metric.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::boxes::{BBox, GroundTruth};
use crate::error::{Error, Result};
use crate::eval::ciou;

/// Box or anchor `(w, h)` in pixels.
pub type BoxSize = [f64; 2];

pub const DEFAULT_THRESHOLD: f64 = 0.25;
/// Boxes with both sides under this many pixels are left out of clustering.
pub const MIN_CLUSTER_SIDE: f64 = 2.0;
pub const KMEANS_MAX_ITER: usize = 300;

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "pgm", "ppm", "pnm", "tif", "tiff", "webp"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSet {
    sizes: Vec<BoxSize>,
}

impl AnchorSet {
    pub fn new(sizes: Vec<BoxSize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Spec("anchor set is empty".into()));
        }
        if let Some(bad) = sizes
            .iter()
            .find(|[w, h]| !(w.is_finite() && h.is_finite() && *w > 0.0 && *h > 0.0))
        {
            return Err(Error::Spec(format!("anchor {bad:?} must be positive")));
        }
        Ok(Self { sizes })
    }

    /// From `w0,h0,w1,h1,...`.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::Spec(format!("odd anchor value count {}", values.len())));
        }
        Self::new(values.chunks(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn sizes(&self) -> &[BoxSize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.sizes.iter().flatten().copied().collect()
    }

    /// Pixel-rounded flat values, as written into configs.
    pub fn rounded(&self) -> Vec<i64> {
        self.flat().iter().map(|v| v.round() as i64).collect()
    }

    /// Stable sort by area, ascending.
    pub fn sorted_by_area(&self) -> Self {
        let mut sizes = self.sizes.clone();
        sizes.sort_by(|a, b| (a[0] * a[1]).total_cmp(&(b[0] * b[1])));
        Self { sizes }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sizes: self.sizes.iter().map(|[w, h]| [w * factor, h * factor]).collect(),
        }
    }
}

/// One `class cx cy w h` row, coordinates normalized to the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelBox {
    pub class: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageLabels {
    /// File stem shared by the image and its label file.
    pub id: String,
    pub image_path: Option<PathBuf>,
    /// `(width, height)` in pixels when the image header could be read.
    pub size: Option<(usize, usize)>,
    pub boxes: Vec<LabelBox>,
}

impl ImageLabels {
    /// Ground truths in source-image pixels.
    pub fn ground_truths(&self) -> Option<Vec<GroundTruth>> {
        let (w, h) = self.size?;
        let (w, h) = (w as f64, h as f64);
        Some(
            self.boxes
                .iter()
                .map(|b| GroundTruth::new(BBox::from_center(b.cx * w, b.cy * h, b.w * w, b.h * h), b.class))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    pub file: PathBuf,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LabelSet {
    pub images: Vec<ImageLabels>,
    pub rejected: Vec<RejectedRow>,
    pub warnings: Vec<String>,
}

impl LabelSet {
    pub fn box_count(&self) -> usize {
        self.images.iter().map(|i| i.boxes.len()).sum()
    }

    /// Box sizes in pixels once each image is resized so its long side is
    /// `input_size`. Images of unknown size are treated as square.
    pub fn box_sizes(&self, input_size: usize) -> Vec<BoxSize> {
        let s = input_size as f64;
        self.images
            .iter()
            .flat_map(|img| {
                let (sx, sy) = match img.size {
                    Some((w, h)) if w > 0 && h > 0 => {
                        let m = w.max(h) as f64;
                        (s * w as f64 / m, s * h as f64 / m)
                    }
                    _ => (s, s),
                };
                img.boxes.iter().map(move |b| [b.w * sx, b.h * sy])
            })
            .collect()
    }
}

/// Parses one label file. Bad rows are returned, not fatal.
pub fn parse_label_text(text: &str, file: &Path, class_count: Option<usize>) -> (Vec<LabelBox>, Vec<RejectedRow>) {
    let mut boxes = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let reject = |reason: String| RejectedRow {
            file: file.to_path_buf(),
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            rejected.push(reject(format!("expected 5 fields, got {}", fields.len())));
            continue;
        }
        let Ok(class) = fields[0].parse::<f64>() else {
            rejected.push(reject(format!("bad class id `{}`", fields[0])));
            continue;
        };
        if class < 0.0 || class.fract() != 0.0 {
            rejected.push(reject(format!("bad class id `{}`", fields[0])));
            continue;
        }
        let class = class as usize;
        if let Some(n) = class_count {
            if class >= n {
                rejected.push(reject(format!("class {class} ≥ class count {n}")));
                continue;
            }
        }
        let nums: std::result::Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        let Ok(v) = nums else {
            rejected.push(reject("non-numeric coordinate".into()));
            continue;
        };
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            rejected.push(reject(format!("coordinate out of [0, 1]: {v:?}")));
            continue;
        }
        if v[2] <= 0.0 || v[3] <= 0.0 {
            rejected.push(reject("zero-size box".into()));
            continue;
        }
        boxes.push(LabelBox {
            class,
            cx: v[0],
            cy: v[1],
            w: v[2],
            h: v[3],
        });
    }
    (boxes, rejected)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    Ok(entries)
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.contains(&e.to_ascii_lowercase().as_str()))
}

/// Label directories under `root`: `root/labels`, or `root/*/labels` for
/// split layouts (`train/`, `valid/`, ...).
fn label_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let direct = root.join("labels");
    if direct.is_dir() {
        return Ok(vec![direct]);
    }
    Ok(sorted_entries(root)?
        .into_iter()
        .map(|p| p.join("labels"))
        .filter(|p| p.is_dir())
        .collect())
}

/// Loads a YOLO-layout tree (`images/` next to `labels/`, one `.txt` per
/// image). Images without a label file contribute zero boxes.
pub fn load_labels(root: &Path, class_count: Option<usize>) -> Result<LabelSet> {
    if !root.is_dir() {
        return Err(Error::MissingLabelDir(root.to_path_buf()));
    }
    let dirs = label_dirs(root)?;
    let mut set = LabelSet::default();
    if dirs.is_empty() {
        if sorted_entries(root)?.is_empty() {
            set.warnings
                .push(format!("{} is empty; no labels loaded", root.display()));
            return Ok(set);
        }
        return Err(Error::MissingLabelDir(root.to_path_buf()));
    }

    for label_dir in dirs {
        let image_dir = label_dir.with_file_name("images");
        let mut images: Vec<(String, PathBuf)> = if image_dir.is_dir() {
            sorted_entries(&image_dir)?
                .into_iter()
                .filter(|p| has_extension(p, IMAGE_EXTENSIONS))
                .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
                .collect()
        } else {
            set.warnings.push(format!("no images/ next to {}", label_dir.display()));
            Vec::new()
        };
        let labels: Vec<(String, PathBuf)> = sorted_entries(&label_dir)?
            .into_iter()
            .filter(|p| has_extension(p, &["txt"]))
            .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
            .collect();
        let mut ids: Vec<String> = images
            .iter()
            .map(|(s, _)| s.clone())
            .chain(labels.iter().map(|(s, _)| s.clone()))
            .collect();
        ids.sort();
        ids.dedup();
        images.sort();

        for id in ids {
            let image_path = images
                .binary_search_by(|(s, _)| s.as_str().cmp(&id))
                .ok()
                .map(|i| images[i].1.clone());
            let size = image_path
                .as_deref()
                .and_then(|p| imagesize::size(p).ok().map(|s| (s.width, s.height)));
            if image_path.is_some() && size.is_none() {
                set.warnings.push(format!("could not read the size of image `{id}`"));
            }
            let boxes = match labels.binary_search_by(|(s, _)| s.as_str().cmp(&id)) {
                Ok(i) => {
                    let path = &labels[i].1;
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let (boxes, rejected) = parse_label_text(&text, path, class_count);
                    set.rejected.extend(rejected);
                    boxes
                }
                Err(_) => Vec::new(),
            };
            set.images.push(ImageLabels {
                id,
                image_path,
                size,
                boxes,
            });
        }
    }
    if set.images.is_empty() {
        set.warnings
            .push(format!("no labelled images found under {}", root.display()));
    }
    Ok(set)
}

/// Best ratio match of one box against a set of anchors:
/// `max_a min(w/aw, aw/w, h/ah, ah/h)`.
pub fn best_ratio(anchors: &[BoxSize], size: BoxSize) -> f64 {
    anchors
        .iter()
        .map(|a| {
            let rw = size[0] / a[0];
            let rh = size[1] / a[1];
            rw.min(1.0 / rw).min(rh.min(1.0 / rh))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitnessKind {
    /// Width/height ratio metric.
    Ratio,
    /// CIoU between zero-centred box and anchor.
    Ciou,
}

fn best_metric(kind: FitnessKind, anchors: &[BoxSize], size: BoxSize) -> f64 {
    match kind {
        FitnessKind::Ratio => best_ratio(anchors, size),
        FitnessKind::Ciou => {
            let b = BBox::from_center(0.0, 0.0, size[0], size[1]);
            anchors
                .iter()
                .map(|a| ciou(&b, &BBox::from_center(0.0, 0.0, a[0], a[1])))
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

fn non_empty(sizes: &[BoxSize]) -> Result<()> {
    if sizes.is_empty() {
        Err(Error::EmptyLabels)
    } else {
        Ok(())
    }
}

/// Mean over boxes of the best metric, zeroed where it does not exceed
/// `threshold`.
pub fn fitness_with(kind: FitnessKind, anchors: &AnchorSet, sizes: &[BoxSize], threshold: f64) -> Result<f64> {
    non_empty(sizes)?;
    let mut sum = 0.0;
    for &s in sizes {
        let m = best_metric(kind, anchors.sizes(), s);
        if m > threshold {
            sum += m;
        }
    }
    Ok(sum / sizes.len() as f64)
}

pub fn fitness(anchors: &AnchorSet, sizes: &[BoxSize], threshold: f64) -> Result<f64> {
    fitness_with(FitnessKind::Ratio, anchors, sizes, threshold)
}

/// Fraction of boxes whose best ratio metric exceeds `threshold`.
pub fn best_possible_recall(anchors: &AnchorSet, sizes: &[BoxSize], threshold: f64) -> Result<f64> {
    non_empty(sizes)?;
    let hits = sizes
        .iter()
        .filter(|&&s| best_ratio(anchors.sizes(), s) > threshold)
        .count();
    Ok(hits as f64 / sizes.len() as f64)
}

/// Mean number of anchors per box whose ratio metric exceeds `threshold`.
pub fn anchors_above_threshold(anchors: &AnchorSet, sizes: &[BoxSize], threshold: f64) -> Result<f64> {
    non_empty(sizes)?;
    let total: usize = sizes
        .iter()
        .map(|&s| {
            anchors
                .sizes()
                .iter()
                .filter(|a| best_ratio(std::slice::from_ref(a), s) > threshold)
                .count()
        })
        .sum();
    Ok(total as f64 / sizes.len() as f64)
}

/// Boxes large enough to take part in clustering.
pub fn cluster_sizes(sizes: &[BoxSize]) -> Vec<BoxSize> {
    sizes
        .iter()
        .copied()
        .filter(|s| s[0] >= MIN_CLUSTER_SIDE || s[1] >= MIN_CLUSTER_SIDE)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Centroids in pixels, sorted by area.
    pub anchors: AnchorSet,
    /// Within-cluster sum of squared (standardized) distances after each
    /// assignment step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: BoxSize, b: BoxSize) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn assign(points: &[BoxSize], centroids: &[BoxSize], labels: &mut [usize]) -> (bool, f64) {
    let mut changed = false;
    let mut inertia = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let (best, d) = centroids
            .iter()
            .enumerate()
            .map(|(j, c)| (j, sq_dist(*p, *c)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        if *label != best {
            changed = true;
            *label = best;
        }
        inertia += d;
    }
    (changed, inertia)
}

/// Lloyd's k-means with k-means++ seeding on `points` (already scaled).
pub fn kmeans(points: &[BoxSize], k: usize, seed: u64, max_iter: usize) -> Result<(Vec<BoxSize>, Vec<f64>, usize)> {
    if k == 0 {
        return Err(Error::Spec("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::TooFewBoxes { k, found: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(*p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[pick];
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(sq_dist(*p, c));
        }
        centroids.push(c);
    }

    let mut labels = vec![usize::MAX; points.len()];
    let (_, first) = assign(points, &centroids, &mut labels);
    let mut inertia = vec![first];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                centroids[j] = [sums[j][0] / n, sums[j][1] / n];
            }
        }
        let (changed, cost) = assign(points, &centroids, &mut labels);
        inertia.push(cost);
        if !changed {
            break;
        }
    }
    Ok((centroids, inertia, iterations))
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// k-means over box sizes standardized per axis; centroids scaled back to
/// pixels, floored at `MIN_CLUSTER_SIDE` and sorted by area.
pub fn kmeans_anchors_from_sizes(sizes: &[BoxSize], k: usize, seed: u64) -> Result<KMeans> {
    let points = cluster_sizes(sizes);
    if points.len() < k {
        return Err(Error::TooFewBoxes { k, found: points.len() });
    }
    let guard = |s: f64| if s > 0.0 && s.is_finite() { s } else { 1.0 };
    let sw = guard(std_dev(points.iter().map(|p| p[0])));
    let sh = guard(std_dev(points.iter().map(|p| p[1])));
    let scaled: Vec<BoxSize> = points.iter().map(|p| [p[0] / sw, p[1] / sh]).collect();
    let (centroids, inertia, iterations) = kmeans(&scaled, k, seed, KMEANS_MAX_ITER)?;
    let anchors = AnchorSet::new(
        centroids
            .iter()
            .map(|c| [(c[0] * sw).max(MIN_CLUSTER_SIDE), (c[1] * sh).max(MIN_CLUSTER_SIDE)])
            .collect(),
    )?;
    Ok(KMeans {
        anchors: anchors.sorted_by_area(),
        inertia,
        iterations,
    })
}

pub fn kmeans_anchors(labels: &LabelSet, k: usize, input_size: usize, seed: u64) -> Result<AnchorSet> {
    Ok(kmeans_anchors_from_sizes(&labels.box_sizes(input_size), k, seed)?.anchors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaConfig {
    pub generations: usize,
    pub mutation_prob: f64,
    pub sigma: f64,
    /// Per-gene multiplicative factor range.
    pub clamp: (f64, f64),
    /// Smallest allowed anchor side in pixels.
    pub min_side: f64,
    pub threshold: f64,
    pub fitness: FitnessKind,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 1000,
            mutation_prob: 0.9,
            sigma: 0.1,
            clamp: (0.3, 3.0),
            min_side: MIN_CLUSTER_SIDE,
            threshold: DEFAULT_THRESHOLD,
            fitness: FitnessKind::Ratio,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan() || self.sigma <= 0.0 || !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::Spec(format!(
                "GA needs sigma > 0 and mutation probability in [0, 1], got {} and {}",
                self.sigma, self.mutation_prob
            )));
        }
        if !(self.clamp.0 > 0.0 && self.clamp.0 <= 1.0 && self.clamp.1 >= 1.0) {
            return Err(Error::Spec(format!("bad mutation clamp {:?}", self.clamp)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub anchors: AnchorSet,
    /// Best fitness so far: the seed's, then one entry per generation.
    pub history: Vec<f64>,
    pub accepted: usize,
}

impl Evolution {
    pub fn fitness(&self) -> f64 {
        *self.history.last().expect("history holds the seed fitness")
    }
}

/// Mutation-only evolution: each generation scales every gene, with
/// probability `mutation_prob`, by `1 + r·N(0,1)·sigma` (a per-generation
/// `r ~ U(0,1)`), clamped; the candidate replaces the parent only on a
/// strict fitness improvement.
pub fn evolve_anchors(seed: &AnchorSet, sizes: &[BoxSize], ga: &GaConfig) -> Result<Evolution> {
    ga.validate()?;
    let score = |a: &AnchorSet| fitness_with(ga.fitness, a, sizes, ga.threshold);
    let mut best = seed.clone();
    let mut best_fit = score(&best)?;
    let mut history = Vec::with_capacity(ga.generations + 1);
    history.push(best_fit);
    let mut accepted = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(ga.seed);
    let genes = 2 * seed.len();
    let mut factors = vec![1.0f64; genes];

    for _ in 0..ga.generations {
        loop {
            let r: f64 = rng.gen();
            for f in factors.iter_mut() {
                let mutate = rng.gen::<f64>() < ga.mutation_prob;
                let z: f64 = rng.sample(StandardNormal);
                *f = if mutate {
                    (1.0 + r * z * ga.sigma).clamp(ga.clamp.0, ga.clamp.1)
                } else {
                    1.0
                };
            }
            if factors.iter().any(|&f| f != 1.0) || ga.mutation_prob == 0.0 {
                break;
            }
        }
        let candidate = AnchorSet {
            sizes: best
                .sizes
                .iter()
                .enumerate()
                .map(|(i, [w, h])| {
                    [
                        (w * factors[2 * i]).max(ga.min_side),
                        (h * factors[2 * i + 1]).max(ga.min_side),
                    ]
                })
                .collect(),
        };
        let fit = score(&candidate)?;
        if fit > best_fit {
            best = candidate;
            best_fit = fit;
            accepted += 1;
        }
        history.push(best_fit);
    }
    Ok(Evolution {
        anchors: best,
        history,
        accepted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoAnchorReport {
    pub images: usize,
    pub boxes: usize,
    pub clustered_boxes: usize,
    pub rejected_rows: usize,
    pub input_size: usize,
    pub k: usize,
    pub threshold: f64,
    pub generations: usize,
    pub seed: u64,
    pub seed_anchors: AnchorSet,
    pub anchors: AnchorSet,
    /// Fitness over the clustered boxes, before and after evolution.
    pub seed_fitness: f64,
    pub fitness: f64,
    /// Best possible recall over every box.
    pub bpr: f64,
    pub anchors_above_threshold: f64,
}

impl AutoAnchorReport {
    pub fn to_text(&self) -> String {
        let anchors: Vec<String> = self.anchors.rounded().iter().map(|v| v.to_string()).collect();
        format!(
            "images: {}\nboxes: {} ({} clustered, {} rows rejected)\n\
             input_size: {}\nk: {}\nthreshold: {:.4}\ngenerations: {}\nseed: {}\n\
             seed_fitness: {:.4}\nfitness: {:.4}\nbpr: {:.4}\nanchors_per_box: {:.2}\nanchors: {}\n",
            self.images,
            self.boxes,
            self.clustered_boxes,
            self.rejected_rows,
            self.input_size,
            self.k,
            self.threshold,
            self.generations,
            self.seed,
            self.seed_fitness,
            self.fitness,
            self.bpr,
            self.anchors_above_threshold,
            anchors.join(",")
        )
    }
}

/// k-means seeding followed by evolution, reported on the label set.
pub fn auto_anchor(labels: &LabelSet, k: usize, input_size: usize, ga: &GaConfig) -> Result<AutoAnchorReport> {
    let all = labels.box_sizes(input_size);
    let clustered = cluster_sizes(&all);
    let km = kmeans_anchors_from_sizes(&all, k, ga.seed)?;
    let evolved = evolve_anchors(&km.anchors, &clustered, ga)?;
    let anchors = evolved.anchors.sorted_by_area();
    Ok(AutoAnchorReport {
        images: labels.images.len(),
        boxes: all.len(),
        clustered_boxes: clustered.len(),
        rejected_rows: labels.rejected.len(),
        input_size,
        k,
        threshold: ga.threshold,
        generations: ga.generations,
        seed: ga.seed,
        seed_fitness: evolved.history[0],
        fitness: evolved.fitness(),
        bpr: best_possible_recall(&anchors, &all, ga.threshold)?,
        anchors_above_threshold: anchors_above_threshold(&anchors, &all, ga.threshold)?,
        seed_anchors: km.anchors,
        anchors,
    })
}
