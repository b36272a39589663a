//! Auto-anchoring on a YOLO label tree, or on a generated one.
//!
//! ```text
//! cargo run --release --example autoanchor -- path/to/dataset
//! ```
//!
//! Without an argument a small synthetic tree with three box populations is
//! written to a temporary directory first.

use std::fs;
use std::path::PathBuf;

use gaanet::autoanchor::{
    auto_anchor, best_possible_recall, fitness, kmeans_anchors_from_sizes, load_labels, GaConfig,
};
use gaanet::pnm::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic_tree(root: &std::path::Path) -> anyhow::Result<()> {
    let images = root.join("images");
    let labels = root.join("labels");
    fs::create_dir_all(&images)?;
    fs::create_dir_all(&labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let populations = [(0.03, 0.02), (0.12, 0.08), (0.35, 0.4)];
    for i in 0..40 {
        let id = format!("frame{i:03}");
        fs::write(images.join(format!("{id}.pgm")), Image::filled(640, 512, 1, 0).to_pnm())?;
        let mut rows = String::new();
        for _ in 0..rng.gen_range(1..6) {
            let (w, h) = populations[rng.gen_range(0..3)];
            let w: f64 = w * rng.gen_range(0.7..1.3);
            let h: f64 = h * rng.gen_range(0.7..1.3);
            let cx = rng.gen_range(w / 2.0..1.0 - w / 2.0);
            let cy = rng.gen_range(h / 2.0..1.0 - h / 2.0);
            rows += &format!("{} {cx:.6} {cy:.6} {w:.6} {h:.6}\n", rng.gen_range(0..4));
        }
        fs::write(labels.join(format!("{id}.txt")), rows)?;
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let tmp;
    let root = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            tmp = tempfile::tempdir()?;
            synthetic_tree(tmp.path())?;
            tmp.path().to_path_buf()
        }
    };
    let labels = load_labels(&root, None)?;
    println!(
        "{} images, {} boxes, {} rows rejected",
        labels.images.len(),
        labels.box_count(),
        labels.rejected.len()
    );

    let sizes = labels.box_sizes(256);
    let km = kmeans_anchors_from_sizes(&sizes, 12, 0)?;
    println!(
        "k-means: {} iterations, inertia {:.2} -> {:.2}",
        km.iterations,
        km.inertia[0],
        km.inertia.last().copied().unwrap_or_default()
    );
    println!(
        "seed fitness {:.4}, bpr {:.4}",
        fitness(&km.anchors, &sizes, 0.25)?,
        best_possible_recall(&km.anchors, &sizes, 0.25)?
    );

    let report = auto_anchor(&labels, 12, 256, &GaConfig::default())?;
    print!("{}", report.to_text());
    Ok(())
}
