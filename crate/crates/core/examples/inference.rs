//! End-to-end detection on a synthetic PNM image with seeded random weights.
//!
//! Random weights detect nothing meaningful; the point is the pipeline:
//! letterbox, forward, decode, NMS, and boxes mapped back to image pixels.
//!
//! ```text
//! cargo run --release --example inference
//! ```

use std::time::Instant;

use gaanet::commands::{detect_image, random_archive};
use gaanet::eval::{format_predictions, PredictionRow};
use gaanet::pnm::Image;
use gaanet::{build_graph, Model, NetConfig};

fn main() -> anyhow::Result<()> {
    let config = NetConfig::gaanet();
    let archive = random_archive(&config, 7)?;
    let model = Model::new(build_graph(&config)?, &archive)?;

    // 320×200 grey sky with a bright blob
    let mut image = Image::filled(320, 200, 3, 90);
    for y in 80..100 {
        for x in 150..180 {
            image.set_pixel(x, y, [230, 230, 230]);
        }
    }

    let start = Instant::now();
    let dets = detect_image(&model, &image, config.input_size, 0.01, 0.45)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;

    let rows: Vec<PredictionRow> = dets
        .iter()
        .take(5)
        .map(|&detection| PredictionRow {
            image_id: "sky".into(),
            detection,
        })
        .collect();
    println!("{} detections at conf ≥ 0.01 in {ms:.1} ms; top rows:", dets.len());
    print!("{}", format_predictions(&rows));
    Ok(())
}
