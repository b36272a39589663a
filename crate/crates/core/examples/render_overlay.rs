//! Draws detections onto a PNM image.
//!
//! ```text
//! cargo run --release --example render_overlay -- out.ppm
//! ```

use gaanet::pnm::{write_pnm, Image};
use gaanet::render::render;
use gaanet::{BBox, Detection};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "overlay.ppm".into());
    let mut img = Image::filled(160, 120, 3, 30);
    for y in 0..120 {
        for x in 0..160 {
            let v = (40 + (x + y) / 4) as u8;
            img.set_pixel(x, y, [v, v, v + 10]);
        }
    }
    let names: Vec<String> = ["bird", "drone", "helicopter", "plane"].map(String::from).to_vec();
    let dets = [
        Detection::new(BBox::new(20.0, 30.0, 60.0, 70.0), 1, 0.91),
        Detection::new(BBox::new(90.0, 10.0, 150.0, 40.0), 3, 0.64),
        Detection::new(BBox::new(-10.0, 90.0, 30.0, 130.0), 0, 0.38),
    ];
    let rendered = render(&img, &dets, &names);
    for w in &rendered.warnings {
        eprintln!("warning: {w}");
    }
    write_pnm(&rendered.image, out.as_ref())?;
    println!("wrote {out} ({}×{})", rendered.image.width, rendered.image.height);
    Ok(())
}
