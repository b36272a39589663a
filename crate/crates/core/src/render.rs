//! Detection overlays: 2-pixel class-coloured rectangles with a small
//! `class conf` caption drawn outside the box.

use crate::boxes::Detection;
use crate::pnm::Image;

pub const LINE_WIDTH: usize = 2;
const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;
const PAD: usize = 1;
pub const CAPTION_HEIGHT: usize = GLYPH_H + 2 * PAD;

const PALETTE: [[u8; 3]; 20] = [
    [0xFF, 0x38, 0x38],
    [0xFF, 0x9D, 0x97],
    [0xFF, 0x70, 0x1F],
    [0xFF, 0xB2, 0x1D],
    [0xCF, 0xD2, 0x31],
    [0x48, 0xF9, 0x0A],
    [0x92, 0xCC, 0x17],
    [0x3D, 0xDB, 0x86],
    [0x1A, 0x93, 0x34],
    [0x00, 0xD4, 0xBB],
    [0x2C, 0x99, 0xA8],
    [0x00, 0xC2, 0xFF],
    [0x34, 0x45, 0x93],
    [0x64, 0x73, 0xFF],
    [0x00, 0x18, 0xEC],
    [0x84, 0x38, 0xFF],
    [0x52, 0x00, 0x85],
    [0xCB, 0x38, 0xFF],
    [0xFF, 0x95, 0xC8],
    [0xFF, 0x37, 0xC7],
];

pub fn class_color(class: usize) -> [u8; 3] {
    PALETTE[class % PALETTE.len()]
}

/// 3×5 glyph rows, most significant of the low three bits on the left.
fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'A' => [2, 5, 7, 5, 5],
        'B' => [6, 5, 6, 5, 6],
        'C' => [3, 4, 4, 4, 3],
        'D' => [6, 5, 5, 5, 6],
        'E' => [7, 4, 6, 4, 7],
        'F' => [7, 4, 6, 4, 4],
        'G' => [3, 4, 5, 5, 3],
        'H' => [5, 5, 7, 5, 5],
        'I' => [7, 2, 2, 2, 7],
        'J' => [1, 1, 1, 5, 2],
        'K' => [5, 5, 6, 5, 5],
        'L' => [4, 4, 4, 4, 7],
        'M' => [5, 7, 7, 5, 5],
        'N' => [6, 5, 5, 5, 5],
        'O' => [2, 5, 5, 5, 2],
        'P' => [6, 5, 6, 4, 4],
        'Q' => [2, 5, 5, 6, 3],
        'R' => [6, 5, 6, 5, 5],
        'S' => [3, 4, 2, 1, 6],
        'T' => [7, 2, 2, 2, 2],
        'U' => [5, 5, 5, 5, 7],
        'V' => [5, 5, 5, 5, 2],
        'W' => [5, 5, 7, 7, 5],
        'X' => [5, 5, 2, 5, 5],
        'Y' => [5, 5, 2, 2, 2],
        'Z' => [7, 1, 2, 4, 7],
        '.' => [0, 0, 0, 0, 2],
        '-' => [0, 0, 7, 0, 0],
        '_' => [0, 0, 0, 0, 7],
        ':' => [0, 2, 0, 2, 0],
        '%' => [5, 1, 2, 4, 5],
        ' ' => [0; 5],
        _ => [7, 7, 7, 7, 7],
    }
}

pub fn text_width(text: &str) -> usize {
    let n = text.chars().count();
    if n == 0 {
        0
    } else {
        n * (GLYPH_W + 1) - 1 + 2 * PAD
    }
}

fn fill_rect(img: &mut Image, x0: usize, y0: usize, x1: usize, y1: usize, color: [u8; 3]) {
    for y in y0..y1.min(img.height) {
        for x in x0..x1.min(img.width) {
            img.set_pixel(x, y, color);
        }
    }
}

fn draw_text(img: &mut Image, x0: usize, y0: usize, text: &str, color: [u8; 3]) {
    for (i, c) in text.chars().enumerate() {
        let gx = x0 + PAD + i * (GLYPH_W + 1);
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                    img.set_pixel(gx + col, y0 + PAD + row, color);
                }
            }
        }
    }
}

pub fn caption(det: &Detection, class_names: &[String]) -> String {
    let name = class_names
        .get(det.class)
        .cloned()
        .unwrap_or_else(|| det.class.to_string());
    format!("{name} {:.2}", det.confidence)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub image: Image,
    pub warnings: Vec<String>,
}

/// Draws detections in order. Boxes are clipped to the image; captions go
/// above the box, else below it, else are left out, so the box interior is
/// never painted.
pub fn render(image: &Image, dets: &[Detection], class_names: &[String]) -> Rendered {
    let mut img = image.clone();
    let mut warnings = Vec::new();
    let (w, h) = (img.width as f64, img.height as f64);
    for (i, d) in dets.iter().enumerate() {
        let b = d.bbox;
        if b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > w || b.y2 > h {
            warnings.push(format!("detection {i} extends outside the image; clipped"));
        }
        let c = b.clip(w, h);
        if img.width == 0 || img.height == 0 || c.x2 <= c.x1 || c.y2 <= c.y1 {
            warnings.push(format!("detection {i} lies outside the image; skipped"));
            continue;
        }
        let x0 = c.x1.floor() as usize;
        let y0 = c.y1.floor() as usize;
        let x1 = (c.x2.ceil() as usize).clamp(x0 + 1, img.width);
        let y1 = (c.y2.ceil() as usize).clamp(y0 + 1, img.height);
        let color = class_color(d.class);
        let lw = LINE_WIDTH;
        fill_rect(&mut img, x0, y0, x1, (y0 + lw).min(y1), color);
        fill_rect(&mut img, x0, y1.saturating_sub(lw).max(y0), x1, y1, color);
        fill_rect(&mut img, x0, y0, (x0 + lw).min(x1), y1, color);
        fill_rect(&mut img, x1.saturating_sub(lw).max(x0), y0, x1, y1, color);

        let text = caption(d, class_names);
        let tw = text_width(&text);
        let ty = if y0 >= CAPTION_HEIGHT {
            Some(y0 - CAPTION_HEIGHT)
        } else if y1 + CAPTION_HEIGHT <= img.height {
            Some(y1)
        } else {
            None
        };
        match ty {
            Some(ty) => {
                let tx = x0.min(img.width.saturating_sub(tw));
                fill_rect(&mut img, tx, ty, tx + tw, ty + CAPTION_HEIGHT, color);
                let luma = 0.299 * color[0] as f64 + 0.587 * color[1] as f64 + 0.114 * color[2] as f64;
                let ink = if luma > 128.0 { [0, 0, 0] } else { [255, 255, 255] };
                draw_text(&mut img, tx, ty, &text, ink);
            }
            None => warnings.push(format!("no room for the caption of detection {i}")),
        }
    }
    Rendered { image: img, warnings }
}
