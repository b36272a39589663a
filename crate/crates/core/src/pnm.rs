//! Netpbm greymaps and pixmaps (P2, P3, P5, P6), 8-bit samples.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Interleaved 8-bit image with one (grey) or three (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Image(format!(
                "{} bytes for a {width}×{height}×{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels]).expect("consistent dimensions")
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Writes `rgb` at `(x, y)`; grey images take the rounded luma.
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x >= self.width || y >= self.height {
            return;
        }
        let i = (y * self.width + x) * self.channels;
        if self.channels == 3 {
            self.data[i..i + 3].copy_from_slice(&rgb);
        } else {
            let [r, g, b] = rgb.map(f64::from);
            self.data[i] = (0.299 * r + 0.587 * g + 0.114 * b).round() as u8;
        }
    }

    /// `[1, channels, H, W]` tensor scaled to [0, 1]. Grey input is
    /// replicated when `channels` is 3.
    pub fn to_tensor(&self, channels: usize) -> Result<Tensor> {
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!("cannot feed {channels} channels")));
        }
        if channels == 1 && self.channels == 3 {
            return Err(Error::Image("network expects grey input, image is RGB".into()));
        }
        let (w, h) = (self.width, self.height);
        Ok(Tensor::from_fn([1, channels, h, w], |_, c, y, x| {
            let src = if self.channels == 1 { 0 } else { c };
            self.data[(y * w + x) * self.channels + src] as f32 / 255.0
        }))
    }

    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image(format!("bad PNM {what}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Image("not a PNM file".into()));
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        b'6' => (3, true),
        other => return Err(Error::Image(format!("unsupported PNM variant P{}", other as char))),
    };
    let mut t = Tokens { bytes, pos: 2 };
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!("maxval {maxval} unsupported; need 1..=255")));
    }
    let len = width * height * channels;
    let rescale = |v: usize| ((v.min(maxval) * 255 + maxval / 2) / maxval) as u8;
    let data = if binary {
        t.pos += 1;
        let payload = bytes
            .get(t.pos..t.pos + len)
            .ok_or_else(|| Error::Image(format!("PNM payload truncated, need {len} bytes")))?;
        payload.iter().map(|&v| rescale(v as usize)).collect()
    } else {
        (0..len)
            .map(|_| t.number("sample").map(rescale))
            .collect::<Result<Vec<u8>>>()?
    };
    Image::new(width, height, channels, data)
}

pub fn read_pnm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes).map_err(|e| match e {
        Error::Image(msg) => Error::Image(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_pnm(image: &Image, path: &Path) -> Result<()> {
    fs::write(path, image.to_pnm()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let img = Image::new(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(decode_pnm(&img.to_pnm()).unwrap(), img);
        let g = Image::new(3, 2, 1, (0..6).collect()).unwrap();
        assert_eq!(decode_pnm(&g.to_pnm()).unwrap(), g);
    }

    #[test]
    fn ascii_with_comments_and_maxval() {
        let img = decode_pnm(b"P2\n# note\n2 1\n15\n0 15\n").unwrap();
        assert_eq!(img.data, vec![0, 255]);
    }

    #[test]
    fn grey_replicates_to_three_channels() {
        let g = Image::new(1, 1, 1, vec![51]).unwrap();
        let t = g.to_tensor(3).unwrap();
        assert_eq!(t.data(), &[0.2, 0.2, 0.2]);
    }

    #[test]
    fn truncated_payload() {
        assert!(decode_pnm(b"P5 4 4 255\n\x00\x01").is_err());
    }
}
