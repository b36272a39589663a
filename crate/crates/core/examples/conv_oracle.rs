//! Cross-checks the im2col/GEMM convolution against a six-deep loop on a
//! handful of grouped, strided and padded shapes.

use gaanet::tensor::{conv2d, ConvParams, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive(x: &Tensor, w: &Tensor, b: &[f32], p: &ConvParams) -> Tensor {
    let [n, _, h, wd] = x.shape();
    let (oh, ow) = p.output_hw(h, wd).unwrap();
    let cin_g = p.in_channels / p.groups;
    let cout_g = p.out_channels / p.groups;
    let k = p.kernel;
    Tensor::from_fn([n, p.out_channels, oh, ow], |b_, o, y, x_| {
        let g = o / cout_g;
        let mut acc = b.get(o).copied().unwrap_or(0.0) as f64;
        for ci in 0..cin_g {
            for ky in 0..k {
                for kx in 0..k {
                    let iy = (y * p.stride + ky) as isize - p.padding as isize;
                    let ix = (x_ * p.stride + kx) as isize - p.padding as isize;
                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                        acc += x.at(b_, g * cin_g + ci, iy as usize, ix as usize) as f64 * w.at(o, ci, ky, kx) as f64;
                    }
                }
            }
        }
        acc as f32
    })
}

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = [
        (2, 8, 8, 3, 1, 1, 1, 16),
        (1, 6, 4, 3, 2, 1, 2, 15),
        (2, 8, 8, 5, 1, 2, 8, 12),
        (1, 4, 6, 1, 1, 0, 1, 9),
        (1, 3, 8, 6, 2, 2, 1, 16),
    ];
    println!("{:<28} {:>14}", "case (c1,c2,k,s,p,g,hw)", "max |Δ|");
    for (n, c1, c2, k, s, pad, g, hw) in cases {
        let p = ConvParams::new(c1, c2, k).stride(s).padding(pad).groups(g);
        let x = Tensor::from_fn([n, c1, hw, hw], |_, _, _, _| rng.gen_range(-1.0..1.0));
        let w = Tensor::from_fn(p.weight_dims(), |_, _, _, _| rng.gen_range(-1.0..1.0));
        let b: Vec<f32> = (0..c2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = conv2d(&x, &w, Some(&b), &p)?;
        let slow = naive(&x, &w, &b, &p);
        let err = fast
            .data()
            .iter()
            .zip(slow.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        println!("{:<28} {:>14.3e}", format!("{c1},{c2},{k},{s},{pad},{g},{hw}"), err);
        assert!(err < 1e-5);
    }
    Ok(())
}
