//! A ghost convolution next to the plain convolution it replaces, ending
//! with the identity-kernel case where every ghost map copies its
//! intrinsic map.

use gaanet::ghost::{ghost_conv, Block, GhostConvSpec, CHEAP_KERNEL};
use gaanet::tensor::Tensor;

fn main() -> anyhow::Result<()> {
    println!(
        "{:>4} {:>4} {:>2} {:>10} {:>10} {:>7}",
        "c1", "c2", "k", "ghost", "plain", "ratio"
    );
    for (c1, c2, k) in [(1, 2, 1), (16, 32, 1), (16, 32, 3), (64, 128, 3), (256, 512, 1)] {
        let g = GhostConvSpec::new(c1, c2, k, 1)?;
        let ghost = g.count_params();
        let plain = g.standard_equivalent().param_count();
        println!(
            "{c1:>4} {c2:>4} {k:>2} {ghost:>10} {plain:>10} {:>7.3}",
            ghost as f64 / plain as f64
        );
    }
    println!(
        "ghost wins on parameters exactly when c1·k² > {}",
        CHEAP_KERNEL * CHEAP_KERNEL
    );

    let spec = GhostConvSpec::new(8, 16, 3, 1)?;
    let mut w = spec.zero_weights();
    for (i, v) in w.primary.weight.data_mut().iter_mut().enumerate() {
        *v = ((i * 37 % 101) as f32 - 50.0) / 400.0;
    }
    let centre = CHEAP_KERNEL * CHEAP_KERNEL / 2;
    for c in 0..spec.hidden() {
        w.cheap.weight.data_mut()[c * CHEAP_KERNEL * CHEAP_KERNEL + centre] = 1.0;
    }
    let x = Tensor::from_fn([1, 8, 12, 12], |_, c, h, w| {
        ((c * 31 + h * 7 + w) % 17) as f32 / 8.0 - 1.0
    });
    let y = ghost_conv(&x, &spec, &w)?;
    let intrinsic = y.slice_channels(0, spec.hidden())?;
    let ghost = y.slice_channels(spec.hidden(), spec.hidden())?;
    let same = intrinsic
        .data()
        .iter()
        .zip(ghost.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!(
        "output {:?}; identity cheap kernels copy the intrinsic half bit for bit: {same}",
        y.shape()
    );
    println!(
        "flops at 12×12: ghost {} vs plain {}",
        spec.count_flops(x.shape())?,
        spec.standard_equivalent().flops(12, 12)?
    );
    Ok(())
}
