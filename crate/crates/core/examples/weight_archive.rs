//! Writing, reading and inspecting GAAW archives, including batch-norm
//! folding and half-precision storage.

use gaanet::weights::{read_weights, write_weights, DType, WeightArchive};
use gaanet::{build_graph, init_random, NetConfig};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;

    let mut small = WeightArchive::new();
    small.insert("demo.weight", &[2, 2], vec![1.0, -2.0, 0.5, 4.0], DType::F32)?;
    let bytes = small.to_bytes();
    println!("one 2×2 f32 tensor, {} bytes:", bytes.len());
    for chunk in bytes.chunks(16) {
        let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
        println!("  {}", hex.join(" "));
    }

    // conv + batch norm, folded on read
    let mut bn = WeightArchive::new();
    bn.insert("c.weight", &[1, 1, 1, 1], vec![2.0], DType::F32)?;
    bn.insert("c.bn.weight", &[1], vec![3.0], DType::F32)?;
    bn.insert("c.bn.bias", &[1], vec![0.5], DType::F32)?;
    bn.insert("c.bn.running_mean", &[1], vec![1.0], DType::F32)?;
    bn.insert("c.bn.running_var", &[1], vec![4.0], DType::F32)?;
    let path = dir.path().join("bn.gaaw");
    write_weights(&bn, &path)?;
    let folded = read_weights(&path)?;
    println!(
        "folded: weight {:?}, bias {:?}",
        folded.get("c.weight").map(|e| &e.data),
        folded.get("c.bias").map(|e| &e.data)
    );

    let graph = build_graph(&NetConfig::gaanet())?;
    let full = init_random(&graph, 0);
    for (label, archive) in [("f32", full.clone()), ("f16", full.to_f16())] {
        let p = dir.path().join(format!("model-{label}.gaaw"));
        write_weights(&archive, &p)?;
        let len = std::fs::metadata(&p)?.len();
        let back = read_weights(&p)?;
        println!(
            "{label}: {} tensors, {} params, {:.2} MB on disk, round trip exact: {}",
            back.len(),
            back.param_count(),
            len as f64 / 1e6,
            back == archive
        );
    }
    Ok(())
}
