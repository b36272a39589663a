//! Parameter and FLOP accounting for the built-in network.
//!
//! ```text
//! cargo run --release --example model_accounting
//! ```

use gaanet::commands::{run_flops, run_params};
use gaanet::{build_graph, NetConfig};

fn main() -> anyhow::Result<()> {
    let config = NetConfig::gaanet();
    print!("{}", run_params(&config)?);

    let graph = build_graph(&config)?;
    let total = graph.count_params();
    let target = 6.8e6;
    println!(
        "\n{total} parameters, {:+.1}% against a 6.8 M budget",
        100.0 * (total as f64 - target) / target
    );
    println!("detect strides {:?}", graph.detect_strides());

    println!();
    print!("{}", run_flops(&config, config.input_size)?);
    Ok(())
}
