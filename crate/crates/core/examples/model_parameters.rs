//! Print the layer plan and parameter budget of a model configuration.
//!
//! ```text
//! cargo run --example model_parameters
//! cargo run --example model_parameters -- 16,32,64,64
//! ```

use sigscat::model::{init_model, ModelConfig};

fn main() -> sigscat::Result<()> {
    let mut config = ModelConfig::default();
    if let Some(arg) = std::env::args().nth(1) {
        config.conv_filters = arg.split(',').filter_map(|v| v.trim().parse().ok()).collect();
    }
    let plan = config.plan()?;
    for (i, b) in plan.blocks.iter().enumerate() {
        println!(
            "block {}: {:>3} → {:<3} channels  {:?} → {:?} → {:?}",
            i + 1,
            b.in_channels,
            b.out_channels,
            b.input,
            b.conv_output,
            b.output
        );
    }
    println!("flatten {} → embedding {}", plan.flattened, plan.embedding_dim);

    let mut total = 0;
    for layer in config.layer_counts()? {
        println!("{:<6} {:>8} weights {:>4} biases", layer.name, layer.weights, layer.biases);
        total += layer.total();
    }
    println!("total {total}");
    assert_eq!(init_model(&config, 0)?.count_parameters(), total);
    Ok(())
}
