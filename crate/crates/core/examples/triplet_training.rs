//! Train the Siamese embedding on synthetic writers and save the weights.
//!
//! ```text
//! cargo run --release --example triplet_training -- 5 /tmp/weights.ssnw
//! ```

use std::path::PathBuf;

use sigscat::dataset::{synthesize_dataset, writer_disjoint_split};
use sigscat::model::ModelConfig;
use sigscat::training::{train_with, TrainConfig};

fn main() -> sigscat::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sigscat-example.ssnw"));

    let catalog = writer_disjoint_split(synthesize_dataset(8, 8, 8, 1)?, 6, 1)?;
    let config = TrainConfig {
        epochs,
        seed: 1,
        ..TrainConfig::default()
    };
    let (weights, report) = train_with(&catalog, &ModelConfig::default(), &config, Some(&out), &mut |e| {
        println!(
            "epoch {:>2}  loss {:.4}  active {:>5.1}%  {:.1}s",
            e.epoch,
            e.mean_loss,
            100.0 * e.active_fraction,
            e.seconds
        )
    })?;
    println!("{} parameters saved to {} after {:.1?}", weights.count_parameters(), out.display(), report.wall_time);
    Ok(())
}
