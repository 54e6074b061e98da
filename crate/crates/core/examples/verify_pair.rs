//! Embed two signature images and decide whether they share a writer.
//!
//! ```text
//! cargo run --release --example verify_pair -- a.png b.png weights.ssnw 0.32
//! ```
//!
//! Without arguments a freshly initialized model compares two synthetic
//! signatures, which shows the mechanics but not a trained decision.

use std::path::Path;

use sigscat::dataset::{load_image, SyntheticGenerator};
use sigscat::evaluation::decide;
use sigscat::model::{init_model, load_weights, ModelConfig, SiameseModel};

fn main() -> sigscat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (first, second, model, threshold) = match args.as_slice() {
        [a, b, w, rest @ ..] => (
            load_image(Path::new(a))?,
            load_image(Path::new(b))?,
            SiameseModel::new(load_weights(Path::new(w))?)?,
            rest.first().and_then(|t| t.parse().ok()).unwrap_or(0.3),
        ),
        _ => {
            let writer = SyntheticGenerator::new(5).writer(0);
            let model = SiameseModel::new(init_model(&ModelConfig::default(), 5)?)?;
            (writer.genuine(0), writer.forgery(0), model, 0.3)
        }
    };
    let (ea, eb) = (model.embed(&first)?, model.embed(&second)?);
    println!("embeddings of length {} (‖a‖ = {:.4})", ea.len(), ea.values.iter().map(|v| v * v).sum::<f32>().sqrt());
    let v = decide(sigscat::model::distance(&ea, &eb)?, threshold);
    println!("{} {:.6} (threshold {})", v.decision, v.score, v.threshold);
    Ok(())
}
