//! Synthesize a small dataset, train on 10 writers, evaluate on 5 unseen ones.

use std::time::Instant;

use sigscat::dataset::{generate_eval_pairs, synthesize_dataset, writer_disjoint_split, Split};
use sigscat::evaluation::{score_pairs, CurveReport, DEFAULT_BINS};
use sigscat::model::{init_model, ModelConfig, SiameseModel};
use sigscat::training::{train_with, TrainConfig};

fn main() -> sigscat::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let epochs = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let t0 = Instant::now();
    let catalog = synthesize_dataset(15, 12, 12, seed)?;
    let catalog = writer_disjoint_split(catalog, 10, seed)?;
    println!("synthesized {} images in {:.1?}", catalog.len(), t0.elapsed());

    let model_config = ModelConfig::default();
    let config = TrainConfig { epochs, seed, ..TrainConfig::default() };
    let pairs = generate_eval_pairs(&catalog, Split::Test, None, seed)?;

    let untrained = SiameseModel::new(init_model(&model_config, seed)?)?;
    let before = CurveReport::new(&score_pairs(&catalog, &pairs, &untrained)?, DEFAULT_BINS)?;
    println!("untrained: eer {:.4} auc {:.4}", before.eer, before.auc);

    let t1 = Instant::now();
    let (weights, _) = train_with(&catalog, &model_config, &config, None, &mut |e| {
        println!("epoch {:>3}  loss {:.5}  active {:.3}  ({:.1}s)", e.epoch, e.mean_loss, e.active_fraction, e.seconds)
    })?;
    println!("trained in {:.1?}", t1.elapsed());

    let model = SiameseModel::new(weights)?;
    let after = CurveReport::new(&score_pairs(&catalog, &pairs, &model)?, DEFAULT_BINS)?;
    println!(
        "trained: eer {:.4} (threshold {:.4}) auc {:.4} aupr {:.4} over {} pairs",
        after.eer,
        after.eer_threshold,
        after.auc,
        after.aupr,
        pairs.len()
    );
    println!("total {:.1?}", t0.elapsed());
    Ok(())
}
