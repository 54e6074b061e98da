use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::loss::triplet_loss_on_tape;
use super::sampling::{eligible_anchors, sample_triplets, Triplet};
use super::TrainConfig;
use crate::dataset::{SignatureCatalog, Split};
use crate::error::{Error, Result};
use crate::model::{bind_parameters, forward, init_model, save_weights, scattering_features, ModelConfig, ModelWeights};
use crate::scattering::FilterBank;
use crate::tensor::{GradMode, Tape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of triplets with a positive loss.
    pub active_fraction: f64,
    pub triplets: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub wall_time: Duration,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }

    /// `epoch<TAB>mean_loss<TAB>active_fraction`, one line per epoch.
    pub fn to_log(&self) -> String {
        let mut out = String::from("epoch\tmean_loss\tactive_fraction\n");
        for e in &self.epochs {
            writeln!(out, "{}\t{:.6}\t{:.4}", e.epoch, e.mean_loss, e.active_fraction).expect("string write");
        }
        out
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_log()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Scattering features of every record a training triplet may reference.
pub struct FeatureCache {
    features: Vec<Option<Tensor<f32>>>,
}

impl FeatureCache {
    pub fn build(catalog: &SignatureCatalog, split: Split, bank: &FilterBank) -> Result<Self> {
        let mut wanted = vec![false; catalog.len()];
        for w in catalog.writers_in(split) {
            let s = &catalog.writers()[w];
            for &i in s.genuine.iter().chain(&s.forged) {
                wanted[i] = true;
            }
        }
        let features = wanted
            .into_par_iter()
            .enumerate()
            .map(|(i, want)| {
                want.then(|| scattering_features(&catalog.load(i)?.pixels, bank))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { features })
    }

    pub fn get(&self, index: usize) -> Result<&Tensor<f32>> {
        self.features
            .get(index)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::Training(format!("no cached features for record {index}")))
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Loss and parameter gradients of one triplet. Inactive triplets skip the
/// backward pass and report no gradient.
fn triplet_gradients(
    weights: &ModelWeights,
    inputs: [&Tensor<f32>; 3],
    margin: f64,
) -> Result<(f64, Option<Vec<Vec<f32>>>)> {
    let mut tape = Tape::<f32>::new();
    let params = bind_parameters(&mut tape, weights, true);
    let mut emb = [None; 3];
    for (slot, x) in emb.iter_mut().zip(inputs) {
        let leaf = tape.leaf(x.clone());
        *slot = Some(forward(&mut tape, weights.config(), &params, leaf)?);
    }
    let [a, p, n] = emb.map(|e| e.expect("filled"));
    let loss = triplet_loss_on_tape(&mut tape, a, p, n, margin)?;
    let value = tape.value(loss).item()? as f64;
    if value <= 0.0 {
        return Ok((value, None));
    }
    tape.backward(loss, GradMode::Reset)?;
    let grads = params
        .iter()
        .zip(weights.params())
        .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.tensor.len()], <[f32]>::to_vec))
        .collect();
    Ok((value, Some(grads)))
}

/// Runs one optimizer step over `batch`; returns per-triplet losses.
fn train_step(
    weights: &mut ModelWeights,
    state: &mut AdamState,
    cache: &FeatureCache,
    batch: &[Triplet],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let results = batch
        .par_iter()
        .map(|t| {
            let inputs = [cache.get(t.anchor)?, cache.get(t.positive)?, cache.get(t.negative)?];
            triplet_gradients(weights, inputs, config.margin)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total: Vec<Vec<f32>> = weights.params().iter().map(|p| vec![0.0; p.tensor.len()]).collect();
    let scale = 1.0 / batch.len() as f32;
    let mut losses = Vec::with_capacity(batch.len());
    // fixed order keeps the sum independent of the thread count
    for (loss, grads) in results {
        losses.push(loss);
        if let Some(grads) = grads {
            for (acc, g) in total.iter_mut().zip(&grads) {
                for (a, &v) in acc.iter_mut().zip(g) {
                    *a += v * scale;
                }
            }
        }
    }
    adam_step(weights, &total, state, config)?;
    Ok(losses)
}

/// Trains from a fresh initialization seeded by `config.seed`.
pub fn train(catalog: &SignatureCatalog, model_config: &ModelConfig, config: &TrainConfig) -> Result<(ModelWeights, TrainReport)> {
    train_with(catalog, model_config, config, None, &mut |_| {})
}

/// [`train`] that also saves the final weights to `checkpoint` and reports
/// each finished epoch to `on_epoch`.
pub fn train_with(
    catalog: &SignatureCatalog,
    model_config: &ModelConfig,
    config: &TrainConfig,
    checkpoint: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<(ModelWeights, TrainReport)> {
    let started = Instant::now();
    config.validate()?;
    model_config.plan()?;
    let mut weights = init_model(model_config, config.seed)?;
    let mut report = TrainReport::default();
    let anchors = eligible_anchors(catalog, Split::Train).len();
    if anchors == 0 {
        return Err(Error::Training("the training split has no writer with two genuine signatures".into()));
    }
    let per_epoch = config.triplets_per_epoch.unwrap_or(anchors);

    if config.epochs > 0 && per_epoch > 0 {
        let bank = FilterBank::new(&model_config.scattering)?;
        let cache = FeatureCache::build(catalog, Split::Train, &bank)?;
        let mut state = AdamState::new(&weights);
        for epoch in 1..=config.epochs {
            let t0 = Instant::now();
            let triplets = sample_triplets(catalog, Split::Train, per_epoch, config.negative_mix, epoch_seed(config.seed, epoch))?;
            let mut losses = Vec::with_capacity(triplets.len());
            for (step, batch) in triplets.chunks(config.batch_size).enumerate() {
                let batch_losses = train_step(&mut weights, &mut state, &cache, batch, config).map_err(|e| match e {
                    Error::NonFinite(what) => Error::Training(format!(
                        "non-finite value from {what} at epoch {epoch}, step {}",
                        step + 1
                    )),
                    other => other,
                })?;
                losses.extend(batch_losses);
            }
            let stats = EpochStats {
                epoch,
                mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
                active_fraction: losses.iter().filter(|&&l| l > 0.0).count() as f64 / losses.len() as f64,
                triplets: losses.len(),
                seconds: t0.elapsed().as_secs_f64(),
            };
            if !stats.mean_loss.is_finite() {
                return Err(Error::Training(format!("non-finite mean loss at epoch {epoch}")));
            }
            log::info!("epoch {epoch}: loss {:.5}, active {:.3}", stats.mean_loss, stats.active_fraction);
            on_epoch(&stats);
            report.epochs.push(stats);
        }
    }

    if let Some(path) = checkpoint {
        save_weights(&weights, path)?;
        report.checkpoint = Some(path.to_path_buf());
    }
    report.wall_time = started.elapsed();
    Ok((weights, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize_dataset;
    use crate::model::{Padding, Pooling};
    use crate::scattering::ScatteringConfig;

    fn small_model() -> ModelConfig {
        ModelConfig {
            scattering: ScatteringConfig::default(),
            conv_filters: vec![4, 4],
            kernel: 3,
            padding: Padding::Same,
            pool_after_block: vec![Pooling::Ceil, Pooling::Ceil],
            embedding_dim: 16,
            normalize_embeddings: true,
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let c = synthesize_dataset(2, 3, 1, 0).unwrap();
        let c = crate::dataset::writer_disjoint_split(c, 1, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            seed: 11,
            ..TrainConfig::default()
        };
        let (w, report) = train(&c, &small_model(), &cfg).unwrap();
        assert_eq!(w, init_model(&small_model(), 11).unwrap());
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let c = synthesize_dataset(2, 3, 1, 0).unwrap();
        assert!(train(&c, &small_model(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn perfect_embedding_gives_no_update() {
        let c = synthesize_dataset(2, 2, 1, 1).unwrap();
        let bank = FilterBank::new(&ScatteringConfig::default()).unwrap();
        let c = crate::dataset::writer_disjoint_split(c, 1, 0).unwrap();
        let cache = FeatureCache::build(&c, Split::Train, &bank).unwrap();
        let w = &c.writers()[c.writers_in(Split::Train)[0]];
        let triplet = Triplet {
            anchor: w.genuine[0],
            positive: w.genuine[0],
            negative: w.forged[0],
        };
        let cfg = TrainConfig {
            margin: 0.0,
            ..TrainConfig::default()
        };
        let mut weights = init_model(&small_model(), 3).unwrap();
        let before = weights.clone();
        let mut state = AdamState::new(&weights);
        let losses = train_step(&mut weights, &mut state, &cache, &[triplet], &cfg).unwrap();
        assert_eq!(losses, vec![0.0]);
        assert_eq!(weights, before);
    }

    #[test]
    fn log_has_one_line_per_epoch() {
        let report = TrainReport {
            epochs: vec![
                EpochStats {
                    epoch: 1,
                    mean_loss: 0.5,
                    active_fraction: 1.0,
                    triplets: 4,
                    seconds: 0.1,
                },
                EpochStats {
                    epoch: 2,
                    mean_loss: 0.25,
                    active_fraction: 0.5,
                    triplets: 4,
                    seconds: 0.1,
                },
            ],
            ..TrainReport::default()
        };
        let log = report.to_log();
        assert_eq!(log.lines().count(), 3);
        assert_eq!(log.lines().nth(2).unwrap(), "2\t0.250000\t0.5000");
    }
}
