//! Triplet sampling, the triplet margin loss, Adam and the training loop.
//!
//! Each step embeds the anchor, positive and negative of every triplet with
//! the same weights, averages the loss over the batch and applies one Adam
//! update. Triplets of a batch are processed in parallel but their gradients
//! are summed in a fixed order, so a run is reproducible for a given seed
//! whatever the thread count.

mod adam;
mod loss;
mod sampling;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamState};
pub use loss::{triplet_loss, triplet_loss_on_tape};
pub use sampling::{eligible_anchors, sample_triplets, Triplet};
pub use train::{train, train_with, EpochStats, FeatureCache, TrainReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub margin: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Probability that a triplet's negative is a forgery of the anchor's
    /// writer rather than another writer's genuine signature.
    pub negative_mix: f64,
    /// Defaults to one triplet per eligible anchor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0005,
            batch_size: 32,
            epochs: 100,
            margin: 0.5,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            negative_mix: 0.5,
            triplets_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.negative_mix) {
            return bad(format!("negative_mix must lie in [0, 1], got {}", self.negative_mix));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be non-negative, got {}", self.margin));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad(format!("Adam betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}
