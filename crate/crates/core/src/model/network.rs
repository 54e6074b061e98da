use super::config::{ModelConfig, Pooling};
use super::weights::ModelWeights;
use crate::error::{Error, Result};
use crate::scattering::{scatter, FilterBank};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Guard for normalizing an all-zero embedding.
pub const NORM_EPSILON: f64 = 1e-12;

/// One branch output.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub values: Vec<f32>,
    pub source_id: Option<String>,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Self {
        Self {
            values,
            source_id: None,
        }
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Records every parameter on `tape`, in storage order.
pub fn bind_parameters<T: Scalar>(tape: &mut Tape<T>, weights: &ModelWeights, track_grad: bool) -> Vec<Var> {
    weights
        .params()
        .iter()
        .map(|p| {
            let mut t = p.tensor.cast::<T>();
            t.set_requires_grad(track_grad);
            tape.leaf(t)
        })
        .collect()
}

/// Conv blocks → flatten → dense → optional L2 normalization.
///
/// `params` must come from [`bind_parameters`] for weights built from `config`.
pub fn forward<T: Scalar>(tape: &mut Tape<T>, config: &ModelConfig, params: &[Var], features: Var) -> Result<Var> {
    let blocks = config.conv_filters.len();
    if params.len() != 2 * blocks + 2 {
        return Err(Error::Config(format!(
            "{} parameter handles for a {blocks}-block model",
            params.len()
        )));
    }
    let pad = config.padding_pixels();
    let mut x = features;
    for (i, pooling) in config.pool_after_block.iter().enumerate() {
        x = tape.conv2d(x, params[2 * i], params[2 * i + 1], 1, pad)?;
        x = tape.relu(x)?;
        x = match pooling {
            Pooling::None => x,
            Pooling::Floor => tape.maxpool2d(x, 2, 2, false)?,
            Pooling::Ceil => tape.maxpool2d(x, 2, 2, true)?,
        };
    }
    let flat = tape.flatten(x)?;
    let out = tape.dense(flat, params[2 * blocks], params[2 * blocks + 1])?;
    if config.normalize_embeddings {
        tape.l2_normalize(out, T::from_f64_lossy(NORM_EPSILON))
    } else {
        Ok(out)
    }
}

/// Scattering coefficients of a grayscale image, as model input.
pub fn scattering_features(image: &Tensor<f32>, bank: &FilterBank) -> Result<Tensor<f32>> {
    let cfg = bank.config();
    if image.shape() != [cfg.height, cfg.width] {
        return Err(Error::Shape(format!(
            "image of shape {:?} does not match the expected {}×{}",
            image.shape(),
            cfg.height,
            cfg.width
        )));
    }
    if image.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input image pixels".into()));
    }
    Ok(scatter(image, bank, 2)?.coefficients.cast())
}

/// Embeds precomputed scattering features.
pub fn embed_features(features: &Tensor<f32>, weights: &ModelWeights) -> Result<Embedding> {
    let mut tape = Tape::<f32>::new();
    let params = bind_parameters(&mut tape, weights, false);
    let x = tape.leaf(features.clone());
    let out = forward(&mut tape, weights.config(), &params, x)?;
    Ok(Embedding::new(tape.value(out).data().to_vec()))
}

/// Embeds a `H × W` grayscale image with pixels in `[0, 1]`.
pub fn embed(image: &Tensor<f32>, weights: &ModelWeights, bank: &FilterBank) -> Result<Embedding> {
    if bank.config() != &weights.config().scattering {
        return Err(Error::Config(
            "filter bank geometry differs from the model's scattering config".into(),
        ));
    }
    embed_features(&scattering_features(image, bank)?, weights)
}

/// Raw Euclidean distance between two embeddings.
pub fn euclidean(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "embeddings of length {} and {} cannot be compared",
            a.len(),
            b.len()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Dissimilarity score in `[0, 1]`: half the Euclidean distance, which spans
/// `[0, 2]` for unit-norm embeddings. Lower means more similar. Unnormalized
/// embeddings are clamped at 1.
pub fn distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    Ok((euclidean(a, b)? / 2.0).min(1.0))
}

/// A filter bank and one set of branch weights: the whole Siamese network.
#[derive(Clone, Debug)]
pub struct SiameseModel {
    weights: ModelWeights,
    bank: FilterBank,
}

impl SiameseModel {
    pub fn new(weights: ModelWeights) -> Result<Self> {
        let bank = FilterBank::new(&weights.config().scattering)?;
        Ok(Self { weights, bank })
    }

    pub fn with_bank(weights: ModelWeights, bank: FilterBank) -> Result<Self> {
        if bank.config() != &weights.config().scattering {
            return Err(Error::Config(
                "filter bank geometry differs from the model's scattering config".into(),
            ));
        }
        Ok(Self { weights, bank })
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn embed(&self, image: &Tensor<f32>) -> Result<Embedding> {
        embed(image, &self.weights, &self.bank)
    }

    /// Embeds both images through the shared branch and returns their score.
    pub fn score(&self, first: &Tensor<f32>, second: &Tensor<f32>) -> Result<f64> {
        distance(&self.embed(first)?, &self.embed(second)?)
    }
}
