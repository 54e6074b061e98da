use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{LayerCount, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Current weights container version.
pub const FORMAT_VERSION: u32 = 1;

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor<f32>,
}

/// Every trainable parameter of one Siamese branch.
///
/// Both branches of the network embed through the same instance; there is no
/// second copy to keep in sync.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    config: ModelConfig,
    params: Vec<Parameter>,
    version: u32,
}

/// Total element count over a parameter list.
pub fn count_parameters(params: &[Parameter]) -> usize {
    params.iter().map(|p| p.tensor.len()).sum()
}

/// Fan-in scaled uniform initialization; biases start at zero.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for (name, shape) in config.parameter_shapes()? {
        let tensor = if name.ends_with(".bias") {
            Tensor::zeros(&shape)?
        } else {
            let fan_in: usize = shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt() as f32;
            Tensor::from_fn(&shape, |_| rng.random_range(-bound..bound))?
        };
        params.push(Parameter {
            name,
            tensor: tensor.with_grad(),
        });
    }
    Ok(ModelWeights {
        config: config.clone(),
        params,
        version: FORMAT_VERSION,
    })
}

impl ModelWeights {
    /// Assembles weights from explicit tensors, validating names and shapes.
    pub fn from_parameters(config: ModelConfig, params: Vec<Parameter>) -> Result<Self> {
        let expected = config.parameter_shapes()?;
        if expected.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&params) {
            if &p.name != name || p.tensor.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "parameter `{}` {:?} does not match expected `{name}` {shape:?}",
                    p.name,
                    p.tensor.shape()
                )));
            }
        }
        Ok(Self {
            config,
            params: params
                .into_iter()
                .map(|mut p| {
                    p.tensor.set_requires_grad(true);
                    p
                })
                .collect(),
            version: FORMAT_VERSION,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn count_parameters(&self) -> usize {
        count_parameters(&self.params)
    }

    pub fn layer_counts(&self) -> Result<Vec<LayerCount>> {
        self.config.layer_counts()
    }
}
