use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::ModelWeights;

/// First and second moments per parameter, kept in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(weights: &ModelWeights) -> Self {
        let zeros: Vec<Vec<f64>> = weights.params().iter().map(|p| vec![0.0; p.tensor.len()]).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. `gradients` are in parameter order.
pub fn adam_step(weights: &mut ModelWeights, gradients: &[Vec<f32>], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    let params = weights.params_mut();
    if gradients.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} gradients and {} moment buffers for {} parameters",
            gradients.len(),
            state.m.len(),
            params.len()
        )));
    }
    for (p, g) in params.iter().zip(gradients) {
        if g.len() != p.tensor.len() {
            return Err(Error::Shape(format!(
                "gradient for `{}` has {} values, parameter has {}",
                p.name,
                g.len(),
                p.tensor.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
    for ((p, g), (m, v)) in params.iter_mut().zip(gradients).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for (i, w) in p.tensor.data_mut().iter_mut().enumerate() {
            let g = g[i] as f64;
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let update = config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + config.epsilon);
            *w = (*w as f64 - update) as f32;
        }
    }
    Ok(())
}
