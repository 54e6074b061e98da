//! The shared-weight Siamese branch: scattering features → conv blocks →
//! dense embedding, plus the distance head and the weights file format.

mod config;
mod io;
mod network;
mod weights;

pub use config::{ConvBlockPlan, LayerCount, LayerPlan, ModelConfig, Padding, Pooling};
pub use io::{deserialize, load_weights, save_weights, serialize, MAGIC};
pub use network::{
    bind_parameters, distance, embed, embed_features, euclidean, forward, scattering_features, Embedding,
    SiameseModel, NORM_EPSILON,
};
pub use weights::{count_parameters, init_model, ModelWeights, Parameter, FORMAT_VERSION};
