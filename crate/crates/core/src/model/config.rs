use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scattering::ScatteringConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding of `(k − 1) / 2` so stride-1 convolutions keep the extent.
    Same,
    Valid,
}

/// Spatial reduction after a conv block: a 2×2 stride-2 max-pool, or none.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    None,
    /// Drop a trailing odd row/column.
    Floor,
    /// Keep a trailing odd row/column as a partial window.
    Ceil,
}

impl Pooling {
    fn reduce(self, extent: usize) -> usize {
        match self {
            Pooling::None => extent,
            Pooling::Floor => extent / 2,
            Pooling::Ceil => extent.div_ceil(2),
        }
    }
}

/// Architecture of one Siamese branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub scattering: ScatteringConfig,
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub padding: Padding,
    /// One entry per conv block.
    pub pool_after_block: Vec<Pooling>,
    pub embedding_dim: usize,
    pub normalize_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            scattering: ScatteringConfig::default(),
            conv_filters: vec![16, 16, 32, 32],
            kernel: 3,
            padding: Padding::Same,
            pool_after_block: vec![Pooling::Ceil, Pooling::Ceil, Pooling::Floor, Pooling::None],
            embedding_dim: 128,
            normalize_embeddings: true,
        }
    }
}

/// Shapes of one conv block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvBlockPlan {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Extent entering the block.
    pub input: (usize, usize),
    /// Extent after the convolution, before pooling.
    pub conv_output: (usize, usize),
    /// Extent leaving the block.
    pub output: (usize, usize),
    pub pooling: Pooling,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerPlan {
    pub blocks: Vec<ConvBlockPlan>,
    pub flattened: usize,
    pub embedding_dim: usize,
}

/// Row of a per-layer parameter table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCount {
    pub name: String,
    pub description: String,
    pub weights: usize,
    pub biases: usize,
}

impl LayerCount {
    pub fn total(&self) -> usize {
        self.weights + self.biases
    }
}

impl ModelConfig {
    pub fn padding_pixels(&self) -> usize {
        match self.padding {
            Padding::Same => (self.kernel - 1) / 2,
            Padding::Valid => 0,
        }
    }

    /// Walks the architecture and checks that every stage has a valid shape.
    pub fn plan(&self) -> Result<LayerPlan> {
        self.scattering.validate()?;
        if self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
            return Err(Error::Config("conv_filters must be non-empty and positive".into()));
        }
        if self.pool_after_block.len() != self.conv_filters.len() {
            return Err(Error::Config(format!(
                "pool_after_block has {} entries for {} conv blocks",
                self.pool_after_block.len(),
                self.conv_filters.len()
            )));
        }
        if self.kernel == 0 || (self.padding == Padding::Same && self.kernel.is_multiple_of(2)) {
            return Err(Error::Config(format!(
                "kernel {} is not usable with {:?} padding",
                self.kernel, self.padding
            )));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        let layout = self.scattering.output_layout();
        let pad = self.padding_pixels();
        let mut channels = layout.channels;
        let (mut h, mut w) = (layout.height, layout.width);
        let mut blocks = Vec::with_capacity(self.conv_filters.len());
        for (i, (&filters, &pooling)) in self.conv_filters.iter().zip(&self.pool_after_block).enumerate() {
            if h + 2 * pad < self.kernel || w + 2 * pad < self.kernel {
                return Err(Error::Config(format!(
                    "conv block {} receives a {h}×{w} map, too small for a {k}×{k} kernel",
                    i + 1,
                    k = self.kernel
                )));
            }
            let conv = (h + 2 * pad - self.kernel + 1, w + 2 * pad - self.kernel + 1);
            if pooling != Pooling::None && (conv.0 < 2 || conv.1 < 2) {
                return Err(Error::Config(format!("conv block {} output too small to pool", i + 1)));
            }
            let out = (pooling.reduce(conv.0), pooling.reduce(conv.1));
            blocks.push(ConvBlockPlan {
                in_channels: channels,
                out_channels: filters,
                input: (h, w),
                conv_output: conv,
                output: out,
                pooling,
            });
            channels = filters;
            (h, w) = out;
        }
        Ok(LayerPlan {
            blocks,
            flattened: channels * h * w,
            embedding_dim: self.embedding_dim,
        })
    }

    /// Parameter names and shapes in storage order.
    pub fn parameter_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let plan = self.plan()?;
        let k = self.kernel;
        let mut shapes = Vec::new();
        for (i, b) in plan.blocks.iter().enumerate() {
            shapes.push((format!("conv{}.weight", i + 1), vec![b.out_channels, b.in_channels, k, k]));
            shapes.push((format!("conv{}.bias", i + 1), vec![b.out_channels]));
        }
        shapes.push(("embed.weight".into(), vec![plan.embedding_dim, plan.flattened]));
        shapes.push(("embed.bias".into(), vec![plan.embedding_dim]));
        Ok(shapes)
    }

    /// Per-layer parameter counts derived from the layer plan.
    pub fn layer_counts(&self) -> Result<Vec<LayerCount>> {
        let plan = self.plan()?;
        let k = self.kernel;
        let mut rows: Vec<LayerCount> = plan
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| LayerCount {
                name: format!("conv{}", i + 1),
                description: format!(
                    "{}→{} ch, {k}×{k}, {}×{} → {}×{} ({:?} pool)",
                    b.in_channels, b.out_channels, b.input.0, b.input.1, b.output.0, b.output.1, b.pooling
                ),
                weights: k * k * b.in_channels * b.out_channels,
                biases: b.out_channels,
            })
            .collect();
        rows.push(LayerCount {
            name: "embed".into(),
            description: format!("dense {} → {}", plan.flattened, plan.embedding_dim),
            weights: plan.flattened * plan.embedding_dim,
            biases: plan.embedding_dim,
        });
        Ok(rows)
    }
}
