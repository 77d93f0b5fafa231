//! The compact BERT-style classifier: embeddings, a stack of transformer
//! blocks, a tanh pooler over the [CLS] state, and a single-logit sigmoid
//! head.

mod backward;
mod forward;
pub mod serialize;

pub use backward::backward;
pub use forward::{classify, forward, sigmoid, ForwardCache, ForwardMode, ForwardOutput};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::kernels::KernelError;
use crate::rng::{stream_rng, truncated_normal, STREAM_INIT};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Variance floor inside every layer norm.
pub const LAYER_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("hidden size {hidden} is not divisible by {heads} heads")]
    HiddenNotDivisibleByHeads { hidden: usize, heads: usize },
    #[error("max_seq {max_seq} exceeds max_positions {max_positions}")]
    MaxSeqExceedsPositions { max_seq: usize, max_positions: usize },
    #[error("model dimension {name} must be at least 1")]
    ZeroDim { name: &'static str },
    #[error("dropout rate {rate} outside [0, 1) for {name}")]
    BadDropout { name: &'static str, rate: f64 },
    #[error("forward pass needs a non-empty batch")]
    EmptyBatch,
    #[error("example {index} has an all-zero attention mask")]
    AllMaskedExample { index: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub max_seq: usize,
    /// Dropout on the pooled vector right before the classifier.
    pub head_dropout: f64,
    /// Dropout inside the encoder (embeddings, attention probabilities,
    /// and both sublayer outputs).
    pub encoder_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden: 512,
            heads: 8,
            ffn_dim: 2048,
            vocab_size: 30522,
            max_positions: 512,
            max_seq: 128,
            head_dropout: 0.3,
            encoder_dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("num_layers", self.num_layers),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
            ("max_seq", self.max_seq),
        ] {
            if value == 0 {
                return Err(ModelError::ZeroDim { name });
            }
        }
        if self.hidden % self.heads != 0 {
            return Err(ModelError::HiddenNotDivisibleByHeads {
                hidden: self.hidden,
                heads: self.heads,
            });
        }
        if self.max_seq > self.max_positions {
            return Err(ModelError::MaxSeqExceedsPositions {
                max_seq: self.max_seq,
                max_positions: self.max_positions,
            });
        }
        for (name, rate) in [
            ("head_dropout", self.head_dropout),
            ("encoder_dropout", self.encoder_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(ModelError::BadDropout { name, rate });
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

/// Weights of one transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub attn_query_weight: Tensor<T>,
    pub attn_query_bias: Tensor<T>,
    pub attn_key_weight: Tensor<T>,
    pub attn_key_bias: Tensor<T>,
    pub attn_value_weight: Tensor<T>,
    pub attn_value_bias: Tensor<T>,
    pub attn_output_weight: Tensor<T>,
    pub attn_output_bias: Tensor<T>,
    pub attn_norm_gamma: Tensor<T>,
    pub attn_norm_beta: Tensor<T>,
    pub ffn_intermediate_weight: Tensor<T>,
    pub ffn_intermediate_bias: Tensor<T>,
    pub ffn_output_weight: Tensor<T>,
    pub ffn_output_bias: Tensor<T>,
    pub ffn_norm_gamma: Tensor<T>,
    pub ffn_norm_beta: Tensor<T>,
}

/// All trainable tensors. Dense layers compute out = x·W + b, so weight
/// shapes are [in, out].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    pub token_embedding: Tensor<T>,
    pub position_embedding: Tensor<T>,
    pub segment_embedding: Tensor<T>,
    pub embedding_norm_gamma: Tensor<T>,
    pub embedding_norm_beta: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    pub pooler_weight: Tensor<T>,
    pub pooler_bias: Tensor<T>,
    pub classifier_weight: Tensor<T>,
    pub classifier_bias: Tensor<T>,
}

impl<T: Scalar> ParameterSet<T> {
    /// All-zero parameters with the shapes the config dictates. Also the
    /// template for gradients and optimizer moments.
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.hidden;
        let layer = || LayerParams {
            attn_query_weight: Tensor::zeros(&[h, h]),
            attn_query_bias: Tensor::zeros(&[h]),
            attn_key_weight: Tensor::zeros(&[h, h]),
            attn_key_bias: Tensor::zeros(&[h]),
            attn_value_weight: Tensor::zeros(&[h, h]),
            attn_value_bias: Tensor::zeros(&[h]),
            attn_output_weight: Tensor::zeros(&[h, h]),
            attn_output_bias: Tensor::zeros(&[h]),
            attn_norm_gamma: Tensor::zeros(&[h]),
            attn_norm_beta: Tensor::zeros(&[h]),
            ffn_intermediate_weight: Tensor::zeros(&[h, config.ffn_dim]),
            ffn_intermediate_bias: Tensor::zeros(&[config.ffn_dim]),
            ffn_output_weight: Tensor::zeros(&[config.ffn_dim, h]),
            ffn_output_bias: Tensor::zeros(&[h]),
            ffn_norm_gamma: Tensor::zeros(&[h]),
            ffn_norm_beta: Tensor::zeros(&[h]),
        };
        Self {
            token_embedding: Tensor::zeros(&[config.vocab_size, h]),
            position_embedding: Tensor::zeros(&[config.max_positions, h]),
            segment_embedding: Tensor::zeros(&[2, h]),
            embedding_norm_gamma: Tensor::zeros(&[h]),
            embedding_norm_beta: Tensor::zeros(&[h]),
            layers: (0..config.num_layers).map(|_| layer()).collect(),
            pooler_weight: Tensor::zeros(&[h, h]),
            pooler_bias: Tensor::zeros(&[h]),
            classifier_weight: Tensor::zeros(&[h, 1]),
            classifier_bias: Tensor::zeros(&[1]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> ParameterSet<U> {
        ParameterSet {
            token_embedding: self.token_embedding.map(f),
            position_embedding: self.position_embedding.map(f),
            segment_embedding: self.segment_embedding.map(f),
            embedding_norm_gamma: self.embedding_norm_gamma.map(f),
            embedding_norm_beta: self.embedding_norm_beta.map(f),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    attn_query_weight: l.attn_query_weight.map(f),
                    attn_query_bias: l.attn_query_bias.map(f),
                    attn_key_weight: l.attn_key_weight.map(f),
                    attn_key_bias: l.attn_key_bias.map(f),
                    attn_value_weight: l.attn_value_weight.map(f),
                    attn_value_bias: l.attn_value_bias.map(f),
                    attn_output_weight: l.attn_output_weight.map(f),
                    attn_output_bias: l.attn_output_bias.map(f),
                    attn_norm_gamma: l.attn_norm_gamma.map(f),
                    attn_norm_beta: l.attn_norm_beta.map(f),
                    ffn_intermediate_weight: l.ffn_intermediate_weight.map(f),
                    ffn_intermediate_bias: l.ffn_intermediate_bias.map(f),
                    ffn_output_weight: l.ffn_output_weight.map(f),
                    ffn_output_bias: l.ffn_output_bias.map(f),
                    ffn_norm_gamma: l.ffn_norm_gamma.map(f),
                    ffn_norm_beta: l.ffn_norm_beta.map(f),
                })
                .collect(),
            pooler_weight: self.pooler_weight.map(f),
            pooler_bias: self.pooler_bias.map(f),
            classifier_weight: self.classifier_weight.map(f),
            classifier_bias: self.classifier_bias.map(f),
        }
    }

    /// Canonical (name, tensor) listing. The order is fixed and shared by
    /// initialization, the optimizer, and the weight file.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = alloc::vec![
            ("embeddings.token".into(), &self.token_embedding),
            ("embeddings.position".into(), &self.position_embedding),
            ("embeddings.segment".into(), &self.segment_embedding),
            ("embeddings.norm.gamma".into(), &self.embedding_norm_gamma),
            ("embeddings.norm.beta".into(), &self.embedding_norm_beta),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.attention.query.weight"), &l.attn_query_weight));
            out.push((format!("layer{i}.attention.query.bias"), &l.attn_query_bias));
            out.push((format!("layer{i}.attention.key.weight"), &l.attn_key_weight));
            out.push((format!("layer{i}.attention.key.bias"), &l.attn_key_bias));
            out.push((format!("layer{i}.attention.value.weight"), &l.attn_value_weight));
            out.push((format!("layer{i}.attention.value.bias"), &l.attn_value_bias));
            out.push((format!("layer{i}.attention.output.weight"), &l.attn_output_weight));
            out.push((format!("layer{i}.attention.output.bias"), &l.attn_output_bias));
            out.push((format!("layer{i}.attention.norm.gamma"), &l.attn_norm_gamma));
            out.push((format!("layer{i}.attention.norm.beta"), &l.attn_norm_beta));
            out.push((format!("layer{i}.ffn.intermediate.weight"), &l.ffn_intermediate_weight));
            out.push((format!("layer{i}.ffn.intermediate.bias"), &l.ffn_intermediate_bias));
            out.push((format!("layer{i}.ffn.output.weight"), &l.ffn_output_weight));
            out.push((format!("layer{i}.ffn.output.bias"), &l.ffn_output_bias));
            out.push((format!("layer{i}.ffn.norm.gamma"), &l.ffn_norm_gamma));
            out.push((format!("layer{i}.ffn.norm.beta"), &l.ffn_norm_beta));
        }
        out.push(("pooler.weight".into(), &self.pooler_weight));
        out.push(("pooler.bias".into(), &self.pooler_bias));
        out.push(("classifier.weight".into(), &self.classifier_weight));
        out.push(("classifier.bias".into(), &self.classifier_bias));
        out
    }

    /// Mutable variant of [`named`](Self::named), same order.
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<(String, &mut Tensor<T>)> = alloc::vec![
            ("embeddings.token".into(), &mut self.token_embedding),
            ("embeddings.position".into(), &mut self.position_embedding),
            ("embeddings.segment".into(), &mut self.segment_embedding),
            ("embeddings.norm.gamma".into(), &mut self.embedding_norm_gamma),
            ("embeddings.norm.beta".into(), &mut self.embedding_norm_beta),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{i}.attention.query.weight"), &mut l.attn_query_weight));
            out.push((format!("layer{i}.attention.query.bias"), &mut l.attn_query_bias));
            out.push((format!("layer{i}.attention.key.weight"), &mut l.attn_key_weight));
            out.push((format!("layer{i}.attention.key.bias"), &mut l.attn_key_bias));
            out.push((format!("layer{i}.attention.value.weight"), &mut l.attn_value_weight));
            out.push((format!("layer{i}.attention.value.bias"), &mut l.attn_value_bias));
            out.push((format!("layer{i}.attention.output.weight"), &mut l.attn_output_weight));
            out.push((format!("layer{i}.attention.output.bias"), &mut l.attn_output_bias));
            out.push((format!("layer{i}.attention.norm.gamma"), &mut l.attn_norm_gamma));
            out.push((format!("layer{i}.attention.norm.beta"), &mut l.attn_norm_beta));
            out.push((format!("layer{i}.ffn.intermediate.weight"), &mut l.ffn_intermediate_weight));
            out.push((format!("layer{i}.ffn.intermediate.bias"), &mut l.ffn_intermediate_bias));
            out.push((format!("layer{i}.ffn.output.weight"), &mut l.ffn_output_weight));
            out.push((format!("layer{i}.ffn.output.bias"), &mut l.ffn_output_bias));
            out.push((format!("layer{i}.ffn.norm.gamma"), &mut l.ffn_norm_gamma));
            out.push((format!("layer{i}.ffn.norm.beta"), &mut l.ffn_norm_beta));
        }
        out.push(("pooler.weight".into(), &mut self.pooler_weight));
        out.push(("pooler.bias".into(), &mut self.pooler_bias));
        out.push(("classifier.weight".into(), &mut self.classifier_weight));
        out.push(("classifier.bias".into(), &mut self.classifier_bias));
        out
    }

    /// Sums another gradient-shaped set into this one.
    pub fn accumulate(&mut self, other: &ParameterSet<T>) {
        for ((_, mine), (_, theirs)) in self.named_mut().into_iter().zip(other.named()) {
            mine.add_assign(theirs);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }
}

/// Whether AdamW's decoupled weight decay applies to a parameter: biases
/// and layer-norm parameters are excluded, following BERT convention.
pub fn decays(name: &str) -> bool {
    !(name.ends_with(".bias") || name.contains(".norm."))
}

/// Whether a parameter belongs to the classification head (pooler and
/// classifier); everything else is "encoder" for the freeze flag.
pub fn is_head_param(name: &str) -> bool {
    name.starts_with("pooler.") || name.starts_with("classifier.")
}

/// Fresh parameters: weight matrices and embedding tables are drawn from
/// a truncated normal (mean 0, std 0.02, cut at two standard deviations),
/// biases and norm betas start at 0, norm gammas at 1. Deterministic per
/// seed.
pub fn init_params<T: Scalar>(config: &ModelConfig, seed: u64) -> ParameterSet<T> {
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut params = ParameterSet::zeros(config);
    for (name, tensor) in params.named_mut() {
        if name.ends_with(".gamma") {
            tensor.data_mut().fill(T::one());
        } else if name.ends_with(".bias") || name.ends_with(".beta") {
            // Already zero.
        } else {
            for value in tensor.data_mut() {
                *value = T::from_f64(truncated_normal(&mut rng, 0.02));
            }
        }
    }
    params
}
