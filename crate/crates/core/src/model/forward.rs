//! Forward pass and inference-time classification.
//!
//! Each example is processed at its true length: the mask of an
//! `EncodedInput` is a contiguous prefix of ones, and positions past it
//! can never influence any unmasked position (padded keys carry exactly
//! zero attention weight), so slicing them off is arithmetically
//! identical to running full-width with an additive mask. It also makes
//! padding invariance exact rather than approximate.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;

use crate::kernels::{dropout, embedding_lookup, gelu, layer_norm, masked_softmax, matmul};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tokenizer::EncodedInput;

use super::{ModelConfig, ModelError, ParameterSet, LAYER_NORM_EPS};

/// Whether dropout is live (training) or disabled (inference).
pub enum ForwardMode<'a> {
    Inference,
    Train(&'a mut ChaCha12Rng),
}

/// Per-layer activations a backward pass needs.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub x_in: Tensor<T>,
    pub q: Tensor<T>,
    pub k: Tensor<T>,
    pub v: Tensor<T>,
    /// Post-softmax attention weights per head, before dropout.
    pub head_probs: Vec<Tensor<T>>,
    pub head_prob_masks: Vec<Option<Tensor<T>>>,
    /// Concatenated per-head contexts (after probability dropout).
    pub ctx: Tensor<T>,
    pub attn_out_mask: Option<Tensor<T>>,
    pub res1: Tensor<T>,
    pub x_mid: Tensor<T>,
    pub mid_pre: Tensor<T>,
    pub mid_act: Tensor<T>,
    pub ffn_out_mask: Option<Tensor<T>>,
    pub res2: Tensor<T>,
}

/// Everything backward needs for one example.
#[derive(Debug, Clone)]
pub struct ExampleCache<T> {
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    pub emb_sum: Tensor<T>,
    pub emb_mask: Option<Tensor<T>>,
    pub layers: Vec<LayerCache<T>>,
    pub x_final: Tensor<T>,
    pub pooled: Tensor<T>,
    pub head_mask: Option<Tensor<T>>,
    pub head_in: Tensor<T>,
}

/// Batch of per-example activation caches; present only after a
/// training-mode forward.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub examples: Vec<ExampleCache<T>>,
}

pub struct ForwardOutput<T> {
    pub probabilities: Vec<T>,
    pub logits: Vec<T>,
    pub cache: Option<ForwardCache<T>>,
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// out = x·W + b with b broadcast across rows.
fn linear<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, ModelError> {
    let mut out = matmul(x, w)?;
    let cols = out.cols();
    debug_assert_eq!(b.len(), cols);
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for (o, &bias) in row.iter_mut().zip(b.data().iter()) {
            *o = *o + bias;
        }
    }
    Ok(out)
}

/// Applies dropout when training with a positive rate; otherwise passes
/// the tensor through untouched with no mask.
fn maybe_dropout<T: Scalar>(
    x: Tensor<T>,
    rate: f64,
    mode: &mut ForwardMode<'_>,
) -> (Tensor<T>, Option<Tensor<T>>) {
    match mode {
        ForwardMode::Train(rng) if rate > 0.0 => dropout(&x, rate, rng, true),
        _ => (x, None),
    }
}

/// True sequence length: the contiguous prefix of mask ones.
fn real_len(input: &EncodedInput) -> usize {
    let s = input.input_mask.iter().take_while(|&&m| m == 1).count();
    debug_assert!(
        input.input_mask[s..].iter().all(|&m| m == 0),
        "attention mask must be a contiguous prefix of ones"
    );
    s
}

fn forward_example<T: Scalar>(
    params: &ParameterSet<T>,
    config: &ModelConfig,
    input: &EncodedInput,
    index: usize,
    mode: &mut ForwardMode<'_>,
) -> Result<(T, ExampleCache<T>), ModelError> {
    let s = real_len(input);
    if s == 0 {
        return Err(ModelError::AllMaskedExample { index });
    }
    let eps = T::from_f64(LAYER_NORM_EPS);
    let ids: Vec<u32> = input.input_word_ids[..s].to_vec();
    let type_ids: Vec<u32> = input.input_type_ids[..s].iter().map(|&t| t as u32).collect();
    let pos_ids: Vec<u32> = (0..s as u32).collect();

    let mut emb_sum = embedding_lookup(&params.token_embedding, &ids)?;
    emb_sum.add_assign(&embedding_lookup(&params.position_embedding, &pos_ids)?);
    emb_sum.add_assign(&embedding_lookup(&params.segment_embedding, &type_ids)?);
    let emb_ln = layer_norm(
        &emb_sum,
        &params.embedding_norm_gamma,
        &params.embedding_norm_beta,
        eps,
    );
    let (mut x, emb_mask) = maybe_dropout(emb_ln, config.encoder_dropout, mode);

    let heads = config.heads;
    let d = config.head_dim();
    let scale = T::from_f64(1.0 / libm::sqrt(d as f64));
    let ones = vec![1u8; s];
    let mut layer_caches = Vec::with_capacity(params.layers.len());

    for layer in &params.layers {
        let x_in = x;
        let q = linear(&x_in, &layer.attn_query_weight, &layer.attn_query_bias)?;
        let k = linear(&x_in, &layer.attn_key_weight, &layer.attn_key_bias)?;
        let v = linear(&x_in, &layer.attn_value_weight, &layer.attn_value_bias)?;

        let mut ctx = Tensor::zeros(&[s, config.hidden]);
        let mut head_probs = Vec::with_capacity(heads);
        let mut head_prob_masks = Vec::with_capacity(heads);
        for a in 0..heads {
            let qh = q.col_block(a * d, d);
            let kh = k.col_block(a * d, d);
            let vh = v.col_block(a * d, d);
            let mut scores = matmul(&qh, &kh.transposed())?;
            scores.scale(scale);
            let probs = masked_softmax(&scores, &ones)?;
            let ctx_h = match mode {
                ForwardMode::Train(rng) if config.encoder_dropout > 0.0 => {
                    let (dropped, mask) = dropout(&probs, config.encoder_dropout, rng, true);
                    head_prob_masks.push(mask);
                    matmul(&dropped, &vh)?
                }
                _ => {
                    head_prob_masks.push(None);
                    matmul(&probs, &vh)?
                }
            };
            ctx.set_col_block(a * d, &ctx_h);
            head_probs.push(probs);
        }

        let attn_dense = linear(&ctx, &layer.attn_output_weight, &layer.attn_output_bias)?;
        let (attn_dropped, attn_out_mask) =
            maybe_dropout(attn_dense, config.encoder_dropout, mode);
        let mut res1 = x_in.clone();
        res1.add_assign(&attn_dropped);
        let x_mid = layer_norm(&res1, &layer.attn_norm_gamma, &layer.attn_norm_beta, eps);

        let mid_pre = linear(&x_mid, &layer.ffn_intermediate_weight, &layer.ffn_intermediate_bias)?;
        let mid_act = gelu(&mid_pre);
        let ffn_dense = linear(&mid_act, &layer.ffn_output_weight, &layer.ffn_output_bias)?;
        let (ffn_dropped, ffn_out_mask) = maybe_dropout(ffn_dense, config.encoder_dropout, mode);
        let mut res2 = x_mid.clone();
        res2.add_assign(&ffn_dropped);
        let x_out = layer_norm(&res2, &layer.ffn_norm_gamma, &layer.ffn_norm_beta, eps);

        layer_caches.push(LayerCache {
            x_in,
            q,
            k,
            v,
            head_probs,
            head_prob_masks,
            ctx,
            attn_out_mask,
            res1,
            x_mid,
            mid_pre,
            mid_act,
            ffn_out_mask,
            res2,
        });
        x = x_out;
    }

    let x_final = x;
    let cls = Tensor::from_vec(&[1, config.hidden], x_final.row(0).to_vec());
    let z = linear(&cls, &params.pooler_weight, &params.pooler_bias)?;
    let pooled = z.map(|v| v.tanh());
    let (head_in, head_mask) = maybe_dropout(pooled.clone(), config.head_dropout, mode);
    let logit_mat = linear(&head_in, &params.classifier_weight, &params.classifier_bias)?;
    let logit = logit_mat.data()[0];

    Ok((
        logit,
        ExampleCache {
            ids,
            type_ids,
            emb_sum,
            emb_mask,
            layers: layer_caches,
            x_final,
            pooled,
            head_mask,
            head_in,
        },
    ))
}

/// Runs the classifier over a batch. Probabilities are sigmoid(logit);
/// an activation cache is returned only in training mode.
pub fn forward<T: Scalar>(
    params: &ParameterSet<T>,
    config: &ModelConfig,
    batch: &[EncodedInput],
    mut mode: ForwardMode<'_>,
) -> Result<ForwardOutput<T>, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let training = matches!(mode, ForwardMode::Train(_));
    let mut logits = Vec::with_capacity(batch.len());
    let mut examples = Vec::with_capacity(if training { batch.len() } else { 0 });
    for (index, input) in batch.iter().enumerate() {
        let (logit, cache) = forward_example(params, config, input, index, &mut mode)?;
        logits.push(logit);
        if training {
            examples.push(cache);
        }
    }
    let probabilities = logits.iter().map(|&l| sigmoid(l)).collect();
    Ok(ForwardOutput {
        probabilities,
        logits,
        cache: training.then_some(ForwardCache { examples }),
    })
}

/// Inference-mode thresholding: label 1 iff probability ≥ threshold.
pub fn classify<T: Scalar>(
    params: &ParameterSet<T>,
    config: &ModelConfig,
    inputs: &[EncodedInput],
    threshold: f64,
) -> Result<Vec<u8>, ModelError> {
    let out = forward(params, config, inputs, ForwardMode::Inference)?;
    Ok(out
        .probabilities
        .iter()
        .map(|p| u8::from(p.as_f64() >= threshold))
        .collect())
}
