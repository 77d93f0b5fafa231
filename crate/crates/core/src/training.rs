//! Binary-cross-entropy training: AdamW with decoupled weight decay, a
//! linear warmup/decay learning-rate schedule, and the epoch loop.

use alloc::vec::Vec;

use crate::corpus::LabeledExample;
use crate::metrics::{confusion, MetricsError, MetricsReport};
use crate::model::{
    backward, classify, forward, decays, is_head_param, ForwardMode, ModelConfig, ModelError,
    ParameterSet,
};
use crate::rng::{shuffled_indices, stream_rng, STREAM_DROPOUT, STREAM_SHUFFLE};
use crate::tokenizer::{encode, EncodedInput, Vocabulary};
use crate::Scalar;

/// Probability clamp for the loss logs. The gradient uses the raw
/// probability; only ln() sees the clamped value.
const PROB_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Global-norm gradient clipping threshold; None disables clipping.
    pub grad_clip_norm: Option<f64>,
    /// When set, only pooler and classifier parameters are updated.
    pub freeze_encoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            base_lr: 3e-5,
            warmup_fraction: 0.10,
            batch_size: 32,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 42,
            grad_clip_norm: Some(1.0),
            freeze_encoder: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::ZeroEpochs);
        }
        if self.batch_size == 0 {
            return Err(TrainError::ZeroBatchSize);
        }
        if !(self.base_lr > 0.0) {
            return Err(TrainError::BadLearningRate { value: self.base_lr });
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(TrainError::BadWarmupFraction {
                value: self.warmup_fraction,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("probabilities and labels differ in length: {probabilities} vs {labels}")]
    LengthMismatch { probabilities: usize, labels: usize },
    #[error("loss requires at least one prediction")]
    EmptyLossBatch,
    #[error("step {step} is out of range for a schedule of {total_steps} steps")]
    StepOutOfRange { step: usize, total_steps: usize },
    #[error("warmup window of {warmup_steps} steps is degenerate for {total_steps} total steps")]
    DegenerateWarmup {
        warmup_steps: usize,
        total_steps: usize,
    },
    #[error("epochs must be at least 1")]
    ZeroEpochs,
    #[error("batch_size must be at least 1")]
    ZeroBatchSize,
    #[error("base_lr must be positive, got {value}")]
    BadLearningRate { value: f64 },
    #[error("warmup_fraction must lie in [0, 1), got {value}")]
    BadWarmupFraction { value: f64 },
    #[error("training requires a non-empty train split")]
    EmptyTrainSet,
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// First and second gradient moments, shape-matching the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState<T: Scalar> {
    pub first_moment: ParameterSet<T>,
    pub second_moment: ParameterSet<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(template: &ParameterSet<T>) -> Self {
        Self {
            first_moment: template.zeros_like(),
            second_moment: template.zeros_like(),
            step: 0,
        }
    }
}

/// Mean binary cross entropy and the gradient with respect to each
/// pre-sigmoid logit, which is (p - y) / n.
pub fn bce_loss<T: Scalar>(
    probabilities: &[T],
    labels: &[u8],
) -> Result<(f64, Vec<T>), TrainError> {
    if probabilities.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            probabilities: probabilities.len(),
            labels: labels.len(),
        });
    }
    if probabilities.is_empty() {
        return Err(TrainError::EmptyLossBatch);
    }
    let n = probabilities.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probabilities.len());
    for (&p, &y) in probabilities.iter().zip(labels.iter()) {
        debug_assert!(y <= 1, "labels are binary");
        let raw = p.as_f64();
        let clamped = raw.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        loss -= if y == 1 {
            libm::log(clamped)
        } else {
            libm::log(1.0 - clamped)
        };
        grad.push(T::from_f64((raw - y as f64) / n));
    }
    Ok((loss / n, grad))
}

/// Steps in the warmup window: round(warmup_fraction * total_steps),
/// half away from zero.
pub fn warmup_steps(total_steps: usize, warmup_fraction: f64) -> usize {
    libm::round(warmup_fraction * total_steps as f64) as usize
}

/// Schedule length: epochs * ceil(train_len / batch_size).
pub fn total_steps(train_len: usize, config: &TrainConfig) -> usize {
    config.epochs * train_len.div_ceil(config.batch_size)
}

/// Learning rate at a zero-based step: linear rise over the warmup window,
/// then linear decay that reaches zero one step past the end.
pub fn lr_at(step: usize, total_steps: usize, config: &TrainConfig) -> Result<f64, TrainError> {
    if step >= total_steps {
        return Err(TrainError::StepOutOfRange { step, total_steps });
    }
    let warmup = warmup_steps(total_steps, config.warmup_fraction);
    if config.warmup_fraction > 0.0 && (warmup == 0 || warmup >= total_steps) {
        return Err(TrainError::DegenerateWarmup {
            warmup_steps: warmup,
            total_steps,
        });
    }
    // Ratio first, so the warmup peak and the no-warmup start are exactly
    // base_lr.
    Ok(if step < warmup {
        config.base_lr * ((step + 1) as f64 / warmup as f64)
    } else {
        config.base_lr * ((total_steps - step) as f64 / (total_steps - warmup) as f64)
    })
}

/// Euclidean norm over every gradient entry, accumulated in f64.
pub fn global_gradient_norm<T: Scalar>(grads: &ParameterSet<T>) -> f64 {
    let mut sum = 0.0;
    for (_, tensor) in grads.named() {
        for &v in tensor.data() {
            let x = v.as_f64();
            sum += x * x;
        }
    }
    libm::sqrt(sum)
}

/// Scales all gradients so their global norm is at most max_norm.
/// Returns the norm before clipping.
pub fn clip_gradients<T: Scalar>(grads: &mut ParameterSet<T>, max_norm: f64) -> f64 {
    let norm = global_gradient_norm(grads);
    if norm > max_norm {
        let scale = T::from_f64(max_norm / norm);
        for (_, tensor) in grads.named_mut() {
            for v in tensor.data_mut() {
                *v = *v * scale;
            }
        }
    }
    norm
}

/// One AdamW update over every parameter. Moment updates run in the
/// parameter precision; bias corrections and the step itself in f64.
/// Layer-norm parameters and biases are excluded from weight decay.
pub fn adamw_step<T: Scalar>(
    params: &mut ParameterSet<T>,
    grads: &ParameterSet<T>,
    state: &mut OptimizerState<T>,
    lr: f64,
    config: &TrainConfig,
) {
    adamw_step_filtered(params, grads, state, lr, config, |_| true);
}

/// AdamW restricted to parameters the predicate accepts; skipped tensors
/// keep their values and moments untouched (no decay either).
pub fn adamw_step_filtered<T: Scalar>(
    params: &mut ParameterSet<T>,
    grads: &ParameterSet<T>,
    state: &mut OptimizerState<T>,
    lr: f64,
    config: &TrainConfig,
    update: impl Fn(&str) -> bool,
) {
    state.step += 1;
    let correction1 = 1.0 - libm::pow(config.beta1, state.step as f64);
    let correction2 = 1.0 - libm::pow(config.beta2, state.step as f64);
    let beta1 = T::from_f64(config.beta1);
    let beta2 = T::from_f64(config.beta2);
    let one_minus_beta1 = T::from_f64(1.0 - config.beta1);
    let one_minus_beta2 = T::from_f64(1.0 - config.beta2);

    let mut m_set = state.first_moment.named_mut();
    let mut v_set = state.second_moment.named_mut();
    for (((name, theta), (_, grad)), ((_, m), (_, v))) in params
        .named_mut()
        .into_iter()
        .zip(grads.named().into_iter())
        .zip(m_set.iter_mut().zip(v_set.iter_mut()))
    {
        if !update(&name) {
            continue;
        }
        let decay = if decays(&name) { lr * config.weight_decay } else { 0.0 };
        let theta_data = theta.data_mut();
        let grad_data = grad.data();
        let m_data = m.data_mut();
        let v_data = v.data_mut();
        for i in 0..theta_data.len() {
            let g = grad_data[i];
            m_data[i] = beta1 * m_data[i] + one_minus_beta1 * g;
            v_data[i] = beta2 * v_data[i] + one_minus_beta2 * g * g;
            let m_hat = m_data[i].as_f64() / correction1;
            let v_hat = v_data[i].as_f64() / correction2;
            let pre = theta_data[i].as_f64();
            let stepped = pre - lr * m_hat / (libm::sqrt(v_hat) + config.epsilon) - decay * pre;
            theta_data[i] = T::from_f64(stepped);
        }
    }
}

/// One entry of the per-epoch training log.
#[derive(Debug, Clone)]
pub struct EpochLog {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Per-example mean training loss over the epoch.
    pub train_loss: f64,
    /// Validation metrics at threshold 0.5, None when the split is empty.
    pub validation: Option<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub final_params: ParameterSet<T>,
    /// Parameters from the epoch with the best validation F1 (earliest on
    /// ties). Falls back to the final parameters when F1 never resolves.
    pub best_params: ParameterSet<T>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    /// Mean batch loss at every optimizer step, in step order.
    pub step_losses: Vec<f64>,
}

fn validation_report<T: Scalar>(
    params: &ParameterSet<T>,
    model_config: &ModelConfig,
    inputs: &[EncodedInput],
    labels: &[u8],
) -> Result<Option<MetricsReport>, TrainError> {
    if inputs.is_empty() {
        return Ok(None);
    }
    let predicted = classify(params, model_config, inputs, 0.5)?;
    let counts = confusion(&predicted, labels)?;
    Ok(Some(MetricsReport::from_counts(counts)))
}

/// Runs the full fine-tuning loop: per-epoch seeded shuffle, mini-batches
/// (last one may be short), forward, BCE, backward, optional global-norm
/// clip, AdamW with the scheduled rate, then a validation pass per epoch.
/// A single seed reproduces the run bit for bit on the same build.
pub fn train<T: Scalar>(
    initial: ParameterSet<T>,
    train_set: &[LabeledExample],
    validation: &[LabeledExample],
    vocab: &Vocabulary,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    model_config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }

    let encode_all = |set: &[LabeledExample]| -> (Vec<EncodedInput>, Vec<u8>) {
        let inputs = set
            .iter()
            .map(|ex| encode(&ex.text, vocab, model_config.max_seq))
            .collect();
        let labels = set.iter().map(|ex| ex.label).collect();
        (inputs, labels)
    };
    let (train_inputs, train_labels) = encode_all(train_set);
    let (val_inputs, val_labels) = encode_all(validation);

    let n = train_set.len();
    let schedule_len = total_steps(n, config);
    // Surfaces a degenerate warmup window before any work happens.
    lr_at(0, schedule_len, config)?;

    let mut params = initial;
    let mut state = OptimizerState::new(&params);
    let mut shuffle_rng = stream_rng(config.seed, STREAM_SHUFFLE);
    let mut dropout_rng = stream_rng(config.seed, STREAM_DROPOUT);
    let mut log = Vec::with_capacity(config.epochs);
    let mut step_losses = Vec::with_capacity(schedule_len);
    let mut global_step = 0;
    let mut best: Option<(f64, usize, ParameterSet<T>)> = None;

    for epoch in 1..=config.epochs {
        let order = shuffled_indices(&mut shuffle_rng, n);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<EncodedInput> =
                chunk.iter().map(|&i| train_inputs[i].clone()).collect();
            let batch_labels: Vec<u8> = chunk.iter().map(|&i| train_labels[i]).collect();

            let out = forward(
                &params,
                model_config,
                &batch,
                ForwardMode::Train(&mut dropout_rng),
            )?;
            let (loss, grad_logits) = bce_loss(&out.probabilities, &batch_labels)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { step: global_step });
            }
            let cache = out.cache.expect("training mode keeps a cache");
            let mut grads = backward(&params, model_config, &cache, &grad_logits)?;

            if config.freeze_encoder {
                // Frozen gradients are dead; zeroing them keeps the clip
                // norm a statement about what actually updates.
                for (name, tensor) in grads.named_mut() {
                    if !is_head_param(&name) {
                        for v in tensor.data_mut() {
                            *v = T::zero();
                        }
                    }
                }
            }
            if let Some(max_norm) = config.grad_clip_norm {
                clip_gradients(&mut grads, max_norm);
            }

            let lr = lr_at(global_step, schedule_len, config)?;
            if config.freeze_encoder {
                adamw_step_filtered(&mut params, &grads, &mut state, lr, config, is_head_param);
            } else {
                adamw_step(&mut params, &grads, &mut state, lr, config);
            }

            loss_sum += loss * chunk.len() as f64;
            step_losses.push(loss);
            global_step += 1;
        }

        let validation = validation_report(&params, model_config, &val_inputs, &val_labels)?;
        if let Some(f1) = validation.as_ref().and_then(|r| r.f1) {
            let improved = best.as_ref().map_or(true, |(b, _, _)| f1 > *b);
            if improved {
                best = Some((f1, epoch, params.clone()));
            }
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / n as f64,
            validation,
        });
    }

    let (best_params, best_epoch) = match best {
        Some((_, epoch, snapshot)) => (snapshot, epoch),
        None => (params.clone(), config.epochs),
    };
    Ok(TrainOutcome {
        final_params: params,
        best_params,
        best_epoch,
        log,
        step_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::Tensor;
    use alloc::string::ToString;
    use alloc::{format, vec};

    fn scalar_config() -> ModelConfig {
        ModelConfig {
            num_layers: 1,
            hidden: 1,
            heads: 1,
            ffn_dim: 1,
            vocab_size: 1,
            max_positions: 1,
            max_seq: 1,
            head_dropout: 0.0,
            encoder_dropout: 0.0,
        }
    }

    /// All-zero parameter set with classifier.weight as a lone scalar knob.
    fn scalar_params(theta: f64) -> ParameterSet<f64> {
        let mut params = ParameterSet::zeros(&scalar_config());
        params.classifier_weight = Tensor::from_vec(&[1, 1], vec![theta]);
        params
    }

    fn scalar_grads(g: f64) -> ParameterSet<f64> {
        let mut grads = ParameterSet::zeros(&scalar_config());
        grads.classifier_weight = Tensor::from_vec(&[1, 1], vec![g]);
        grads
    }

    #[test]
    fn bce_forced_value_is_ln_two() {
        let (loss, grad) = bce_loss(&[0.5f64], &[1]).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((grad[0] - (0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn bce_perfect_prediction_is_near_zero() {
        let (loss, _) = bce_loss(&[1.0f64 - 1e-7], &[1]).unwrap();
        assert!(loss > 0.0 && loss < 2e-7);
    }

    #[test]
    fn bce_two_example_mean() {
        let (loss, grad) = bce_loss(&[0.8f64, 0.3], &[1, 0]).unwrap();
        // -(ln 0.8 + ln 0.7)/2
        assert!((loss - 0.289_909_247_626_471_1).abs() < 1e-15);
        assert!((grad[0] - (0.8 - 1.0) / 2.0).abs() < 1e-15);
        assert!((grad[1] - 0.3 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bce_clamps_only_the_log() {
        // p = 1.0 for a negative label: the log saturates at ln(1e-7) but
        // the gradient stays the raw (p - y)/n = 1.
        let (loss, grad) = bce_loss(&[1.0f64], &[0]).unwrap();
        assert!((loss - (-libm::log(PROB_FLOOR))).abs() < 1e-9);
        assert_eq!(grad[0], 1.0);
    }

    #[test]
    fn bce_rejects_bad_shapes() {
        assert_eq!(
            bce_loss(&[0.5f64], &[1, 0]),
            Err(TrainError::LengthMismatch {
                probabilities: 1,
                labels: 2
            })
        );
        let empty: [f64; 0] = [];
        assert_eq!(bce_loss(&empty, &[]), Err(TrainError::EmptyLossBatch));
    }

    #[test]
    fn bce_gradient_matches_finite_differences_through_sigmoid() {
        use crate::model::sigmoid;
        let logits = [0.3f64, -1.2, 2.5, 0.0];
        let labels = [1u8, 0, 1, 0];
        let loss_of = |z: &[f64]| {
            let probs: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
            bce_loss(&probs, &labels).unwrap().0
        };
        let probs: Vec<f64> = logits.iter().map(|&v| sigmoid(v)).collect();
        let (_, analytic) = bce_loss(&probs, &labels).unwrap();
        let numeric = crate::gradcheck::central_difference(
            |z: &[f64]| loss_of(z),
            &logits,
            crate::gradcheck::DEFAULT_STEP,
        );
        let err = crate::gradcheck::max_relative_error(
            &analytic,
            &numeric,
            crate::gradcheck::REL_ERROR_FLOOR,
        );
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn lr_schedule_matches_hand_values() {
        let config = TrainConfig::default(); // warmup 0.10, base 3e-5
        assert_eq!(warmup_steps(1200, 0.10), 120);
        assert_eq!(lr_at(119, 1200, &config).unwrap(), config.base_lr);
        let tail = lr_at(1199, 1200, &config).unwrap();
        assert!((tail - config.base_lr / 1080.0).abs() < 1e-20);
        assert!((tail - 2.78e-8).abs() < 1e-10);
        // Rise is strictly monotone, decay strictly monotone.
        assert!(lr_at(0, 1200, &config).unwrap() < lr_at(1, 1200, &config).unwrap());
        assert!(lr_at(120, 1200, &config).unwrap() > lr_at(121, 1200, &config).unwrap());
    }

    #[test]
    fn lr_without_warmup_starts_at_base() {
        let config = TrainConfig {
            warmup_fraction: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(lr_at(0, 10, &config).unwrap(), config.base_lr);
        assert!((lr_at(9, 10, &config).unwrap() - config.base_lr / 10.0).abs() < 1e-20);
    }

    #[test]
    fn lr_rejects_out_of_range_and_degenerate_windows() {
        let config = TrainConfig::default();
        assert_eq!(
            lr_at(1200, 1200, &config),
            Err(TrainError::StepOutOfRange {
                step: 1200,
                total_steps: 1200
            })
        );
        // 0.10 * 4 rounds to 0 warmup steps.
        assert_eq!(
            lr_at(0, 4, &config),
            Err(TrainError::DegenerateWarmup {
                warmup_steps: 0,
                total_steps: 4
            })
        );
        // 0.9 * 2 rounds up to the whole schedule.
        let wide = TrainConfig {
            warmup_fraction: 0.9,
            ..TrainConfig::default()
        };
        assert_eq!(
            lr_at(0, 2, &wide),
            Err(TrainError::DegenerateWarmup {
                warmup_steps: 2,
                total_steps: 2
            })
        );
    }

    #[test]
    fn lr_has_no_jump_at_the_warmup_boundary() {
        let config = TrainConfig::default();
        let (s, w) = (1200usize, 120usize);
        let before = lr_at(w - 1, s, &config).unwrap();
        let after = lr_at(w, s, &config).unwrap();
        let bound = config.base_lr / (s - w) as f64 + config.base_lr / w as f64;
        assert!((after - before).abs() <= bound);
    }

    #[test]
    fn schedule_arithmetic_matches_reference_run() {
        let config = TrainConfig::default(); // epochs 10, batch 32
        assert_eq!(total_steps(3826, &config), 1200);
        assert_eq!(warmup_steps(1200, config.warmup_fraction), 120);
    }

    #[test]
    fn adamw_scalar_step_matches_closed_form() {
        let config = TrainConfig {
            weight_decay: 0.01,
            ..TrainConfig::default()
        };
        let mut params = scalar_params(1.0);
        // A decayed non-classifier entry rides along to show decoupling.
        params.token_embedding = Tensor::from_vec(&[1, 1], vec![0.7]);
        let grads = scalar_grads(0.5);
        let mut state = OptimizerState::new(&params);
        adamw_step(&mut params, &grads, &mut state, 0.01, &config);

        // m_hat = 0.5, v_hat = 0.25 after a fresh step.
        let expected = 1.0 - 0.01 * (0.5 / (0.5 + 1e-8)) - 0.01 * 0.01 * 1.0;
        let got = params.classifier_weight.data()[0];
        assert!((got - expected).abs() < 1e-12, "got {got}");
        assert!((got - 0.9899000002).abs() < 1e-10);

        // Zero gradient, nonzero decay: theta shrinks by exactly lr*lambda.
        let emb = params.token_embedding.data()[0];
        assert!((emb - 0.7 * (1.0 - 1e-4)).abs() < 1e-15);
        // Biases never decay.
        assert_eq!(params.classifier_bias.data()[0], 0.0);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adamw_zero_gradient_zero_decay_is_identity() {
        let config = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut params = scalar_params(0.37);
        params.token_embedding = Tensor::from_vec(&[1, 1], vec![-1.25]);
        let before = params.clone();
        let mut state = OptimizerState::new(&params);
        adamw_step(&mut params, &grads_zero(), &mut state, 0.01, &config);
        assert_eq!(params, before);
    }

    fn grads_zero() -> ParameterSet<f64> {
        ParameterSet::zeros(&scalar_config())
    }

    #[test]
    fn adamw_with_zero_betas_is_sign_scaled_sgd() {
        let config = TrainConfig {
            beta1: 0.0,
            beta2: 0.0,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        for g in [0.5f64, -0.25] {
            let mut params = scalar_params(1.0);
            let mut state = OptimizerState::new(&params);
            adamw_step(&mut params, &scalar_grads(g), &mut state, 0.01, &config);
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            let got = params.classifier_weight.data()[0];
            assert!((got - expected).abs() < 1e-15, "g={g}: got {got}");
        }
    }

    #[test]
    fn adamw_bias_correction_holds_across_steps() {
        // With a constant unit gradient, m_hat and v_hat are exactly 1 at
        // every step, so each step subtracts lr/(1 + eps).
        let config = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut params = scalar_params(1.0);
        let mut state = OptimizerState::new(&params);
        let grads = scalar_grads(1.0);
        for _ in 0..3 {
            adamw_step(&mut params, &grads, &mut state, 0.01, &config);
        }
        let expected = 1.0 - 3.0 * (0.01 / (1.0 + 1e-8));
        let got = params.classifier_weight.data()[0];
        assert!((got - expected).abs() < 1e-12, "got {got}");
        assert_eq!(state.step, 3);
    }

    #[test]
    fn clipping_rescales_only_above_the_threshold() {
        let mut grads = scalar_grads(3.0);
        grads.token_embedding = Tensor::from_vec(&[1, 1], vec![4.0]);
        let norm = clip_gradients(&mut grads, 1.0);
        assert_eq!(norm, 5.0);
        assert!((grads.classifier_weight.data()[0] - 0.6).abs() < 1e-15);
        assert!((grads.token_embedding.data()[0] - 0.8).abs() < 1e-15);
        assert!((global_gradient_norm(&grads) - 1.0).abs() < 1e-12);

        let mut small = scalar_grads(0.3);
        let norm = clip_gradients(&mut small, 1.0);
        assert_eq!(norm, 0.3);
        assert_eq!(small.classifier_weight.data()[0], 0.3);
    }

    fn overfit_vocab() -> Vocabulary {
        let tokens = [
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "fatal", "attack", "on", "village", "clash",
            "near", "market", "protest", "turned", "remained", "peaceful", "shooting", "reported",
            "no", "casualties",
        ];
        Vocabulary::from_lines(tokens).unwrap()
    }

    fn overfit_examples() -> Vec<LabeledExample> {
        [
            ("fatal attack on village", 1u8),
            ("attack on village", 0),
            ("fatal clash near market", 1),
            ("clash near market", 0),
            ("protest turned fatal", 1),
            ("protest remained peaceful", 0),
            ("fatal shooting reported", 1),
            ("shooting reported no casualties", 0),
        ]
        .iter()
        .map(|&(text, label)| LabeledExample {
            text: text.to_string(),
            label,
        })
        .collect()
    }

    fn overfit_model_config(vocab: &Vocabulary) -> ModelConfig {
        ModelConfig {
            num_layers: 1,
            hidden: 16,
            heads: 2,
            ffn_dim: 32,
            vocab_size: vocab.len(),
            max_positions: 16,
            max_seq: 16,
            head_dropout: 0.0,
            encoder_dropout: 0.0,
        }
    }

    fn overfit_train_config() -> TrainConfig {
        TrainConfig {
            epochs: 200, // batch 8 over 8 examples: one step per epoch
            base_lr: 5e-3,
            batch_size: 8,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_toy_set_is_memorized() {
        let vocab = overfit_vocab();
        let examples = overfit_examples();
        let model_config = overfit_model_config(&vocab);
        let config = overfit_train_config();
        let initial: ParameterSet<f32> = init_params(&model_config, config.seed);
        let outcome = train(
            initial,
            &examples,
            &examples,
            &vocab,
            &model_config,
            &config,
        )
        .unwrap();

        assert_eq!(outcome.step_losses.len(), 200);
        let last = outcome.log.last().unwrap();
        assert!(
            last.train_loss < 0.05,
            "final loss {} too high",
            last.train_loss
        );

        let inputs: Vec<EncodedInput> = examples
            .iter()
            .map(|ex| encode(&ex.text, &vocab, model_config.max_seq))
            .collect();
        let predicted =
            classify(&outcome.final_params, &model_config, &inputs, 0.5).unwrap();
        let labels: Vec<u8> = examples.iter().map(|ex| ex.label).collect();
        assert_eq!(predicted, labels, "train accuracy below 1.0");

        // Validation equals the train set here, so the best epoch must
        // reach a perfect F1.
        assert_eq!(
            outcome.log[outcome.best_epoch - 1]
                .validation
                .as_ref()
                .unwrap()
                .f1,
            Some(1.0)
        );

        // Smoothed loss, a 20-step mean, never rises after step 50.
        let smooth: Vec<f64> = (0..=outcome.step_losses.len() - 20)
            .map(|i| outcome.step_losses[i..i + 20].iter().sum::<f64>() / 20.0)
            .collect();
        for i in 50..smooth.len() - 1 {
            assert!(
                smooth[i + 1] <= smooth[i] + 1e-9,
                "smoothed loss rose at step {i}: {} -> {}",
                smooth[i],
                smooth[i + 1]
            );
        }
    }

    #[test]
    fn identical_seeds_reproduce_the_run_bitwise() {
        let vocab = overfit_vocab();
        let examples = overfit_examples();
        let model_config = overfit_model_config(&vocab);
        let config = TrainConfig {
            epochs: 5,
            ..overfit_train_config()
        };
        let run = || {
            let initial: ParameterSet<f32> = init_params(&model_config, config.seed);
            train(
                initial,
                &examples,
                &examples,
                &vocab,
                &model_config,
                &config,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.step_losses, b.step_losses);
        for (la, lb) in a.log.iter().zip(b.log.iter()) {
            assert_eq!(la.train_loss, lb.train_loss);
        }
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn freezing_the_encoder_updates_only_the_head() {
        let vocab = overfit_vocab();
        let examples = overfit_examples();
        let model_config = overfit_model_config(&vocab);
        let config = TrainConfig {
            epochs: 5,
            freeze_encoder: true,
            ..overfit_train_config()
        };
        let initial: ParameterSet<f32> = init_params(&model_config, config.seed);
        let frozen = initial.clone();
        let outcome = train(
            initial,
            &examples,
            &examples,
            &vocab,
            &model_config,
            &config,
        )
        .unwrap();
        for ((name, before), (_, after)) in
            frozen.named().into_iter().zip(outcome.final_params.named())
        {
            if is_head_param(&name) {
                assert_ne!(before, after, "{name} should have moved");
            } else {
                assert_eq!(before, after, "{name} must stay frozen");
            }
        }
    }

    #[test]
    fn empty_train_set_is_rejected() {
        let vocab = overfit_vocab();
        let model_config = overfit_model_config(&vocab);
        let initial: ParameterSet<f32> = init_params(&model_config, 1);
        let err = train(
            initial,
            &[],
            &[],
            &vocab,
            &model_config,
            &TrainConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, TrainError::EmptyTrainSet);
    }

    #[test]
    fn poisoned_parameters_surface_a_non_finite_loss() {
        let vocab = overfit_vocab();
        let examples = overfit_examples();
        let model_config = overfit_model_config(&vocab);
        let mut initial: ParameterSet<f32> = init_params(&model_config, 1);
        initial.classifier_bias = Tensor::from_vec(&[1], vec![f32::NAN]);
        let err = train(
            initial,
            &examples,
            &examples,
            &vocab,
            &model_config,
            &overfit_train_config(),
        )
        .unwrap_err();
        assert_eq!(err, TrainError::NonFiniteLoss { step: 0 });
    }

    #[test]
    fn config_invariants_are_enforced() {
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(bad.validate(), Err(TrainError::ZeroEpochs));
        let bad = TrainConfig {
            base_lr: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(
            bad.validate(),
            Err(TrainError::BadLearningRate { value: 0.0 })
        );
        let bad = TrainConfig {
            warmup_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert_eq!(
            bad.validate(),
            Err(TrainError::BadWarmupFraction { value: 1.0 })
        );
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert_eq!(bad.validate(), Err(TrainError::ZeroBatchSize));
        assert_eq!(TrainConfig::default().validate(), Ok(()));
    }

    #[test]
    fn log_line_shape_survives_formatting() {
        // The per-epoch log drives the structured text interface; spot
        // check that an entry formats without panicking.
        let entry = EpochLog {
            epoch: 3,
            train_loss: 0.25,
            validation: None,
        };
        let line = format!("{} {}", entry.epoch, entry.train_loss);
        assert_eq!(line, "3 0.25");
    }
}
