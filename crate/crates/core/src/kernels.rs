//! The six dense kernels the encoder is built from, each with a
//! hand-derived backward pass.
//!
//! There is no autodiff tape: the model topology is fixed, so every
//! backward formula is written out and verified against 64-bit central
//! finite differences in the tests. All loops use a fixed accumulation
//! order, which keeps results bitwise reproducible.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;

use crate::rng::uniform_f64;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("matmul dimension mismatch: [{m}x{k}] . [{k2}x{n}]")]
    MatmulShape { m: usize, k: usize, k2: usize, n: usize },
    #[error("masked_softmax mask has no unmasked position")]
    AllMasked,
    #[error("embedding id {id} out of range for table with {vocab} rows")]
    IdOutOfRange { id: usize, vocab: usize },
}

/// c[i,j] = Σ_t a[i,t]·b[t,j], summed over t in ascending order.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, KernelError> {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(KernelError::MatmulShape { m, k, k2, n });
    }
    let mut out = vec![T::zero(); m * n];
    let bd = b.data();
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = &mut out[i * n..(i + 1) * n];
        for (t, &a_it) in a_row.iter().enumerate() {
            let b_row = &bd[t * n..(t + 1) * n];
            for (o, &b_tj) in out_row.iter_mut().zip(b_row.iter()) {
                *o = *o + a_it * b_tj;
            }
        }
    }
    Ok(Tensor::from_vec(&[m, n], out))
}

/// Gradients of matmul: grad_a = grad_c·bᵀ, grad_b = aᵀ·grad_c.
pub fn matmul_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    grad_c: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let (m, k) = (a.rows(), a.cols());
    let n = b.cols();
    debug_assert_eq!(grad_c.rows(), m);
    debug_assert_eq!(grad_c.cols(), n);

    let mut grad_a = vec![T::zero(); m * k];
    let bd = b.data();
    for i in 0..m {
        let g_row = grad_c.row(i);
        let ga_row = &mut grad_a[i * k..(i + 1) * k];
        for t in 0..k {
            let b_row = &bd[t * n..(t + 1) * n];
            let mut acc = T::zero();
            for (&g, &bv) in g_row.iter().zip(b_row.iter()) {
                acc = acc + g * bv;
            }
            ga_row[t] = acc;
        }
    }

    let mut grad_b = vec![T::zero(); k * n];
    for i in 0..m {
        let a_row = a.row(i);
        let g_row = grad_c.row(i);
        for (t, &a_it) in a_row.iter().enumerate() {
            let gb_row = &mut grad_b[t * n..(t + 1) * n];
            for (gb, &g) in gb_row.iter_mut().zip(g_row.iter()) {
                *gb = *gb + a_it * g;
            }
        }
    }

    (
        Tensor::from_vec(&[m, k], grad_a),
        Tensor::from_vec(&[k, n], grad_b),
    )
}

/// Row-wise softmax over the positions where `mask` is 1; positions with
/// mask 0 get weight exactly 0. Max-shifted for stability.
pub fn masked_softmax<T: Scalar>(
    scores: &Tensor<T>,
    mask: &[u8],
) -> Result<Tensor<T>, KernelError> {
    let (rows, n) = (scores.rows(), scores.cols());
    assert_eq!(mask.len(), n, "mask length must match score columns");
    if mask.iter().all(|&m| m == 0) {
        return Err(KernelError::AllMasked);
    }
    let mut out = vec![T::zero(); rows * n];
    for r in 0..rows {
        let row = scores.row(r);
        let mut max = T::neg_infinity();
        for (s, &m) in row.iter().zip(mask.iter()) {
            if m != 0 && *s > max {
                max = *s;
            }
        }
        let mut sum = T::zero();
        let out_row = &mut out[r * n..(r + 1) * n];
        for ((o, s), &m) in out_row.iter_mut().zip(row.iter()).zip(mask.iter()) {
            if m != 0 {
                let e = (*s - max).exp();
                *o = e;
                sum = sum + e;
            }
        }
        let inv = T::one() / sum;
        for (o, &m) in out_row.iter_mut().zip(mask.iter()) {
            if m != 0 {
                *o = *o * inv;
            }
        }
    }
    Ok(Tensor::from_vec(&[rows, n], out))
}

/// Softmax Jacobian restricted to unmasked positions:
/// dx_i = p_i·(g_i − Σ_j p_j·g_j). Masked positions stay exactly 0.
pub fn masked_softmax_backward<T: Scalar>(
    probs: &Tensor<T>,
    mask: &[u8],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let (rows, n) = (probs.rows(), probs.cols());
    let mut grad = vec![T::zero(); rows * n];
    for r in 0..rows {
        let p_row = probs.row(r);
        let g_row = grad_out.row(r);
        let mut dot = T::zero();
        for ((&p, &g), &m) in p_row.iter().zip(g_row.iter()).zip(mask.iter()) {
            if m != 0 {
                dot = dot + p * g;
            }
        }
        let out_row = &mut grad[r * n..(r + 1) * n];
        for (i, o) in out_row.iter_mut().enumerate() {
            if mask[i] != 0 {
                *o = p_row[i] * (g_row[i] - dot);
            }
        }
    }
    Tensor::from_vec(&[rows, n], grad)
}

/// Per-row normalization to zero mean and unit variance (population
/// variance, divide by h), then scale by gamma and shift by beta.
pub fn layer_norm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Tensor<T> {
    let (rows, h) = (x.rows(), x.cols());
    assert_eq!(gamma.len(), h, "gamma length must match row width");
    assert_eq!(beta.len(), h, "beta length must match row width");
    let inv_h = T::one() / T::from_usize(h);
    let g = gamma.data();
    let b = beta.data();
    let mut out = vec![T::zero(); rows * h];
    for r in 0..rows {
        let row = x.row(r);
        let mut mean = T::zero();
        for &v in row {
            mean = mean + v;
        }
        mean = mean * inv_h;
        let mut var = T::zero();
        for &v in row {
            let d = v - mean;
            var = var + d * d;
        }
        var = var * inv_h;
        let inv_std = T::one() / (var + eps).sqrt();
        let out_row = &mut out[r * h..(r + 1) * h];
        for (j, (o, &v)) in out_row.iter_mut().zip(row.iter()).enumerate() {
            *o = (v - mean) * inv_std * g[j] + b[j];
        }
    }
    Tensor::from_vec(&[rows, h], out)
}

/// Standard layer-norm gradient. Returns (grad_x, grad_gamma, grad_beta);
/// gamma/beta gradients are summed over rows.
pub fn layer_norm_backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    eps: T,
    grad_y: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (rows, h) = (x.rows(), x.cols());
    let inv_h = T::one() / T::from_usize(h);
    let g = gamma.data();
    let mut grad_x = vec![T::zero(); rows * h];
    let mut grad_gamma = vec![T::zero(); h];
    let mut grad_beta = vec![T::zero(); h];
    let mut x_hat = vec![T::zero(); h];
    let mut d_hat = vec![T::zero(); h];
    for r in 0..rows {
        let row = x.row(r);
        let gy = grad_y.row(r);
        let mut mean = T::zero();
        for &v in row {
            mean = mean + v;
        }
        mean = mean * inv_h;
        let mut var = T::zero();
        for &v in row {
            let d = v - mean;
            var = var + d * d;
        }
        var = var * inv_h;
        let inv_std = T::one() / (var + eps).sqrt();

        for j in 0..h {
            x_hat[j] = (row[j] - mean) * inv_std;
            d_hat[j] = gy[j] * g[j];
            grad_gamma[j] = grad_gamma[j] + gy[j] * x_hat[j];
            grad_beta[j] = grad_beta[j] + gy[j];
        }
        let mut mean_d = T::zero();
        let mut mean_dx = T::zero();
        for j in 0..h {
            mean_d = mean_d + d_hat[j];
            mean_dx = mean_dx + d_hat[j] * x_hat[j];
        }
        mean_d = mean_d * inv_h;
        mean_dx = mean_dx * inv_h;
        let out_row = &mut grad_x[r * h..(r + 1) * h];
        for j in 0..h {
            out_row[j] = (d_hat[j] - mean_d - x_hat[j] * mean_dx) * inv_std;
        }
    }
    (
        Tensor::from_vec(&[rows, h], grad_x),
        Tensor::from_vec(&[h], grad_gamma),
        Tensor::from_vec(&[h], grad_beta),
    )
}

/// Elementwise x·Φ(x) with Φ the standard normal CDF, in the exact erf
/// form (not the tanh approximation).
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v * normal_cdf(v))
}

/// d/dx [x·Φ(x)] = Φ(x) + x·φ(x).
pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, grad_y: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(x.dims(), grad_y.dims());
    let mut out = x.zeros_like();
    let inv_sqrt_2pi = T::from_f64(1.0 / libm::sqrt(2.0 * core::f64::consts::PI));
    for ((o, &v), &g) in out
        .data_mut()
        .iter_mut()
        .zip(x.data().iter())
        .zip(grad_y.data().iter())
    {
        let pdf = inv_sqrt_2pi * (-(v * v) * T::from_f64(0.5)).exp();
        *o = g * (normal_cdf(v) + v * pdf);
    }
    out
}

fn normal_cdf<T: Scalar>(v: T) -> T {
    let half = T::from_f64(0.5);
    let inv_sqrt_2 = T::from_f64(core::f64::consts::FRAC_1_SQRT_2);
    half * (T::one() + (v * inv_sqrt_2).erf())
}

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1−rate); the returned
/// mask holds those per-element multipliers for backward. Inference mode is
/// the identity and consumes no randomness, as is rate 0.
pub fn dropout<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut ChaCha12Rng,
    training: bool,
) -> (Tensor<T>, Option<Tensor<T>>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
    if !training || rate == 0.0 {
        return (x.clone(), None);
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - rate));
    let mut out = x.zeros_like();
    let mut mask = x.zeros_like();
    for ((o, m), &v) in out
        .data_mut()
        .iter_mut()
        .zip(mask.data_mut().iter_mut())
        .zip(x.data().iter())
    {
        if uniform_f64(rng) >= rate {
            *m = keep_scale;
            *o = v * keep_scale;
        }
    }
    (out, Some(mask))
}

/// Backward through dropout: multiply by the recorded mask. A `None` mask
/// means the forward was an identity.
pub fn dropout_backward<T: Scalar>(grad_y: &Tensor<T>, mask: Option<&Tensor<T>>) -> Tensor<T> {
    match mask {
        None => grad_y.clone(),
        Some(m) => {
            debug_assert_eq!(m.dims(), grad_y.dims());
            let mut out = grad_y.zeros_like();
            for ((o, &g), &m) in out
                .data_mut()
                .iter_mut()
                .zip(grad_y.data().iter())
                .zip(m.data().iter())
            {
                *o = g * m;
            }
            out
        }
    }
}

/// Row gather: out[i] = table[ids[i]].
pub fn embedding_lookup<T: Scalar>(
    table: &Tensor<T>,
    ids: &[u32],
) -> Result<Tensor<T>, KernelError> {
    let (vocab, h) = (table.rows(), table.cols());
    let mut out = Vec::with_capacity(ids.len() * h);
    for &id in ids {
        let id = id as usize;
        if id >= vocab {
            return Err(KernelError::IdOutOfRange { id, vocab });
        }
        out.extend_from_slice(table.row(id));
    }
    Ok(Tensor::from_vec(&[ids.len(), h], out))
}

/// Scatter-add of output gradients back into the table; duplicate ids
/// accumulate.
pub fn embedding_backward<T: Scalar>(
    vocab: usize,
    ids: &[u32],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let h = grad_out.cols();
    debug_assert_eq!(grad_out.rows(), ids.len());
    let mut grad = Tensor::zeros(&[vocab, h]);
    for (i, &id) in ids.iter().enumerate() {
        let src = grad_out.row(i);
        let dst = grad.row_mut(id as usize);
        for (d, &s) in dst.iter_mut().zip(src.iter()) {
            *d = *d + s;
        }
    }
    grad
}
