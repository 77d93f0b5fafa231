//! Floating-point element types the numeric code is generic over.
//!
//! Everything numerical (tensors, kernels, the model, the optimizer) is
//! written against [`Scalar`] so the same code runs in 32-bit production
//! mode and in 64-bit verification mode. Transcendentals route through
//! `libm` (via the `num-traits/libm` feature), which keeps results
//! identical whether or not the crate is built against `std`.

use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::Float;

/// Tensor element: an IEEE float with the extra functions the model needs.
pub trait Scalar:
    Float + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Gauss error function, used by the exact-form GELU.
    fn erf(self) -> Self;

    fn from_f64(value: f64) -> Self;

    fn as_f64(self) -> f64;

    fn from_usize(value: usize) -> Self {
        Self::from_f64(value as f64)
    }
}

impl Scalar for f32 {
    fn erf(self) -> Self {
        libm::erff(self)
    }

    fn from_f64(value: f64) -> Self {
        value as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn erf(self) -> Self {
        libm::erf(self)
    }

    fn from_f64(value: f64) -> Self {
        value
    }

    fn as_f64(self) -> f64 {
        self
    }
}
