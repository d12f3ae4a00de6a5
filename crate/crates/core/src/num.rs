//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the models are evaluated in: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal or sample into this scalar type.
    fn of(x: f64) -> Self;

    /// Lossy conversion back to `f64`, used for I/O and random draws.
    fn to_f64_lossy(self) -> f64;

    /// Converts a count.
    fn count(n: usize) -> Self {
        Self::of(n as f64)
    }
}

macro_rules! impl_real {
    ($f:ty) => {
        impl Real for $f {
            #[inline]
            fn of(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// `log(1 - exp(-x))` for `x >= 0`, accurate for both small and large `x`.
pub fn log_one_minus_exp_neg<F: Real>(x: F) -> F {
    if x <= F::zero() {
        return F::neg_infinity();
    }
    if x.is_infinite() {
        return F::zero();
    }
    if x < F::LN_2() {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

/// Mean of a slice; `NaN` when empty. Shifted by the first value, so a
/// constant slice gives that constant exactly.
pub fn mean<F: Real>(xs: &[F]) -> F {
    let Some(&x0) = xs.first() else {
        return F::nan();
    };
    x0 + xs.iter().map(|&x| x - x0).sum::<F>() / F::count(xs.len())
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance<F: Real>(xs: &[F]) -> F {
    if xs.len() < 2 {
        return F::zero();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>() / F::count(xs.len() - 1)
}
