//! Floating-point scalar abstraction used by the statistics and regression code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// floating point: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64`; panics only if the target cannot
    /// represent the value at all (never for f32/f64).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("scalar conversion from usize")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Standard normal upper tail, `P(Z > z)`.
pub(crate) fn normal_sf<F: Scalar>(z: F) -> F {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    F::of(n.sf(z.as_f64()))
}

/// Two-sided normal p-value `2 * (1 - Phi(|z|))`, clamped to `[0, 1]`.
pub(crate) fn two_sided_normal_p<F: Scalar>(z: F) -> F {
    let p = F::of(2.0) * normal_sf(z.abs());
    p.min(F::one()).max(F::zero())
}

/// Chi-square upper tail with `df` degrees of freedom.
pub(crate) fn chi2_sf<F: Scalar>(x: F, df: usize) -> F {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= F::zero() {
        return F::one();
    }
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    F::of(dist.sf(x.as_f64())).min(F::one()).max(F::zero())
}
