use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point element type used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Logistic sigmoid, evaluated without overflow for large |z|.
    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }

    /// `log(1 + exp(z))` in the stable form `max(z, 0) + log1p(exp(-|z|))`.
    fn softplus(self) -> Self {
        self.max(Self::zero()) + (-self.abs()).exp().ln_1p()
    }

    /// `log sigma(z) = -softplus(-z)`.
    fn log_sigmoid(self) -> Self {
        -(-self).softplus()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(0.0f64.sigmoid(), 0.5);
        assert_eq!(0.0f32.sigmoid(), 0.5);
    }

    #[test]
    fn log_sigmoid_is_finite_at_extremes() {
        assert!((-1e4f64).log_sigmoid().is_finite());
        assert!((-1e4f64).log_sigmoid() < -9_999.0);
        assert_eq!(1e4f64.log_sigmoid(), 0.0);
        assert!((0.0f64.log_sigmoid() + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn log_sigmoid_matches_naive_in_moderate_range() {
        for i in -40..=40 {
            let z = i as f64 * 0.5;
            let naive = (1.0 / (1.0 + (-z).exp())).ln();
            assert!((z.log_sigmoid() - naive).abs() < 1e-12, "z={z}");
        }
    }
}
