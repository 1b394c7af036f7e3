use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::Float;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Floating-point element type of network tensors.
///
/// Production models run in `f32`; gradient verification uses `f64`.
pub trait Scalar:
    LinalgScalar + ScalarOperand + Float + Debug + Display + Default + Sum + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    fn cast_from(v: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Hyperbolic tangent used by the network layers.
    fn activation(self) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn cast_from(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    #[inline]
    fn activation(self) -> Self {
        tanh_f32(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cast_from(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn activation(self) -> Self {
        self.tanh()
    }
}

/// Branch-free rational tanh, within a few ulp of libm and strictly inside
/// (-1, 1). Vectorizes where the libm call does not.
#[inline]
pub fn tanh_f32(x: f32) -> f32 {
    const CLAMP: f32 = 7.905_311;
    const A1: f32 = 4.893_524_6e-3;
    const A3: f32 = 6.372_619_3e-4;
    const A5: f32 = 1.485_722_4e-5;
    const A7: f32 = 5.122_297e-8;
    const A9: f32 = -8.604_672e-11;
    const A11: f32 = 2.000_188e-13;
    const A13: f32 = -2.760_768_5e-16;
    const B0: f32 = 4.893_525_2e-3;
    const B2: f32 = 2.268_434_6e-3;
    const B4: f32 = 1.185_347_1e-4;
    const B6: f32 = 1.198_258_4e-6;
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let mut p = x2 * A13 + A11;
    p = x2 * p + A9;
    p = x2 * p + A7;
    p = x2 * p + A5;
    p = x2 * p + A3;
    p = x2 * p + A1;
    p *= x;
    let mut q = x2 * B6 + B4;
    q = x2 * q + B2;
    q = x2 * q + B0;
    const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;
    (p / q).clamp(-BELOW_ONE, BELOW_ONE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_tanh_tracks_libm() {
        let mut worst = 0.0f64;
        for i in -200_000..=200_000 {
            let x = i as f32 * 1e-4;
            let e = (f64::from(tanh_f32(x)) - f64::from(x).tanh()).abs();
            worst = worst.max(e);
            assert!(tanh_f32(x).abs() < 1.0);
        }
        assert!(worst < 5e-7, "worst {worst}");
        assert_eq!(tanh_f32(0.0), 0.0);
        assert!(tanh_f32(f32::MAX) < 1.0 && tanh_f32(f32::MIN) > -1.0);
    }
}
