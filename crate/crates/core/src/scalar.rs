use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{ComplexField, RealField};
pub use nalgebra::Complex;

/// Real floating-point type the numerics are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are
/// tuned for `f64`; `f32` works but only at single-precision accuracy.
pub trait Real: RealField + Scalar<Real = Self> + Copy + Debug + Display + LowerExp + Send + Sync + 'static {
    /// Machine epsilon.
    fn eps() -> Self;
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self;
    /// Lossy conversion to `f64`.
    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($($t:ty),*) => {
        $(
            impl Real for $t {
                #[inline]
                fn eps() -> Self {
                    <$t>::EPSILON
                }
                #[inline]
                fn of(x: f64) -> Self {
                    x as $t
                }
                #[inline]
                fn as_f64(self) -> f64 {
                    self as f64
                }
            }
        )*
    };
}
impl_real!(f32, f64);

/// Entry type of a tensor or matrix: a real float or a complex number over one.
///
/// `Scalar::Real` is the underlying real type, used for norms and tolerances.
pub trait Scalar: ComplexField<RealField = <Self as Scalar>::Real> + Copy + Debug + Send + Sync + 'static {
    type Real: Real;

    /// True when the type carries an imaginary part.
    const IS_COMPLEX: bool;

    fn from_parts(re: Self::Real, im: Self::Real) -> Self;

    fn re_part(self) -> Self::Real;

    fn im_part(self) -> Self::Real;

    fn cst(x: f64) -> Self {
        Self::from_real(<Self::Real as Real>::of(x))
    }
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {
        $(
            impl Scalar for $t {
                type Real = $t;
                const IS_COMPLEX: bool = false;

                #[inline]
                fn from_parts(re: $t, _im: $t) -> Self {
                    re
                }
                #[inline]
                fn re_part(self) -> $t {
                    self
                }
                #[inline]
                fn im_part(self) -> $t {
                    0.0
                }
            }

        )*
    };
}
impl_scalar!(f32, f64);

impl<T: Real> Scalar for Complex<T> {
    type Real = T;
    const IS_COMPLEX: bool = true;

    #[inline]
    fn from_parts(re: T, im: T) -> Self {
        Complex::new(re, im)
    }
    #[inline]
    fn re_part(self) -> T {
        self.re
    }
    #[inline]
    fn im_part(self) -> T {
        self.im
    }
}

/// Principal cube root, `|z|^{1/3} e^{i arg(z)/3}` with `arg ∈ (-π, π]`.
pub fn principal_cbrt<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.re == T::zero() && z.im == T::zero() {
        return z;
    }
    let modulus = z.re.hypot(z.im);
    let arg = z.im.atan2(z.re);
    let third = T::of(1.0 / 3.0);
    let m = modulus.powf(third);
    let a = arg * third;
    Complex::new(m * a.cos(), m * a.sin())
}
