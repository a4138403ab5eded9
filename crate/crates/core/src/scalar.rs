//! Floating point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;
use rand::distr::weighted::Weight;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used throughout the crate: `f32` or `f64`.
///
/// Random variates are exposed as methods so generic code does not need to
/// carry `StandardNormal: Distribution<T>`-style bounds around.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + SampleUniform
    + Weight
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform variate on the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma variate with the given shape and scale; `None` for invalid arguments.
    fn gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Option<Self>;

    fn normal<R: Rng + ?Sized>(mean: Self, sd: Self, rng: &mut R) -> Self {
        mean + sd * Self::std_normal(rng)
    }

    /// Inverse-gamma variate parameterised by shape `a` and scale `b`
    /// (density proportional to `x^(-a-1) exp(-b/x)`).
    fn inverse_gamma<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Option<Self> {
        Self::gamma(a, Self::one() / b, rng).map(|g| Self::one() / g)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Option<Self> {
                Gamma::new(shape, scale).ok().map(|g| g.sample(rng))
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Mean and (n-1)-denominator standard deviation.
pub(crate) fn mean_sd<T: Real>(xs: &[T]) -> (T, T) {
    if xs.is_empty() {
        return (T::nan(), T::nan());
    }
    let n = T::from_usize(xs.len()).unwrap();
    let mean = xs.iter().copied().sum::<T>() / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let ss = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>();
    (mean, (ss / (n - T::one())).sqrt())
}
