use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the whole crate is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Dot product of two equally long slices.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `log(Σ exp(xᵢ))`, stable for large magnitudes. Empty input gives `-∞`.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Pairwise summation; the reduction order is fixed so results do not
/// depend on how callers chunk their work.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= 32 {
        return xs.iter().copied().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `n` points log-spaced between `lo` and `hi` inclusive.
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && lo > T::zero() && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| (a + (b - a) * T::from_usize_lossy(i) / last).exp())
        .collect()
}

/// `n` points linearly spaced between `lo` and `hi` inclusive.
pub fn lin_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / last)
        .collect()
}
