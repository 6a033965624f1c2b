//! Probability measures on `R^d` and the statistics computed from them.
//!
//! Three representations share the [`Measure`] trait: normalized densities on
//! uniform grids, Gaussians integrated by Gauss–Hermite, and equally weighted
//! empirical measures. Divergences and transport distances live in
//! [`divergence`].

pub mod divergence;
mod empirical;
mod gaussian;
mod grid;

pub use divergence::{covariance_opnorm, kl_divergence, w2_distance_1d};
pub use empirical::EmpiricalMeasure;
pub use gaussian::GaussianMeasure;
pub use grid::{Axis, Cdf1d, GridDensity, GridHeader};
pub(crate) use grid::{catmull_rom, catmull_rom_slope};

use crate::linalg::Matrix;
use crate::scalar::Real;

/// Relative tolerance of every power iteration in the crate.
pub const POWER_ITERATION_TOL: f64 = 1e-10;

/// A probability measure that can integrate functions.
pub trait Measure<T: Real>: Sync {
    fn dim(&self) -> usize;

    /// Integrates a vector-valued function: `f(x, out)` writes `k` values for
    /// the point `x` and the returned vector holds their integrals.
    fn integrate(&self, k: usize, f: &mut dyn FnMut(&[T], &mut [T])) -> Vec<T>;

    fn expect(&self, f: &mut dyn FnMut(&[T]) -> T) -> T {
        self.integrate(1, &mut |x, out| out[0] = f(x))[0]
    }

    fn mean(&self) -> Vec<T> {
        let d = self.dim();
        self.integrate(d, &mut |x, out| out.copy_from_slice(x))
    }

    fn covariance(&self) -> Matrix<T> {
        let d = self.dim();
        let m = self.mean();
        let flat = self.integrate(d * d, &mut |x, out| {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        });
        let mut c = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                // symmetrize exactly
                c[(i, j)] = (flat[i * d + j] + flat[j * d + i]) / T::lit(2.0);
            }
        }
        c
    }
}

/// Finite convex combination `Σ wₖ νₖ` of measures of a common dimension.
pub struct Mixture<'a, T: Real> {
    parts: Vec<(T, &'a dyn Measure<T>)>,
}

impl<'a, T: Real> Mixture<'a, T> {
    /// Weights must be nonnegative; they are used as given (not renormalized).
    pub fn new(parts: Vec<(T, &'a dyn Measure<T>)>) -> crate::Result<Self> {
        let Some(&(_, first)) = parts.first() else {
            return crate::error::reject("mixture with no components");
        };
        if parts.iter().any(|(w, m)| *w < T::zero() || m.dim() != first.dim()) {
            return crate::error::reject("mixture weights must be >= 0 with equal dimensions");
        }
        Ok(Self { parts })
    }

    /// `(1 − s) a + s b`.
    pub fn segment(a: &'a dyn Measure<T>, b: &'a dyn Measure<T>, s: T) -> crate::Result<Self> {
        Self::new(vec![(T::one() - s, a), (s, b)])
    }
}

impl<T: Real> Measure<T> for Mixture<'_, T> {
    fn dim(&self) -> usize {
        self.parts[0].1.dim()
    }

    fn integrate(&self, k: usize, f: &mut dyn FnMut(&[T], &mut [T])) -> Vec<T> {
        let mut acc = vec![T::zero(); k];
        for (w, m) in &self.parts {
            if *w == T::zero() {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(m.integrate(k, f)) {
                *a = *a + *w * v;
            }
        }
        acc
    }
}
