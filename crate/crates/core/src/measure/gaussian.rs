use rand::Rng;
use rand_distr::StandardNormal;

use super::Measure;
use crate::error::{reject, Result};
use crate::linalg::Matrix;
use crate::quadrature::standard_normal_rule;
use crate::scalar::Real;

/// Gauss–Hermite nodes per axis.
pub const HERMITE_NODES: usize = 64;

/// Nondegenerate Gaussian `N(mean, covariance)`. Integrals use a tensor
/// Gauss–Hermite rule mapped through the Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianMeasure<T: Real> {
    mean: Vec<T>,
    covariance: Matrix<T>,
    chol: Matrix<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussianMeasure<T> {
    pub fn new(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.rows() != d || !covariance.is_square() {
            return reject("gaussian mean and covariance dimensions disagree");
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return reject("gaussian mean must be finite");
        }
        let scale = (0..d)
            .map(|i| covariance[(i, i)].abs())
            .fold(T::one(), T::max);
        if covariance.asymmetry() > T::lit(1e-12) * scale {
            return reject("gaussian covariance is not symmetric");
        }
        let chol = covariance.cholesky()?;
        let (nodes, weights) = standard_normal_rule(HERMITE_NODES);
        Ok(Self {
            mean,
            covariance,
            chol,
            nodes,
            weights,
        })
    }

    /// `N(mean, variance)` on the line.
    pub fn univariate(mean: T, variance: T) -> Result<Self> {
        Self::new(vec![mean], Matrix::diagonal(&[variance]))
    }

    /// Standard Gaussian `γ` in dimension `d`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![T::zero(); d], Matrix::identity(d))
    }

    pub fn covariance_matrix(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn mean_vector(&self) -> &[T] {
        &self.mean
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &[T]) -> T {
        let d = self.mean.len();
        // forward substitution L z = x − m
        let mut z = vec![T::zero(); d];
        let mut log_det = T::zero();
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for k in 0..i {
                s = s - self.chol[(i, k)] * z[k];
            }
            z[i] = s / self.chol[(i, i)];
            log_det = log_det + self.chol[(i, i)].ln();
        }
        let half = T::lit(0.5);
        -half * crate::scalar::norm_sq(&z)
            - log_det
            - half * T::from_usize_lossy(d) * (T::lit(2.0) * T::PI()).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let d = self.mean.len();
        let z: Vec<T> = (0..d)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        self.map_standard(&z)
    }

    fn map_standard(&self, z: &[T]) -> Vec<T> {
        let d = self.mean.len();
        (0..d)
            .map(|i| {
                (0..=i).fold(self.mean[i], |acc, k| acc + self.chol[(i, k)] * z[k])
            })
            .collect()
    }
}

impl<T: Real> Measure<T> for GaussianMeasure<T> {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn integrate(&self, k: usize, f: &mut dyn FnMut(&[T], &mut [T])) -> Vec<T> {
        let d = self.mean.len();
        let n = self.nodes.len();
        let mut acc = vec![T::zero(); k];
        let mut vals = vec![T::zero(); k];
        let mut idx = vec![0usize; d];
        let mut z = vec![T::zero(); d];
        loop {
            let mut w = T::one();
            for (a, &i) in idx.iter().enumerate() {
                z[a] = self.nodes[i];
                w = w * self.weights[i];
            }
            let x = self.map_standard(&z);
            f(&x, &mut vals);
            for (a, &v) in acc.iter_mut().zip(&vals) {
                *a = *a + w * v;
            }
            // odometer increment
            let mut a = 0;
            loop {
                if a == d {
                    return acc;
                }
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }

    fn mean(&self) -> Vec<T> {
        self.mean.clone()
    }

    fn covariance(&self) -> Matrix<T> {
        self.covariance.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_integrals_match_moments() {
        let cov = Matrix::from_rows(&[vec![2.0_f64, 0.5], vec![0.5, 1.0]]).unwrap();
        let g = GaussianMeasure::new(vec![1.0, -1.0], cov).unwrap();
        let m = g.integrate(2, &mut |x, o| o.copy_from_slice(x));
        assert!((m[0] - 1.0).abs() < 1e-12 && (m[1] + 1.0).abs() < 1e-12);
        let xy = g.expect(&mut |x| (x[0] - 1.0) * (x[1] + 1.0));
        assert!((xy - 0.5).abs() < 1e-12);
        let e4 = g.expect(&mut |x| (x[0] - 1.0).powi(4));
        assert!((e4 - 12.0).abs() < 1e-10);
    }

    #[test]
    fn log_density_normalizes() {
        let g = GaussianMeasure::<f64>::univariate(0.3, 0.7).unwrap();
        let h = 1e-3;
        let mass: f64 = (0..24_000)
            .map(|i| g.log_density(&[-12.0 + h * (i as f64 + 0.5)]).exp() * h)
            .sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_indefinite_or_asymmetric() {
        let bad = Matrix::from_rows(&[vec![1.0_f64, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(GaussianMeasure::new(vec![0.0, 0.0], bad).is_err());
        let asym = Matrix::from_rows(&[vec![1.0_f64, 0.1], vec![0.0, 1.0]]).unwrap();
        assert!(GaussianMeasure::new(vec![0.0, 0.0], asym).is_err());
    }
}
