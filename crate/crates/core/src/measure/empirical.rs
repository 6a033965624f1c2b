use super::Measure;
use crate::error::{reject, Result};
use crate::scalar::Real;

/// Uniform atomic measure `(1/N) Σ δ_{xⁱ}` on `N` points of `R^d`, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    points: Vec<T>,
    dim: usize,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn new(points: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return reject(format!(
                "{} coordinates do not form points of dimension {dim}",
                points.len()
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return reject("empirical measure with non-finite coordinates");
        }
        Ok(Self { points, dim })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return reject("ragged particle rows");
        }
        Self::new(rows.iter().flatten().copied().collect(), dim)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }
}

impl<T: Real> Measure<T> for EmpiricalMeasure<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn integrate(&self, k: usize, f: &mut dyn FnMut(&[T], &mut [T])) -> Vec<T> {
        let mut acc = vec![T::zero(); k];
        let mut vals = vec![T::zero(); k];
        for x in self.points.chunks(self.dim) {
            f(x, &mut vals);
            for (a, &v) in acc.iter_mut().zip(&vals) {
                *a = *a + v;
            }
        }
        let n = T::from_usize_lossy(self.len());
        acc.iter_mut().for_each(|a| *a = *a / n);
        acc
    }
}
