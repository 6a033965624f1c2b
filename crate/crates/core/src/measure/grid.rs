use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Measure;
use crate::error::{reject, Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// Uniform grid `lo = x₀ < … < x_{n−1} = hi` along one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis<T> {
    pub lo: T,
    pub hi: T,
    pub n: usize,
}

impl<T: Real> Axis<T> {
    pub fn new(lo: T, hi: T, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return reject(format!("invalid axis [{lo}, {hi}] with {n} nodes"));
        }
        Ok(Self { lo, hi, n })
    }

    /// Axis `center ± half_width`.
    pub fn centered(center: T, half_width: T, n: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, n)
    }

    #[inline]
    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::from_usize_lossy(self.n - 1)
    }

    #[inline]
    pub fn node(&self, i: usize) -> T {
        if i == self.n - 1 {
            self.hi
        } else {
            self.lo + self.step() * T::from_usize_lossy(i)
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> T {
        let h = self.step();
        if i == 0 || i == self.n - 1 {
            h / T::lit(2.0)
        } else {
            h
        }
    }
}

/// Axes metadata written next to a density CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridHeader {
    pub dim: usize,
    pub axes: Vec<Axis<f64>>,
    pub mass: f64,
    pub mean: Vec<f64>,
}

/// Normalized density on a uniform grid in one or two dimensions,
/// integrated by the trapezoid rule. Node `(i₀, i₁)` is stored at
/// `i₀·n₁ + i₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T> {
    axes: Vec<Axis<T>>,
    density: Vec<T>,
    log_density: Vec<T>,
}

fn check_axes<T: Real>(axes: &[Axis<T>]) -> Result<usize> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::Unsupported(format!(
            "grids have 1 or 2 axes, got {}",
            axes.len()
        )));
    }
    for a in axes {
        Axis::new(a.lo, a.hi, a.n)?;
    }
    Ok(axes.iter().map(|a| a.n).product())
}

impl<T: Real> GridDensity<T> {
    /// Builds the density `∝ exp(log_u)`, normalized to unit trapezoid mass.
    /// The maximum is subtracted before exponentiating, so large values
    /// cannot overflow; `-∞` entries are allowed and give zero density.
    pub fn from_log_potential(axes: Vec<Axis<T>>, log_u: Vec<T>) -> Result<Self> {
        let len = check_axes(&axes)?;
        if log_u.len() != len {
            return reject(format!("{} log-weights for {len} grid nodes", log_u.len()));
        }
        if log_u.iter().any(|v| v.is_nan() || *v == T::infinity()) {
            return reject("log-weights must be finite or -inf");
        }
        let m = log_u.iter().copied().fold(T::neg_infinity(), T::max);
        if m == T::neg_infinity() {
            return Err(Error::EmptyMeasure);
        }
        let shifted: Vec<T> = log_u.iter().map(|&v| (v - m).exp()).collect();
        let mut g = Self {
            axes,
            density: shifted,
            log_density: Vec::new(),
        };
        let mass = g.mass();
        let log_mass = mass.ln();
        g.density.iter_mut().for_each(|p| *p = *p / mass);
        g.log_density = log_u.iter().map(|&v| v - m - log_mass).collect();
        Ok(g)
    }

    /// Density `∝ exp(f(x))` sampled at the grid nodes.
    pub fn from_log_fn(axes: Vec<Axis<T>>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let len = check_axes(&axes)?;
        let probe = Self {
            axes: axes.clone(),
            density: Vec::new(),
            log_density: Vec::new(),
        };
        let mut buf = vec![T::zero(); axes.len()];
        let log_u = (0..len)
            .map(|idx| {
                probe.node_into(idx, &mut buf);
                f(&buf)
            })
            .collect();
        Self::from_log_potential(axes, log_u)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn log_density(&self) -> &[T] {
        &self.log_density
    }

    /// Coordinates of node `idx`.
    pub fn node_into(&self, idx: usize, out: &mut [T]) {
        match self.axes.as_slice() {
            [a] => out[0] = a.node(idx),
            [a, b] => {
                out[0] = a.node(idx / b.n);
                out[1] = b.node(idx % b.n);
            }
            _ => unreachable!(),
        }
    }

    pub fn node(&self, idx: usize) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim()];
        self.node_into(idx, &mut v);
        v
    }

    /// Trapezoid weight of node `idx` (product over axes).
    #[inline]
    pub fn quadrature_weight(&self, idx: usize) -> T {
        match self.axes.as_slice() {
            [a] => a.weight(idx),
            [a, b] => a.weight(idx / b.n) * b.weight(idx % b.n),
            _ => unreachable!(),
        }
    }

    pub fn quadrature_weights(&self) -> Vec<T> {
        (0..self.density.len())
            .map(|i| self.quadrature_weight(i))
            .collect()
    }

    pub fn mass(&self) -> T {
        let terms: Vec<T> = self
            .density
            .iter()
            .enumerate()
            .map(|(i, &p)| p * self.quadrature_weight(i))
            .collect();
        crate::scalar::pairwise_sum(&terms)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.axes == other.axes
    }

    /// Convex combination `Σ wₖ pₖ` of densities on a common grid. Log
    /// densities are combined by log-sum-exp so tails are kept exactly.
    pub fn mixture(parts: &[(T, &Self)]) -> Result<Self> {
        let Some(&(_, first)) = parts.first() else {
            return reject("mixture of zero densities");
        };
        if parts.iter().any(|(w, g)| !g.same_grid(first) || *w < T::zero()) {
            return reject("mixture components must share a grid and have weights >= 0");
        }
        let total: T = parts.iter().map(|(w, _)| *w).sum();
        if !(total > T::zero()) {
            return reject("mixture weights sum to zero");
        }
        let n = first.len();
        let mut density = vec![T::zero(); n];
        let mut log_density = vec![T::zero(); n];
        let mut scratch = Vec::with_capacity(parts.len());
        for i in 0..n {
            let mut acc = Vec::with_capacity(parts.len());
            scratch.clear();
            for (w, g) in parts {
                let w = *w / total;
                if w > T::zero() {
                    acc.push(w * g.density[i]);
                    scratch.push(w.ln() + g.log_density[i]);
                }
            }
            density[i] = crate::scalar::pairwise_sum(&acc);
            log_density[i] = log_sum_exp(&scratch);
        }
        Ok(Self {
            axes: first.axes.clone(),
            density,
            log_density,
        })
    }

    /// Equal-weight average of densities on a common grid, reduced in a
    /// fixed pairwise order.
    pub fn average(parts: &[&Self]) -> Result<Self> {
        let w = T::one() / T::from_usize_lossy(parts.len().max(1));
        let weighted: Vec<(T, &Self)> = parts.iter().map(|&g| (w, g)).collect();
        Self::mixture(&weighted)
    }

    /// Largest pointwise density gap on a common grid.
    pub fn sup_distance(&self, other: &Self) -> T {
        debug_assert!(self.same_grid(other));
        self.density
            .iter()
            .zip(&other.density)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Number of standard deviations between the mean and the nearest grid
    /// edge, per axis. Values of at least 8 mean the grid covers the density.
    pub fn coverage_sd(&self) -> Vec<T> {
        let mean = self.mean();
        let cov = self.covariance();
        self.axes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let sd = cov[(k, k)].sqrt();
                ((mean[k] - a.lo).min(a.hi - mean[k])) / sd
            })
            .collect()
    }

    /// `max_boundary log p − max log p`: very negative when the density has
    /// decayed before reaching the edge of the grid.
    pub fn boundary_log_ratio(&self) -> T {
        let top = self
            .log_density
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let mut edge = T::neg_infinity();
        let mut buf = vec![0usize; self.dim()];
        for idx in 0..self.len() {
            self.multi_index(idx, &mut buf);
            let on_edge = buf
                .iter()
                .zip(&self.axes)
                .any(|(&i, a)| i == 0 || i == a.n - 1);
            if on_edge {
                edge = edge.max(self.log_density[idx]);
            }
        }
        edge - top
    }

    fn multi_index(&self, idx: usize, out: &mut [usize]) {
        match self.axes.as_slice() {
            [_] => out[0] = idx,
            [_, b] => {
                out[0] = idx / b.n;
                out[1] = idx % b.n;
            }
            _ => unreachable!(),
        }
    }

    fn require_1d(&self, what: &str) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(format!("{what} needs a 1-d grid")));
        }
        Ok(())
    }

    /// Cumulative distribution of a 1-d grid density.
    pub fn cdf(&self) -> Result<Cdf1d<T>> {
        self.require_1d("cdf")?;
        Ok(Cdf1d::new(self.axes[0], &self.density, &self.log_density))
    }

    /// Inverse-CDF draw from a 1-d grid density.
    pub fn sample_1d<R: Rng + ?Sized>(&self, cdf: &Cdf1d<T>, rng: &mut R) -> T {
        let u: f64 = rng.random();
        cdf.quantile(T::lit(u))
    }

    /// Catmull–Rom interpolation of the 1-d log density; `-∞` outside the
    /// grid or next to vanishing nodes.
    pub fn interpolate_log_1d(&self, x: T) -> T {
        let a = self.axes[0];
        if x < a.lo || x > a.hi {
            return T::neg_infinity();
        }
        catmull_rom(&self.log_density, (x - a.lo) / a.step())
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            dim: self.dim(),
            axes: self
                .axes
                .iter()
                .map(|a| Axis {
                    lo: a.lo.as_f64(),
                    hi: a.hi.as_f64(),
                    n: a.n,
                })
                .collect(),
            mass: self.mass().as_f64(),
            mean: self.mean().iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// CSV with columns `node, x1[, x2], weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut head = vec!["node".to_string()];
        head.extend((1..=self.dim()).map(|k| format!("x{k}")));
        head.push("weight".into());
        out.write_record(&head)?;
        let mut buf = vec![T::zero(); self.dim()];
        for (idx, &p) in self.density.iter().enumerate() {
            self.node_into(idx, &mut buf);
            let mut rec = vec![idx.to_string()];
            rec.extend(buf.iter().map(|v| v.as_f64().to_string()));
            rec.push(p.as_f64().to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<T: Real> Measure<T> for GridDensity<T> {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn integrate(&self, k: usize, f: &mut dyn FnMut(&[T], &mut [T])) -> Vec<T> {
        let mut acc = vec![T::zero(); k];
        let mut vals = vec![T::zero(); k];
        let mut x = vec![T::zero(); self.dim()];
        for (idx, &p) in self.density.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            self.node_into(idx, &mut x);
            f(&x, &mut vals);
            let w = p * self.quadrature_weight(idx);
            for (a, &v) in acc.iter_mut().zip(&vals) {
                *a = *a + w * v;
            }
        }
        acc
    }
}

/// CDF of a 1-d grid density whose logarithm is interpolated linearly
/// within each cell, so exponential and Gaussian tails are resolved without
/// the `h²` variance inflation of linear density interpolation. Cells next to
/// a vanishing node fall back to a linear density.
#[derive(Debug, Clone)]
pub struct Cdf1d<T> {
    axis: Axis<T>,
    density: Vec<T>,
    slope: Vec<T>,
    cum: Vec<T>,
}

fn cell_mass<T: Real>(h: T, p: T, q: T, beta: T) -> T {
    if !beta.is_finite() {
        h * (p + q) / T::lit(2.0)
    } else if beta.abs() > T::lit(1e-3) {
        h * (q - p) / beta
    } else if beta == T::zero() {
        h * p
    } else {
        h * p * beta.exp_m1() / beta
    }
}

impl<T: Real> Cdf1d<T> {
    fn new(axis: Axis<T>, density: &[T], log_density: &[T]) -> Self {
        let h = axis.step();
        let slope: Vec<T> = log_density
            .windows(2)
            .map(|w| {
                if w[0].is_finite() && w[1].is_finite() {
                    w[1] - w[0]
                } else {
                    T::nan()
                }
            })
            .collect();
        let mut cum = Vec::with_capacity(density.len());
        let mut c = T::zero();
        cum.push(c);
        for (k, &beta) in slope.iter().enumerate() {
            c = c + cell_mass(h, density[k], density[k + 1], beta);
            cum.push(c);
        }
        let total = c;
        cum.iter_mut().for_each(|v| *v = *v / total);
        let density = density.iter().map(|&p| p / total).collect();
        Self {
            axis,
            density,
            slope,
            cum,
        }
    }

    /// CDF values at the nodes; the last entry is exactly one.
    pub fn node_values(&self) -> &[T] {
        &self.cum
    }

    pub fn axis(&self) -> Axis<T> {
        self.axis
    }

    /// Cell `k` containing level `u` (`cum[k] ≤ u ≤ cum[k+1]`).
    pub fn cell_of(&self, u: T) -> usize {
        let n = self.cum.len();
        let k = self.cum.partition_point(|&c| c <= u);
        k.saturating_sub(1).min(n - 2)
    }

    /// Quantile restricted to cell `k`.
    pub fn quantile_in_cell(&self, k: usize, u: T) -> T {
        let h = self.axis.step();
        let (a, b, beta) = (self.density[k], self.density[k + 1], self.slope[k]);
        let m = (u - self.cum[k]).max(T::zero());
        let s = if m == T::zero() {
            T::zero()
        } else if beta.is_finite() && a > T::zero() {
            if beta == T::zero() {
                m / (h * a)
            } else {
                (m * beta / (h * a)).ln_1p() / beta
            }
        } else {
            let r = m / h;
            let disc = (a * a + T::lit(2.0) * (b - a) * r).max(T::zero());
            let den = a + disc.sqrt();
            if den > T::zero() {
                T::lit(2.0) * r / den
            } else {
                T::zero()
            }
        };
        let s = if s.is_nan() { T::one() } else { s };
        self.axis.node(k) + h * s.max(T::zero()).min(T::one())
    }

    pub fn quantile(&self, u: T) -> T {
        let u = u.max(T::zero()).min(T::one());
        self.quantile_in_cell(self.cell_of(u), u)
    }

    /// CDF at an arbitrary point.
    pub fn eval(&self, x: T) -> T {
        let a = self.axis;
        if x <= a.lo {
            return T::zero();
        }
        if x >= a.hi {
            return T::one();
        }
        let h = a.step();
        let k = ((x - a.lo) / h).floor().to_usize().unwrap_or(0).min(a.n - 2);
        let s = (x - a.node(k)) / h;
        let (p, q, beta) = (self.density[k], self.density[k + 1], self.slope[k]);
        let part = if beta.is_finite() {
            if beta == T::zero() {
                h * p * s
            } else {
                h * p * (beta * s).exp_m1() / beta
            }
        } else {
            h * (p * s + (q - p) * s * s / T::lit(2.0))
        };
        (self.cum[k] + part).min(T::one())
    }
}

fn catmull_rom_stencil<T: Real>(v: &[T], s: T) -> ([T; 4], T) {
    let n = v.len();
    let k = s.floor().to_usize().unwrap_or(0).min(n - 2);
    let f = s - T::from_usize_lossy(k);
    let at = |i: isize| v[i.clamp(0, n as isize - 1) as usize];
    let ki = k as isize;
    ([at(ki - 1), at(ki), at(ki + 1), at(ki + 2)], f)
}

/// Catmull–Rom interpolation of uniformly spaced values `v` at fractional
/// index `s ∈ [0, len − 1]`; linear next to non-finite values.
pub(crate) fn catmull_rom<T: Real>(v: &[T], s: T) -> T {
    let ([p0, p1, p2, p3], f) = catmull_rom_stencil(v, s);
    if [p0, p1, p2, p3].iter().any(|v| !v.is_finite()) {
        return p1 + (p2 - p1) * f;
    }
    let half = T::lit(0.5);
    let f2 = f * f;
    let f3 = f2 * f;
    half * ((T::lit(2.0) * p1)
        + (p2 - p0) * f
        + (T::lit(2.0) * p0 - T::lit(5.0) * p1 + T::lit(4.0) * p2 - p3) * f2
        + (-p0 + T::lit(3.0) * p1 - T::lit(3.0) * p2 + p3) * f3)
}

/// Derivative of [`catmull_rom`] with respect to `s`. At nodes this is the
/// central difference.
pub(crate) fn catmull_rom_slope<T: Real>(v: &[T], s: T) -> T {
    let ([p0, p1, p2, p3], f) = catmull_rom_stencil(v, s);
    if [p0, p1, p2, p3].iter().any(|v| !v.is_finite()) {
        return p2 - p1;
    }
    let half = T::lit(0.5);
    half * ((p2 - p0)
        + T::lit(2.0) * (T::lit(2.0) * p0 - T::lit(5.0) * p1 + T::lit(4.0) * p2 - p3) * f
        + T::lit(3.0) * (-p0 + T::lit(3.0) * p1 - T::lit(3.0) * p2 + p3) * f * f)
}
