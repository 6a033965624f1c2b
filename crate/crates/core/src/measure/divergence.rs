//! Divergences, transport distances and covariance statistics.

use super::{GridDensity, Measure, POWER_ITERATION_TOL};
use crate::error::{reject, Error, Result};
use crate::linalg::Matrix;
use crate::quadrature::GAUSS_LEGENDRE_5;
use crate::scalar::{pairwise_sum, Real};

/// Densities below this are treated as zero by [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-300;

/// `KL(p ‖ q) = ∫ p log(p/q)` by trapezoid quadrature on a shared grid.
pub fn kl_divergence<T: Real>(p: &GridDensity<T>, q: &GridDensity<T>) -> Result<T> {
    if !p.same_grid(q) {
        return reject("kl_divergence needs both densities on the same grid");
    }
    let floor = T::lit(KL_FLOOR);
    let mut violations = 0;
    let mut terms = Vec::with_capacity(p.len());
    for (i, (&pi, &qi)) in p.density().iter().zip(q.density()).enumerate() {
        if !(pi >= floor) {
            continue;
        }
        let (lp, lq) = (p.log_density()[i], q.log_density()[i]);
        if qi == T::zero() && lq == T::neg_infinity() {
            violations += 1;
            continue;
        }
        terms.push(p.quadrature_weight(i) * pi * (lp - lq));
    }
    if violations > 0 {
        return Err(Error::SupportViolation { nodes: violations });
    }
    Ok(pairwise_sum(&terms))
}

/// Covariance matrix and its largest eigenvalue.
pub fn covariance_opnorm<T: Real>(p: &dyn Measure<T>) -> (Matrix<T>, T) {
    let c = p.covariance();
    let top = c.power_iteration(T::lit(POWER_ITERATION_TOL));
    (c, top)
}

/// Quadratic Wasserstein distance between two 1-d grid densities through
/// the quantile coupling `W₂² = ∫₀¹ (F_p⁻¹ − F_q⁻¹)² du`.
///
/// Each density is piecewise linear on its grid, so each quantile function
/// is smooth between consecutive CDF node levels. The levels of both CDFs
/// are merged and every piece integrated by five-point Gauss–Legendre.
pub fn w2_distance_1d<T: Real>(p: &GridDensity<T>, q: &GridDensity<T>) -> Result<T> {
    let (cp, cq) = (p.cdf()?, q.cdf()?);
    let mut levels: Vec<T> = cp
        .node_values()
        .iter()
        .chain(cq.node_values())
        .copied()
        .collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite CDF levels"));
    levels.dedup();
    let mut pieces = Vec::with_capacity(levels.len());
    let half = T::lit(0.5);
    for w in levels.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let mid = (a + b) * half;
        let (kp, kq) = (cp.cell_of(mid), cq.cell_of(mid));
        let hw = (b - a) * half;
        let s: T = GAUSS_LEGENDRE_5
            .iter()
            .map(|&(x, wt)| {
                let u = mid + hw * T::lit(x);
                let d = cp.quantile_in_cell(kp, u) - cq.quantile_in_cell(kq, u);
                T::lit(wt) * d * d
            })
            .sum();
        pieces.push(s * hw);
    }
    Ok(pairwise_sum(&pieces).max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Axis, EmpiricalMeasure, GaussianMeasure};

    fn gauss(m: f64, v: f64) -> GridDensity<f64> {
        GridDensity::from_log_fn(vec![Axis::new(-12.0, 12.0, 2048).unwrap()], |x| {
            -(x[0] - m).powi(2) / (2.0 * v)
        })
        .unwrap()
    }

    #[test]
    fn kl_closed_forms() {
        let p = gauss(0.0, 1.0);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let m = 0.7;
        let kl = kl_divergence(&p, &gauss(m, 1.0)).unwrap();
        assert!((kl - m * m / 2.0).abs() < 1e-6, "{kl}");
        let s2 = 0.6;
        let kl = kl_divergence(&gauss(0.0, s2), &p).unwrap();
        assert!((kl - (s2 - 1.0 - s2.ln()) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn kl_reports_support_violations() {
        let ax = vec![Axis::new(0.0, 1.0, 5).unwrap()];
        let p = GridDensity::from_log_potential(ax.clone(), vec![0.0; 5]).unwrap();
        let q = GridDensity::from_log_potential(
            ax,
            vec![0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, 0.0],
        )
        .unwrap();
        assert!(matches!(
            kl_divergence(&p, &q),
            Err(Error::SupportViolation { nodes: 2 })
        ));
        assert!(kl_divergence(&q, &p).is_ok());
    }

    #[test]
    fn w2_closed_forms() {
        let p = gauss(0.0, 1.0);
        assert!(w2_distance_1d(&p, &p).unwrap() < 1e-12);
        let d = w2_distance_1d(&p, &gauss(0.8, 1.0)).unwrap();
        assert!((d - 0.8).abs() < 1e-6, "{d}");
        let s: f64 = 0.5;
        let d = w2_distance_1d(&p, &gauss(0.0, s * s)).unwrap();
        assert!((d - (s - 1.0).abs()).abs() < 1e-6, "{d}");
        let e = w2_distance_1d(&gauss(0.0, s * s), &p).unwrap();
        assert!((d - e).abs() < 1e-12);
    }

    #[test]
    fn w2_across_different_grids() {
        let p = gauss(0.0, 1.0);
        let q = GridDensity::from_log_fn(vec![Axis::new(-9.0_f64, 11.0, 1500).unwrap()], |x| {
            -(x[0] - 1.0).powi(2) / 2.0
        })
        .unwrap();
        assert!((w2_distance_1d(&p, &q).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn w2_rejects_two_dimensional_grids() {
        let ax = Axis::new(-1.0, 1.0, 4).unwrap();
        let g = GridDensity::from_log_potential(vec![ax, ax], vec![0.0; 16]).unwrap();
        assert!(matches!(w2_distance_1d(&g, &g), Err(Error::Unsupported(_))));
    }

    #[test]
    fn opnorm_examples() {
        let cov = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let g = GaussianMeasure::new(vec![0.0, 0.0], cov.clone()).unwrap();
        let (c, top) = covariance_opnorm(&g);
        assert_eq!(c, cov);
        let exact = 1.5 + (0.25_f64 + 0.09).sqrt();
        assert!((top - exact).abs() < 1e-9);
        let (_, v) = covariance_opnorm(&gauss(0.0, 0.3));
        assert!((v - 0.3).abs() < 1e-6);
        let e = EmpiricalMeasure::new(vec![-1.0, 1.0], 1).unwrap();
        assert_eq!(covariance_opnorm(&e).1, 1.0);
    }
}
