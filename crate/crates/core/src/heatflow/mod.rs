//! Reverse heat flow: covariance profiles of tilted measures, the
//! Ornstein–Uhlenbeck semigroup on grids, and transport maps from the
//! standard Gaussian built by running the heat flow backwards.
//!
//! Everything here lives in total dimension at most two: one particle in
//! `d ≤ 2`, or two particles in `d = 1`.

mod flow;
mod tilt;

pub use flow::{
    lipschitz_estimate, ou_evolve, pushforward_density, reverse_flow_map, std_normal_cdf,
    FlowConfig, FlowMap, MonotoneCubic,
};
pub use tilt::{
    covariance_profile, default_t_grid, fit_tilt_terms, fitted_lipschitz_bound, tilt_log_weight,
    tilted_measure, CovarianceProfile, EnvelopeConstants, ProfileConfig, ProfileRow, Regime,
    DECAY_NATS,
};

use crate::error::{Error, Result};
use crate::meanfield::default_axes;
use crate::measure::{Axis, GridDensity};
use crate::quadrature::exp_sinh;
use crate::sampler::TargetSpec;
use crate::scalar::Real;

/// Axes for the joint density of all particles: the per-particle default
/// axes repeated once per particle.
pub fn particle_axes<T: Real>(target: &TargetSpec<T>, points: Option<usize>) -> Result<Vec<Axis<T>>> {
    if target.total_dim() > 2 {
        return Err(Error::Unsupported(format!(
            "joint grids in dimension {}",
            target.total_dim()
        )));
    }
    let per = default_axes(target, points)?;
    Ok((0..target.n()).flat_map(|_| per.iter().copied()).collect())
}

/// The particle measure `μ^{1:N}` of a target on a grid.
pub fn particle_measure<T: Real>(target: &TargetSpec<T>, axes: Vec<Axis<T>>) -> Result<GridDensity<T>> {
    GridDensity::from_log_fn(axes, |x| target.log_density(x))
}

/// `∫₀^∞ e^{2t}(e^{2t}−1)^{k−2} / (α(e^{2t}−1)+1)^k dt` by quadrature.
pub fn heat_flow_integral(alpha: f64, k: f64) -> f64 {
    exp_sinh(
        |t: f64| {
            let tau = (2.0 * t).exp_m1();
            (tau + 1.0) * tau.powf(k - 2.0) / (alpha * tau + 1.0).powf(k)
        },
        1e-13,
    )
}

/// Its closed form `1/(2(k−1)α^{k−1})`.
pub fn heat_flow_integral_exact(alpha: f64, k: f64) -> f64 {
    1.0 / (2.0 * (k - 1.0) * alpha.powf(k - 1.0))
}

/// `∫₀^∞ (1−α)/(α(e^{2t}−1)+1) dt` by quadrature; equals `−(1/2) log α`.
pub fn log_term_integral(alpha: f64) -> f64 {
    exp_sinh(
        |t: f64| (1.0 - alpha) / (alpha * (2.0 * t).exp_m1() + 1.0),
        1e-13,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::heatflow_lipschitz_bound;
    use crate::measure::{w2_distance_1d, Measure};

    fn gaussian(m: f64, s: f64, axis: Axis<f64>) -> GridDensity<f64> {
        GridDensity::from_log_fn(vec![axis], |x| -(x[0] - m).powi(2) / (2.0 * s * s)).unwrap()
    }

    #[test]
    fn heat_flow_integrals_match_closed_forms() {
        for alpha in [1.0, 2.0, 4.0] {
            for k in [1.5, 2.0, 3.0, 4.0] {
                let q = heat_flow_integral(alpha, k);
                let e = heat_flow_integral_exact(alpha, k);
                assert!((q - e).abs() < 1e-6, "alpha {alpha} k {k}: {q} vs {e}");
            }
            let q = log_term_integral(alpha);
            assert!((q + 0.5 * alpha.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn single_term_bound_matches_integrated_exponent() {
        for (a, c, k) in [(1.0, 0.7, 1.5), (3.0, 2.0, 2.0), (0.5, 1.0, 4.0)] {
            let l = heatflow_lipschitz_bound(a, &[(c, k)]).unwrap();
            let exponent = log_term_integral(a + 1.0) + c * heat_flow_integral(a + 1.0, k);
            assert!((l.ln() + 0.5 * (a + 1.0).ln() - (exponent + 0.5 * (a + 1.0).ln())).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_tilt_covariance() {
        let s2: f64 = 0.4;
        let mu = gaussian(0.3, s2.sqrt(), Axis::centered(0.0, 9.0, 2001).unwrap());
        for t in [0.1, 1.0, 5.0] {
            for y in [-2.0, 0.0, 1.5] {
                let g = tilted_measure(&mu, t, &[y]).unwrap();
                let v = g.covariance()[(0, 0)];
                let expected = 1.0 / (1.0 / t - 1.0 + 1.0 / s2);
                assert!((v - expected).abs() < 1e-8, "t {t} y {y}: {v} vs {expected}");
                assert!((g.mass() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tilt_limit_is_direct_normalization() {
        let mu = gaussian(0.5, 0.6, Axis::centered(0.0, 12.0, 2001).unwrap());
        let g = tilted_measure(&mu, 1e12, &[0.0]).unwrap();
        let direct = GridDensity::from_log_fn(mu.axes().to_vec(), |x| {
            mu.interpolate_log_1d(x[0]) + x[0] * x[0] / 2.0
        })
        .unwrap();
        assert!(g.sup_distance(&direct) < 1e-8);
    }

    #[test]
    fn non_normalizable_tilt_is_refused() {
        // variance 4 > 1: the factor e^{x²/2} wins for large t
        let mu = gaussian(0.0, 2.0, Axis::centered(0.0, 20.0, 801).unwrap());
        assert!(matches!(
            tilted_measure(&mu, 100.0, &[0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ou_fixes_gaussian() {
        let g = gaussian(0.0, 1.0, Axis::centered(0.0, 10.0, 1001).unwrap());
        let out = ou_evolve(&g, 0.7).unwrap();
        assert!(out.sup_distance(&g) < 1e-10);
    }

    #[test]
    fn ou_moment_map() {
        let (m, s) = (1.0, 0.3);
        let g = gaussian(m, s, Axis::centered(0.0, 10.0, 2001).unwrap());
        for t in [1e-3, 0.1, 1.0, 3.0] {
            let out = ou_evolve(&g, t).unwrap();
            let e = (-t).exp();
            let mean = out.mean()[0];
            let var = out.covariance()[(0, 0)];
            assert!((mean - m * e).abs() < 1e-7, "t {t}: mean {mean}");
            assert!((var - (1.0 + (s * s - 1.0) * e * e)).abs() < 1e-7, "t {t}: var {var}");
        }
    }

    #[test]
    fn ou_semigroup() {
        let axis = Axis::centered(0.0_f64, 10.0, 1001).unwrap();
        let mu = GridDensity::from_log_fn(vec![axis], |x: &[f64]| {
            -x[0] * x[0] - 1.5 * (x[0] - 0.4).max(0.0)
        })
        .unwrap();
        let two = ou_evolve(&ou_evolve(&mu, 0.2).unwrap(), 0.5).unwrap();
        let one = ou_evolve(&mu, 0.7).unwrap();
        assert!(two.sup_distance(&one) < 1e-6);
    }

    #[test]
    fn ou_two_dimensional_is_separable() {
        let a = Axis::centered(0.0_f64, 8.0, 161).unwrap();
        let mu = GridDensity::from_log_fn(vec![a, a], |x: &[f64]| {
            -(x[0] - 0.5).powi(2) / 0.5 - (x[1] + 0.2).powi(2) / 0.8
        })
        .unwrap();
        let out = ou_evolve(&mu, 0.4).unwrap();
        let e = (-0.4_f64).exp();
        let m = out.mean();
        let c = out.covariance();
        assert!((m[0] - 0.5 * e).abs() < 1e-7 && (m[1] + 0.2 * e).abs() < 1e-7);
        assert!((c[(0, 0)] - (1.0 + (0.25 - 1.0) * e * e)).abs() < 1e-6);
        assert!((c[(1, 1)] - (1.0 + (0.4 - 1.0) * e * e)).abs() < 1e-6);
        assert!(c[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn flow_of_gaussian_is_identity() {
        let g = gaussian(0.0, 1.0, Axis::centered(0.0, 12.0, 1025).unwrap());
        let map = reverse_flow_map(&g, &FlowConfig::default()).unwrap();
        let err = map
            .source
            .iter()
            .zip(&map.mapped)
            .fold(0.0_f64, |m, (z, x)| m.max((z - x).abs()));
        assert!(err < 1e-6, "{err}");
        assert!((lipschitz_estimate(&map) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flow_of_scaled_gaussian_is_linear() {
        let s = 0.6;
        let g = gaussian(0.0, s, Axis::centered(0.0, 7.0, 1025).unwrap());
        let map = reverse_flow_map(&g, &FlowConfig::default()).unwrap();
        let err = map
            .source
            .iter()
            .zip(&map.mapped)
            .filter(|(z, _)| z.abs() <= 4.0)
            .fold(0.0_f64, |m, (z, x)| m.max((s * z - x).abs()));
        assert!(err < 1e-4, "{err}");
        assert!((lipschitz_estimate(&map) - s).abs() < 1e-4);
        let push = pushforward_density(&map, g.axes()[0]).unwrap();
        assert!(w2_distance_1d(&push, &g).unwrap() < 1e-4);
    }

    #[test]
    fn linear_map_lipschitz() {
        let source: Vec<f64> = (0..101).map(|i| -5.0 + 0.1 * i as f64).collect();
        let map = FlowMap {
            mapped: source.iter().map(|z| 0.37 * z).collect(),
            source,
            dt: 1e-3,
            t_max: 8.0,
            steps: 0,
            forward_x: Vec::new(),
            forward_s: Vec::new(),
        };
        assert!((lipschitz_estimate(&map) - 0.37).abs() < 1e-6);
    }

    #[test]
    fn monotone_cubic_preserves_order() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.1, 2.0, 2.1];
        let c = MonotoneCubic::new(x, y.clone()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = c.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert_eq!(c.eval(3.0), 2.0);
    }
}
