use mflab_core::chaos::{estimate_kl, quadratic_oracle_kl, ChaosConfig};
use mflab_core::meanfield::{default_axes, solve_self_consistent, SolverConfig};
use mflab_core::presets;
use mflab_core::sampler::TargetSpec;

fn report(model: mflab_core::model::ModelSpec<f64>, n: usize, seed: u64) -> mflab_core::chaos::ChaosReport {
    let target = TargetSpec::new(model, n, None, false).unwrap();
    let axes = default_axes(&target, None).unwrap();
    let system = solve_self_consistent(&target, axes, &SolverConfig::default()).unwrap();
    estimate_kl(&target, &system, &ChaosConfig::default(), seed).unwrap()
}

#[test]
fn quadratic_kl_matches_gaussian_formula() {
    let oracle = quadratic_oracle_kl(1.0, 1.0);
    for n in [2, 8] {
        let r = report(presets::unit_quadratic().unwrap(), n, 7);
        assert!(
            (r.kl.value - oracle).abs() <= 2.0 * r.kl.half_width,
            "N = {n}: {:?} vs {oracle}",
            r.kl
        );
        assert!(r.checks.all(), "{:?}", r.checks);
        assert!(!r.ess_warning);
    }
}

#[test]
fn relu_network_satisfies_all_checks() {
    let r = report(presets::relu_network(1.0, 1.0).unwrap(), 4, 11);
    assert!(r.checks.all(), "{r:?}");
    assert!(r.kl.value < r.bound_poc_ii);
}

#[test]
fn zero_model_is_exactly_independent() {
    let m = mflab_core::model::ModelSpec::zero(1.0, 1.0, 1).unwrap();
    let r = report(m, 3, 1);
    assert_eq!(r.kl.value, 0.0);
    assert_eq!(r.bound_poc, 0.0);
    assert!(r.checks.all());
}
