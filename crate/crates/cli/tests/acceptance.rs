//! Acceptance suite. Prints one pass/fail line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use mflab::{run, ExperimentConfig, LoadedConfig, Overrides};
use mflab_core::bounds::{
    heatflow_lipschitz_bound, lsi_pert_bound, lsi_pi_bound, main_bound, main_exponent,
    songbo_bound, winf_bound, BoundInputs, MainVariant,
};
use mflab_core::chaos::{estimate_kl, poc_bound, ChaosConfig, ChaosReport, PocVariant};
use mflab_core::heatflow::{
    covariance_profile, default_t_grid, fitted_lipschitz_bound, heat_flow_integral,
    lipschitz_estimate, log_term_integral, ou_evolve, particle_axes, particle_measure,
    pushforward_density, reverse_flow_map, std_normal_cdf, FlowConfig, ProfileConfig, Regime,
};
use mflab_core::meanfield::{default_axes, solve_self_consistent, SolverConfig};
use mflab_core::measure::{w2_distance_1d, Axis, GridDensity, Measure};
use mflab_core::model::ModelSpec;
use mflab_core::presets;
use mflab_core::sampler::{mala_sample, MalaConfig, TargetSpec};
use mflab_core::scalar::log_space;

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

const CHAOS_NS: [usize; 4] = [2, 4, 8, 16];
const CHAOS_SEED: u64 = 2024;

struct Outcome {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn gaussian_pdf(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

fn sup_error(g: &GridDensity<f64>, f: impl Fn(&[f64]) -> f64) -> f64 {
    (0..g.len())
        .map(|i| (g.density()[i] - f(&g.node(i))).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// dense Gaussian oracle

/// Lower Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

fn spd_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let l = cholesky(a);
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        // L y = e_c, then Lᵀ x = y
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (if i == c { 1.0 } else { 0.0 } - s) / l[i][i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k][i] * inv[k][c]).sum();
            inv[i][c] = (y[i] - s) / l[i][i];
        }
    }
    inv
}

fn log_det(a: &[Vec<f64>]) -> f64 {
    cholesky(a).iter().enumerate().map(|(i, r)| 2.0 * r[i].ln()).sum()
}

/// Precision of the `N`-particle measure of `F₀ = (κ/2)(mean − c)²` in
/// `d = 1`: the density is `exp(−(2/σ²)[Σ λxᵢ²/2 + (κ/2N)(Σxᵢ)² − κcΣxᵢ])`.
fn quadratic_precision(sigma: f64, lambda: f64, kappa: f64, n: usize) -> Vec<Vec<f64>> {
    let s = 2.0 / (sigma * sigma);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| s * (kappa / n as f64 + if i == j { lambda } else { 0.0 }))
                .collect()
        })
        .collect()
}

/// `KL(μ^{1:N} ‖ π^{⊗N})` by dense Gaussian algebra. Both means equal
/// `κc/(λ+κ)` (the particle mean solves `(λ+κ)m = κc`, the mean-field mean
/// solves `λm = −κ(m − c)`), so only covariances enter.
fn quadratic_kl_dense(sigma: f64, lambda: f64, kappa: f64, n: usize) -> f64 {
    let prec_mu = quadratic_precision(sigma, lambda, kappa, n);
    let cov_mu = spd_inverse(&prec_mu);
    let prec_pi = 2.0 * lambda / (sigma * sigma);
    let trace: f64 = (0..n).map(|i| prec_pi * cov_mu[i][i]).sum();
    let log_det_pi_cov = -(n as f64) * prec_pi.ln();
    0.5 * (trace - n as f64 + log_det_pi_cov + log_det(&prec_mu))
}

// ---------------------------------------------------------------------------
// shared chaos runs

struct ChaosRun {
    model: &'static str,
    report: ChaosReport,
    system_mean: f64,
    system_var: f64,
    sigma: f64,
    beta_hat: f64,
    d: usize,
}

fn chaos_runs(name: &'static str, model: ModelSpec<f64>) -> Result<Vec<ChaosRun>, mflab_core::Error> {
    let inputs = model.constants();
    CHAOS_NS
        .iter()
        .map(|&n| {
            let target = TargetSpec::new(model.clone(), n, None, false)?;
            let system = solve_self_consistent(&target, default_axes(&target, None)?, &SolverConfig::default())?;
            let report = estimate_kl(&target, &system, &ChaosConfig::default(), CHAOS_SEED)?;
            let pibar = &system.mean_measure;
            Ok(ChaosRun {
                model: name,
                report,
                system_mean: pibar.mean()[0],
                system_var: pibar.covariance()[(0, 0)],
                sigma: inputs.sigma,
                beta_hat: inputs.beta_hat,
                d: inputs.d,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// criteria

fn c1_gaussian_exactness() -> Check {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();

    // mean-field measure of the zero model: N(0, σ²/2λ)
    let (sigma, lambda) = (1.3, 0.8);
    let v = sigma * sigma / (2.0 * lambda);
    let zero = ModelSpec::zero(sigma, lambda, 1)?;
    let target = TargetSpec::new(zero.clone(), 1, None, false)?;
    let sys = solve_self_consistent(&target, default_axes(&target, None)?, &SolverConfig::default())?;
    let e = sup_error(&sys.mean_measure, |x| gaussian_pdf(x[0], 0.0, v));
    notes.push(format!("pi {e:.1e}"));
    worst = worst.max(e);

    // particle measure, N = 2: product of the same Gaussians
    let t2 = TargetSpec::new(zero, 2, None, false)?;
    let mu = particle_measure(&t2, particle_axes(&t2, Some(401))?)?;
    let e = sup_error(&mu, |x| gaussian_pdf(x[0], 0.0, v) * gaussian_pdf(x[1], 0.0, v));
    notes.push(format!("mu^(1:2) {e:.1e}"));
    worst = worst.max(e);

    // tilted covariances: 1/(a + 1/t)
    let rt = TargetSpec::new(ModelSpec::zero(sigma, lambda, 1)?, 1, None, true)?;
    let inputs = rt.model().constants();
    let log_mu = |x: &[f64]| rt.log_density(x);
    let ys: Vec<Vec<f64>> = [-2.0, 0.0, 2.5].iter().map(|&y| vec![y]).collect();
    let p = covariance_profile(&log_mu, 1, &default_t_grid(&inputs), &ys, &inputs, &ProfileConfig::default())?;
    // rescaled by η = √λ/σ the variance is η²σ²/2λ; tilting by t adds 1/t − 1 to the precision
    let eta2 = lambda / (sigma * sigma);
    let a = 1.0 / (eta2 * v) - 1.0;
    let e = p.rows.iter().map(|r| (r.opnorm - 1.0 / (a + 1.0 / r.t)).abs()).fold(0.0, f64::max);
    notes.push(format!("tilt {e:.1e}"));
    worst = worst.max(e);

    // Ornstein–Uhlenbeck: N(m, s²) ↦ N(m e^{−t}, 1 + (s² − 1)e^{−2t})
    let (m, s2): (f64, f64) = (1.0, 0.09);
    let axis = Axis::centered(0.0, 10.0, 2001)?;
    let g = GridDensity::from_log_fn(vec![axis], |x| -(x[0] - m).powi(2) / (2.0 * s2))?;
    for t in [0.1f64, 1.0, 3.0] {
        let out = ou_evolve(&g, t)?;
        let (mt, vt) = (m * (-t).exp(), 1.0 + (s2 - 1.0) * (-2.0 * t).exp());
        let e = sup_error(&out, |x| gaussian_pdf(x[0], mt, vt))
            .max((out.mean()[0] - mt).abs())
            .max((out.covariance()[(0, 0)] - vt).abs());
        worst = worst.max(e);
    }
    notes.push("OU ok".into());

    // reverse flow: identity for γ, z ↦ s z for N(0, s²)
    let gamma = GridDensity::from_log_fn(vec![Axis::centered(0.0, 12.0, 1025)?], |x| -x[0] * x[0] / 2.0)?;
    let map = reverse_flow_map(&gamma, &FlowConfig::default())?;
    let e_id = map.source.iter().zip(&map.mapped).map(|(z, x)| (z - x).abs()).fold(0.0, f64::max);
    let s = 0.6;
    let scaled = GridDensity::from_log_fn(vec![Axis::centered(0.0, 7.0, 1025)?], |x| -x[0] * x[0] / (2.0 * s * s))?;
    let map = reverse_flow_map(&scaled, &FlowConfig::default())?;
    let e_lin = map
        .source
        .iter()
        .zip(&map.mapped)
        .filter(|(z, _)| z.abs() <= 4.0)
        .map(|(z, x)| (s * z - x).abs())
        .fold(0.0, f64::max);
    notes.push(format!("flow {e_id:.1e}/{e_lin:.1e}"));
    let flow_ok = e_id < 1e-6 && e_lin < 1e-4;

    // MALA on the zero model with σ²/2λ = 1: N(0, I₂)
    let std_target = TargetSpec::new(ModelSpec::zero(1.0, 0.5, 1)?, 2, None, false)?;
    let cfg = MalaConfig {
        n_samples: 40_000,
        n_burnin: 4_000,
        step_size: 0.5,
        thin: 1,
    };
    let mut moment_err: f64 = 0.0;
    for chain in 0..2 {
        let (states, _) = mala_sample(&std_target, &cfg, 99, chain)?;
        let k = states.len() as f64;
        for c in 0..2 {
            let mean = states.iter().map(|s| s.x[c]).sum::<f64>() / k;
            let var = states.iter().map(|s| (s.x[c] - mean).powi(2)).sum::<f64>() / k;
            moment_err = moment_err.max(mean.abs()).max((var - 1.0).abs());
        }
    }
    notes.push(format!("MCMC moments {:.1}%", 100.0 * moment_err));

    Ok((
        worst <= 1e-6 && flow_ok && moment_err <= 0.05,
        format!("grid error {worst:.1e}; {}", notes.join(", ")),
    ))
}

fn c2_quadratic(runs: &[ChaosRun]) -> Check {
    let (sigma, lambda, kappa, c) = (1.0, 1.0, 1.0, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs.iter().filter(|r| [2, 4, 8].contains(&r.report.n)) {
        let oracle = quadratic_kl_dense(sigma, lambda, kappa, r.report.n);
        let kl = &r.report.kl;
        let within = (kl.value - oracle).abs() <= 2.0 * kl.half_width;
        ok &= within;
        parts.push(format!("N={} {:.4}±{:.4} vs {:.4}", r.report.n, kl.value, kl.half_width, oracle));
    }
    // scalar fixed point: mean κc/(λ+κ), variance σ²/(2λ)
    let (m, v) = (kappa * c / (lambda + kappa), sigma * sigma / (2.0 * lambda));
    let fp_err = runs
        .iter()
        .map(|r| (r.system_mean - m).abs().max((r.system_var - v).abs()))
        .fold(0.0, f64::max);
    ok &= fp_err <= 1e-6;
    parts.push(format!("fixed point {fp_err:.1e}"));
    Ok((ok, parts.join("; ")))
}

/// Both bounds recomputed from their displayed formulas.
fn poc_formulas(r: &ChaosRun) -> (f64, f64) {
    let rep = &r.report;
    let (s2, a, b, cbar) = (r.sigma * r.sigma, rep.alpha, rep.b_eff, rep.cbar_pi);
    let d = r.d as f64;
    let generic = 4.0 * r.beta_hat / s2 * (cbar * d).min(2.0 * d / a + 4.0 * b * b / (a * a * s2 * s2));
    let nn = r.beta_hat / s2 * cbar.min(2.0 / a + 8.0 * b * b / (a * a * s2 * s2));
    (generic, nn)
}

fn c3_poc(quadratic: &[ChaosRun], relu: &[ChaosRun]) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for runs in [quadratic, relu] {
        for r in runs {
            let (generic, nn) = poc_formulas(r);
            let rep = &r.report;
            let slack = 2.0 * rep.kl.half_width;
            let formula_ok = (generic - rep.bound_poc).abs() <= 1e-12 * generic.max(1.0)
                && (nn - rep.bound_poc_ii).abs() <= 1e-12 * nn.max(1.0);
            let below = rep.kl.value <= generic + slack && rep.kl.value <= nn + slack;
            ok &= formula_ok && below;
        }
        // no CI-significant growth in N
        let growth = runs.windows(2).any(|w| w[1].report.kl.lo() > w[0].report.kl.hi());
        ok &= !growth;
        let r0 = &runs[0];
        let kls: Vec<String> = runs.iter().map(|r| format!("{:.4}", r.report.kl.value)).collect();
        parts.push(format!(
            "{}: KL [{}] <= poc {:.3}, poc-ii {:.3}{}",
            r0.model,
            kls.join(", "),
            r0.report.bound_poc,
            r0.report.bound_poc_ii,
            if growth { " (GROWTH)" } else { "" }
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c4_proof_chain(all: &[&ChaosRun]) -> Check {
    let mut failing = Vec::new();
    let mut min_b = f64::INFINITY;
    for r in all {
        let rep = &r.report;
        let c = &rep.checks;
        min_b = min_b.min(c.min_bregman);
        let n = rep.n as f64;
        let s2 = r.sigma * r.sigma;
        let slack = 2.0 * rep.kl.half_width;
        // −log Z ≤ (2N/σ²) E_π B and KL ≤ (2N/σ²) E_π B, recomputed here
        let jensen = -rep.log_z.value <= 2.0 * n / s2 * rep.bregman_pi.value + 2.0 * rep.log_z.half_width;
        let chain = rep.kl.value <= 2.0 * n / s2 * rep.bregman_pi.hi() + slack;
        let variance = rep.bregman_pi.value <= rep.variance_bound + 2.0 * rep.bregman_pi.half_width;
        let all_ok = c.bregman_nonnegative && c.jensen && c.chain && c.variance && jensen && chain && variance;
        if !all_ok {
            failing.push(format!("{} N={}", r.model, rep.n));
        }
    }
    Ok((
        failing.is_empty(),
        if failing.is_empty() {
            format!("{} runs; min Bregman {min_b:.2e}", all.len())
        } else {
            format!("failing: {}", failing.join(", "))
        },
    ))
}

fn c5_integrals() -> Check {
    let mut worst: f64 = 0.0;
    for alpha in [1.0_f64, 2.0, 4.0] {
        for k in [1.5_f64, 2.0, 3.0, 4.0] {
            let exact = 1.0 / (2.0 * (k - 1.0) * alpha.powf(k - 1.0));
            worst = worst.max((heat_flow_integral(alpha, k) - exact).abs());
        }
        worst = worst.max((log_term_integral(alpha) + 0.5 * alpha.ln()).abs());
    }
    Ok((worst <= 1e-6, format!("max error {worst:.1e}")))
}

fn c6_tilt_shape() -> Check {
    let target = TargetSpec::new(presets::relu_network(1.0, 1.0)?, 1, None, true)?;
    let inputs = target.model().constants();
    let log_mu = |x: &[f64]| target.log_density(x);
    let ys: Vec<Vec<f64>> = [-3.0, 0.0, 3.0].iter().map(|&y| vec![y]).collect();
    let p = covariance_profile(&log_mu, 1, &default_t_grid(&inputs), &ys, &inputs, &ProfileConfig::default())?;

    // √t scaling: per y, the ratios |opnorm/t − 1|/√t must settle as t ↓ 0,
    // either falling or with contracting increments; C is their supremum or
    // the Aitken limit, whichever is larger.
    let mut c_lim: f64 = 0.0;
    let mut settles = true;
    let mut t0 = f64::INFINITY;
    let mut rem0: f64 = 0.0;
    for id in 0..ys.len() {
        let mut rows: Vec<(f64, f64)> = p
            .rows
            .iter()
            .filter(|r| r.regime == Regime::Small && r.y_id == id)
            .map(|r| (r.t, (r.opnorm / r.t - 1.0).abs()))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.len() < 3 {
            settles = false;
            continue;
        }
        let ratio: Vec<f64> = rows.iter().map(|(t, e)| e / t.sqrt()).collect();
        c_lim = c_lim.max(ratio.iter().cloned().fold(0.0, f64::max));
        let (x2, x1, x0) = (ratio[0], ratio[1], ratio[2]);
        let (d2, d1) = (x2 - x1, x1 - x0);
        if d2 > 0.0 {
            settles &= d2 < d1;
            c_lim = c_lim.max(x2 + d2 * d2 / (d1 - d2));
        }
        if rows[0].0 < t0 {
            t0 = rows[0].0;
        }
        rem0 = rem0.max(rows[0].1);
    }

    // large t: bounded by the single-particle ceiling (1/√a + 2B/(σ²a))²
    let long = covariance_profile(&log_mu, 1, &log_space(1.0, 1e4, 9), &ys, &inputs, &ProfileConfig::default())?;
    let a = p.a;
    let ceiling = (1.0 / a.sqrt() + 2.0 * inputs.b / (inputs.sigma.powi(2) * a)).powi(2);
    let sup_large = long.rows.iter().map(|r| r.opnorm).fold(0.0, f64::max);

    // zero model exactness
    let zt = TargetSpec::new(ModelSpec::zero(1.0, 1.0, 1)?, 1, None, true)?;
    let zi = zt.model().constants();
    let zlog = |x: &[f64]| zt.log_density(x);
    let zp = covariance_profile(&zlog, 1, &log_space(1e-3, 1e3, 40), &ys, &zi, &ProfileConfig::default())?;
    let zero_err = zp.rows.iter().map(|r| (r.opnorm - 1.0 / (zp.a + 1.0 / r.t)).abs()).fold(0.0, f64::max);

    let fitted = p.fitted_small_constants(&inputs);
    Ok((
        settles && c_lim.is_finite() && rem0 < 0.01 && sup_large <= ceiling && zero_err <= 1e-8,
        format!(
            "C = {c_lim:.3} (limit of remainder/sqrt(t)), remainder {rem0:.1e} at t = {t0:.1e}; \
             sup opnorm {sup_large:.3} <= {ceiling:.3} on [1, 1e4]; zero model {zero_err:.1e}; \
             fitted envelope constants per y {fitted:.4?} (diagnostic)"
        ),
    ))
}

fn c7_transport() -> Check {
    let target = TargetSpec::new(presets::relu_network(1.0, 1.0)?, 1, None, true)?;
    let inputs = target.model().constants();
    let mu = particle_measure(&target, particle_axes(&target, Some(1025))?)?;
    let map = reverse_flow_map(&mu, &FlowConfig::default())?;
    let monotone = map.mapped.windows(2).all(|w| w[1] > w[0]);
    let push = pushforward_density(&map, mu.axes()[0])?;
    let w2 = w2_distance_1d(&push, &mu)?;
    // the 1-d monotone transport is the quantile map F_μ⁻¹ ∘ Φ
    let cdf = mu.cdf()?;
    let q_err = map
        .source
        .iter()
        .zip(&map.mapped)
        .filter(|(z, _)| z.abs() <= 6.0)
        .map(|(&z, &x)| (cdf.quantile(std_normal_cdf(z)) - x).abs())
        .fold(0.0, f64::max);
    let l = lipschitz_estimate(&map);
    let log_mu = |x: &[f64]| target.log_density(x);
    let ys: Vec<Vec<f64>> = (0..13).map(|i| vec![-6.0 + i as f64]).collect();
    let prof = covariance_profile(&log_mu, 1, &log_space(1e-4, 1e4, 60), &ys, &inputs, &ProfileConfig::default())?;
    let (fitted, terms) = fitted_lipschitz_bound(&prof, &[1.5, 2.0, 3.0, 4.0])?;
    let generic = main_bound(&inputs, MainVariant::Generic);
    Ok((
        monotone && w2 < 1e-3 && q_err < 1e-3 && l <= fitted && l <= generic,
        format!(
            "W2 {w2:.1e}, quantile error {q_err:.1e}, L {l:.4} <= heat-flow {fitted:.4} (terms {terms:?}) <= main {generic:.3e}"
        ),
    ))
}

fn rel(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * b.abs().max(a.abs())
}

fn unit_inputs() -> BoundInputs<f64> {
    BoundInputs {
        sigma: 1.0,
        lambda: 1.0,
        beta_hat: 1.0,
        b: 0.0,
        l_h: 1.0,
        l_ell: 0.0,
        beta_ell: 1.0,
        d: 1,
        n: 1,
        d_prox: 1,
        rescaled: false,
    }
}

fn c8_calculators() -> Check {
    let e = std::f64::consts::E;
    let mut cases: Vec<(&str, bool)> = Vec::new();
    let u = unit_inputs();

    cases.push(("heatflow a=0", rel(heatflow_lipschitz_bound(0.0, &[])?, 1.0)));
    cases.push(("heatflow a=3", rel(heatflow_lipschitz_bound(3.0, &[])?, 0.5)));
    cases.push((
        "heatflow a=1 (2,2)",
        rel(heatflow_lipschitz_bound(1.0, &[(2.0, 2.0)])?, 0.5f64.exp() / 2f64.sqrt()),
    ));
    cases.push(("heatflow k=1 refused", heatflow_lipschitz_bound(1.0, &[(1.0, 1.0)]).is_err()));

    let plain = BoundInputs { beta_hat: 0.0, sigma: 2.0, lambda: 9.0, ..u };
    cases.push(("main plain", rel(main_bound(&plain, MainVariant::Generic), 2.0 / 3.0)));
    cases.push(("main unit", rel(main_bound(&u, MainVariant::Generic), e)));
    let mono = [
        BoundInputs { beta_hat: 2.0, ..u },
        BoundInputs { b: 0.5, ..u },
        BoundInputs { d: 2, ..u },
    ]
    .iter()
    .all(|p| main_bound(p, MainVariant::Generic) > main_bound(&u, MainVariant::Generic));
    cases.push(("main monotone", mono));

    cases.push(("lsi_pert L=0", rel(lsi_pert_bound(2.0, 0.0)?, 0.5)));
    cases.push(("lsi_pert (1,1)", rel(lsi_pert_bound(1.0, 1.0)?, 5f64.exp())));
    cases.push(("lsi_pert (4,2)", rel(lsi_pert_bound(4.0, 2.0)?, 5f64.exp() / 4.0)));

    let s = BoundInputs { sigma: 1.5, lambda: 0.7, ..u };
    cases.push(("lsi_pi B=0", rel(lsi_pi_bound(&s), 1.5 * 1.5 / 1.4)));
    let b1 = BoundInputs { b: 1.0, ..u };
    cases.push(("lsi_pi B=1", rel(lsi_pi_bound(&b1), 0.5 * (2.0 + 4.0 * 2f64.sqrt()).exp())));
    let s2 = BoundInputs { sigma: 3.0, ..s };
    cases.push(("lsi_pi scaling", rel(lsi_pi_bound(&s2), 4.0 * lsi_pi_bound(&s))));

    cases.push(("songbo eps=1/2", rel(songbo_bound(0.0, 3, 0.5, 2.0, 10)?, 1.0)));
    cases.push(("songbo eps->0", rel(songbo_bound(0.0, 3, 1e-15, 2.0, 10)?, 0.5)));
    let ks: Vec<f64> = (0..20).map(|i| i as f64 * 0.02).collect();
    let vals = ks
        .iter()
        .map(|&k| songbo_bound(k, 2, 0.5, 1.0, 100))
        .collect::<Result<Vec<_>, _>>()?;
    cases.push(("songbo increasing", vals.windows(2).all(|w| w[1] > w[0])));

    cases.push(("winf L=0", winf_bound(1.0, 0.0)? == 0.0));
    cases.push(("winf (2,3)", rel(winf_bound(2.0, 3.0)?, 1.5)));
    cases.push(("winf homogeneous", rel(winf_bound(7.0, 10.5)?, 1.5)));

    let id = BoundInputs { sigma: 2.0, lambda: 4.0, beta_hat: 0.3, b: 0.7, ..u }.rescale_parameters()?;
    cases.push(("rescale identity", rel(id.beta_hat, 0.3) && rel(id.lambda, 4.0) && rel(id.b, 0.7)));
    let r = BoundInputs { lambda: 4.0, b: 1.0, ..u }.rescale_parameters()?;
    cases.push(("rescale example", rel(r.beta_hat, 0.25) && rel(r.lambda, 1.0) && rel(r.b, 0.5)));
    cases.push(("rescale twice refused", r.rescale_parameters().is_err()));
    let p = BoundInputs { sigma: 0.7, lambda: 2.5, beta_hat: 0.4, b: 0.3, d: 2, ..u };
    let pr = p.rescale_parameters()?;
    let eta = p.lambda.sqrt() / p.sigma;
    cases.push((
        "rescale exponent",
        rel(main_exponent(&p, MainVariant::Generic), main_exponent(&pr, MainVariant::Generic))
            && rel(main_bound(&p, MainVariant::Generic), main_bound(&pr, MainVariant::Generic) / eta),
    ));

    let zero_beta = BoundInputs { beta_hat: 0.0, ..u };
    cases.push(("poc beta=0", poc_bound(&zero_beta, 1.0, 1.0, PocVariant::Generic)? == 0.0));
    cases.push(("poc generic", rel(poc_bound(&u, 1.0, 1.0, PocVariant::Generic)?, 4.0)));
    cases.push(("poc example_nn", rel(poc_bound(&u, 1.0, 1.0, PocVariant::ExampleNn)?, 1.0)));

    let failed: Vec<&str> = cases.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} examples", cases.len())
        } else {
            format!("failing: {}", failed.join(", "))
        },
    ))
}

const DETERMINISM_CONFIGS: [&str; 5] = [
    r#"
experiment = "chaos_sweep"
seed = 5
[model]
kind = "relu"
sigma = 1.0
lambda = 1.0
[sweep]
n = [2, 4]
[mcmc]
samples = 4000
burnin = 500
pi_samples = 4000
bootstrap = 50
"#,
    r#"
experiment = "tilt_profile"
seed = 5
[model]
kind = "relu"
sigma = 1.0
lambda = 1.0
"#,
    r#"
experiment = "transport_map"
seed = 5
[model]
kind = "relu"
sigma = 1.0
lambda = 1.0
[flow]
fit_t_points = 20
fit_y = [-3.0, 0.0, 3.0]
"#,
    r#"
experiment = "mfld_run"
seed = 5
[model]
kind = "quadratic_oracle"
sigma = 1.0
lambda = 1.0
kappa = 1.0
c = 1.0
[mfld]
n = 200
horizon = 2.0
step = 1e-2
record_every = 20
"#,
    r#"
experiment = "bounds_table"
[model]
kind = "relu"
sigma = 1.0
lambda = 1.0
[bounds]
sigma = [0.5, 1.0]
lambda = [1.0, 2.0]
"#,
];

fn csv_files(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p)?));
        }
    }
    out.sort();
    Ok(out)
}

fn c9_determinism() -> Check {
    let tmp = tempfile::tempdir()?;
    let mut compared = 0;
    let mut differing = Vec::new();
    for (i, text) in DETERMINISM_CONFIGS.iter().enumerate() {
        let loaded = LoadedConfig {
            config: ExperimentConfig::parse(text)?,
            base: tmp.path().to_path_buf(),
        };
        let mut runs = Vec::new();
        for (rep, workers) in [(0, 1), (1, 1), (2, 2)] {
            let out = tmp.path().join(format!("{i}-{rep}"));
            let o = Overrides {
                out: Some(out.clone()),
                workers: Some(workers),
                ..Overrides::default()
            };
            run(&loaded, &o)?;
            runs.push(csv_files(&out)?);
        }
        compared += runs[0].len();
        if runs[0].is_empty() || runs.iter().any(|r| *r != runs[0]) {
            differing.push(loaded.config.experiment.name());
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{compared} CSV files byte-identical across reruns and worker counts")
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

// ---------------------------------------------------------------------------

fn record(out: &mut Vec<Outcome>, id: usize, title: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
    let start = Instant::now();
    let res = f();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match res {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(l) = limit {
        if elapsed > l {
            passed = false;
            detail.push_str(&format!("; runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), l.as_secs_f64()));
        }
    }
    let o = Outcome {
        id,
        title,
        passed,
        detail,
        elapsed,
    };
    println!(
        "criterion {} [{}] {} ({:.1}s): {}",
        o.id,
        if o.passed { "PASS" } else { "FAIL" },
        o.title,
        o.elapsed.as_secs_f64(),
        o.detail
    );
    out.push(o);
}

fn main() {
    let minutes = |m: u64| Some(Duration::from_secs(60 * m));
    let mut out = Vec::new();

    let start = Instant::now();
    let quadratic = chaos_runs("quadratic", presets::unit_quadratic().expect("preset"));
    let quad_time = start.elapsed();
    let start = Instant::now();
    let relu = chaos_runs("relu", presets::relu_network(1.0, 1.0).expect("preset"));
    let relu_time = start.elapsed();

    record(&mut out, 1, "Gaussian exactness", minutes(2), c1_gaussian_exactness);
    record(&mut out, 2, "quadratic-oracle equivalence", minutes(10), || {
        let q = quadratic.as_ref().map_err(|e| e.to_string())?;
        let (ok, d) = c2_quadratic(q)?;
        Ok((ok, format!("{d}; sweep {:.1}s", quad_time.as_secs_f64())))
    });
    record(&mut out, 3, "propagation-of-chaos bounds", minutes(30), || {
        let q = quadratic.as_ref().map_err(|e| e.to_string())?;
        let r = relu.as_ref().map_err(|e| e.to_string())?;
        let (ok, d) = c3_poc(q, r)?;
        Ok((ok, format!("{d}; sweeps {:.1}s", (quad_time + relu_time).as_secs_f64())))
    });
    record(&mut out, 4, "proof-chain inequalities", None, || {
        let q = quadratic.as_ref().map_err(|e| e.to_string())?;
        let r = relu.as_ref().map_err(|e| e.to_string())?;
        let all: Vec<&ChaosRun> = q.iter().chain(r.iter()).collect();
        c4_proof_chain(&all)
    });
    record(&mut out, 5, "heat-flow integral identities", Some(Duration::from_secs(10)), c5_integrals);
    record(&mut out, 6, "tilt-stability shape", minutes(5), c6_tilt_shape);
    record(&mut out, 7, "transport map", minutes(5), c7_transport);
    record(&mut out, 8, "calculator regression", None, c8_calculators);
    record(&mut out, 9, "determinism", None, c9_determinism);

    let failed = out.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} of {} criteria passed", out.len() - failed, out.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
