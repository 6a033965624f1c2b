//! The five experiments. Each returns its result files, the invariants it
//! asserted and a JSON object of headline numbers; nothing here touches
//! the file system.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mflab_core::bounds::{
    heatflow_lipschitz_bound, lsi_pert_bound, lsi_pi_bound, main_bound, main_exponent,
    regime_threshold, winf_bound, BoundInputs, MainVariant,
};
use mflab_core::chaos::{estimate_kl, poc_bound, ChaosReport, PocVariant};
use mflab_core::heatflow::{
    covariance_profile, default_t_grid, fitted_lipschitz_bound, lipschitz_estimate, particle_axes,
    particle_measure, pushforward_density, reverse_flow_map, std_normal_cdf, Regime,
};
use mflab_core::meanfield::{default_axes, solve_self_consistent};
use mflab_core::measure::{w2_distance_1d, Measure};
use mflab_core::model::{ModelKind, ModelSpec};
use mflab_core::sampler::{mfld_simulate, write_states_csv, TargetSpec};
use mflab_core::scalar::log_space;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::CliError;

/// Largest grid error tolerated by exactness checks.
pub const GRID_TOL: f64 = 1e-8;
/// Largest `W₂(T#γ, μ)` accepted for a transport map.
pub const W2_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Invariant {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub invariants: Vec<Invariant>,
    pub files: Vec<Artifact>,
    pub results: Value,
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or small magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if !v.is_finite() || (1e-4..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// CSV table assembled row by row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn artifact(&self, name: &str) -> Result<Artifact, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(core_csv)?;
        for r in &self.rows {
            w.write_record(r).map_err(core_csv)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(Artifact {
            name: name.into(),
            bytes,
        })
    }
}

fn core_csv(e: csv::Error) -> CliError {
    CliError::Numeric(e.into())
}

fn json_artifact(name: &str, v: &impl Serialize) -> Result<Artifact, CliError> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| CliError::Numeric(e.into()))?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, model: ModelSpec<f64>) -> Result<Outcome, CliError> {
    match cfg.experiment {
        ExperimentKind::ChaosSweep => chaos_sweep(cfg, model),
        ExperimentKind::TiltProfile => tilt_profile(cfg, model),
        ExperimentKind::TransportMap => transport_map(cfg, model),
        ExperimentKind::MfldRun => mfld_run(cfg, model),
        ExperimentKind::BoundsTable => bounds_table(cfg, model),
    }
}

fn failing_checks(r: &ChaosReport) -> Vec<&'static str> {
    let c = &r.checks;
    [
        ("bregman_nonnegative", c.bregman_nonnegative),
        ("jensen", c.jensen),
        ("chain", c.chain),
        ("variance", c.variance),
        ("kl_nonnegative", c.kl_nonnegative),
        ("poc", c.poc),
        ("poc_ii", c.poc_ii),
    ]
    .into_iter()
    .filter(|(_, ok)| !ok)
    .map(|(n, _)| n)
    .collect()
}

fn chaos_sweep(cfg: &ExperimentConfig, model: ModelSpec<f64>) -> Result<Outcome, CliError> {
    if model.dim() != 1 {
        return Err(CliError::Config("chaos_sweep: model.dim must be 1".into()));
    }
    let label = cfg.model.label();
    let seeds = if cfg.sweep.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.sweep.seeds.clone()
    };
    let chaos = cfg.mcmc.chaos();
    let mut ns = cfg.sweep.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut table = Table::new(&[
        "model", "n", "seed", "alpha", "kl", "kl_half_width", "kl_lo", "kl_hi", "bregman_mu",
        "bregman_mu_half_width", "bregman_pi", "bregman_pi_half_width", "log_z",
        "log_z_half_width", "ess_z", "lipschitz", "b_eff", "cbar_pi", "bound_poc",
        "bound_poc_ii", "margin", "variance_bound", "solver_iterations", "solver_residual",
        "checks_pass",
    ]);
    let mut invariants = Vec::new();
    let mut reports = Vec::new();
    for &n in &ns {
        let target = TargetSpec::new(model.clone(), n, None, false)?;
        let axes = default_axes(&target, cfg.grid.points)?;
        let system = solve_self_consistent(&target, axes, &cfg.grid.solver())?;
        for &seed in &seeds {
            let r = estimate_kl(&target, &system, &chaos, seed)?;
            let bound = r.bound_poc.min(r.bound_poc_ii);
            table.push(vec![
                label.into(),
                n.to_string(),
                seed.to_string(),
                num(r.alpha),
                num(r.kl.value),
                num(r.kl.half_width),
                num(r.kl.lo()),
                num(r.kl.hi()),
                num(r.bregman_mu.value),
                num(r.bregman_mu.half_width),
                num(r.bregman_pi.value),
                num(r.bregman_pi.half_width),
                num(r.log_z.value),
                num(r.log_z.half_width),
                num(r.ess_z),
                num(r.lipschitz),
                num(r.b_eff),
                num(r.cbar_pi),
                num(r.bound_poc),
                num(r.bound_poc_ii),
                num(bound - r.kl.value),
                num(r.variance_bound),
                system.iterations.to_string(),
                num(system.residual),
                r.checks.all().to_string(),
            ]);
            let failing = failing_checks(&r);
            invariants.push(Invariant::new(
                format!("chaos checks N={n} seed={seed}"),
                failing.is_empty(),
                if failing.is_empty() {
                    format!("KL {} +- {}", num(r.kl.value), num(r.kl.half_width))
                } else {
                    format!("failing: {}", failing.join(", "))
                },
            ));
            if matches!(model.kind(), ModelKind::Zero) {
                invariants.push(Invariant::new(
                    format!("zero model KL N={n} seed={seed}"),
                    r.kl.value == 0.0,
                    format!("KL {}", num(r.kl.value)),
                ));
            }
            reports.push((seed, r));
        }
    }
    // no CI-significant growth in N, per seed
    for &seed in &seeds {
        let by_n: Vec<&ChaosReport> = reports
            .iter()
            .filter(|(s, _)| *s == seed)
            .map(|(_, r)| r)
            .collect();
        let growth: Vec<String> = by_n
            .windows(2)
            .filter(|w| w[1].kl.lo() > w[0].kl.hi())
            .map(|w| format!("N={} -> N={}", w[0].n, w[1].n))
            .collect();
        invariants.push(Invariant::new(
            format!("no CI-significant growth in N seed={seed}"),
            growth.is_empty(),
            if growth.is_empty() {
                "consecutive intervals overlap or decrease".to_string()
            } else {
                format!("growth at {}", growth.join(", "))
            },
        ));
    }
    let results = json!({
        "model": label,
        "n": ns,
        "seeds": seeds,
        "max_kl": reports.iter().map(|(_, r)| r.kl.value).fold(f64::NEG_INFINITY, f64::max),
    });
    let full: Vec<&ChaosReport> = reports.iter().map(|(_, r)| r).collect();
    Ok(Outcome {
        invariants,
        files: vec![table.artifact("chaos.csv")?, json_artifact("chaos_reports.json", &full)?],
        results,
    })
}

fn tilt_profile(cfg: &ExperimentConfig, model: ModelSpec<f64>) -> Result<Outcome, CliError> {
    let is_zero = matches!(model.kind(), ModelKind::Zero);
    let target = TargetSpec::new(model, cfg.tilt.n, None, true)?;
    let dim = target.total_dim();
    if dim > 2 {
        return Err(CliError::Config(format!(
            "tilt_profile: N*d = {dim} exceeds 2"
        )));
    }
    if cfg.tilt.y.iter().any(|y| y.len() != dim) {
        return Err(CliError::Config(format!("tilt.y: every center needs {dim} coordinates")));
    }
    let inputs = target.model().constants();
    let ts = if cfg.tilt.t.is_empty() {
        default_t_grid(&inputs)
    } else {
        cfg.tilt.t.clone()
    };
    let log_mu = |x: &[f64]| target.log_density(x);
    let profile = covariance_profile(&log_mu, dim, &ts, &cfg.tilt.y, &inputs, &cfg.tilt.profile())?;

    let mut head = vec!["t", "y_id"];
    let ycols: Vec<String> = (1..=dim).map(|k| format!("y{k}")).collect();
    head.extend(ycols.iter().map(String::as_str));
    head.extend([
        "opnorm", "alpha_t", "gaussian_ref", "small_regime_ref", "large_regime_ref",
        "single_upper", "single_lower", "regime",
    ]);
    let mut table = Table::new(&head);
    for r in &profile.rows {
        let mut row = vec![num(r.t), r.y_id.to_string()];
        row.extend(profile.ys[r.y_id].iter().map(|&v| num(v)));
        row.extend([
            num(r.opnorm),
            num(r.alpha_t),
            num(1.0 / r.alpha_t),
            num(r.small_regime_ref),
            num(r.large_regime_ref),
            num(r.single_upper),
            num(r.single_lower),
            match r.regime {
                Regime::Small => "small".into(),
                Regime::Large => "large".into(),
            },
        ]);
        table.push(row);
    }

    let mut inv = Vec::new();
    let positive = profile.rows.iter().all(|r| r.opnorm > 0.0 && r.opnorm.is_finite());
    inv.push(Invariant::new("opnorm positive and finite", positive, ""));
    let alpha_err = profile
        .rows
        .iter()
        .map(|r| (r.alpha_t - (profile.a + 1.0 / r.t)).abs() / r.alpha_t)
        .fold(0.0, f64::max);
    inv.push(Invariant::new(
        "alpha_t consistent",
        alpha_err < 1e-12,
        format!("max relative gap {}", num(alpha_err)),
    ));
    if is_zero {
        let err = profile
            .rows
            .iter()
            .map(|r| (r.opnorm - 1.0 / r.alpha_t).abs())
            .fold(0.0, f64::max);
        inv.push(Invariant::new(
            "zero model opnorm = 1/(a + 1/t)",
            err < GRID_TOL,
            format!("max error {}", num(err)),
        ));
    }
    let c = profile.small_t_constant();
    let t0 = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let rem = profile.smallest_t_remainder();
    inv.push(Invariant::new(
        "opnorm/t -> 1 with sqrt(t) remainder",
        c.is_finite() && rem <= c * t0.sqrt() + 1e-12 && rem < 0.5,
        format!("C = {}, remainder {} at t = {}", num(c), num(rem), num(t0)),
    ));
    if dim == 1 && inputs.b.is_finite() {
        let outside = profile
            .rows
            .iter()
            .filter(|r| {
                r.opnorm > r.single_upper * (1.0 + 1e-9) || r.opnorm < r.single_lower * (1.0 - 1e-9)
            })
            .count();
        inv.push(Invariant::new(
            "single-particle range holds",
            outside == 0,
            format!("{outside} rows outside"),
        ));
    }
    let sup = profile.sup_over_y();
    let (t_last, op_last, at_last) = *sup.last().expect("profiles have rows");
    let ceiling = if inputs.b.is_finite() {
        let l = 2.0 * inputs.b / (inputs.sigma * inputs.sigma);
        (1.0 / at_last.sqrt() + l / at_last).powi(2)
    } else {
        f64::INFINITY
    };
    inv.push(Invariant::new(
        "opnorm bounded for large t",
        op_last.is_finite() && (dim > 1 || op_last <= ceiling * (1.0 + 1e-9)),
        format!("sup_y opnorm {} at t = {}", num(op_last), num(t_last)),
    ));

    let fitted = profile.fitted_small_constants(&inputs);
    let results = json!({
        "t_star": profile.t_star,
        "a": profile.a,
        "small_t_constant": c,
        "smallest_t_remainder": rem,
        "fitted_small_envelope_constants": fitted,
        "envelope_constants": profile.envelope,
    });
    Ok(Outcome {
        invariants: inv,
        files: vec![table.artifact("profile.csv")?],
        results,
    })
}

fn transport_map(cfg: &ExperimentConfig, model: ModelSpec<f64>) -> Result<Outcome, CliError> {
    let target = TargetSpec::new(model, 1, None, true)?;
    if target.total_dim() != 1 {
        return Err(CliError::Config("transport_map: model.dim must be 1".into()));
    }
    let inputs = target.model().constants();
    let mu = particle_measure(&target, particle_axes(&target, Some(cfg.flow.grid_points))?)?;
    let map = reverse_flow_map(&mu, &cfg.flow.flow())?;
    let monotone = map.mapped.windows(2).all(|w| w[1] > w[0]);
    let push = pushforward_density(&map, mu.axes()[0])?;
    let w2 = w2_distance_1d(&push, &mu)?;
    let cdf = mu.cdf()?;
    let quantile_err = map
        .source
        .iter()
        .zip(&map.mapped)
        .filter(|(z, _)| z.abs() <= 6.0)
        .map(|(&z, &x)| (cdf.quantile(std_normal_cdf(z)) - x).abs())
        .fold(0.0, f64::max);
    let l = lipschitz_estimate(&map);

    let f = &cfg.flow;
    let ts = log_space(f.fit_t_min, f.fit_t_max, f.fit_t_points);
    let ys: Vec<Vec<f64>> = f.fit_y.iter().map(|&y| vec![y]).collect();
    let log_mu = |x: &[f64]| target.log_density(x);
    let profile = covariance_profile(&log_mu, 1, &ts, &ys, &inputs, &cfg.tilt.profile())?;
    let (fitted, terms) = fitted_lipschitz_bound(&profile, &f.fit_exponents)?;
    let generic = main_bound(&inputs, MainVariant::Generic);
    let specific = main_bound(&inputs, MainVariant::Specific);

    let mut table = Table::new(&["z", "t_of_z"]);
    for (z, x) in map.source.iter().zip(&map.mapped) {
        table.push(vec![num(*z), num(*x)]);
    }
    let mut forward = Table::new(&["x", "s_of_x"]);
    for (x, s) in map.forward_x.iter().zip(&map.forward_s) {
        forward.push(vec![num(*x), num(*s)]);
    }
    let mut density = Table::new(&["x", "mu", "pushforward"]);
    let axis = mu.axes()[0];
    for i in 0..axis.n {
        density.push(vec![num(axis.node(i)), num(mu.density()[i]), num(push.density()[i])]);
    }

    let inv = vec![
        Invariant::new("map strictly increasing", monotone, ""),
        Invariant::new("W2(T#gamma, mu) < 1e-3", w2 < W2_TOL, format!("W2 = {}", num(w2))),
        Invariant::new(
            "L <= heat-flow bound with fitted terms",
            l <= fitted,
            format!("L = {}, bound {}", num(l), num(fitted)),
        ),
        Invariant::new(
            "L <= main bound (generic)",
            l <= generic,
            format!("L = {}, bound {}", num(l), num(generic)),
        ),
    ];
    let results = json!({
        "coordinates": "rescaled (x -> eta x, eta = sqrt(lambda)/sigma)",
        "empirical_lipschitz": l,
        "heatflow_bound": fitted,
        "fitted_terms": terms,
        "main_bound_generic": generic,
        "main_bound_specific": specific,
        "main_constants": "implied constants set to 1",
        "w2_pushforward": w2,
        "quantile_map_error": quantile_err,
        "flow_steps": map.steps,
        "t_max": map.t_max,
    });
    Ok(Outcome {
        invariants: inv,
        files: vec![
            table.artifact("map.csv")?,
            forward.artifact("forward_flow.csv")?,
            density.artifact("pushforward.csv")?,
        ],
        results,
    })
}

fn coordinate_moments(x: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mean: Vec<f64> = (0..d).map(|k| (0..n).map(|i| x[i * d + k]).sum::<f64>() / nf).collect();
    let var = (0..d)
        .map(|k| (0..n).map(|i| (x[i * d + k] - mean[k]).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0))
        .collect();
    (mean, var)
}

fn mfld_run(cfg: &ExperimentConfig, model: ModelSpec<f64>) -> Result<Outcome, CliError> {
    let m = cfg.mfld.mfld();
    let traj = mfld_simulate(&model, &m, None, cfg.seed, 0)?;
    let d = model.dim();
    let mut states = Vec::new();
    write_states_csv(&mut states, 0, &traj.states)?;

    let mut head = vec!["time".to_string(), "objective".to_string()];
    head.extend((1..=d).flat_map(|k| [format!("mean{k}"), format!("var{k}")]));
    let head_ref: Vec<&str> = head.iter().map(String::as_str).collect();
    let mut moments = Table::new(&head_ref);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (mean, var) = coordinate_moments(&s.x, s.n, d);
        let mut row = vec![num(*t), num(model.objective(&s.empirical())?)];
        row.extend(mean.iter().zip(&var).flat_map(|(a, b)| [num(*a), num(*b)]));
        moments.push(row);
    }

    let last = traj.last();
    let finite = last.x.iter().all(|v| v.is_finite());
    let mut inv = vec![Invariant::new("terminal state finite", finite, "")];
    let mut results = json!({
        "n": m.n,
        "horizon": m.horizon,
        "step": m.step,
        "noise": m.noise.unwrap_or(model.sigma()),
    });
    // The terminal particle cloud against the mean-field measure; only
    // meaningful at the model's own noise level.
    if m.noise.is_none() && d <= 2 && m.n > 1 {
        let single = TargetSpec::new(model.clone(), 1, None, false)?;
        let axes = default_axes(&single, cfg.grid.points)?;
        let pi = solve_self_consistent(&single, axes, &cfg.grid.solver())?;
        let pi_mean = pi.mean_measure.mean();
        let pi_cov = pi.mean_measure.covariance();
        let (mean, var) = coordinate_moments(&last.x, last.n, d);
        let nf = m.n as f64;
        for k in 0..d {
            let v = pi_cov[(k, k)];
            let mean_tol = 5.0 * (v / nf).sqrt();
            let var_tol = 5.0 * v * (2.0 / (nf - 1.0)).sqrt() + v * model.lambda() * m.step;
            inv.push(Invariant::new(
                format!("terminal mean matches pi (coordinate {})", k + 1),
                (mean[k] - pi_mean[k]).abs() <= mean_tol,
                format!("{} vs {} (tol {})", num(mean[k]), num(pi_mean[k]), num(mean_tol)),
            ));
            inv.push(Invariant::new(
                format!("terminal variance matches pi (coordinate {})", k + 1),
                (var[k] - v).abs() <= var_tol,
                format!("{} vs {} (tol {})", num(var[k]), num(v), num(var_tol)),
            ));
        }
        results["pi_mean"] = json!(pi_mean);
        results["terminal_mean"] = json!(mean);
        results["terminal_variance"] = json!(var);
    }
    Ok(Outcome {
        invariants: inv,
        files: vec![
            Artifact {
                name: "trajectory.csv".into(),
                bytes: states,
            },
            moments.artifact("moments.csv")?,
        ],
        results,
    })
}

fn or_base(list: &[f64], base: f64) -> Vec<f64> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

fn bounds_table(cfg: &ExperimentConfig, model: ModelSpec<f64>) -> Result<Outcome, CliError> {
    let base = model.constants();
    let b = &cfg.bounds;
    let mut table = Table::new(&[
        "sigma", "lambda", "beta_hat", "b", "d", "sigma_over_sqrt_lambda", "main_exponent_generic",
        "main_generic", "main_specific", "main_specific_full", "lsi_pi", "cbar_pi", "poc_generic",
        "poc_example_nn", "winf", "rescaled_beta_hat", "rescaled_b", "t_star",
        "heatflow_no_terms",
    ]);
    let mut order_ok = true;
    let mut plain_err: f64 = 0.0;
    let mut nan_free = true;
    let mut rows = 0usize;
    for &sigma in &or_base(&b.sigma, base.sigma) {
        for &lambda in &or_base(&b.lambda, base.lambda) {
            for &beta_hat in &or_base(&b.beta_hat, base.beta_hat) {
                for &bb in &or_base(&b.b, base.b) {
                    let p = BoundInputs {
                        sigma,
                        lambda,
                        beta_hat,
                        b: bb,
                        rescaled: false,
                        ..base
                    };
                    p.validate()?;
                    let r = p.rescale_parameters()?;
                    let alpha = p.alpha();
                    let lip = 2.0 * bb / (sigma * sigma);
                    let cbar = lsi_pert_bound(alpha, lip)?;
                    let g = main_bound(&p, MainVariant::Generic);
                    let s = main_bound(&p, MainVariant::Specific);
                    let sf = main_bound(&p, MainVariant::SpecificFull);
                    let ratio = sigma / lambda.sqrt();
                    let vals = [
                        ratio,
                        main_exponent(&p, MainVariant::Generic),
                        g,
                        s,
                        sf,
                        lsi_pi_bound(&p),
                        cbar,
                        poc_bound(&p, cbar, alpha, PocVariant::Generic)?,
                        poc_bound(&p, cbar, alpha, PocVariant::ExampleNn)?,
                        winf_bound(alpha, lip)?,
                        r.beta_hat,
                        r.b,
                        regime_threshold(&r),
                        heatflow_lipschitz_bound(r.alpha() - 1.0, &[])?,
                    ];
                    nan_free &= vals.iter().all(|v| !v.is_nan());
                    order_ok &= s <= g && s <= sf;
                    if beta_hat == 0.0 && bb == 0.0 {
                        plain_err = plain_err.max((g - ratio).abs() / ratio);
                    }
                    let mut row = vec![num(sigma), num(lambda), num(beta_hat), num(bb), p.d.to_string()];
                    row.extend(vals.iter().map(|&v| num(v)));
                    table.push(row);
                    rows += 1;
                }
            }
        }
    }
    let inv = vec![
        Invariant::new("no NaN in the table", nan_free, format!("{rows} rows")),
        Invariant::new("specific <= generic and <= specific_full", order_ok, ""),
        Invariant::new(
            "beta_hat = B = 0 gives sigma/sqrt(lambda)",
            plain_err <= 1e-12,
            format!("max relative error {}", num(plain_err)),
        ),
    ];
    Ok(Outcome {
        invariants: inv,
        files: vec![table.artifact("bounds.csv")?],
        results: json!({ "rows": rows, "main_constants": "implied constants set to 1" }),
    })
}
