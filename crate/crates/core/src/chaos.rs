//! Propagation of chaos: Monte Carlo estimates of `KL(μ^{1:N} ‖ π^{1:N})`
//! through the identity `μ^{1:N} ∝ π^{1:N} exp(−(2N/σ²) B)`, where
//! `B(ρ, π̄) = F₀(ρ) − F₀(π̄) − ⟨δF₀(π̄), ρ − π̄⟩` is the Bregman divergence
//! of the energy, and the closed-form bounds it is compared against.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{lsi_pert_bound, BoundInputs};
use crate::error::{reject, Error, Result};
use crate::measure::{GridDensity, Measure};
use crate::meanfield::ProximalGibbsSystem;
use crate::model::{Linearization, ModelKind, ModelSpec};
use crate::sampler::{mala_run, stream_rng, MalaConfig, MalaDiagnostics, TargetSpec};
use crate::scalar::{log_sum_exp, Real};
use crate::stats::{batch_means, bootstrap, mean, variance, Estimate};

/// Below this many effective draws the normalizer estimate is flagged.
pub const MIN_Z_ESS: f64 = 100.0;
/// Tolerance of the Bregman nonnegativity check.
pub const BREGMAN_TOL: f64 = 1e-10;

/// `B(·, π̄)` prepared for repeated evaluation on particle configurations.
pub struct Bregman<'a, T: Real> {
    model: &'a ModelSpec<T>,
    lin: Linearization<'a, T>,
    energy_at_pibar: T,
    variation_at_pibar: T,
}

impl<'a, T: Real> Bregman<'a, T> {
    pub fn new(model: &'a ModelSpec<T>, pibar: &GridDensity<T>) -> Result<Self> {
        let yhat = model.predictions(pibar)?;
        let lin = model.linearize_at(&yhat);
        let variation_at_pibar = lin.integrate_against(pibar);
        Ok(Self {
            model,
            energy_at_pibar: model.energy_from_predictions(&yhat),
            lin,
            variation_at_pibar,
        })
    }

    /// `B(ν, π̄)` for any measure `ν`.
    pub fn of_measure(&self, nu: &dyn Measure<T>) -> Result<T> {
        let f = self.model.energy(nu)?;
        Ok(f - self.energy_at_pibar - (self.lin.integrate_against(nu) - self.variation_at_pibar))
    }

    /// `B(ρₓ, π̄)` for the empirical measure of row-major `points`.
    pub fn of_points(&self, points: &[T]) -> T {
        let d = self.model.dim();
        let f = self
            .model
            .energy_from_predictions(&self.model.predictions_of_points(points));
        let n = T::from_usize_lossy(points.len() / d);
        let lin: T = points.chunks(d).map(|x| self.lin.first_variation(x)).sum::<T>() / n;
        f - self.energy_at_pibar - (lin - self.variation_at_pibar)
    }

    /// Lipschitz bound of `δF₀(π̄, ·)`.
    pub fn lipschitz(&self) -> T {
        self.lin.lipschitz_bound()
    }
}

/// `B_{F₀}(ν, π̄)`.
pub fn bregman_divergence<T: Real>(
    model: &ModelSpec<T>,
    nu: &dyn Measure<T>,
    pibar: &GridDensity<T>,
) -> Result<T> {
    Bregman::new(model, pibar)?.of_measure(nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PocVariant {
    /// `(4β̂/σ²) min{C̄_PI d, 2d/α + 4B²/(α²σ⁴)}`.
    Generic,
    /// `(β̂/σ²) min{C̄_PI, 2/α + 8B²/(α²σ⁴)}` for two-layer networks.
    ExampleNn,
}

/// Right-hand side of the propagation of chaos bound.
pub fn poc_bound<T: Real>(
    inputs: &BoundInputs<T>,
    cbar_pi: T,
    alpha: T,
    variant: PocVariant,
) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if !(cbar_pi > T::zero()) {
        return Err(Error::Domain(format!("C_PI = {cbar_pi} must be positive")));
    }
    let s2 = inputs.sigma * inputs.sigma;
    let s4 = s2 * s2;
    let b2 = inputs.b * inputs.b;
    let a2 = alpha * alpha;
    Ok(match variant {
        PocVariant::Generic => {
            let d = T::from_usize_lossy(inputs.d);
            T::lit(4.0) * inputs.beta_hat / s2
                * (cbar_pi * d).min(T::lit(2.0) * d / alpha + T::lit(4.0) * b2 / (a2 * s4))
        }
        PocVariant::ExampleNn => {
            inputs.beta_hat / s2
                * cbar_pi.min(T::lit(2.0) / alpha + T::lit(8.0) * b2 / (a2 * s4))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    pub mcmc: MalaConfig,
    pub n_chains: usize,
    /// Batches per chain for the batch-means interval.
    pub n_batches: usize,
    /// i.i.d. draws from `π^{1:N}`.
    pub n_pi_samples: usize,
    pub bootstrap_reps: usize,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self {
            mcmc: MalaConfig {
                n_samples: 40_000,
                n_burnin: 5_000,
                step_size: 0.1,
                thin: 1,
            },
            n_chains: 4,
            n_batches: 40,
            n_pi_samples: 40_000,
            bootstrap_reps: 200,
        }
    }
}

/// Inequalities checked on each run, with their slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosChecks {
    /// Smallest Bregman value seen on any sample.
    pub min_bregman: f64,
    pub bregman_nonnegative: bool,
    /// `−log Ẑ ≤ (2N/σ²) Ê_π B`.
    pub jensen: bool,
    /// `KL ≤ (2N/σ²) Ê_π B` within two half-widths.
    pub chain: bool,
    /// `Ê_π B ≤ (1/2N²) Σⱼ pⱼ β_ℓ Σᵢ var_{πⁱ}(hⱼ)` within two half-widths.
    pub variance: bool,
    pub kl_nonnegative: bool,
    pub poc: bool,
    pub poc_ii: bool,
}

impl ChaosChecks {
    pub fn all(&self) -> bool {
        self.bregman_nonnegative
            && self.jensen
            && self.chain
            && self.variance
            && self.kl_nonnegative
            && self.poc
            && self.poc_ii
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub n: usize,
    /// Confinement curvature used in the bounds.
    pub alpha: f64,
    pub kl: Estimate,
    pub bregman_mu: Estimate,
    pub bregman_pi: Estimate,
    pub log_z: Estimate,
    pub ess_z: f64,
    pub ess_warning: bool,
    /// Lipschitz bound of `δF₀(π̄, ·)`.
    pub lipschitz: f64,
    /// Gradient bound used in the bounds: `min(B, lipschitz)`.
    pub b_eff: f64,
    pub cbar_pi: f64,
    pub bound_poc: f64,
    pub bound_poc_ii: f64,
    pub variance_bound: f64,
    pub mala: Vec<MalaDiagnostics>,
    pub checks: ChaosChecks,
}

/// `(1/2N²) Σⱼ pⱼ β_ℓ Σᵢ var_{πⁱ}(hⱼ)` by grid quadrature.
pub fn variance_bound<T: Real>(model: &ModelSpec<T>, system: &ProximalGibbsSystem<T>) -> T {
    let n = T::from_usize_lossy(system.per_particle.len());
    let (weights, beta): (Vec<T>, T) = match model.kind() {
        ModelKind::Zero => return T::zero(),
        ModelKind::ExampleNn { data, loss, .. } => {
            (data.iter().map(|z| z.weight).collect(), loss.beta())
        }
        ModelKind::QuadraticOracle(q) => (vec![T::one()], q.kappa),
    };
    let mut total = T::zero();
    for (j, &p) in weights.iter().enumerate() {
        let vars: T = system
            .per_particle
            .iter()
            .map(|pi| {
                let m = pi.expect(&mut |x| model.feature(j, x));
                pi.expect(&mut |x| (model.feature(j, x) - m).powi(2))
            })
            .sum();
        total = total + p * vars;
    }
    beta * total / (T::lit(2.0) * n * n)
}

/// Estimates `KL(μ^{1:N} ‖ π^{1:N}) = −(2N/σ²) E_μ B − log Z` with
/// `Z = E_{π^{1:N}} exp(−(2N/σ²) B)`, and checks it against the bounds.
///
/// `E_μ B` comes from MALA chains (batch means); `Z` from i.i.d.
/// inverse-CDF draws of `π^{1:N}` (log-sum-exp, bootstrap interval).
pub fn estimate_kl<T: Real>(
    target: &TargetSpec<T>,
    system: &ProximalGibbsSystem<T>,
    cfg: &ChaosConfig,
    seed: u64,
) -> Result<ChaosReport> {
    let model = target.model();
    let n = target.n();
    if model.dim() != 1 {
        return Err(Error::Unsupported("chaos estimates need d = 1".into()));
    }
    if system.per_particle.len() != n {
        return reject("system and target disagree on N");
    }
    if cfg.n_chains == 0 || cfg.mcmc.n_samples < cfg.n_batches.max(2) {
        return reject("need at least one chain and one sample per batch");
    }
    let pibar = &system.mean_measure;
    let breg = Bregman::new(model, pibar)?;
    let s2 = model.sigma() * model.sigma();
    let scale = 2.0 * n as f64 / s2.as_f64();

    // μ side
    let chains: Vec<Result<(Vec<f64>, MalaDiagnostics)>> = (0..cfg.n_chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut vals = Vec::with_capacity(cfg.mcmc.n_samples);
            let diag = mala_run(target, None, &cfg.mcmc, seed, c, |x| {
                vals.push(breg.of_points(x).as_f64());
            })?;
            Ok((vals, diag))
        })
        .collect();
    let mut per_chain = Vec::new();
    let mut mala = Vec::new();
    let mut min_bregman = f64::INFINITY;
    for r in chains {
        let (vals, diag) = r?;
        min_bregman = vals.iter().copied().fold(min_bregman, f64::min);
        per_chain.push(batch_means(&vals, cfg.n_batches));
        mala.push(diag);
    }
    let c = per_chain.len() as f64;
    let bregman_mu = Estimate {
        value: per_chain.iter().map(|e| e.value).sum::<f64>() / c,
        half_width: per_chain.iter().map(|e| e.half_width.powi(2)).sum::<f64>().sqrt() / c,
    };

    // π side
    let cdfs = system
        .per_particle
        .iter()
        .map(GridDensity::cdf)
        .collect::<Result<Vec<_>>>()?;
    let mut rng = stream_rng(seed, cfg.n_chains as u64);
    let mut x = vec![T::zero(); n];
    let b_pi: Vec<f64> = (0..cfg.n_pi_samples)
        .map(|_| {
            for (xi, cdf) in x.iter_mut().zip(&cdfs) {
                *xi = cdf.quantile(T::lit(rng.random::<f64>()));
            }
            breg.of_points(&x).as_f64()
        })
        .collect();
    min_bregman = b_pi.iter().copied().fold(min_bregman, f64::min);
    let m = b_pi.len() as f64;
    let bregman_pi = Estimate {
        value: mean(&b_pi),
        half_width: 1.96 * (variance(&b_pi) / m).sqrt(),
    };
    let log_weights: Vec<f64> = b_pi.iter().map(|b| -scale * b).collect();
    let log_mean_exp = |w: &[f64]| log_sum_exp(w) - (w.len() as f64).ln();
    let mut boot_rng = stream_rng(seed, cfg.n_chains as u64 + 1);
    let log_z = bootstrap(&log_weights, cfg.bootstrap_reps, &mut boot_rng, log_mean_exp);
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2w) = log_weights.iter().fold((0.0, 0.0), |(a, b), &w| {
        let e = (w - top).exp();
        (a + e, b + e * e)
    });
    let ess_z = s1 * s1 / s2w;

    let kl = Estimate {
        value: -scale * bregman_mu.value - log_z.value,
        half_width: ((scale * bregman_mu.half_width).powi(2) + log_z.half_width.powi(2)).sqrt(),
    };

    // bounds
    let alpha = target.alpha();
    let lipschitz = breg.lipschitz();
    let mut inputs = model.constants();
    inputs.n = n;
    inputs.b = inputs.b.min(lipschitz);
    let cbar_pi = lsi_pert_bound(alpha, T::lit(2.0) / s2 * lipschitz)?;
    let bound_poc = poc_bound(&inputs, cbar_pi, alpha, PocVariant::Generic)?.as_f64();
    let bound_poc_ii = poc_bound(&inputs, cbar_pi, alpha, PocVariant::ExampleNn)?.as_f64();
    let var_bound = variance_bound(model, system).as_f64();

    let chain_slack = 2.0 * (kl.half_width.powi(2) + (scale * bregman_pi.half_width).powi(2)).sqrt();
    let checks = ChaosChecks {
        min_bregman,
        bregman_nonnegative: min_bregman >= -BREGMAN_TOL,
        jensen: -log_z.value <= scale * bregman_pi.value + 2.0 * log_z.half_width + 1e-12,
        chain: kl.value <= scale * bregman_pi.value + chain_slack,
        variance: bregman_pi.value <= var_bound + 2.0 * bregman_pi.half_width + 1e-12,
        kl_nonnegative: kl.value >= -2.0 * kl.half_width - 1e-12,
        poc: kl.value <= bound_poc + 2.0 * kl.half_width,
        poc_ii: kl.value <= bound_poc_ii + 2.0 * kl.half_width,
    };
    Ok(ChaosReport {
        n,
        alpha: alpha.as_f64(),
        kl,
        bregman_mu,
        bregman_pi,
        log_z,
        ess_z,
        ess_warning: ess_z < MIN_Z_ESS,
        lipschitz: lipschitz.as_f64(),
        b_eff: inputs.b.as_f64(),
        cbar_pi: cbar_pi.as_f64(),
        bound_poc,
        bound_poc_ii,
        variance_bound: var_bound,
        mala,
        checks,
    })
}

/// Closed-form `KL(μ^{1:N} ‖ π^{⊗N})` for the one-dimensional quadratic
/// oracle. Both measures are Gaussian with equal means; they differ only
/// along the diagonal, where the variance ratio is `λ/(λ+κ)`.
pub fn quadratic_oracle_kl(lambda: f64, kappa: f64) -> f64 {
    let r = lambda / (lambda + kappa);
    0.5 * (r - 1.0 - r.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::EmpiricalMeasure;
    use crate::meanfield::{default_axes, solve_self_consistent, SolverConfig};
    use crate::presets;

    fn inputs() -> BoundInputs<f64> {
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

    #[test]
    fn poc_examples() {
        let p = inputs();
        assert_eq!(poc_bound(&p, 1.0, 1.0, PocVariant::Generic).unwrap(), 4.0);
        assert_eq!(poc_bound(&p, 1.0, 1.0, PocVariant::ExampleNn).unwrap(), 1.0);
        let z = BoundInputs { beta_hat: 0.0, ..p };
        assert_eq!(poc_bound(&z, 1.0, 1.0, PocVariant::Generic).unwrap(), 0.0);
        assert!(poc_bound(&p, 1.0, 0.0, PocVariant::Generic).is_err());
    }

    #[test]
    fn quadratic_bregman_is_half_kappa_gap_squared() {
        let m = presets::quadratic_oracle(1.0_f64, 1.0, 2.0, 1.0).unwrap();
        let t = TargetSpec::new(m.clone(), 2, None, false).unwrap();
        let s = solve_self_consistent(&t, default_axes(&t, None).unwrap(), &SolverConfig::default())
            .unwrap();
        let mb = s.mean_measure.mean()[0];
        let nu = EmpiricalMeasure::new(vec![0.3, 1.9], 1).unwrap();
        let b = bregman_divergence(&m, &nu, &s.mean_measure).unwrap();
        assert!((b - (1.1 - mb).powi(2)).abs() < 1e-12);
        let same = bregman_divergence(&m, &s.mean_measure, &s.mean_measure).unwrap();
        assert!(same.abs() < 1e-14);
    }

    #[test]
    fn oracle_kl_value() {
        assert!((quadratic_oracle_kl(1.0, 1.0) - 0.096_573_590_279_972_65).abs() < 1e-15);
    }
}
