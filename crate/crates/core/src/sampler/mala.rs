use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{stream_rng, ParticleState, TargetSpec};
use crate::error::{reject, Result};
use crate::scalar::Real;
use crate::stats::effective_sample_size;

/// Acceptance rate the burn-in adaptation aims for.
pub const TARGET_ACCEPTANCE: f64 = 0.574;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalaConfig {
    pub n_samples: usize,
    pub n_burnin: usize,
    /// Initial step `τ` of the proposal `x + τ∇log π + √(2τ)ξ`.
    pub step_size: f64,
    /// Keep every `thin`-th post-burn-in state.
    pub thin: usize,
}

impl Default for MalaConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            n_burnin: 2_000,
            step_size: 0.1,
            thin: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalaDiagnostics {
    pub acceptance_rate: f64,
    /// Step size frozen at the end of burn-in.
    pub step_size: f64,
    /// Names of the scalar summaries in `ess`.
    pub summaries: Vec<String>,
    pub ess: Vec<f64>,
    /// Acceptance outside `[0.2, 0.8]` after tuning.
    pub acceptance_warning: bool,
}

struct Chain<'a, T: Real> {
    target: &'a TargetSpec<T>,
    x: Vec<T>,
    grad: Vec<T>,
    logp: T,
    prop: Vec<T>,
    prop_grad: Vec<T>,
}

impl<T: Real> Chain<'_, T> {
    /// One Metropolis-adjusted Langevin step; returns the acceptance
    /// probability and whether the proposal was taken.
    fn step<R: Rng + ?Sized>(&mut self, tau: T, rng: &mut R) -> (f64, bool) {
        let noise = (T::lit(2.0) * tau).sqrt();
        for ((p, &x), &g) in self.prop.iter_mut().zip(&self.x).zip(&self.grad) {
            let xi: f64 = rng.sample(StandardNormal);
            *p = x + tau * g + noise * T::lit(xi);
        }
        let logp_prop = self.target.log_density_and_grad(&self.prop, &mut self.prop_grad);
        let four_tau = T::lit(4.0) * tau;
        // log q(x | x') − log q(x' | x)
        let mut back = T::zero();
        let mut fwd = T::zero();
        for i in 0..self.x.len() {
            let b = self.x[i] - self.prop[i] - tau * self.prop_grad[i];
            let f = self.prop[i] - self.x[i] - tau * self.grad[i];
            back = back + b * b;
            fwd = fwd + f * f;
        }
        let log_ratio = (logp_prop - self.logp + (fwd - back) / four_tau).as_f64();
        let accept_prob = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.min(0.0).exp()
        };
        let u: f64 = rng.random();
        if u < accept_prob {
            std::mem::swap(&mut self.x, &mut self.prop);
            std::mem::swap(&mut self.grad, &mut self.prop_grad);
            self.logp = logp_prop;
            (accept_prob, true)
        } else {
            (accept_prob, false)
        }
    }
}

/// Runs one chain and hands every kept state to `observe`. Deterministic
/// in `(seed, chain_id)`. The chain starts at `init`, or at each
/// particle's confinement mode.
pub fn mala_run<T: Real>(
    target: &TargetSpec<T>,
    init: Option<&[T]>,
    cfg: &MalaConfig,
    seed: u64,
    chain_id: u64,
    mut observe: impl FnMut(&[T]),
) -> Result<MalaDiagnostics> {
    if !(cfg.step_size > 0.0) {
        return reject("MALA step size must be positive");
    }
    let dim = target.total_dim();
    let x = match init {
        Some(v) if v.len() == dim => v.to_vec(),
        Some(v) => return reject(format!("initial state has {} coordinates, expected {dim}", v.len())),
        None => (0..target.n()).flat_map(|i| target.confinement_mode(i)).collect(),
    };
    let mut grad = vec![T::zero(); dim];
    let logp = target.log_density_and_grad(&x, &mut grad);
    let mut chain = Chain {
        target,
        x,
        grad,
        logp,
        prop: vec![T::zero(); dim],
        prop_grad: vec![T::zero(); dim],
    };
    let mut rng = stream_rng(seed, chain_id);

    let mut log_tau = cfg.step_size.ln();
    for k in 0..cfg.n_burnin {
        let (a, _) = chain.step(T::lit(log_tau.exp()), &mut rng);
        log_tau += (a - TARGET_ACCEPTANCE) / ((k + 1) as f64).powf(0.6);
    }
    let tau = T::lit(log_tau.exp());

    let d = target.dim();
    let n = target.n();
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_samples); d + 1];
    let thin = cfg.thin.max(1);
    let mut accepted = 0usize;
    let mut steps = 0usize;
    for _ in 0..cfg.n_samples {
        for _ in 0..thin {
            let (_, took) = chain.step(tau, &mut rng);
            accepted += usize::from(took);
            steps += 1;
        }
        observe(&chain.x);
        let inv_n = 1.0 / n as f64;
        for k in 0..d {
            let m: f64 = (0..n).map(|i| chain.x[i * d + k].as_f64()).sum::<f64>() * inv_n;
            traces[k].push(m);
        }
        let sq: f64 = chain.x.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() * inv_n;
        traces[d].push(sq);
    }
    let acceptance_rate = accepted as f64 / steps.max(1) as f64;
    let mut summaries: Vec<String> = (1..=d).map(|k| format!("mean_x{k}")).collect();
    summaries.push("mean_sq_norm".into());
    Ok(MalaDiagnostics {
        acceptance_rate,
        step_size: log_tau.exp(),
        summaries,
        ess: traces.iter().map(|t| effective_sample_size(t)).collect(),
        acceptance_warning: !(0.2..=0.8).contains(&acceptance_rate),
    })
}

/// Runs one chain and collects its kept states.
pub fn mala_sample<T: Real>(
    target: &TargetSpec<T>,
    cfg: &MalaConfig,
    seed: u64,
    chain_id: u64,
) -> Result<(Vec<ParticleState<T>>, MalaDiagnostics)> {
    let mut out = Vec::with_capacity(cfg.n_samples);
    let d = target.dim();
    let n = target.n();
    let mut step = cfg.n_burnin as u64;
    let thin = cfg.thin.max(1) as u64;
    let diag = mala_run(target, None, cfg, seed, chain_id, |x| {
        step += thin;
        out.push(ParticleState {
            x: x.to_vec(),
            n,
            d,
            step_count: step,
            rng_stream_id: chain_id,
        });
    })?;
    Ok((out, diag))
}
