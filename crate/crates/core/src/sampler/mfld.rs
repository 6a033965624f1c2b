use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{stream_rng, ParticleState};
use crate::error::{reject, Error, Result};
use crate::model::ModelSpec;
use crate::scalar::Real;

/// Any coordinate beyond this magnitude aborts a simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfldConfig {
    pub n: usize,
    pub horizon: f64,
    pub step: f64,
    /// Record every `record_every`-th state (the first and last are always
    /// kept).
    pub record_every: usize,
    /// Noise level used instead of the model's `σ` (e.g. 0 for the
    /// noiseless gradient flow).
    pub noise: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<ParticleState<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &ParticleState<T> {
        self.states.last().expect("trajectories hold at least one state")
    }
}

/// Euler–Maruyama discretization of the particle system
/// `dXⁱ = −(λXⁱ + ∇δF₀(ρₓ, Xⁱ)) dt + σ dBⁱ`.
pub fn mfld_simulate<T: Real>(
    model: &ModelSpec<T>,
    cfg: &MfldConfig,
    init: Option<Vec<T>>,
    seed: u64,
    chain_id: u64,
) -> Result<Trajectory<T>> {
    if !(cfg.step > 0.0) || !(cfg.horizon >= 0.0) || cfg.n == 0 {
        return reject("mfld needs step > 0, horizon >= 0 and N >= 1");
    }
    let d = model.dim();
    let mut x = match init {
        Some(v) if v.len() == cfg.n * d => v,
        Some(v) => return reject(format!("initial state has {} coordinates", v.len())),
        None => vec![T::zero(); cfg.n * d],
    };
    let sigma = cfg.noise.map_or(model.sigma(), T::lit);
    let h = T::lit(cfg.step);
    let noise = sigma * h.sqrt();
    let lambda = model.lambda();
    let steps = (cfg.horizon / cfg.step).round() as usize;
    let every = cfg.record_every.max(1);
    let mut rng = stream_rng(seed, chain_id);
    let record = |x: &[T], k: usize| ParticleState {
        x: x.to_vec(),
        n: cfg.n,
        d,
        step_count: k as u64,
        rng_stream_id: chain_id,
    };
    let mut traj = Trajectory {
        times: vec![T::zero()],
        states: vec![record(&x, 0)],
    };
    let mut grad = vec![T::zero(); d];
    let limit = T::lit(DIVERGENCE_LIMIT);
    for k in 1..=steps {
        let yhat = model.predictions_of_points(&x);
        let lin = model.linearize_at(&yhat);
        let mut next = x.clone();
        for (i, (xi, ni)) in x.chunks(d).zip(next.chunks_mut(d)).enumerate() {
            lin.gradient_into(xi, &mut grad);
            for ((nv, &v), &g) in ni.iter_mut().zip(xi).zip(&grad) {
                let xi_noise: f64 = rng.sample(StandardNormal);
                *nv = v - (lambda * v + g) * h + noise * T::lit(xi_noise);
                if !(nv.abs() <= limit) {
                    return Err(Error::DivergenceGuard {
                        step: k,
                        particle: i,
                        value: nv.as_f64(),
                    });
                }
            }
        }
        x = next;
        if k % every == 0 || k == steps {
            traj.times.push(h * T::from_usize_lossy(k));
            traj.states.push(record(&x, k));
        }
    }
    Ok(traj)
}
