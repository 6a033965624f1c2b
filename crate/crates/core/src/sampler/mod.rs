//! Samplers for the `N`-particle Gibbs measure
//! `μ^{1:N} ∝ exp(−(2/σ²)[Σᵢ V(xⁱ) + N F₀(ρₓ)])`, optionally tilted by
//! `−‖yⁱ − xⁱ‖²/(2t) + ‖xⁱ‖²/2` per particle, and for the particle
//! discretization of mean-field Langevin dynamics.

mod mala;
mod mfld;
mod target;

pub use mala::{mala_run, mala_sample, MalaConfig, MalaDiagnostics, TARGET_ACCEPTANCE};
pub use mfld::{mfld_simulate, MfldConfig, Trajectory, DIVERGENCE_LIMIT};
pub use target::{n_particle_log_density_grad, ParticleState, TargetSpec, TiltSpec};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Real;

/// Random stream `chain_id` of the master `seed`. Streams are independent,
/// so results do not depend on how chains are scheduled.
pub fn stream_rng(seed: u64, chain_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id);
    rng
}

/// Writes states as CSV rows `chain, step, particle, x1, …, xd`.
pub fn write_states_csv<T: Real, W: Write>(
    w: W,
    chain: u64,
    states: &[ParticleState<T>],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = states.first().map_or(1, |s| s.d);
    let mut head = vec!["chain".to_string(), "step".into(), "particle".into()];
    head.extend((1..=d).map(|k| format!("x{k}")));
    out.write_record(&head)?;
    for s in states {
        for i in 0..s.n {
            let mut rec = vec![chain.to_string(), s.step_count.to_string(), i.to_string()];
            rec.extend(s.row(i).iter().map(|v| v.as_f64().to_string()));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}
