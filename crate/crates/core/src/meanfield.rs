//! Self-consistent proximal Gibbs systems on grids.
//!
//! Given a target with per-particle confinements `Vᵢ` (the plain `(λ/σ²)‖x‖²`
//! or its tilted version), the system solves
//! `πⁱ ∝ exp(−Vᵢ − (2/σ²) δF₀(π̄, ·))` with `π̄ = (1/N) Σ πⁱ` by damped
//! fixed-point iteration on `π̄`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::measure::{Axis, GridDensity, Measure};
use crate::sampler::TargetSpec;
use crate::scalar::Real;

/// Default grid sizes: 1-d and per axis in 2-d.
pub const DEFAULT_POINTS_1D: usize = 2048;
pub const DEFAULT_POINTS_2D: usize = 256;
/// Half-width of the default grid in proxy standard deviations.
pub const GRID_HALF_WIDTH_SD: f64 = 10.0;
/// Minimum post hoc coverage in standard deviations.
pub const MIN_COVERAGE_SD: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial damping `θ ∈ (0, 1]`; halved whenever the change grows.
    pub damping: f64,
    /// Stop once `sup |Mean(Rebuild(π̄)) − π̄| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// Converged system `(π¹, …, πᴺ)` with mixture `π̄`.
#[derive(Debug, Clone)]
pub struct ProximalGibbsSystem<T> {
    pub per_particle: Vec<GridDensity<T>>,
    pub mean_measure: GridDensity<T>,
    pub residual: T,
    pub iterations: usize,
    /// `sup |Mean(Rebuild(π̄)) − π̄|` per iteration.
    pub trace: Vec<f64>,
}

/// Per-particle densities generated by a given mixture `π̄`. Untilted
/// targets build one density and clone it.
pub fn rebuild<T: Real>(
    target: &TargetSpec<T>,
    pibar: &GridDensity<T>,
) -> Result<Vec<GridDensity<T>>> {
    let model = target.model();
    let lin = model.linearize(pibar)?;
    let scale = T::lit(2.0) / (model.sigma() * model.sigma());
    let axes = pibar.axes().to_vec();
    let interaction: Vec<T> = (0..pibar.len())
        .map(|idx| scale * lin.first_variation(&pibar.node(idx)))
        .collect();
    let build = |i: usize| -> Result<GridDensity<T>> {
        let log_u = (0..pibar.len())
            .map(|idx| target.confinement_log(i, &pibar.node(idx)) - interaction[idx])
            .collect();
        GridDensity::from_log_potential(axes.clone(), log_u)
    };
    if target.tilt().is_none() {
        let one = build(0)?;
        return Ok(vec![one; target.n()]);
    }
    (0..target.n()).into_par_iter().map(build).collect()
}

fn confinement_only<T: Real>(target: &TargetSpec<T>, axes: &[Axis<T>]) -> Result<Vec<GridDensity<T>>> {
    (0..target.n())
        .map(|i| GridDensity::from_log_fn(axes.to_vec(), |x| target.confinement_log(i, x)))
        .collect()
}

/// Grid covering every particle's density: centred on the span of the
/// confinement modes, `±10` proxy standard deviations `1/√α` wide, plus the
/// largest drift the interaction can cause.
pub fn default_axes<T: Real>(target: &TargetSpec<T>, points: Option<usize>) -> Result<Vec<Axis<T>>> {
    let d = target.dim();
    if d > 2 {
        return Err(Error::Unsupported(format!("grids in dimension {d}")));
    }
    let n_pts = points.unwrap_or(if d == 1 { DEFAULT_POINTS_1D } else { DEFAULT_POINTS_2D });
    let alpha = target.alpha();
    let model = target.model();
    let b = model.constants().b;
    let lip = if b.is_finite() {
        b
    } else {
        // unbounded gradients (quadratic oracle): bound the drift from the
        // confinement-only mixture
        let probe_axes: Vec<Axis<T>> = (0..d)
            .map(|k| {
                let (lo, hi) = mode_span(target, k);
                let w = T::lit(GRID_HALF_WIDTH_SD) / alpha.sqrt();
                Axis::new(lo - w, hi + w, 512)
            })
            .collect::<Result<_>>()?;
        let parts = confinement_only(target, &probe_axes)?;
        let refs: Vec<&GridDensity<T>> = parts.iter().collect();
        let pibar0 = GridDensity::average(&refs)?;
        T::lit(2.0) * model.linearize(&pibar0)?.lipschitz_bound()
    };
    let drift = T::lit(2.0) / (model.sigma() * model.sigma()) * lip / alpha;
    let half = T::lit(GRID_HALF_WIDTH_SD) / alpha.sqrt() + drift;
    (0..d)
        .map(|k| {
            let (lo, hi) = mode_span(target, k);
            Axis::new(lo - half, hi + half, n_pts)
        })
        .collect()
}

fn mode_span<T: Real>(target: &TargetSpec<T>, k: usize) -> (T, T) {
    (0..target.n())
        .map(|i| target.confinement_mode(i)[k])
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Damped fixed-point iteration `π̄ ← (1−θ)π̄ + θ Mean(Rebuild(π̄))`,
/// started from the confinement-only mixture.
pub fn solve_self_consistent<T: Real>(
    target: &TargetSpec<T>,
    axes: Vec<Axis<T>>,
    cfg: &SolverConfig,
) -> Result<ProximalGibbsSystem<T>> {
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) || !(cfg.tol > 0.0) {
        return reject("damping must lie in (0, 1] and tol must be positive");
    }
    if axes.len() != target.dim() {
        return reject("grid dimension does not match the model");
    }
    let start = confinement_only(target, &axes)?;
    let refs: Vec<&GridDensity<T>> = start.iter().collect();
    let mut pibar = GridDensity::average(&refs)?;
    let mut theta = T::lit(cfg.damping);
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let parts = rebuild(target, &pibar)?;
        let refs: Vec<&GridDensity<T>> = parts.iter().collect();
        let image = GridDensity::average(&refs)?;
        let change = image.sup_distance(&pibar).as_f64();
        trace.push(change);
        if change < cfg.tol {
            converged = true;
            break;
        }
        if change > prev {
            theta = theta / T::lit(2.0);
        }
        prev = change;
        pibar = GridDensity::mixture(&[(T::one() - theta, &pibar), (theta, &image)])?;
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: trace.len(),
            last: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        });
    }
    let per_particle = rebuild(target, &pibar)?;
    let refs: Vec<&GridDensity<T>> = per_particle.iter().collect();
    let mean_measure = GridDensity::average(&refs)?;
    for (i, p) in per_particle.iter().enumerate() {
        let cover = p.coverage_sd().into_iter().fold(T::infinity(), T::min);
        if !(cover >= T::lit(MIN_COVERAGE_SD)) {
            return Err(Error::Domain(format!(
                "grid covers particle {i} only to {cover} standard deviations"
            )));
        }
    }
    let mut system = ProximalGibbsSystem {
        per_particle,
        mean_measure,
        residual: T::zero(),
        iterations: trace.len(),
        trace,
    };
    system.residual = proximal_residual(&system, target)?;
    Ok(system)
}

/// `maxᵢ sup |πⁱ − Rebuild(π̄)ⁱ|` for the system's own mixture `π̄`.
pub fn proximal_residual<T: Real>(
    system: &ProximalGibbsSystem<T>,
    target: &TargetSpec<T>,
) -> Result<T> {
    if system.per_particle.len() != target.n() {
        return reject("system and target disagree on N");
    }
    let fresh = rebuild(target, &system.mean_measure)?;
    Ok(fresh
        .iter()
        .zip(&system.per_particle)
        .map(|(a, b)| a.sup_distance(b))
        .fold(T::zero(), T::max))
}

/// Spread (max − min over nodes with non-negligible mass) of
/// `log πⁱ − Vᵢ-log-weight + (2/σ²)δF₀(π̄, ·)`, maximized over particles.
/// Zero when every `πⁱ` has the proximal Gibbs form.
pub fn structural_defect<T: Real>(
    system: &ProximalGibbsSystem<T>,
    target: &TargetSpec<T>,
) -> Result<T> {
    let model = target.model();
    let lin = model.linearize(&system.mean_measure)?;
    let scale = T::lit(2.0) / (model.sigma() * model.sigma());
    let mut worst = T::zero();
    for (i, p) in system.per_particle.iter().enumerate() {
        let top = p.density().iter().copied().fold(T::zero(), T::max);
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for idx in 0..p.len() {
            if p.density()[idx] < top * T::lit(1e-12) {
                continue;
            }
            let x = p.node(idx);
            let v = p.log_density()[idx] - target.confinement_log(i, &x)
                + scale * lin.first_variation(&x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

#[derive(Serialize)]
struct SystemManifest<'a> {
    n: usize,
    tilt_t: Option<f64>,
    tilt_y: Option<Vec<f64>>,
    residual: f64,
    iterations: usize,
    files: &'a [String],
}

/// Writes `pi_<i>.csv` per particle, `pibar.csv`, and `system.json`.
pub fn write_system<T: Real>(
    system: &ProximalGibbsSystem<T>,
    target: &TargetSpec<T>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (i, p) in system.per_particle.iter().enumerate() {
        let name = format!("pi_{i}.csv");
        p.write_csv(fs::File::create(dir.join(&name))?)?;
        files.push(name);
    }
    system
        .mean_measure
        .write_csv(fs::File::create(dir.join("pibar.csv"))?)?;
    files.push("pibar.csv".into());
    let manifest = SystemManifest {
        n: target.n(),
        tilt_t: target.tilt().map(|t| t.t.as_f64()),
        tilt_y: target.tilt().map(|t| t.y.iter().map(|v| v.as_f64()).collect()),
        residual: system.residual.as_f64(),
        iterations: system.iterations,
        files: &files,
    };
    fs::write(dir.join("system.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Means of the per-particle densities, row-major.
pub fn particle_means<T: Real>(system: &ProximalGibbsSystem<T>) -> Vec<T> {
    system.per_particle.iter().flat_map(|p| p.mean()).collect()
}
