use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{heatflow_lipschitz_bound, regime_threshold, BoundInputs};
use crate::error::{reject, Error, Result};
use crate::measure::{covariance_opnorm, Axis, GridDensity, Measure};
use crate::scalar::{dot, log_space, Real};

/// A tilted density whose edge value is within this many nats of its
/// maximum is treated as not normalizable on the grid.
pub const DECAY_NATS: f64 = 30.0;

/// `−‖x − y‖²/(2t) + ‖x‖²/2`, the log of the tilt factor.
pub fn tilt_log_weight<T: Real>(t: T, y: &[T], x: &[T]) -> T {
    let mut dist = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        dist = dist + (a - b) * (a - b);
    }
    dot(x, x) / T::lit(2.0) - dist / (T::lit(2.0) * t)
}

/// `μ_{t,y} ∝ exp(−‖x−y‖²/2t + ‖x‖²/2) μ` on the grid of `mu`.
pub fn tilted_measure<T: Real>(mu: &GridDensity<T>, t: T, y: &[T]) -> Result<GridDensity<T>> {
    if !(t > T::zero()) {
        return reject(format!("tilt time t = {t} must be positive"));
    }
    if y.len() != mu.dim() {
        return reject("tilt center has the wrong dimension");
    }
    let mut x = vec![T::zero(); mu.dim()];
    let log_u = (0..mu.len())
        .map(|idx| {
            mu.node_into(idx, &mut x);
            mu.log_density()[idx] + tilt_log_weight(t, y, &x)
        })
        .collect();
    let out = GridDensity::from_log_potential(mu.axes().to_vec(), log_u)?;
    check_decay(&out)?;
    Ok(out)
}

fn check_decay<T: Real>(g: &GridDensity<T>) -> Result<()> {
    let r = g.boundary_log_ratio();
    if r > T::lit(-DECAY_NATS) {
        return Err(Error::Domain(format!(
            "tilted density decays by only {} nats towards the grid edge",
            -r.as_f64()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Small,
    Large,
}

/// Implied constants of the two reference envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub small: f64,
    pub large: f64,
}

impl Default for EnvelopeConstants {
    fn default() -> Self {
        Self {
            small: 1.0,
            large: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Grid points per axis of the refined pass.
    pub points_1d: usize,
    pub points_2d: usize,
    pub envelope: EnvelopeConstants,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            points_1d: 1024,
            points_2d: 160,
            envelope: EnvelopeConstants::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub y_id: usize,
    pub opnorm: f64,
    pub alpha_t: f64,
    pub small_regime_ref: f64,
    pub large_regime_ref: f64,
    /// `(1/√α_t ± L/α_t)²` with `L = 2B/σ²`: the exact range for a single
    /// particle, where the tilted measure is an `α_t`-strongly log-concave
    /// Gaussian perturbed by an `L`-Lipschitz potential.
    pub single_upper: f64,
    pub single_lower: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceProfile {
    pub rows: Vec<ProfileRow>,
    pub ys: Vec<Vec<f64>>,
    /// `α − 1`, the constant in `1/(a + 1/t)`.
    pub a: f64,
    pub t_star: f64,
    pub envelope: EnvelopeConstants,
}

/// 40 log-spaced times over `[t*/100, 100 t*]`, or over `[1e-3, 1e3]` when
/// the threshold is infinite.
pub fn default_t_grid<T: Real>(inputs: &BoundInputs<T>) -> Vec<T> {
    let ts = regime_threshold(inputs);
    if ts.is_finite() {
        log_space(ts / T::lit(100.0), ts * T::lit(100.0), 40)
    } else {
        log_space(T::lit(1e-3), T::lit(1e3), 40)
    }
}

/// Operator norm of `cov μ_{t,y}` for every `(t, y)` pair, with `μ` given by
/// an unnormalized log density on `R^dim`.
///
/// Each tilted measure gets its own grid: a coarse pass around the
/// Gaussian center `y/(tα_t)` locates the mean and spread, and a refined
/// pass spans `±12` standard deviations.
pub fn covariance_profile<T: Real>(
    log_mu: &(dyn Fn(&[T]) -> T + Sync),
    dim: usize,
    ts: &[T],
    ys: &[Vec<T>],
    inputs: &BoundInputs<T>,
    cfg: &ProfileConfig,
) -> Result<CovarianceProfile> {
    if dim == 0 || dim > 2 {
        return Err(Error::Unsupported(format!("tilt profiles in dimension {dim}")));
    }
    if ys.iter().any(|y| y.len() != dim) {
        return reject("tilt centers have the wrong dimension");
    }
    if !inputs.rescaled {
        return reject("tilt profiles expect a rescaled model (λ = σ²)");
    }
    let alpha = inputs.alpha();
    let a = alpha - T::one();
    let t_star = regime_threshold(inputs);
    let pairs: Vec<(usize, usize)> = (0..ts.len())
        .flat_map(|i| (0..ys.len()).map(move |j| (i, j)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(i, j)| {
            let t = ts[i];
            let alpha_t = inputs.alpha_t(t);
            if !(alpha_t > T::zero()) {
                return Err(Error::Domain(format!("alpha_t = {alpha_t} at t = {t}")));
            }
            let g = tilted_grid(log_mu, dim, t, &ys[j], alpha_t, inputs, cfg)?;
            let (_, op) = covariance_opnorm(&g);
            Ok(row(inputs, cfg.envelope, t, j, op, alpha_t, t_star))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CovarianceProfile {
        rows,
        ys: ys
            .iter()
            .map(|y| y.iter().map(|v| v.as_f64()).collect())
            .collect(),
        a: a.as_f64(),
        t_star: t_star.as_f64(),
        envelope: cfg.envelope,
    })
}

fn row<T: Real>(
    p: &BoundInputs<T>,
    env: EnvelopeConstants,
    t: T,
    y_id: usize,
    op: T,
    alpha_t: T,
    t_star: T,
) -> ProfileRow {
    let s2 = p.sigma * p.sigma;
    let s4 = s2 * s2;
    let inv_sqrt = alpha_t.sqrt().recip();
    let dp = T::from_usize_lossy(p.d_prox);
    let cs = T::lit(env.small);
    let cl = T::lit(env.large);
    let small = inv_sqrt + cs * ((p.beta_hat * dp).sqrt() / p.sigma + p.b / s2) / alpha_t;
    let large_head = inv_sqrt + cl * p.b / (alpha_t * s2);
    let large = large_head * large_head
        + cl * (p.beta_hat * p.b * p.b * dp / (alpha_t.powi(3) * s4 * s2)
            + p.beta_hat * p.b.powi(4) / (alpha_t.powi(4) * s4 * s4 * s2));
    let l = T::lit(2.0) * p.b / s2;
    let upper = inv_sqrt + l / alpha_t;
    let lower = (inv_sqrt - l / alpha_t).max(T::zero());
    ProfileRow {
        t: t.as_f64(),
        y_id,
        opnorm: op.as_f64(),
        alpha_t: alpha_t.as_f64(),
        small_regime_ref: (small * small).as_f64(),
        large_regime_ref: large.as_f64(),
        single_upper: (upper * upper).as_f64(),
        single_lower: (lower * lower).as_f64(),
        regime: if t <= t_star { Regime::Small } else { Regime::Large },
    }
}

fn tilted_grid<T: Real>(
    log_mu: &(dyn Fn(&[T]) -> T + Sync),
    dim: usize,
    t: T,
    y: &[T],
    alpha_t: T,
    inputs: &BoundInputs<T>,
    cfg: &ProfileConfig,
) -> Result<GridDensity<T>> {
    let s2 = inputs.sigma * inputs.sigma;
    let drift = if inputs.b.is_finite() {
        T::lit(4.0) * inputs.b / (s2 * alpha_t)
    } else {
        T::lit(8.0)
    };
    let sd = alpha_t.sqrt().recip();
    let center: Vec<T> = y.iter().map(|&v| v / (t * alpha_t)).collect();
    let f = |x: &[T]| log_mu(x) + tilt_log_weight(t, y, x);
    let coarse_n = if dim == 1 { 512 } else { 96 };
    let mut half = T::lit(16.0) * sd + drift;
    let mut coarse = None;
    for _ in 0..4 {
        let axes = center
            .iter()
            .map(|&c| Axis::new(c - half, c + half, coarse_n))
            .collect::<Result<Vec<_>>>()?;
        let g = GridDensity::from_log_fn(axes, f)?;
        if check_decay(&g).is_ok() {
            coarse = Some(g);
            break;
        }
        half = half * T::lit(2.0);
    }
    let coarse = coarse.ok_or_else(|| {
        Error::Domain(format!("tilted measure at t = {t} does not decay"))
    })?;
    let mean = coarse.mean();
    let cov = coarse.covariance();
    let n = if dim == 1 { cfg.points_1d } else { cfg.points_2d };
    let axes = (0..dim)
        .map(|k| {
            let w = T::lit(12.0) * cov[(k, k)].sqrt();
            Axis::new(mean[k] - w, mean[k] + w, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = GridDensity::from_log_fn(axes, f)?;
    check_decay(&fine)?;
    Ok(fine)
}

impl CovarianceProfile {
    fn rows_for(&self, y_id: usize) -> impl Iterator<Item = &ProfileRow> {
        self.rows.iter().filter(move |r| r.y_id == y_id)
    }

    /// `max_y opnorm(t)` per distinct `t`, in increasing `t`.
    pub fn sup_over_y(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(t, _, _)| *t == r.t) {
                Some(e) => e.1 = e.1.max(r.opnorm),
                None => out.push((r.t, r.opnorm, r.alpha_t)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Smallest `C` with `|opnorm/t − 1| ≤ C√t` on the small-`t` rows.
    pub fn small_t_constant(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.regime == Regime::Small)
            .map(|r| (r.opnorm / r.t - 1.0).abs() / r.t.sqrt())
            .fold(0.0, f64::max)
    }

    /// `|opnorm/t − 1|` at the smallest profiled `t`, worst case over `y`.
    pub fn smallest_t_remainder(&self) -> f64 {
        let t0 = self.rows.iter().map(|r| r.t).fold(f64::INFINITY, f64::min);
        self.rows
            .iter()
            .filter(|r| r.t == t0)
            .map(|r| (r.opnorm / r.t - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Envelope constant fitted per tilt center: the smallest `c` with
    /// `√opnorm ≤ 1/√α_t + c K/α_t` on the small-`t` rows, where
    /// `K = √(β̂ d_prox)/σ + B/σ²` is the envelope's scale.
    pub fn fitted_small_constants<T: Real>(&self, inputs: &BoundInputs<T>) -> Vec<f64> {
        let p = inputs;
        let k = ((p.beta_hat * T::from_usize_lossy(p.d_prox)).sqrt() / p.sigma
            + p.b / (p.sigma * p.sigma))
            .as_f64();
        (0..self.ys.len())
            .map(|j| {
                self.rows_for(j)
                    .filter(|r| r.regime == Regime::Small)
                    .map(|r| (r.opnorm.sqrt() - r.alpha_t.sqrt().recip()) * r.alpha_t / k)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }
}

/// Nonnegative tilt-stability terms `(Cₘ, kₘ)`, `kₘ ∈ ks`, such that
/// `opnorm ≤ 1/α_t + Σ Cₘ α_t^{−kₘ}` on every profiled `(t, y)`, chosen to
/// minimize the exponent of [`heatflow_lipschitz_bound`]. At most two
/// exponents are used; the linear program is solved by enumerating its
/// vertices.
pub fn fit_tilt_terms(profile: &CovarianceProfile, ks: &[f64]) -> Result<Vec<(f64, f64)>> {
    if ks.iter().any(|&k| !(k > 1.0)) || ks.is_empty() {
        return reject("tilt exponents must exceed 1");
    }
    let ap1 = profile.a + 1.0;
    let cost = |k: f64| 1.0 / (2.0 * (k - 1.0) * ap1.powf(k - 1.0));
    // (α_t, worst excess over y), positive excess only
    let rows: Vec<(f64, f64)> = profile
        .sup_over_y()
        .into_iter()
        .map(|(_, op, at)| (at, op - 1.0 / at))
        .filter(|&(_, e)| e > 0.0)
        .collect();
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let feasible = |terms: &[(f64, f64)]| {
        rows.iter().all(|&(at, e)| {
            let s: f64 = terms.iter().map(|&(c, k)| c * at.powf(-k)).sum();
            s >= e * (1.0 - 1e-12)
        })
    };
    let value = |terms: &[(f64, f64)]| terms.iter().map(|&(c, k)| c * cost(k)).sum::<f64>();
    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    let mut consider = |terms: Vec<(f64, f64)>| {
        if terms.iter().all(|&(c, _)| c >= 0.0 && c.is_finite()) && feasible(&terms) {
            let v = value(&terms);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, terms));
            }
        }
    };
    for &k in ks {
        let c = rows
            .iter()
            .map(|&(at, e)| e * at.powf(k))
            .fold(0.0, f64::max);
        consider(vec![(c, k)]);
    }
    for (i, &k1) in ks.iter().enumerate() {
        for &k2 in &ks[i + 1..] {
            for (r, &(a1, e1)) in rows.iter().enumerate() {
                for &(a2, e2) in &rows[r + 1..] {
                    let (p1, q1) = (a1.powf(-k1), a1.powf(-k2));
                    let (p2, q2) = (a2.powf(-k1), a2.powf(-k2));
                    let det = p1 * q2 - p2 * q1;
                    if det.abs() < 1e-300 {
                        continue;
                    }
                    let c1 = (e1 * q2 - e2 * q1) / det;
                    let c2 = (p1 * e2 - p2 * e1) / det;
                    consider(vec![(c1, k1), (c2, k2)]);
                }
            }
        }
    }
    let (_, terms) = best.ok_or_else(|| Error::Domain("no feasible tilt terms".into()))?;
    Ok(terms.into_iter().filter(|&(c, _)| c > 0.0).collect())
}

/// [`heatflow_lipschitz_bound`] with terms fitted to a profile.
pub fn fitted_lipschitz_bound(profile: &CovarianceProfile, ks: &[f64]) -> Result<(f64, Vec<(f64, f64)>)> {
    let terms = fit_tilt_terms(profile, ks)?;
    Ok((heatflow_lipschitz_bound(profile.a, &terms)?, terms))
}
