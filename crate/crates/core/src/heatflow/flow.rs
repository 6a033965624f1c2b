use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{reject, Error, Result};
use crate::measure::{catmull_rom, catmull_rom_slope, Axis, GridDensity};
use crate::scalar::Real;

/// Kernel truncation in standard deviations.
const KERNEL_SD: f64 = 12.0;
/// Integration nodes per kernel standard deviation when the kernel is
/// narrower than the grid.
const NODES_PER_SD: f64 = 4.0;

/// Law of `e^{−t}X + √(1−e^{−2t}) G` for `X ~ μ`, on the grid of `μ`.
///
/// The Gaussian kernel is integrated against the grid density. When the
/// kernel is narrower than a few grid cells, the log density is refined by
/// cubic interpolation first. In two dimensions the kernel factorizes and
/// is applied one axis at a time.
pub fn ou_evolve<T: Real>(mu: &GridDensity<T>, t: T) -> Result<GridDensity<T>> {
    if !(t >= T::zero()) {
        return reject(format!("evolution time t = {t} must be nonnegative"));
    }
    if t == T::zero() {
        return Ok(mu.clone());
    }
    let axes = mu.axes().to_vec();
    let log = match axes.as_slice() {
        [a] => ou_line(*a, mu.log_density(), t),
        [a0, a1] => {
            let (n0, n1) = (a0.n, a1.n);
            let mut rows = vec![T::zero(); n0 * n1];
            for i in 0..n0 {
                let out = ou_line(*a1, &mu.log_density()[i * n1..(i + 1) * n1], t);
                rows[i * n1..(i + 1) * n1].copy_from_slice(&out);
            }
            let mut out = vec![T::zero(); n0 * n1];
            let mut col = vec![T::zero(); n0];
            for j in 0..n1 {
                for i in 0..n0 {
                    col[i] = rows[i * n1 + j];
                }
                for (i, v) in ou_line(*a0, &col, t).into_iter().enumerate() {
                    out[i * n1 + j] = v;
                }
            }
            out
        }
        _ => unreachable!("grids have one or two axes"),
    };
    GridDensity::from_log_potential(axes, log)
}

/// Refinement of an axis for a kernel of width `width` in `x`.
fn refinement<T: Real>(axis: Axis<T>, width: T) -> usize {
    let r = (T::lit(NODES_PER_SD) * axis.step() / width).ceil();
    r.to_usize().unwrap_or(1).clamp(1, 1 << 20)
}

/// `log Σ_k w_k exp(ℓ(x_k) − (z − e x_k)²/(2s²))` over the refined nodes
/// inside the kernel window, together with the posterior mean of `x`.
fn kernel_sum<T: Real>(axis: Axis<T>, log_vals: &[T], r: usize, e: T, s2: T, z: T) -> Option<(T, T)> {
    let s = s2.sqrt();
    let hf = axis.step() / T::from_usize_lossy(r);
    let last = (axis.n - 1) * r;
    let reach = T::lit(KERNEL_SD) * s;
    let lo_x = (z - reach) / e;
    let hi_x = (z + reach) / e;
    let k0 = ((lo_x - axis.lo) / hf).ceil().max(T::zero());
    let k1 = ((hi_x - axis.lo) / hf).floor().min(T::from_usize_lossy(last));
    if k0 > k1 {
        return None;
    }
    let (k0, k1) = (k0.to_usize()?, k1.to_usize()?);
    let inv_r = T::from_usize_lossy(r).recip();
    let half = T::lit(0.5).ln();
    let two_s2 = T::lit(2.0) * s2;
    // streaming log-sum-exp with the running posterior mean
    let mut top = T::neg_infinity();
    let mut sum = T::zero();
    let mut sum_x = T::zero();
    for k in k0..=k1 {
        let lv = if k % r == 0 {
            log_vals[k / r]
        } else {
            catmull_rom(log_vals, T::from_usize_lossy(k) * inv_r)
        };
        let x = axis.lo + T::from_usize_lossy(k) * hf;
        let edge = if k == 0 || k == last { half } else { T::zero() };
        let u = z - e * x;
        let l = lv + edge - u * u / two_s2;
        if !(l > T::neg_infinity()) {
            continue;
        }
        if l > top {
            let scale = (top - l).exp();
            sum = sum * scale + T::one();
            sum_x = sum_x * scale + x;
            top = l;
        } else {
            let w = (l - top).exp();
            sum = sum + w;
            sum_x = sum_x + w * x;
        }
    }
    if !top.is_finite() {
        return None;
    }
    Some((top + sum.ln() + hf.ln(), sum_x / sum))
}

fn ou_line<T: Real>(axis: Axis<T>, log_vals: &[T], t: T) -> Vec<T> {
    let e = (-t).exp();
    let s2 = -(-(T::lit(2.0) * t)).exp_m1();
    let r = refinement(axis, s2.sqrt() / e);
    let norm = (T::lit(2.0) * T::PI() * s2).ln() / T::lit(2.0);
    (0..axis.n)
        .into_par_iter()
        .map(|i| match kernel_sum(axis, log_vals, r, e, s2, axis.node(i)) {
            Some((lse, _)) => lse - norm,
            None => T::neg_infinity(),
        })
        .collect()
}

/// Velocity `∇log(dμ_t/dγ)` of the heat flow started at a 1-d grid
/// density. At `t = 0` it is the slope of the interpolated log density;
/// for `t > 0` the score of `μ_t` comes from Tweedie's formula
/// `∇log μ_t(z) = (e^{−t} E[X | Z = z] − z)/(1 − e^{−2t})`.
struct Velocity<'a, T> {
    axis: Axis<T>,
    log_mu: &'a [T],
}

impl<T: Real> Velocity<'_, T> {
    fn at(&self, t: T, z: T) -> T {
        let a = self.axis;
        if t == T::zero() {
            let s = ((z - a.lo) / a.step()).max(T::zero()).min(T::from_usize_lossy(a.n - 1));
            return catmull_rom_slope(self.log_mu, s) / a.step() + z;
        }
        let e = (-t).exp();
        let s2 = -(-(T::lit(2.0) * t)).exp_m1();
        let r = refinement(a, s2.sqrt() / e);
        let m = match kernel_sum(a, self.log_mu, r, e, s2, z) {
            Some((_, m)) => m,
            // z lies beyond every kernel window: the posterior sits at the
            // nearest end of the grid
            None => {
                if z * e < a.lo {
                    a.lo
                } else {
                    a.hi
                }
            }
        };
        (e * m - z) / s2 + z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Smallest RK4 step, used near `t = 0`.
    pub dt: f64,
    /// Later steps are `growth·t`, since the score field varies on the
    /// time scale `t`; capped at `max_dt`.
    pub growth: f64,
    pub max_dt: f64,
    pub t_max: f64,
    /// Points carried by the forward flow.
    pub source_points: usize,
    /// The inverse map is tabulated on `[−z_max, z_max]`.
    pub z_max: f64,
    pub map_points: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            growth: 0.05,
            max_dt: 0.05,
            t_max: 8.0,
            source_points: 257,
            z_max: 8.0,
            map_points: 1601,
        }
    }
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes, which
/// preserves monotonicity of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return reject("monotone interpolation needs increasing abscissae");
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            m[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
            };
        }
        Ok(Self { x, y, m })
    }

    fn cell(&self, v: f64) -> usize {
        self.x.partition_point(|&a| a <= v).clamp(1, self.x.len() - 1) - 1
    }

    pub fn eval(&self, v: f64) -> f64 {
        let k = self.cell(v);
        let h = self.x[k + 1] - self.x[k];
        let s = (v - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.m[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.m[k + 1]
    }

    pub fn slope(&self, v: f64) -> f64 {
        let k = self.cell(v);
        let h = self.x[k + 1] - self.x[k];
        let s = (v - self.x[k]) / h;
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) * (self.y[k] - self.y[k + 1]) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * self.m[k]
            + (3.0 * s2 - 2.0 * s) * self.m[k + 1]
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }
}

/// Discretized transport map `T = S_{t_max}⁻¹` from the standard Gaussian
/// to a 1-d measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    /// Points `z` in Gaussian space where `T` is tabulated.
    pub source: Vec<f64>,
    /// `T(z)`.
    pub mapped: Vec<f64>,
    pub dt: f64,
    pub t_max: f64,
    pub steps: usize,
    /// Forward flow: start points `x` and their images `S_{t_max}(x)`.
    pub forward_x: Vec<f64>,
    pub forward_s: Vec<f64>,
}

impl FlowMap {
    /// `S_{t_max}` as a monotone interpolant.
    pub fn forward(&self) -> Result<MonotoneCubic> {
        MonotoneCubic::new(self.forward_x.clone(), self.forward_s.clone())
    }

    /// `T` as a monotone interpolant.
    pub fn inverse(&self) -> Result<MonotoneCubic> {
        MonotoneCubic::new(self.forward_s.clone(), self.forward_x.clone())
    }
}

/// Integrates the forward heat flow `∂_t S_t = −∇log(dμ_t/dγ)(S_t)` with
/// RK4 from a set of points covering `μ`, then inverts `S_{t_max}` by
/// monotone interpolation.
pub fn reverse_flow_map<T: Real>(mu: &GridDensity<T>, cfg: &FlowConfig) -> Result<FlowMap> {
    if mu.dim() != 1 {
        return Err(Error::Unsupported("reverse flow maps need a 1-d grid".into()));
    }
    if !(cfg.dt > 0.0 && cfg.max_dt >= cfg.dt && cfg.growth >= 0.0 && cfg.t_max > 0.0) || cfg.source_points < 4 {
        return reject("flow needs 0 < dt <= max_dt, t_max > 0 and at least 4 points");
    }
    let axis = mu.axes()[0];
    let log_mu = mu.log_density();
    let top = log_mu.iter().copied().fold(T::neg_infinity(), T::max);
    let support: Vec<usize> = (0..axis.n)
        .filter(|&i| log_mu[i] > top - T::lit(50.0))
        .collect();
    let (first, last) = (support[0], support[support.len() - 1]);
    if support.len() != last - first + 1 {
        return reject("density must be positive on the interior of its support");
    }
    let x_lo = axis.node(first).as_f64();
    let x_hi = axis.node(last).as_f64();
    let p = cfg.source_points;
    let xs: Vec<f64> = (0..p)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (p - 1) as f64)
        .collect();
    let vel = Velocity { axis, log_mu };
    let mut s: Vec<T> = xs.iter().map(|&v| T::lit(v)).collect();
    let mut t = 0.0_f64;
    let mut steps = 0;
    while t < cfg.t_max * (1.0 - 1e-12) {
        let h = (cfg.growth * t).max(cfg.dt).min(cfg.max_dt).min(cfg.t_max - t);
        let (tt, hh) = (T::lit(t), T::lit(h));
        let half = hh / T::lit(2.0);
        let th = T::lit(t + h / 2.0);
        let tf = T::lit(t + h);
        s.par_iter_mut().for_each(|x| {
            let k1 = -vel.at(tt, *x);
            let k2 = -vel.at(th, *x + half * k1);
            let k3 = -vel.at(th, *x + half * k2);
            let k4 = -vel.at(tf, *x + hh * k3);
            *x = *x + hh / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4);
        });
        t += h;
        steps += 1;
    }
    let forward_s: Vec<f64> = s.iter().map(|v| v.as_f64()).collect();
    if forward_s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration("flow produced non-finite values".into()));
    }
    if let Some(i) = forward_s.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Integration(format!(
            "forward flow is not monotone at point {i}; reduce the step size"
        )));
    }
    let inv = MonotoneCubic::new(forward_s.clone(), xs.clone())?;
    let z_lo = forward_s[0].max(-cfg.z_max);
    let z_hi = forward_s[p - 1].min(cfg.z_max);
    let m = cfg.map_points.max(2);
    let source: Vec<f64> = (0..m)
        .map(|i| z_lo + (z_hi - z_lo) * i as f64 / (m - 1) as f64)
        .collect();
    let mapped = source.iter().map(|&z| inv.eval(z)).collect();
    Ok(FlowMap {
        source,
        mapped,
        dt: cfg.dt,
        t_max: cfg.t_max,
        steps,
        forward_x: xs,
        forward_s,
    })
}

/// Largest adjacent difference quotient of `T` over `|z| ≤ 6`.
pub fn lipschitz_estimate(map: &FlowMap) -> f64 {
    map.source
        .windows(2)
        .zip(map.mapped.windows(2))
        .filter(|(z, _)| z[0] >= -6.0 && z[1] <= 6.0)
        .map(|(z, x)| (x[1] - x[0]) / (z[1] - z[0]))
        .fold(0.0, f64::max)
}

fn std_normal_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Density of `T#γ`, i.e. `γ(S(x)) S′(x)`, on the given axis; zero outside
/// the flow's source range.
pub fn pushforward_density(map: &FlowMap, axis: Axis<f64>) -> Result<GridDensity<f64>> {
    let fwd = map.forward()?;
    let (lo, hi) = fwd.domain();
    let log = axis
        .nodes()
        .into_iter()
        .map(|x| {
            if x < lo || x > hi {
                return f64::NEG_INFINITY;
            }
            let d = fwd.slope(x);
            if d > 0.0 {
                std_normal_log_pdf(fwd.eval(x)) + d.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    GridDensity::from_log_potential(vec![axis], log)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
