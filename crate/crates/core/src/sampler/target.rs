use crate::error::{reject, Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::model::ModelSpec;
use crate::scalar::{dot, Real};

/// Gaussian tilt `(t, y^{1:N})`; `y` is stored row-major. `t = ∞` removes
/// the `‖x − y‖²/(2t)` term and keeps `+‖x‖²/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSpec<T> {
    pub t: T,
    pub y: Vec<T>,
}

impl<T: Real> TiltSpec<T> {
    pub fn new(t: T, y: Vec<T>) -> Result<Self> {
        if !(t > T::zero()) {
            return reject(format!("tilt time must be positive, got {t}"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return reject("tilt centers must be finite");
        }
        Ok(Self { t, y })
    }

    /// The same center for every particle.
    pub fn homogeneous(t: T, y: &[T], n: usize) -> Result<Self> {
        Self::new(t, y.iter().copied().cycle().take(y.len() * n).collect())
    }
}

/// Target of the particle samplers.
#[derive(Debug, Clone)]
pub struct TargetSpec<T> {
    model: ModelSpec<T>,
    n: usize,
    tilt: Option<TiltSpec<T>>,
}

impl<T: Real> TargetSpec<T> {
    /// With `rescale`, the model is first mapped through `x ↦ ηx`,
    /// `η = √λ/σ` (a model that is already rescaled is kept as is).
    pub fn new(model: ModelSpec<T>, n: usize, tilt: Option<TiltSpec<T>>, rescale: bool) -> Result<Self> {
        if n == 0 {
            return reject("a target needs at least one particle");
        }
        let model = if rescale && !model.is_rescaled() {
            model.rescaled()?
        } else {
            model
        };
        if let Some(tilt) = &tilt {
            if tilt.y.len() != n * model.dim() {
                return reject(format!(
                    "tilt has {} coordinates, expected {}",
                    tilt.y.len(),
                    n * model.dim()
                ));
            }
            let a = model.alpha() - T::one() + tilt.t.recip();
            if !(a > T::zero()) {
                return Err(Error::InvalidTarget(format!(
                    "tilted confinement alpha_t = {a} is not positive"
                )));
            }
        }
        Ok(Self { model, n, tilt })
    }

    pub fn model(&self) -> &ModelSpec<T> {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.n * self.model.dim()
    }

    pub fn tilt(&self) -> Option<&TiltSpec<T>> {
        self.tilt.as_ref()
    }

    pub fn is_rescaled(&self) -> bool {
        self.model.is_rescaled()
    }

    /// Curvature of each particle's confinement: `α_t` when tilted, else
    /// `2λ/σ²`.
    pub fn alpha(&self) -> T {
        match &self.tilt {
            Some(tilt) => self.model.alpha() - T::one() + tilt.t.recip(),
            None => self.model.alpha(),
        }
    }

    /// Tilt center of particle `i` (zero when untilted).
    pub fn center(&self, i: usize) -> Vec<T> {
        let d = self.dim();
        match &self.tilt {
            Some(tilt) => tilt.y[i * d..(i + 1) * d].to_vec(),
            None => vec![T::zero(); d],
        }
    }

    /// Mode of particle `i`'s confinement alone: `yⁱ/(t α_t)`.
    pub fn confinement_mode(&self, i: usize) -> Vec<T> {
        match &self.tilt {
            Some(tilt) => {
                let s = (tilt.t * self.alpha()).recip();
                self.center(i).into_iter().map(|v| v * s).collect()
            }
            None => vec![T::zero(); self.dim()],
        }
    }

    /// Log-weight of particle `i`'s confinement at `x`:
    /// `−(λ/σ²)‖x‖²`, plus `−‖yⁱ−x‖²/(2t) + ‖x‖²/2` when tilted.
    pub fn confinement_log(&self, i: usize, x: &[T]) -> T {
        let s2 = self.model.sigma() * self.model.sigma();
        let base = -self.model.lambda() / s2 * dot(x, x);
        match &self.tilt {
            Some(tilt) => {
                let d = self.dim();
                let y = &tilt.y[i * d..(i + 1) * d];
                let dist: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
                let far = if tilt.t.is_finite() {
                    dist / (T::lit(2.0) * tilt.t)
                } else {
                    T::zero()
                };
                base - far + dot(x, x) / T::lit(2.0)
            }
            None => base,
        }
    }

    fn confinement_grad_add(&self, i: usize, x: &[T], out: &mut [T]) {
        let s2 = self.model.sigma() * self.model.sigma();
        let c = T::lit(2.0) * self.model.lambda() / s2;
        for (o, &v) in out.iter_mut().zip(x) {
            *o = *o - c * v;
        }
        if let Some(tilt) = &self.tilt {
            let d = self.dim();
            let y = &tilt.y[i * d..(i + 1) * d];
            let inv_t = tilt.t.recip();
            for ((o, &v), &yy) in out.iter_mut().zip(x).zip(y) {
                *o = *o - (v - yy) * inv_t + v;
            }
        }
    }

    /// Unnormalized log density at the row-major configuration `x`.
    pub fn log_density(&self, x: &[T]) -> T {
        let d = self.dim();
        let yhat = self.model.predictions_of_points(x);
        let scale = T::lit(2.0) / (self.model.sigma() * self.model.sigma());
        let conf: T = x
            .chunks(d)
            .enumerate()
            .map(|(i, xi)| self.confinement_log(i, xi))
            .sum();
        conf - scale * T::from_usize_lossy(self.n) * self.model.energy_from_predictions(&yhat)
    }

    /// Log density and its gradient, sharing the mean features.
    pub fn log_density_and_grad(&self, x: &[T], grad: &mut [T]) -> T {
        let d = self.dim();
        let yhat = self.model.predictions_of_points(x);
        let lin = self.model.linearize_at(&yhat);
        let scale = T::lit(2.0) / (self.model.sigma() * self.model.sigma());
        let mut conf = T::zero();
        for (i, (xi, gi)) in x.chunks(d).zip(grad.chunks_mut(d)).enumerate() {
            lin.gradient_into(xi, gi);
            gi.iter_mut().for_each(|g| *g = -scale * *g);
            self.confinement_grad_add(i, xi, gi);
            conf = conf + self.confinement_log(i, xi);
        }
        conf - scale * T::from_usize_lossy(self.n) * self.model.energy_from_predictions(&yhat)
    }
}

/// `N × d` particle configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState<T> {
    pub x: Vec<T>,
    pub n: usize,
    pub d: usize,
    pub step_count: u64,
    pub rng_stream_id: u64,
}

impl<T: Real> ParticleState<T> {
    pub fn new(x: Vec<T>, d: usize) -> Result<Self> {
        if d == 0 || x.is_empty() || x.len() % d != 0 {
            return reject("particle state is not an N x d array");
        }
        if x.iter().any(|v| !v.is_finite()) {
            return reject("particle state has non-finite coordinates");
        }
        Ok(Self {
            n: x.len() / d,
            x,
            d,
            step_count: 0,
            rng_stream_id: 0,
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn empirical(&self) -> EmpiricalMeasure<T> {
        EmpiricalMeasure::new(self.x.clone(), self.d).expect("validated state")
    }
}

/// Gradient of the unnormalized log density of the target at `state`.
pub fn n_particle_log_density_grad<T: Real>(
    target: &TargetSpec<T>,
    state: &ParticleState<T>,
) -> Result<Vec<T>> {
    if state.n != target.n() || state.d != target.dim() {
        return reject(format!(
            "state is {}x{}, target is {}x{}",
            state.n,
            state.d,
            target.n(),
            target.dim()
        ));
    }
    let mut g = vec![T::zero(); state.x.len()];
    target.log_density_and_grad(&state.x, &mut g);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn zero_model_gradient_is_linear() {
        let m = ModelSpec::<f64>::zero(1.0, 1.5, 1).unwrap();
        let t = TargetSpec::new(m, 3, None, false).unwrap();
        let s = ParticleState::new(vec![1.0, -2.0, 0.5], 1).unwrap();
        let g = n_particle_log_density_grad(&t, &s).unwrap();
        assert_eq!(g, vec![-3.0, 6.0, -1.5]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = TargetSpec::new(
            presets::relu_network(1.0, 1.0).unwrap(),
            3,
            Some(TiltSpec::new(0.7, vec![0.2, -1.0, 2.0]).unwrap()),
            true,
        )
        .unwrap();
        let x: Vec<f64> = vec![0.37, -0.81, 1.33];
        let mut g = vec![0.0; 3];
        t.log_density_and_grad(&x, &mut g);
        let h = 1e-6;
        for k in 0..3 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (t.log_density(&a) - t.log_density(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn invalid_tilt_is_refused() {
        let m = ModelSpec::<f64>::zero(1.0, 0.25, 1).unwrap();
        let tilt = TiltSpec::new(10.0, vec![0.0]).unwrap();
        assert!(matches!(
            TargetSpec::new(m, 1, Some(tilt), false),
            Err(Error::InvalidTarget(_))
        ));
    }
}
