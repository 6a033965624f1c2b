//! Mean-field energies `F₀`, their first and second variations, and the
//! smoothness constants they induce.
//!
//! The confinement is always `V = (λ/2)‖·‖²` and the full objective is
//! `F = F₀ + ∫V`. Three energies are available: the zero functional, a
//! two-layer network risk `F₀(ν) = Σⱼ pⱼ ℓ(∫h(θ, zⱼ) ν(dθ), yⱼ)`, and a
//! quadratic in the mean used as a Gaussian oracle.

use std::path::Path;

use crate::bounds::BoundInputs;
use crate::error::{reject, Result};
use crate::measure::Measure;
use crate::scalar::{dot, norm, Real};

/// Loss `ℓ(ŷ, y)` of a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss<T> {
    /// `(c/2)(ŷ − y)²` for `|ŷ − y| ≤ R`, continued linearly (Huber) beyond,
    /// so the loss is `cR`-Lipschitz. `radius` may be infinite.
    Squared { scale: T, radius: T },
    /// `log(1 + e^{−yŷ})` with labels `|y| ≤ 1`.
    Logistic,
}

impl<T: Real> Loss<T> {
    pub fn value(&self, yhat: T, y: T) -> T {
        match *self {
            Loss::Squared { scale, radius } => {
                let r = (yhat - y).abs();
                if r <= radius {
                    scale * r * r / T::lit(2.0)
                } else {
                    scale * radius * (r - radius / T::lit(2.0))
                }
            }
            Loss::Logistic => softplus(-y * yhat),
        }
    }

    /// `∂ℓ/∂ŷ`.
    pub fn d1(&self, yhat: T, y: T) -> T {
        match *self {
            Loss::Squared { scale, radius } => scale * (yhat - y).max(-radius).min(radius),
            Loss::Logistic => -y * sigmoid(-y * yhat),
        }
    }

    /// `∂²ℓ/∂ŷ²`.
    pub fn d2(&self, yhat: T, y: T) -> T {
        match *self {
            Loss::Squared { scale, radius } => {
                if (yhat - y).abs() <= radius {
                    scale
                } else {
                    T::zero()
                }
            }
            Loss::Logistic => {
                let s = sigmoid(y * yhat);
                y * y * s * (T::one() - s)
            }
        }
    }

    /// Curvature bound `β_ℓ ≥ sup ℓ″`.
    pub fn beta(&self) -> T {
        match *self {
            Loss::Squared { scale, .. } => scale,
            Loss::Logistic => T::lit(0.25),
        }
    }

    /// Lipschitz bound `L_ℓ ≥ sup |ℓ′|`.
    pub fn lipschitz(&self) -> T {
        match *self {
            Loss::Squared { scale, radius } => {
                if scale == T::zero() {
                    T::zero()
                } else {
                    scale * radius
                }
            }
            Loss::Logistic => T::one(),
        }
    }
}

fn sigmoid<T: Real>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Real>(u: T) -> T {
    u.max(T::zero()) + (-u.abs()).exp().ln_1p()
}

/// Scalar activation `φ` of a neuron `h(θ, x) = φ(⟨θ, x⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply<T: Real>(self, u: T) -> T {
        match self {
            Activation::Relu => u.max(T::zero()),
            Activation::Tanh => u.tanh(),
            Activation::Identity => u,
        }
    }

    /// Derivative; the ReLU kink uses the subgradient 0.
    pub fn derivative<T: Real>(self, u: T) -> T {
        match self {
            Activation::Relu => {
                if u > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = u.tanh();
                T::one() - t * t
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Weighted record `(xⱼ, yⱼ, pⱼ)` of the data measure `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Datum<T> {
    pub x: Vec<T>,
    pub y: T,
    pub weight: T,
}

/// `F₀(ν) = (κ/2)(⟨e, mean ν⟩ − c)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParams<T> {
    pub kappa: T,
    pub c: T,
    pub e: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind<T> {
    Zero,
    ExampleNn {
        data: Vec<Datum<T>>,
        loss: Loss<T>,
        activation: Activation,
    },
    QuadraticOracle(QuadraticParams<T>),
}

/// Validated mean-field model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    kind: ModelKind<T>,
    sigma: T,
    lambda: T,
    dim: usize,
    rescaled: bool,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl<T: Real> ModelSpec<T> {
    pub fn zero(sigma: T, lambda: T, dim: usize) -> Result<Self> {
        Self::new(ModelKind::Zero, sigma, lambda, dim)
    }

    pub fn example_nn(
        sigma: T,
        lambda: T,
        data: Vec<Datum<T>>,
        loss: Loss<T>,
        activation: Activation,
    ) -> Result<Self> {
        let dim = data.first().map_or(0, |z| z.x.len());
        Self::new(
            ModelKind::ExampleNn {
                data,
                loss,
                activation,
            },
            sigma,
            lambda,
            dim,
        )
    }

    pub fn quadratic(sigma: T, lambda: T, kappa: T, c: T, e: Vec<T>) -> Result<Self> {
        let dim = e.len();
        Self::new(
            ModelKind::QuadraticOracle(QuadraticParams { kappa, c, e }),
            sigma,
            lambda,
            dim,
        )
    }

    pub fn new(kind: ModelKind<T>, sigma: T, lambda: T, dim: usize) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return reject(format!("sigma must be positive, got {sigma}"));
        }
        if !(lambda > T::zero() && lambda.is_finite()) {
            return reject(format!("lambda must be positive, got {lambda}"));
        }
        if dim == 0 {
            return reject("model dimension must be at least 1");
        }
        match &kind {
            ModelKind::Zero => {}
            ModelKind::ExampleNn { data, loss, .. } => {
                if data.is_empty() {
                    return reject("example network needs at least one datum");
                }
                let mut total = T::zero();
                for (j, z) in data.iter().enumerate() {
                    if z.x.len() != dim {
                        return reject(format!("datum {j} has dimension {}", z.x.len()));
                    }
                    if z.x.iter().chain([&z.y]).any(|v| !v.is_finite()) {
                        return reject(format!("datum {j} is not finite"));
                    }
                    if !(z.weight >= T::zero()) {
                        return reject(format!("datum {j} has negative weight"));
                    }
                    if matches!(loss, Loss::Logistic) && z.y.abs() > T::one() {
                        return reject(format!("logistic label {j} outside [-1, 1]"));
                    }
                    total = total + z.weight;
                }
                if (total - T::one()).abs() > T::lit(WEIGHT_SUM_TOL) {
                    return reject(format!("data weights sum to {total}, not 1"));
                }
                if let Loss::Squared { scale, radius } = *loss {
                    if !(scale >= T::zero() && scale.is_finite() && radius > T::zero()) {
                        return reject("squared loss needs scale >= 0 and radius > 0");
                    }
                }
            }
            ModelKind::QuadraticOracle(q) => {
                if !(q.kappa >= T::zero() && q.kappa.is_finite() && q.c.is_finite()) {
                    return reject("quadratic oracle needs kappa >= 0 and finite c");
                }
                if (norm(&q.e) - T::one()).abs() > T::lit(1e-12) {
                    return reject("quadratic oracle direction e must be a unit vector");
                }
            }
        }
        Ok(Self {
            kind,
            sigma,
            lambda,
            dim,
            rescaled: false,
        })
    }

    /// Example network whose data are read from a CSV with header
    /// `x_1, …, x_d, y`. Records are equally weighted.
    pub fn example_nn_from_csv(
        sigma: T,
        lambda: T,
        path: impl AsRef<Path>,
        loss: Loss<T>,
        activation: Activation,
    ) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let width = reader.headers()?.len();
        if width < 2 {
            return reject("data csv needs columns x_1..x_d, y");
        }
        let mut rows: Vec<(Vec<T>, T)> = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| crate::Error::RejectedInput(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<T>>>()?;
            let y = vals[width - 1];
            rows.push((vals[..width - 1].to_vec(), y));
        }
        let w = T::one() / T::from_usize_lossy(rows.len().max(1));
        let data = rows
            .into_iter()
            .map(|(x, y)| Datum { x, y, weight: w })
            .collect();
        Self::example_nn(sigma, lambda, data, loss, activation)
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_rescaled(&self) -> bool {
        self.rescaled
    }

    /// Confinement strength `2λ/σ²` of each single-particle Gibbs factor.
    pub fn alpha(&self) -> T {
        T::lit(2.0) * self.lambda / (self.sigma * self.sigma)
    }

    /// The model seen through `x ↦ ηx` with `η = √λ/σ`: afterwards `λ = σ²`,
    /// so `α = 2`. Refused on an already rescaled model.
    pub fn rescaled(&self) -> Result<Self> {
        if self.rescaled {
            return reject("model is already rescaled");
        }
        let eta = self.lambda.sqrt() / self.sigma;
        let kind = match &self.kind {
            ModelKind::Zero => ModelKind::Zero,
            ModelKind::ExampleNn {
                data,
                loss,
                activation,
            } => ModelKind::ExampleNn {
                data: data
                    .iter()
                    .map(|z| Datum {
                        x: z.x.iter().map(|&v| v / eta).collect(),
                        y: z.y,
                        weight: z.weight,
                    })
                    .collect(),
                loss: *loss,
                activation: *activation,
            },
            ModelKind::QuadraticOracle(q) => ModelKind::QuadraticOracle(QuadraticParams {
                kappa: q.kappa / (eta * eta),
                c: q.c * eta,
                e: q.e.clone(),
            }),
        };
        Ok(Self {
            kind,
            sigma: self.sigma,
            lambda: self.sigma * self.sigma,
            dim: self.dim,
            rescaled: true,
        })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return reject(format!(
                "measure dimension {d} does not match model dimension {}",
                self.dim
            ));
        }
        Ok(())
    }

    /// Feature `h(x, zⱼ)` of datum `j` (network) or `⟨e, x⟩` (oracle).
    pub fn feature(&self, j: usize, x: &[T]) -> T {
        match &self.kind {
            ModelKind::Zero => T::zero(),
            ModelKind::ExampleNn {
                data, activation, ..
            } => activation.apply(dot(x, &data[j].x)),
            ModelKind::QuadraticOracle(q) => dot(x, &q.e),
        }
    }

    /// Number of features the energy depends on.
    pub fn n_features(&self) -> usize {
        match &self.kind {
            ModelKind::Zero => 0,
            ModelKind::ExampleNn { data, .. } => data.len(),
            ModelKind::QuadraticOracle(_) => 1,
        }
    }

    /// Mean features `ŷⱼ = ∫h(·, zⱼ) dν`.
    pub fn predictions(&self, nu: &dyn Measure<T>) -> Result<Vec<T>> {
        self.check_dim(nu.dim())?;
        let k = self.n_features();
        if k == 0 {
            return Ok(Vec::new());
        }
        Ok(nu.integrate(k, &mut |x, out| {
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.feature(j, x);
            }
        }))
    }

    /// Mean features of the empirical measure of `points` (row-major).
    pub fn predictions_of_points(&self, points: &[T]) -> Vec<T> {
        let k = self.n_features();
        let n = points.len() / self.dim;
        let inv = T::one() / T::from_usize_lossy(n);
        (0..k)
            .map(|j| {
                points
                    .chunks(self.dim)
                    .map(|x| self.feature(j, x))
                    .sum::<T>()
                    * inv
            })
            .collect()
    }

    /// `F₀` as a function of the mean features.
    pub fn energy_from_predictions(&self, yhat: &[T]) -> T {
        match &self.kind {
            ModelKind::Zero => T::zero(),
            ModelKind::ExampleNn { data, loss, .. } => data
                .iter()
                .zip(yhat)
                .map(|(z, &p)| z.weight * loss.value(p, z.y))
                .sum(),
            ModelKind::QuadraticOracle(q) => {
                let r = yhat[0] - q.c;
                q.kappa * r * r / T::lit(2.0)
            }
        }
    }

    pub fn energy(&self, nu: &dyn Measure<T>) -> Result<T> {
        Ok(self.energy_from_predictions(&self.predictions(nu)?))
    }

    /// Full objective `F(ν) = F₀(ν) + ∫(λ/2)‖x‖² dν`.
    pub fn objective(&self, nu: &dyn Measure<T>) -> Result<T> {
        let conf = nu.expect(&mut |x| self.lambda * dot(x, x) / T::lit(2.0));
        Ok(self.energy(nu)? + conf)
    }

    /// First-order expansion of `F₀` at `ν`.
    pub fn linearize(&self, nu: &dyn Measure<T>) -> Result<Linearization<'_, T>> {
        Ok(self.linearize_at(&self.predictions(nu)?))
    }

    /// Linearization at given mean features.
    pub fn linearize_at(&self, yhat: &[T]) -> Linearization<'_, T> {
        let (g1, g2) = match &self.kind {
            ModelKind::Zero => (Vec::new(), Vec::new()),
            ModelKind::ExampleNn { data, loss, .. } => data
                .iter()
                .zip(yhat)
                .map(|(z, &p)| (z.weight * loss.d1(p, z.y), z.weight * loss.d2(p, z.y)))
                .unzip(),
            ModelKind::QuadraticOracle(q) => (vec![q.kappa * (yhat[0] - q.c)], vec![q.kappa]),
        };
        Linearization {
            model: self,
            g1,
            g2,
        }
    }

    pub fn first_variation(&self, nu: &dyn Measure<T>, x: &[T]) -> Result<T> {
        self.check_dim(x.len())?;
        Ok(self.linearize(nu)?.first_variation(x))
    }

    pub fn wasserstein_gradient(&self, nu: &dyn Measure<T>, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        let mut g = vec![T::zero(); self.dim];
        self.linearize(nu)?.gradient_into(x, &mut g);
        Ok(g)
    }

    pub fn second_variation(&self, nu: &dyn Measure<T>, x: &[T], y: &[T]) -> Result<T> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        Ok(self.linearize(nu)?.second_variation(x, y))
    }

    /// Smoothness constants `(σ, λ, β̂, B, L_h, L_ℓ, β_ℓ, d)`.
    pub fn constants(&self) -> BoundInputs<T> {
        let (l_h, l_ell, beta_ell, d_prox) = match &self.kind {
            ModelKind::Zero => (T::zero(), T::zero(), T::zero(), self.dim),
            ModelKind::ExampleNn { data, loss, .. } => {
                let l_h = data.iter().map(|z| norm(&z.x)).fold(T::zero(), T::max);
                (l_h, loss.lipschitz(), loss.beta(), 1)
            }
            ModelKind::QuadraticOracle(q) => {
                let l_ell = if q.kappa == T::zero() {
                    T::zero()
                } else {
                    T::infinity()
                };
                (T::one(), l_ell, q.kappa, self.dim)
            }
        };
        let b = if l_h == T::zero() || l_ell == T::zero() {
            T::zero()
        } else {
            l_h * l_ell
        };
        BoundInputs {
            sigma: self.sigma,
            lambda: self.lambda,
            beta_hat: l_h * l_h * beta_ell,
            b,
            l_h,
            l_ell,
            beta_ell,
            d: self.dim,
            n: 1,
            d_prox,
            rescaled: self.rescaled,
        }
    }
}

/// `F₀` linearized at a fixed measure `ν`: caches `pⱼℓ′(ŷⱼ)` and `pⱼℓ″(ŷⱼ)`
/// so that variations can be evaluated at many points cheaply.
#[derive(Debug, Clone)]
pub struct Linearization<'a, T> {
    model: &'a ModelSpec<T>,
    g1: Vec<T>,
    g2: Vec<T>,
}

impl<T: Real> Linearization<'_, T> {
    /// `δF₀(ν, x)`.
    pub fn first_variation(&self, x: &[T]) -> T {
        match &self.model.kind {
            ModelKind::Zero => T::zero(),
            ModelKind::ExampleNn {
                data, activation, ..
            } => data
                .iter()
                .zip(&self.g1)
                .map(|(z, &g)| g * activation.apply(dot(x, &z.x)))
                .sum(),
            ModelKind::QuadraticOracle(q) => self.g1[0] * dot(x, &q.e),
        }
    }

    /// `∇ₓδF₀(ν, x)` written into `out`.
    pub fn gradient_into(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        match &self.model.kind {
            ModelKind::Zero => {}
            ModelKind::ExampleNn {
                data, activation, ..
            } => {
                for (z, &g) in data.iter().zip(&self.g1) {
                    let s = g * activation.derivative(dot(x, &z.x));
                    if s != T::zero() {
                        for (o, &xj) in out.iter_mut().zip(&z.x) {
                            *o = *o + s * xj;
                        }
                    }
                }
            }
            ModelKind::QuadraticOracle(q) => {
                for (o, &e) in out.iter_mut().zip(&q.e) {
                    *o = self.g1[0] * e;
                }
            }
        }
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// `δ²F₀(ν, x, y)`.
    pub fn second_variation(&self, x: &[T], y: &[T]) -> T {
        match &self.model.kind {
            ModelKind::Zero => T::zero(),
            ModelKind::ExampleNn {
                data, activation, ..
            } => data
                .iter()
                .zip(&self.g2)
                .map(|(z, &g)| g * activation.apply(dot(x, &z.x)) * activation.apply(dot(y, &z.x)))
                .sum(),
            ModelKind::QuadraticOracle(q) => self.g2[0] * dot(x, &q.e) * dot(y, &q.e),
        }
    }

    /// Upper bound on the Lipschitz constant of `x ↦ δF₀(ν, x)`.
    pub fn lipschitz_bound(&self) -> T {
        match &self.model.kind {
            ModelKind::Zero => T::zero(),
            ModelKind::ExampleNn { data, .. } => data
                .iter()
                .zip(&self.g1)
                .map(|(z, &g)| g.abs() * norm(&z.x))
                .sum(),
            ModelKind::QuadraticOracle(_) => self.g1[0].abs(),
        }
    }

    /// `∫δF₀(ν, ·) dρ`.
    pub fn integrate_against(&self, rho: &dyn Measure<T>) -> T {
        rho.expect(&mut |x| self.first_variation(x))
    }
}
