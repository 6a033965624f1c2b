//! Closed-form constants: transport Lipschitz bounds, log-Sobolev bounds
//! under perturbation, and the parameter rescaling used before tilting.
//!
//! Where a bound is only stated up to an absolute constant, the constant is
//! taken to be one.

use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::scalar::Real;

/// Scalar constants of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<T> {
    pub sigma: T,
    pub lambda: T,
    /// Bound `β̂` on the mixed second variation.
    pub beta_hat: T,
    /// Uniform bound `B` on `‖∇δF₀‖`.
    pub b: T,
    pub l_h: T,
    pub l_ell: T,
    pub beta_ell: T,
    pub d: usize,
    pub n: usize,
    /// Dimension entering the proximal bounds: `d` in general, 1 for the
    /// two-layer network.
    pub d_prox: usize,
    #[serde(default)]
    pub rescaled: bool,
}

impl<T: Real> BoundInputs<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        let nonneg = |v: T| v >= T::zero();
        if !pos(self.sigma) || !pos(self.lambda) {
            return reject("sigma and lambda must be positive and finite");
        }
        if ![self.beta_hat, self.b, self.l_h, self.l_ell, self.beta_ell]
            .into_iter()
            .all(nonneg)
        {
            return reject("smoothness constants must be nonnegative");
        }
        if self.d == 0 || self.n == 0 {
            return reject("d and N must be at least 1");
        }
        if self.d_prox != 1 && self.d_prox != self.d {
            return reject("d_prox must be 1 or d");
        }
        Ok(())
    }

    /// `α = 2λ/σ²`.
    pub fn alpha(&self) -> T {
        T::lit(2.0) * self.lambda / (self.sigma * self.sigma)
    }

    /// `α_t = 2λ/σ² − 1 + 1/t`; `t = ∞` gives `2λ/σ² − 1`.
    pub fn alpha_t(&self, t: T) -> T {
        self.alpha() - T::one() + t.recip()
    }

    /// Parameters after `x ↦ ηx` with `η = √λ/σ`:
    /// `β̂ ← β̂σ²/λ`, `λ ← σ²`, `B ← Bσ/√λ`, `L_h ← L_h σ/√λ`.
    pub fn rescale_parameters(&self) -> Result<Self> {
        self.validate()?;
        if self.rescaled {
            return reject("inputs are already rescaled");
        }
        let s2 = self.sigma * self.sigma;
        let root = (s2 / self.lambda).sqrt();
        Ok(Self {
            lambda: s2,
            beta_hat: self.beta_hat * s2 / self.lambda,
            b: self.b * root,
            l_h: self.l_h * root,
            rescaled: true,
            ..*self
        })
    }
}

/// `(1/√(a+1)) exp(Σₘ Cₘ / (2(kₘ−1)(a+1)^{kₘ−1}))` for tilt-stability terms
/// `(Cₘ, kₘ)`.
pub fn heatflow_lipschitz_bound<T: Real>(a: T, terms: &[(T, T)]) -> Result<T> {
    if !(a > -T::one()) {
        return Err(Error::Domain(format!("a = {a} must exceed -1")));
    }
    let ap1 = a + T::one();
    let mut exponent = T::zero();
    for &(c, k) in terms {
        if !(k > T::one()) {
            return Err(Error::Domain(format!("k = {k} gives a divergent integral")));
        }
        if !(c >= T::zero()) {
            return Err(Error::Domain(format!("C = {c} must be nonnegative")));
        }
        exponent = exponent + c / (T::lit(2.0) * (k - T::one()) * ap1.powf(k - T::one()));
    }
    Ok(exponent.exp() / ap1.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MainVariant {
    /// `βd/λ + B²/(λσ²) + βB²d/(λ²σ²) + βB⁴/(λ³σ⁴)`.
    Generic,
    /// Two-layer network: `d = 1` and the cross term dropped.
    Specific,
    /// Two-layer network with all four terms kept (`d = 1`).
    SpecificFull,
}

/// Exponent of [`main_bound`] with unit implied constants.
pub fn main_exponent<T: Real>(inputs: &BoundInputs<T>, variant: MainVariant) -> T {
    let BoundInputs {
        sigma,
        lambda,
        beta_hat: beta,
        b,
        ..
    } = *inputs;
    let d = match variant {
        MainVariant::Generic => T::from_usize_lossy(inputs.d),
        MainVariant::Specific | MainVariant::SpecificFull => T::one(),
    };
    let s2 = sigma * sigma;
    let b2 = b * b;
    let first = beta * d / lambda;
    let second = b2 / (lambda * s2);
    let cross = beta * b2 * d / (lambda * lambda * s2);
    let last = beta * b2 * b2 / (lambda.powi(3) * s2 * s2);
    match variant {
        MainVariant::Specific => first + second + last,
        _ => first + second + cross + last,
    }
}

/// `(σ/√λ) exp(exponent)`: Lipschitz constant of a transport map from the
/// standard Gaussian to the particle measure.
pub fn main_bound<T: Real>(inputs: &BoundInputs<T>, variant: MainVariant) -> T {
    inputs.sigma / inputs.lambda.sqrt() * main_exponent(inputs, variant).exp()
}

/// LSI constant of an `α`-strongly log-concave measure perturbed by an
/// `L`-Lipschitz potential: `(1/α) exp(L²/α + 4L/√α)`.
pub fn lsi_pert_bound<T: Real>(alpha: T, l: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if !(l >= T::zero()) {
        return Err(Error::Domain(format!("L = {l} must be nonnegative")));
    }
    Ok((l * l / alpha + T::lit(4.0) * l / alpha.sqrt()).exp() / alpha)
}

/// LSI constant of the mean-field measure:
/// `(σ²/2λ) exp(2B²/(λσ²) + 4√2 B/(√λ σ))`.
pub fn lsi_pi_bound<T: Real>(inputs: &BoundInputs<T>) -> T {
    let BoundInputs {
        sigma, lambda, b, ..
    } = *inputs;
    let s2 = sigma * sigma;
    let exponent =
        T::lit(2.0) * b * b / (lambda * s2) + T::lit(4.0) * T::SQRT_2() * b / (lambda.sqrt() * sigma);
    s2 / (T::lit(2.0) * lambda) * exponent.exp()
}

/// Uniform-in-N LSI bound of a concurrent approach, reproduced for
/// comparison tables: with `κ = β/ρ`,
/// `{(1 + 2d(5 + 3(ε⁻¹−1)κ) κ/(1−κ/N)) / (1 − ε − (8κ + 6(ε⁻¹−1))κ²/N)} / ρ`.
pub fn songbo_bound<T: Real>(kappa: T, d: usize, epsilon: T, rho: T, n: usize) -> Result<T> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if !(rho > T::zero()) || !(kappa >= T::zero()) {
        return Err(Error::Domain("need rho > 0 and kappa >= 0".into()));
    }
    let nf = T::from_usize_lossy(n);
    if !(nf > kappa) {
        return Err(Error::Domain(format!("N = {n} must exceed kappa = {kappa}")));
    }
    let inv = epsilon.recip() - T::one();
    let df = T::from_usize_lossy(d);
    let num = T::one()
        + T::lit(2.0) * df * (T::lit(5.0) + T::lit(3.0) * inv * kappa) * kappa
            / (T::one() - kappa / nf);
    let den = T::one() - epsilon - (T::lit(8.0) * kappa + T::lit(6.0) * inv) * kappa * kappa / nf;
    if !(den > T::zero()) {
        return Err(Error::Domain(format!(
            "denominator {den} is not positive: the bound is vacuous"
        )));
    }
    Ok(num / den / rho)
}

/// `W∞` between an `α`-strongly log-concave measure and its perturbation by
/// an `L`-Lipschitz potential: `L/α`.
pub fn winf_bound<T: Real>(alpha: T, l: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    Ok(l / alpha)
}

/// Regime threshold `t* = (20B²/σ⁴ − 2λ/σ² + 1)⁻¹`, or `+∞` when the
/// bracket is not positive.
pub fn regime_threshold<T: Real>(inputs: &BoundInputs<T>) -> T {
    let s2 = inputs.sigma * inputs.sigma;
    let den = T::lit(20.0) * inputs.b * inputs.b / (s2 * s2) - inputs.alpha() + T::one();
    if den > T::zero() {
        den.recip()
    } else {
        T::infinity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoundInputs<f64> {
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
    fn heatflow_examples() {
        assert_eq!(heatflow_lipschitz_bound(0.0, &[]).unwrap(), 1.0);
        assert_eq!(heatflow_lipschitz_bound(3.0, &[]).unwrap(), 0.5);
        let v = heatflow_lipschitz_bound(1.0, &[(2.0, 2.0)]).unwrap();
        assert!((v - 0.5_f64.exp() / 2f64.sqrt()).abs() < 1e-15);
        assert!(heatflow_lipschitz_bound(1.0, &[(1.0, 1.0)]).is_err());
        assert!(heatflow_lipschitz_bound(-1.0, &[]).is_err());
    }

    #[test]
    fn main_bound_examples() {
        let mut p = unit();
        p.beta_hat = 0.0;
        p.sigma = 2.0;
        p.lambda = 9.0;
        assert!((main_bound(&p, MainVariant::Generic) - 2.0 / 3.0).abs() < 1e-15);
        let q = unit();
        assert!((main_bound(&q, MainVariant::Generic) - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn lsi_examples() {
        assert_eq!(lsi_pert_bound(2.0, 0.0).unwrap(), 0.5);
        assert!((lsi_pert_bound(1.0, 1.0).unwrap() - 5f64.exp()).abs() < 1e-12);
        assert!((lsi_pert_bound(4.0, 2.0).unwrap() - 5f64.exp() / 4.0).abs() < 1e-12);
        let mut p = unit();
        p.b = 1.0;
        let v = lsi_pi_bound(&p);
        assert!((v - 0.5 * (2.0 + 4.0 * 2f64.sqrt()).exp()).abs() < 1e-10);
    }

    #[test]
    fn songbo_examples() {
        assert_eq!(songbo_bound(0.0, 3, 0.5, 2.0, 10).unwrap(), 1.0);
        assert!(songbo_bound(0.0, 3, 0.0, 2.0, 10).is_err());
        assert!(songbo_bound(2.0, 1, 0.5, 1.0, 3).is_err());
    }

    #[test]
    fn winf_and_threshold() {
        assert_eq!(winf_bound(2.0, 3.0).unwrap(), 1.5);
        assert!(winf_bound(0.0, 1.0).is_err());
        let mut p = unit();
        p.lambda = 0.5;
        p.b = 0.5;
        assert!((regime_threshold(&p) - 0.2).abs() < 1e-15);
        p.b = 0.0;
        p.lambda = 2.0;
        assert_eq!(regime_threshold(&p), f64::INFINITY);
    }

    #[test]
    fn rescaling_example() {
        let mut p = unit();
        p.lambda = 4.0;
        p.b = 1.0;
        let r = p.rescale_parameters().unwrap();
        assert_eq!((r.beta_hat, r.lambda, r.b), (0.25, 1.0, 0.5));
        assert!(r.rescale_parameters().is_err());
    }
}
