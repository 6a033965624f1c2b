//! Small models used by the experiments and test suites.

use crate::error::Result;
use crate::model::{Activation, Datum, Loss, ModelSpec};
use crate::scalar::Real;

/// Inputs of the three-datum ReLU network.
pub const RELU_X: [f64; 3] = [1.0, -0.5, 0.8];
/// Labels of the three-datum ReLU network.
pub const RELU_Y: [f64; 3] = [1.0, 0.5, -0.3];
/// Clipping radius of its squared loss.
pub const RELU_RADIUS: f64 = 2.0;

/// One-dimensional ReLU network on three equally weighted data with a
/// unit-scale squared loss clipped at residual 2.
pub fn relu_network<T: Real>(sigma: T, lambda: T) -> Result<ModelSpec<T>> {
    let w = T::one() / T::lit(3.0);
    let data = RELU_X
        .iter()
        .zip(RELU_Y)
        .map(|(&x, y)| Datum {
            x: vec![T::lit(x)],
            y: T::lit(y),
            weight: w,
        })
        .collect();
    ModelSpec::example_nn(
        sigma,
        lambda,
        data,
        Loss::Squared {
            scale: T::one(),
            radius: T::lit(RELU_RADIUS),
        },
        Activation::Relu,
    )
}

/// `F₀(ν) = (κ/2)(mean ν − c)²` on the line.
pub fn quadratic_oracle<T: Real>(sigma: T, lambda: T, kappa: T, c: T) -> Result<ModelSpec<T>> {
    ModelSpec::quadratic(sigma, lambda, kappa, c, vec![T::one()])
}

/// The unit quadratic oracle `κ = λ = σ = 1`, `c = 1`.
pub fn unit_quadratic<T: Real>() -> Result<ModelSpec<T>> {
    quadratic_oracle(T::one(), T::one(), T::one(), T::one())
}
