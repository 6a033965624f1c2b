//! Fixed and adaptive quadrature rules.

use crate::scalar::Real;

/// Gauss–Hermite rule for the weight `e^{-x²}` with `n` nodes, returned as
/// `(nodes, weights)` in increasing node order. Nodes come from Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // Newton fills from the largest node down.
    x.reverse();
    w.reverse();
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Hermite rule rescaled to expectations under the standard normal:
/// `E f(Z) ≈ Σ wᵢ f(zᵢ)` with `Σ wᵢ = 1`.
pub fn standard_normal_rule<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_hermite(n);
    let s = std::f64::consts::PI.sqrt();
    (
        x.iter().map(|&v| T::lit(v * std::f64::consts::SQRT_2)).collect(),
        w.iter().map(|&v| T::lit(v / s)).collect(),
    )
}

/// Five-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `∫_a^b f` by five-point Gauss–Legendre on a single panel.
pub fn gauss_legendre_panel<T: Real>(a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    GAUSS_LEGENDRE_5
        .iter()
        .map(|&(x, w)| T::lit(w) * f(mid + half * T::lit(x)))
        .sum::<T>()
        * half
}

/// Double-exponential (exp-sinh) quadrature of `∫_0^∞ f(t) dt`.
///
/// Copes with integrable endpoint singularities at 0 and exponentially
/// decaying tails. Non-finite samples are treated as zero contributions,
/// so the integrand may overflow where it is negligible.
pub fn exp_sinh<T: Real>(mut f: impl FnMut(T) -> T, tol: T) -> T {
    let half_pi = T::FRAC_PI_2();
    let u_max = T::lit(4.5);
    let mut eval = |u: T| -> T {
        let t = (half_pi * u.sinh()).exp();
        if t == T::zero() || !t.is_finite() {
            return T::zero();
        }
        let v = f(t) * t * half_pi * u.cosh();
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    let mut h = T::lit(0.5);
    let mut sum = eval(T::zero());
    let mut k = T::one();
    while k * h <= u_max {
        sum = sum + eval(k * h) + eval(-k * h);
        k = k + T::one();
    }
    let mut estimate = sum * h;
    for _ in 0..12 {
        h = h / T::lit(2.0);
        let mut k = T::one();
        while k * h <= u_max {
            sum = sum + eval(k * h) + eval(-k * h);
            k = k + T::lit(2.0);
        }
        let next = sum * h;
        if (next - estimate).abs() <= tol * next.abs().max(T::one()) {
            return next;
        }
        estimate = next;
    }
    estimate
}
