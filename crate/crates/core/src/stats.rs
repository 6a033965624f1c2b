//! Monte Carlo summaries: effective sample size, batch-means and bootstrap
//! confidence intervals.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len().max(2) - 1) as f64
}

/// Estimate with a symmetric confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            half_width: 0.0,
        }
    }

    pub fn lo(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.value + self.half_width
    }
}

/// Two-sided Student-t quantile `t_{1−(1−level)/2, dof}`.
pub fn t_quantile(level: f64, dof: usize) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof.max(1) as f64).expect("valid t distribution");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// Mean of a correlated series with a 95% batch-means interval.
pub fn batch_means(xs: &[f64], n_batches: usize) -> Estimate {
    let b = n_batches.clamp(2, xs.len().max(2));
    let size = xs.len() / b;
    if size == 0 {
        return Estimate {
            value: mean(xs),
            half_width: f64::INFINITY,
        };
    }
    let means: Vec<f64> = (0..b).map(|k| mean(&xs[k * size..(k + 1) * size])).collect();
    let var = variance(&means);
    Estimate {
        value: mean(&xs[..b * size]),
        half_width: t_quantile(0.95, b - 1) * (var / b as f64).sqrt(),
    }
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(xs);
    let c: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let autocov = |lag: usize| -> f64 {
        c[..n - lag]
            .iter()
            .zip(&c[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return n as f64;
    }
    // Γ_k = ρ_{2k} + ρ_{2k+1}, truncated at the first nonpositive pair and
    // forced to be nonincreasing.
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let g = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if g <= 0.0 {
            break;
        }
        let g = g.min(prev);
        sum += g;
        prev = g;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * (n as f64).log10().max(1.0))
}

/// Percentile bootstrap: `stat` is evaluated on `reps` resamples of `xs`.
/// Returns the 95% interval as a half-width around the full-sample value.
pub fn bootstrap<R: Rng + ?Sized>(
    xs: &[f64],
    reps: usize,
    rng: &mut R,
    stat: impl Fn(&[f64]) -> f64,
) -> Estimate {
    let full = stat(xs);
    let n = xs.len();
    let mut buf = vec![0.0; n];
    let mut draws: Vec<f64> = (0..reps)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let q = |p: f64| draws[((p * (reps - 1) as f64).round() as usize).min(reps - 1)];
    let (lo, hi) = (q(0.025), q(0.975));
    Estimate {
        value: full,
        half_width: (full - lo).abs().max((hi - full).abs()),
    }
}
