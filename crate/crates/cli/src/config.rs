//! Experiment configuration: one TOML file per run. Unknown keys are
//! rejected and every numeric default is listed in [`DEFAULTS`] with the
//! reason it was chosen.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mflab_core::chaos::ChaosConfig;
use mflab_core::heatflow::{EnvelopeConstants, FlowConfig, ProfileConfig};
use mflab_core::meanfield::SolverConfig;
use mflab_core::model::{Activation, Datum, Loss, ModelSpec};
use mflab_core::presets;
use mflab_core::sampler::{MalaConfig, MfldConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ChaosSweep,
    TiltProfile,
    TransportMap,
    MfldRun,
    BoundsTable,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ChaosSweep => "chaos_sweep",
            Self::TiltProfile => "tilt_profile",
            Self::TransportMap => "transport_map",
            Self::MfldRun => "mfld_run",
            Self::BoundsTable => "bounds_table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Size of the worker pool; `--workers` takes precedence.
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub mcmc: McmcBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub tilt: TiltBlock,
    #[serde(default)]
    pub flow: FlowBlock,
    #[serde(default)]
    pub mfld: MfldBlock,
    #[serde(default)]
    pub bounds: BoundsBlock,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Relu,
    Tanh,
    Identity,
}

impl From<ActivationName> for Activation {
    fn from(a: ActivationName) -> Self {
        match a {
            ActivationName::Relu => Activation::Relu,
            ActivationName::Tanh => Activation::Tanh,
            ActivationName::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Squared {
        #[serde(default = "one")]
        scale: f64,
        /// Residual beyond which the loss continues linearly; `inf` keeps
        /// it quadratic (and `B` infinite).
        radius: f64,
    },
    Logistic,
}

impl From<LossConfig> for Loss<f64> {
    fn from(l: LossConfig) -> Self {
        match l {
            LossConfig::Squared { scale, radius } => Loss::Squared { scale, radius },
            LossConfig::Logistic => Loss::Logistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumConfig {
    pub x: Vec<f64>,
    pub y: f64,
    /// Defaults to equal weights.
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Zero {
        sigma: f64,
        lambda: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    QuadraticOracle {
        sigma: f64,
        lambda: f64,
        kappa: f64,
        c: f64,
        /// Unit direction; defaults to the first basis vector in `d = 1`.
        #[serde(default)]
        e: Option<Vec<f64>>,
    },
    ExampleNn {
        sigma: f64,
        lambda: f64,
        activation: ActivationName,
        loss: LossConfig,
        #[serde(default)]
        data: Vec<DatumConfig>,
        /// CSV with columns `x_1..x_d, y`, relative to the config file.
        #[serde(default)]
        data_csv: Option<PathBuf>,
    },
    /// The three-datum ReLU network.
    Relu { sigma: f64, lambda: f64 },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl ModelConfig {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Zero { .. } => "zero",
            Self::QuadraticOracle { .. } => "quadratic_oracle",
            Self::ExampleNn { .. } => "example_nn",
            Self::Relu { .. } => "relu",
        }
    }

    pub fn build(&self, base: &Path) -> Result<ModelSpec<f64>, CliError> {
        let model = match self {
            Self::Zero { sigma, lambda, dim } => ModelSpec::zero(*sigma, *lambda, *dim)?,
            Self::QuadraticOracle {
                sigma,
                lambda,
                kappa,
                c,
                e,
            } => ModelSpec::quadratic(*sigma, *lambda, *kappa, *c, e.clone().unwrap_or(vec![1.0]))?,
            Self::ExampleNn {
                sigma,
                lambda,
                activation,
                loss,
                data,
                data_csv,
            } => match (data.is_empty(), data_csv) {
                (false, None) => {
                    let w = 1.0 / data.len() as f64;
                    let data = data
                        .iter()
                        .map(|d| Datum {
                            x: d.x.clone(),
                            y: d.y,
                            weight: d.weight.unwrap_or(w),
                        })
                        .collect();
                    ModelSpec::example_nn(*sigma, *lambda, data, (*loss).into(), (*activation).into())?
                }
                (true, Some(path)) => ModelSpec::example_nn_from_csv(
                    *sigma,
                    *lambda,
                    base.join(path),
                    (*loss).into(),
                    (*activation).into(),
                )?,
                _ => {
                    return Err(CliError::Config(
                        "model: give exactly one of `data` and `data_csv`".into(),
                    ))
                }
            },
            Self::Relu { sigma, lambda } => presets::relu_network(*sigma, *lambda)?,
        };
        Ok(model)
    }
}

/// Grid and fixed-point solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    /// Nodes per axis; `None` uses 2048 (1-d) or 256 (2-d).
    pub points: Option<usize>,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            points: None,
            damping: s.damping,
            tol: s.tol,
            max_iter: s.max_iter,
        }
    }
}

impl GridBlock {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcBlock {
    pub samples: usize,
    pub burnin: usize,
    pub step_size: f64,
    pub thin: usize,
    pub chains: usize,
    pub batches: usize,
    pub pi_samples: usize,
    pub bootstrap: usize,
}

impl Default for McmcBlock {
    fn default() -> Self {
        let c = ChaosConfig::default();
        Self {
            samples: c.mcmc.n_samples,
            burnin: c.mcmc.n_burnin,
            step_size: c.mcmc.step_size,
            thin: c.mcmc.thin,
            chains: c.n_chains,
            batches: c.n_batches,
            pi_samples: c.n_pi_samples,
            bootstrap: c.bootstrap_reps,
        }
    }
}

impl McmcBlock {
    pub fn chaos(&self) -> ChaosConfig {
        ChaosConfig {
            mcmc: MalaConfig {
                n_samples: self.samples,
                n_burnin: self.burnin,
                step_size: self.step_size,
                thin: self.thin,
            },
            n_chains: self.chains,
            n_batches: self.batches,
            n_pi_samples: self.pi_samples,
            bootstrap_reps: self.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub n: Vec<usize>,
    /// Seeds per `N`; empty means the run seed alone.
    pub seeds: Vec<u64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            n: vec![2, 4, 8, 16],
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TiltBlock {
    /// Particles of the tilted measure (`N·d ≤ 2`).
    pub n: usize,
    /// Tilt times; empty means 40 log-spaced points around `t*`.
    pub t: Vec<f64>,
    /// Tilt centers, each of length `N·d`.
    pub y: Vec<Vec<f64>>,
    pub envelope_small: f64,
    pub envelope_large: f64,
    pub points_1d: usize,
    pub points_2d: usize,
}

impl Default for TiltBlock {
    fn default() -> Self {
        let p = ProfileConfig::default();
        Self {
            n: 1,
            t: Vec::new(),
            y: vec![vec![-3.0], vec![0.0], vec![3.0]],
            envelope_small: p.envelope.small,
            envelope_large: p.envelope.large,
            points_1d: p.points_1d,
            points_2d: p.points_2d,
        }
    }
}

impl TiltBlock {
    pub fn profile(&self) -> ProfileConfig {
        ProfileConfig {
            points_1d: self.points_1d,
            points_2d: self.points_2d,
            envelope: EnvelopeConstants {
                small: self.envelope_small,
                large: self.envelope_large,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowBlock {
    pub dt: f64,
    pub growth: f64,
    pub max_dt: f64,
    pub t_max: f64,
    pub source_points: usize,
    pub z_max: f64,
    pub map_points: usize,
    /// Nodes of the grid holding `μ`.
    pub grid_points: usize,
    /// Profile used to fit the tilt-stability terms.
    pub fit_t_min: f64,
    pub fit_t_max: f64,
    pub fit_t_points: usize,
    pub fit_y: Vec<f64>,
    pub fit_exponents: Vec<f64>,
}

impl Default for FlowBlock {
    fn default() -> Self {
        let f = FlowConfig::default();
        Self {
            dt: f.dt,
            growth: f.growth,
            max_dt: f.max_dt,
            t_max: f.t_max,
            source_points: f.source_points,
            z_max: f.z_max,
            map_points: f.map_points,
            grid_points: 1025,
            fit_t_min: 1e-4,
            fit_t_max: 1e4,
            fit_t_points: 60,
            fit_y: (0..13).map(|i| -6.0 + i as f64).collect(),
            fit_exponents: vec![1.5, 2.0, 3.0, 4.0],
        }
    }
}

impl FlowBlock {
    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            dt: self.dt,
            growth: self.growth,
            max_dt: self.max_dt,
            t_max: self.t_max,
            source_points: self.source_points,
            z_max: self.z_max,
            map_points: self.map_points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfldBlock {
    pub n: usize,
    pub horizon: f64,
    pub step: f64,
    pub record_every: usize,
    pub noise: Option<f64>,
}

impl Default for MfldBlock {
    fn default() -> Self {
        Self {
            n: 1000,
            horizon: 20.0,
            step: 1e-3,
            record_every: 1000,
            noise: None,
        }
    }
}

impl MfldBlock {
    pub fn mfld(&self) -> MfldConfig {
        MfldConfig {
            n: self.n,
            horizon: self.horizon,
            step: self.step,
            record_every: self.record_every,
            noise: self.noise,
        }
    }
}

/// Parameter lists for the bounds table; empty lists take the model's
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsBlock {
    pub sigma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub b: Vec<f64>,
}

/// Every numeric default with the reason for its value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0 unless given; always echoed into the manifest"),
    ("workers", "1; results do not depend on it"),
    ("grid.points", "2048 nodes (1-d) or 256 per axis (2-d): second-order trapezoid error below 1e-8 on the presets"),
    ("grid.damping", "0.5, halved when the fixed-point change grows; simplest scheme whose failure is detectable"),
    ("grid.tol", "1e-9 sup-norm change of the mixture between iterations"),
    ("grid.max_iter", "10000; nonconvergence is reported, never hidden"),
    ("mcmc.samples", "40000 per chain: CI half-widths near 5% of the KL on the quadratic oracle"),
    ("mcmc.burnin", "5000, during which the step size adapts to acceptance 0.574"),
    ("mcmc.step_size", "0.1 initial step; adapted during burn-in"),
    ("mcmc.thin", "1; batch means absorb the autocorrelation"),
    ("mcmc.chains", "4 independent streams, so between-chain spread is visible"),
    ("mcmc.batches", "40 batches per chain for the batch-means interval"),
    ("mcmc.pi_samples", "40000 i.i.d. product draws for the normalizer"),
    ("mcmc.bootstrap", "200 bootstrap replicates for the normalizer interval"),
    ("sweep.n", "N in {2, 4, 8, 16}: enough to expose growth in N at desk scale"),
    ("sweep.seeds", "empty: the run seed alone"),
    ("tilt.n", "1 particle: the single-particle measure"),
    ("tilt.t", "40 log-spaced times over [t*/100, 100 t*]; [1e-3, 1e3] when t* is infinite"),
    ("tilt.y", "centers -3, 0, 3: both tails and the middle of the rescaled measure"),
    ("tilt.envelope_small", "1: the implied constant of the small-time envelope is not specified"),
    ("tilt.envelope_large", "1: the implied constant of the large-time envelope is not specified"),
    ("tilt.points_1d", "1024 nodes over mean +- 12 sd of each tilted measure"),
    ("tilt.points_2d", "160 nodes per axis over mean +- 12 sd"),
    ("flow.dt", "1e-3 first RK4 step; the score varies on the time scale t"),
    ("flow.growth", "0.05: later steps are 0.05 t"),
    ("flow.max_dt", "0.05 cap on the step"),
    ("flow.t_max", "8: the heat flow is within e^-8 of the Gaussian"),
    ("flow.source_points", "257 points carried by the flow"),
    ("flow.z_max", "8: the map is tabulated on [-8, 8]"),
    ("flow.map_points", "1601 tabulation points"),
    ("flow.grid_points", "1025 nodes for the measure being transported"),
    ("flow.fit_t_min", "1e-4: smallest tilt time of the fitted profile"),
    ("flow.fit_t_max", "1e4: largest tilt time of the fitted profile"),
    ("flow.fit_t_points", "60 log-spaced tilt times"),
    ("flow.fit_y", "centers -6..6: the sup over y is taken on this set"),
    ("flow.fit_exponents", "k in {1.5, 2, 3, 4}: the exponents the envelopes produce"),
    ("mfld.n", "1000 particles"),
    ("mfld.horizon", "20 time units: many relaxation times for lambda near 1"),
    ("mfld.step", "1e-3 Euler-Maruyama step; bias O(h)"),
    ("mfld.record_every", "1000 steps between stored states"),
    ("mfld.noise", "unset: the model's sigma"),
];

/// A config together with the directory its relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base })
    }

    /// Schema checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("{field}: {why}")));
        if self.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        match self.experiment {
            ExperimentKind::ChaosSweep => {
                if self.sweep.n.is_empty() || self.sweep.n.contains(&0) {
                    return bad("sweep.n", "needs at least one N >= 1");
                }
            }
            ExperimentKind::TiltProfile => {
                if self.tilt.n == 0 {
                    return bad("tilt.n", "must be at least 1");
                }
                if self.tilt.y.is_empty() {
                    return bad("tilt.y", "needs at least one center");
                }
                if self.tilt.t.iter().any(|&t| !(t > 0.0)) {
                    return bad("tilt.t", "times must be positive");
                }
            }
            ExperimentKind::TransportMap => {
                if self.flow.fit_y.is_empty() || self.flow.fit_exponents.is_empty() {
                    return bad("flow", "fit_y and fit_exponents must be nonempty");
                }
                if !(self.flow.fit_t_min > 0.0 && self.flow.fit_t_max > self.flow.fit_t_min) {
                    return bad("flow", "need 0 < fit_t_min < fit_t_max");
                }
            }
            ExperimentKind::MfldRun | ExperimentKind::BoundsTable => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, so formatting and key order in
    /// the file do not matter.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configs serialize");
        hex::encode(Sha256::digest(&json))
    }
}
