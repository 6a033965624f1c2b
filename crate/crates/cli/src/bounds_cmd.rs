//! `mflab bounds`: evaluates one closed-form calculator from flags and
//! prints JSON.

use clap::{Args, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mflab_core::bounds::{
    heatflow_lipschitz_bound, lsi_pert_bound, lsi_pi_bound, main_bound, main_exponent,
    regime_threshold, songbo_bound, winf_bound, BoundInputs, MainVariant,
};
use mflab_core::chaos::{poc_bound, PocVariant};

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct Params {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta_hat: f64,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l_h: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l_ell: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta_ell: f64,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d_prox: usize,
    /// The parameters already describe the rescaled model.
    #[arg(long)]
    pub rescaled: bool,
}

impl Params {
    fn inputs(&self) -> Result<BoundInputs<f64>, CliError> {
        let p = BoundInputs {
            sigma: self.sigma,
            lambda: self.lambda,
            beta_hat: self.beta_hat,
            b: self.b,
            l_h: self.l_h,
            l_ell: self.l_ell,
            beta_ell: self.beta_ell,
            d: self.d,
            n: self.n,
            d_prox: self.d_prox,
            rescaled: self.rescaled,
        };
        p.validate().map_err(input)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MainArg {
    Generic,
    Specific,
    SpecificFull,
}

impl From<MainArg> for MainVariant {
    fn from(v: MainArg) -> Self {
        match v {
            MainArg::Generic => MainVariant::Generic,
            MainArg::Specific => MainVariant::Specific,
            MainArg::SpecificFull => MainVariant::SpecificFull,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PocArg {
    Generic,
    ExampleNn,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Calculator {
    /// Lipschitz constant of the Gaussian-to-particle transport map.
    Main {
        #[command(flatten)]
        p: Params,
        #[arg(long, value_enum, default_value = "generic")]
        variant: MainArg,
    },
    /// Heat-flow Lipschitz bound from tilt-stability terms `C:k`.
    Heatflow {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long = "term", value_parser = parse_term)]
        terms: Vec<(f64, f64)>,
    },
    /// LSI constant under a Lipschitz perturbation.
    LsiPert {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        l: f64,
    },
    /// LSI constant of the mean-field measure.
    LsiPi {
        #[command(flatten)]
        p: Params,
    },
    /// Uniform-in-N LSI bound of the comparison approach.
    Songbo {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: usize,
    },
    /// W∞ distance under a Lipschitz tilt.
    Winf {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        l: f64,
    },
    /// Parameters after the rescaling `x ↦ ηx`.
    Rescale {
        #[command(flatten)]
        p: Params,
    },
    /// Regime threshold `t*` (of the rescaled parameters when `--rescaled`).
    Threshold {
        #[command(flatten)]
        p: Params,
    },
    /// Propagation-of-chaos bound.
    Poc {
        #[command(flatten)]
        p: Params,
        #[arg(long)]
        cbar: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "generic")]
        variant: PocArg,
    },
}

fn parse_term(s: &str) -> Result<(f64, f64), String> {
    let (c, k) = s.split_once(':').ok_or("expected C:k")?;
    let c = c.trim().parse().map_err(|e| format!("C: {e}"))?;
    let k = k.trim().parse().map_err(|e| format!("k: {e}"))?;
    Ok((c, k))
}

fn input(e: mflab_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Evaluates a calculator; invalid arguments are config errors.
pub fn evaluate(calc: &Calculator) -> Result<Value, CliError> {
    let out = match calc {
        Calculator::Main { p, variant } => {
            let inputs = p.inputs()?;
            let v = MainVariant::from(*variant);
            json!({
                "calculator": "main",
                "variant": v,
                "inputs": inputs,
                "exponent": main_exponent(&inputs, v),
                "value": main_bound(&inputs, v),
                "implied_constants": 1.0,
            })
        }
        Calculator::Heatflow { a, terms } => json!({
            "calculator": "heatflow",
            "a": a,
            "terms": terms,
            "value": heatflow_lipschitz_bound(*a, terms).map_err(input)?,
        }),
        Calculator::LsiPert { alpha, l } => json!({
            "calculator": "lsi_pert",
            "alpha": alpha,
            "l": l,
            "value": lsi_pert_bound(*alpha, *l).map_err(input)?,
        }),
        Calculator::LsiPi { p } => {
            let inputs = p.inputs()?;
            json!({ "calculator": "lsi_pi", "inputs": inputs, "value": lsi_pi_bound(&inputs) })
        }
        Calculator::Songbo {
            kappa,
            d,
            epsilon,
            rho,
            n,
        } => json!({
            "calculator": "songbo",
            "note": "concurrent approach, for comparison only",
            "value": songbo_bound(*kappa, *d, *epsilon, *rho, *n).map_err(input)?,
        }),
        Calculator::Winf { alpha, l } => json!({
            "calculator": "winf",
            "alpha": alpha,
            "l": l,
            "value": winf_bound(*alpha, *l).map_err(input)?,
        }),
        Calculator::Rescale { p } => {
            let inputs = p.inputs()?;
            json!({
                "calculator": "rescale",
                "eta": inputs.lambda.sqrt() / inputs.sigma,
                "value": inputs.rescale_parameters().map_err(input)?,
            })
        }
        Calculator::Threshold { p } => {
            let inputs = p.inputs()?;
            let t = regime_threshold(&inputs);
            json!({
                "calculator": "threshold",
                "inputs": inputs,
                "value": if t.is_finite() { json!(t) } else { json!("inf") },
            })
        }
        Calculator::Poc {
            p,
            cbar,
            alpha,
            variant,
        } => {
            let inputs = p.inputs()?;
            let v = match variant {
                PocArg::Generic => PocVariant::Generic,
                PocArg::ExampleNn => PocVariant::ExampleNn,
            };
            json!({
                "calculator": "poc",
                "inputs": inputs,
                "cbar_pi": cbar,
                "alpha": alpha,
                "value": poc_bound(&inputs, *cbar, *alpha, v).map_err(input)?,
            })
        }
    };
    Ok(out)
}
