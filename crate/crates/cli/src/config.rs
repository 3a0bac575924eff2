//! Subcommand parameters, config-file loading and flag overlay.
//!
//! Every parameter is optional at the parsing stage so that the config file
//! and the command line can be merged: a flag wins over the file, the file
//! wins over the built-in default.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphParams {
    /// `builtin:NAME`, `file:PATH` (edge list) or `torus:D,SIDE`.
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Largest tolerated discrepancy (ward-check only).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    #[arg(long)]
    pub graph: Option<String>,
    /// Torus `Z^d / L^N Z^d` given as `D L N`; translation averaged.
    #[arg(long, num_args = 3, value_names = ["D", "L", "N"])]
    pub torus: Option<Vec<usize>>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Comma separated: connection, theta, tau, sigma, mean_tree_size.
    #[arg(long, value_delimiter = ',')]
    pub observables: Option<Vec<String>>,
    /// Comma separated target vertices for two-point observables.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<usize>>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FrdParams {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub m2: Option<f64>,
    /// `polynomial` or `bump`.
    #[arg(long)]
    pub backend: Option<String>,
    /// Range tolerance of the bump backend.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub m2: Option<f64>,
    #[arg(long)]
    pub b0: Option<f64>,
    /// 1: `psibar_a psi_b`; 2: `psibar_a psi_a` with `psibar_b psi_b`.
    #[arg(long)]
    pub case: Option<u8>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<i64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<i64>>,
    #[arg(long)]
    pub backend: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GreenParams {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub m2: Option<f64>,
    /// Emit extrapolated infinite-volume values at `m^2 = 0` instead.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub zd: Option<bool>,
    /// Largest `|x|_inf` emitted with `--zd`.
    #[arg(long)]
    pub rmax: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThetaScanParams {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DecayFitParams {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub rmin: Option<usize>,
    #[arg(long)]
    pub rmax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
}

/// The config file: an optional output path and one table per subcommand.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub out: Option<String>,
    pub exact_check: Option<GraphParams>,
    pub ward_check: Option<GraphParams>,
    pub sample: Option<SampleParams>,
    pub frd: Option<FrdParams>,
    pub flow: Option<FlowParams>,
    pub green: Option<GreenParams>,
    pub theta_scan: Option<ThetaScanParams>,
    pub decay_fit: Option<DecayFitParams>,
}

/// Errors in configuration, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()).into())
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

/// Fields set in `flags` replace those of `file`.
pub fn overlay<T: Serialize + DeserializeOwned + Default>(file: Option<T>, flags: &T) -> Result<T> {
    let mut base = serde_json::to_value(file.unwrap_or_default())?;
    let top = serde_json::to_value(flags)?;
    let (Some(b), Some(t)) = (base.as_object_mut(), top.as_object()) else {
        bail!("parameter blocks must be tables");
    };
    for (k, v) in t {
        if !v.is_null() {
            b.insert(k.clone(), v.clone());
        }
    }
    Ok(serde_json::from_value(base)?)
}

/// Unwrap a resolved parameter or report it as missing.
pub fn required<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    match v {
        Some(x) => Ok(x.clone()),
        None => config_error(format!("missing required parameter '{name}'")),
    }
}
