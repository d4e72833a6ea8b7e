//! Experiment configuration: defaults, flat `key=value` files and flag overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sqlab_core::numtheory::Constants;
use sqlab_core::predictors;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub x: u64,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    pub delta: Option<f64>,
    pub eps0: Option<f64>,
    pub eps1: Option<f64>,
    pub z_stop: Option<usize>,
    pub n_max_factor: f64,
    /// Row count override; `round(eta J)` otherwise.
    pub rows: Option<usize>,
    /// Enforce `delta < eps1 e^{-3/eps1}`.
    pub strict: bool,
    /// Points of the log-spaced `z` grid for `predict` and `sk_traj.csv`.
    pub grid: usize,
    /// Largest `k` written to `sk_traj.csv`.
    pub k_max: usize,
    /// Avalanche vertex count and edge counts `k:s_k`.
    pub m: Option<usize>,
    pub s: BTreeMap<usize, usize>,
    /// Take the avalanche degree spec from trial 0's peeling state at this `z`.
    pub from_z: Option<usize>,
    pub output_dir: PathBuf,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            x: 1_000_000,
            eta: 0.4,
            trials: 10,
            seed: 1,
            delta: None,
            eps0: None,
            eps1: None,
            z_stop: None,
            n_max_factor: 1.5,
            rows: None,
            strict: false,
            grid: 200,
            k_max: 12,
            m: None,
            s: BTreeMap::new(),
            from_z: None,
            output_dir: PathBuf::from("sqlab-out"),
            format: Format::Csv,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> HarnessError {
    HarnessError::Config(format!("{key} = {value:?}: {what}"))
}

/// Integers may be written in scientific notation, e.g. `1e7`.
fn parse_int<T: TryFrom<u64>>(key: &str, value: &str) -> Result<T, HarnessError> {
    let v = value.trim().replace('_', "");
    let n = match v.parse::<u64>() {
        Ok(n) => n,
        Err(_) => {
            let f: f64 = v.parse().map_err(|_| bad(key, value, "expected an integer"))?;
            if !(f >= 0.0 && f.fract() == 0.0 && f < 1.8e19) {
                return Err(bad(key, value, "expected a non-negative integer"));
            }
            f as u64
        }
    };
    T::try_from(n).map_err(|_| bad(key, value, "integer out of range"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, HarnessError> {
    let f: f64 = value.trim().parse().map_err(|_| bad(key, value, "expected a number"))?;
    if !f.is_finite() {
        return Err(bad(key, value, "expected a finite number"));
    }
    Ok(f)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

/// `2:1500,3:500`.
pub fn parse_degree_counts(key: &str, value: &str) -> Result<BTreeMap<usize, usize>, HarnessError> {
    let mut out = BTreeMap::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, s) = part.split_once(':').ok_or_else(|| bad(key, value, "expected k:count pairs"))?;
        out.insert(parse_int(key, k)?, parse_int(key, s)?);
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Set one key. Dashes and underscores are interchangeable.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let norm = key.trim().replace('_', "-");
        match norm.as_str() {
            "x" => self.x = parse_int(key, value)?,
            "eta" => self.eta = parse_f64(key, value)?,
            "trials" => self.trials = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "delta" => self.delta = Some(parse_f64(key, value)?),
            "eps0" => self.eps0 = Some(parse_f64(key, value)?),
            "eps1" => self.eps1 = Some(parse_f64(key, value)?),
            "z-stop" => self.z_stop = Some(parse_int(key, value)?),
            "n-max-factor" => self.n_max_factor = parse_f64(key, value)?,
            "rows" => self.rows = Some(parse_int(key, value)?),
            "strict" => self.strict = parse_bool(key, value)?,
            "grid" => self.grid = parse_int(key, value)?,
            "k-max" => self.k_max = parse_int(key, value)?,
            "m" => self.m = Some(parse_int(key, value)?),
            "s" => self.s = parse_degree_counts(key, value)?,
            "from-z" => self.from_z = Some(parse_int(key, value)?),
            "out" | "output-dir" => self.output_dir = PathBuf::from(value.trim()),
            "format" => {
                self.format = match value.trim() {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(key, value, "expected csv or json")),
                }
            }
            _ => return Err(HarnessError::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a flat `key = value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("config line {}: expected key=value", n + 1)))?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    /// Basic range checks that do not need the prime landscape.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be >= 1".into()));
        }
        if !(self.n_max_factor > 0.0) {
            return Err(HarnessError::Config("n-max-factor must be positive".into()));
        }
        if self.grid < 2 {
            return Err(HarnessError::Config("grid must be >= 2".into()));
        }
        if self.k_max < 2 {
            return Err(HarnessError::Config("k-max must be >= 2".into()));
        }
        self.constants().map(|_| ())
    }

    /// Resolve `delta`, `eps0`, `eps1`: unset values take their defaults for `eta`,
    /// with `eps1` at half its admissible bound given `eps0`.
    pub fn constants(&self) -> Result<Constants, HarnessError> {
        let mut c = Constants::default_for(self.eta)?;
        if let Some(eps0) = self.eps0 {
            c.eps0 = eps0;
            if self.eps1.is_none() {
                let c0 = predictors::alpha((1.0 + eps0) * self.eta).map_err(|e| {
                    HarnessError::Config(format!("eps0 = {eps0} gives an unusable C0: {e}"))
                })?;
                c.eps1 = 0.5 * eps0 / 16.0 * (-c0).exp();
            }
        }
        if let Some(eps1) = self.eps1 {
            c.eps1 = eps1;
        }
        if let Some(delta) = self.delta {
            c.delta = delta;
        }
        c.validate(self.eta, self.strict)?;
        Ok(c)
    }
}
