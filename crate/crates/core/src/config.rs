//! Experiment configuration: a flat TOML file plus `key=value` overrides.
//!
//! ```toml
//! M = [50, 100, 200]      # one value or a list; swept
//! K = 10
//! beta = [1, 3, 4, 7]
//! S = 300
//! trials = 500
//! drops = 5
//! seed = 1
//! schemes = ["M-MMSE", "S-MMSE", "M-ZF", "MF"]
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::detectors::{InterferenceModel, InterfererPower, Scheme, SingleCellOptions};
use crate::error::{Error, Result};
use crate::geometry::Propagation;
use crate::performance::Sampling;
use crate::pilots::rho_from_snr_db;

/// Every tunable of an experiment. Keys `M`, `K` and `beta` accept a single
/// value or a list; the experiment sweeps their Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(rename = "M", deserialize_with = "one_or_many")]
    pub antennas: Vec<usize>,
    #[serde(rename = "K", deserialize_with = "one_or_many")]
    pub users_per_cell: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub beta: Vec<usize>,
    /// Coherence block length in symbols.
    #[serde(rename = "S")]
    pub coherence: usize,
    pub radius_m: f64,
    pub kappa: f64,
    pub sigma_sf_sq: f64,
    pub rho_over_sigma2_db: f64,
    pub sigma2: f64,
    pub min_dist_frac: f64,
    pub trials: usize,
    pub drops: usize,
    pub seed: u64,
    #[serde(deserialize_with = "scheme_list")]
    pub schemes: Vec<Scheme>,
    pub z_mode: InterferenceModel,
    pub tau_subscript_mode: InterfererPower,
    pub sampling: Sampling,
    /// Include the same-pilot estimation-error term in the deterministic
    /// equivalent.
    pub detequiv_same_pilot_error: bool,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            antennas: vec![50, 100, 200],
            users_per_cell: vec![10],
            beta: vec![1, 3, 4, 7],
            coherence: 300,
            radius_m: 500.0,
            kappa: 3.7,
            sigma_sf_sq: 5.0,
            rho_over_sigma2_db: 0.0,
            sigma2: 1.0,
            min_dist_frac: 0.14,
            trials: 500,
            drops: 5,
            seed: 1,
            schemes: Scheme::ALL.to_vec(),
            z_mode: InterferenceModel::Statistical,
            tau_subscript_mode: InterfererPower::Interferer,
            sampling: Sampling::Estimates,
            detequiv_same_pilot_error: true,
            threads: 0,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn scheme_list<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Scheme>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Names {
        Joined(String),
        List(Vec<String>),
    }
    let names = match Names::deserialize(d)? {
        Names::Joined(s) => s.split(',').map(|p| p.trim().to_string()).collect(),
        Names::List(v) => v,
    };
    names
        .iter()
        .filter(|n| !n.is_empty())
        .map(|n| Scheme::from_str(n).map_err(serde::de::Error::custom))
        .collect()
}

/// Canonical spelling of a possibly lower-case key.
fn canonical_key(key: &str) -> String {
    match key {
        "m" | "M" | "antennas" => "M".into(),
        "k" | "K" | "users_per_cell" => "K".into(),
        "s" | "S" | "coherence" => "S".into(),
        other => other.to_string(),
    }
}

impl NetworkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut canonical = toml::Table::new();
        for (k, v) in table {
            canonical.insert(canonical_key(&k), v);
        }
        let cfg: Self = canonical
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Apply one `key=value` override. The value is read as a TOML value and
    /// falls back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let key = canonical_key(key.trim());
        let value = value.trim();
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        if !table.contains_key(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        table.insert(key.clone(), parsed);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn propagation(&self) -> Propagation {
        Propagation {
            kappa: self.kappa,
            sigma_sf_sq: self.sigma_sf_sq,
            min_dist_frac: self.min_dist_frac,
        }
    }

    /// Target received power `ρ` per antenna.
    pub fn rho(&self) -> f64 {
        rho_from_snr_db(self.rho_over_sigma2_db, self.sigma2)
    }

    pub fn single_cell_options(&self) -> SingleCellOptions {
        SingleCellOptions {
            z_mode: self.z_mode,
            tau_mode: self.tau_subscript_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.antennas.is_empty() || self.users_per_cell.is_empty() || self.beta.is_empty() {
            return bad("M, K and beta need at least one value".into());
        }
        if self.antennas.contains(&0) {
            return bad("M must be at least 1".into());
        }
        for &k in &self.users_per_cell {
            if k == 0 {
                return bad("K must be at least 1".into());
            }
            for &beta in &self.beta {
                if ![1, 3, 4, 7].contains(&beta) {
                    return Err(Error::UnsupportedReuse(beta));
                }
                if self.coherence < beta * k {
                    return bad(format!(
                        "S = {} is shorter than B = beta * K = {}",
                        self.coherence,
                        beta * k
                    ));
                }
            }
        }
        for (name, v) in [
            ("radius_m", self.radius_m),
            ("kappa", self.kappa),
            ("sigma2", self.sigma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sigma_sf_sq >= 0.0 && self.sigma_sf_sq.is_finite()) {
            return bad(format!("sigma_sf_sq must be non-negative, got {}", self.sigma_sf_sq));
        }
        if !self.rho_over_sigma2_db.is_finite() {
            return bad("rho_over_sigma2_db must be finite".into());
        }
        if !(0.0..0.8).contains(&self.min_dist_frac) {
            return bad(format!("min_dist_frac must lie in [0, 0.8), got {}", self.min_dist_frac));
        }
        if self.trials == 0 || self.drops == 0 {
            return bad("trials and drops must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        Ok(())
    }
}
