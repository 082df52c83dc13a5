//! Scenario configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::ChannelParams;
use crate::circuit::ElementCircuit;
use crate::error::{Error, Result};
use crate::solver::{SolverConfig, Variant};

/// Node placement. BSs sit on the corners of a square with BS 1 at the
/// origin; users sit on the corners of a smaller square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub bs_square_width: f64,
    pub bs_height: f64,
    /// Corner of the user square, `(x, y)`.
    pub ue_origin: [f64; 2],
    pub ue_square_width: f64,
    pub ue_height: f64,
    /// One `(x, y)` per surface, in BS order.
    pub ris_positions: Vec<[f64; 2]>,
    pub ris_height: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_square_width: 60.0,
            bs_height: 5.0,
            ue_origin: [30.0, 60.0],
            ue_square_width: 2.5,
            ue_height: 1.5,
            ris_positions: vec![[-2.5, 8.5], [62.5, 8.5], [-2.5, 111.5], [62.5, 111.5]],
            ris_height: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub trials: usize,
    pub num_bs: usize,
    pub users_per_bs: usize,
    pub antennas: usize,
    pub elements: usize,
    pub bandwidth: f64,
    pub subcarriers: usize,
    /// Per-subcarrier noise power at every user.
    pub noise_dbm: f64,
    /// Per-BS transmit power sweep.
    pub power_dbm: Vec<f64>,
    pub variants: Vec<Variant>,
    /// Fill the `wall_ms` column; makes the results file non-reproducible.
    pub record_wall_time: bool,
    pub geometry: Geometry,
    pub channel: ChannelParams,
    pub circuit: ElementCircuit,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 100,
            num_bs: 4,
            users_per_bs: 1,
            antennas: 4,
            elements: 100,
            bandwidth: 1e8,
            subcarriers: 64,
            noise_dbm: -90.0,
            power_dbm: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0],
            variants: Variant::ALL.to_vec(),
            record_wall_time: false,
            geometry: Geometry::default(),
            channel: ChannelParams::default(),
            circuit: ElementCircuit::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// `10^((P - 30) / 10)` watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * p.log10() + 30.0
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn num_users(&self) -> usize {
        self.num_bs * self.users_per_bs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        for (name, v) in [("num_bs", self.num_bs), ("users_per_bs", self.users_per_bs), ("antennas", self.antennas), ("elements", self.elements), ("subcarriers", self.subcarriers)] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.num_bs > 4 {
            return bad(format!("the square layout has 4 BS sites, {} requested", self.num_bs));
        }
        if self.num_users() > 4 {
            return bad(format!("the user square has 4 sites, {} users requested", self.num_users()));
        }
        if self.geometry.ris_positions.len() < self.num_bs {
            return bad(format!(
                "geometry.ris_positions lists {} surfaces for {} BSs",
                self.geometry.ris_positions.len(),
                self.num_bs
            ));
        }
        if !(self.bandwidth > 0.0) || !(self.channel.carrier_frequency > 0.0) {
            return bad("bandwidth and channel.carrier_frequency must be positive".into());
        }
        if self.channel.num_taps == 0 || self.channel.num_taps > self.subcarriers {
            return bad("channel.num_taps must lie in 1..=subcarriers".into());
        }
        if !(self.channel.reference_distance > 0.0 && self.channel.delay_decay > 0.0) {
            return bad("channel.reference_distance and channel.delay_decay must be positive".into());
        }
        if !self.noise_dbm.is_finite() || self.power_dbm.iter().any(|p| !p.is_finite()) {
            return bad("powers must be finite".into());
        }
        if self.power_dbm.is_empty() || self.variants.is_empty() {
            return bad("power_dbm and variants must be non-empty".into());
        }
        self.circuit.validate()?;
        self.solver.validate()
    }
}
