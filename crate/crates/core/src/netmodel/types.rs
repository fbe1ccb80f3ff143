use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Default scenario file shipped with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../../../../configs/scenario.toml");

/// Static description of the cell cluster and the model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_bs: usize,
    pub n_ue: usize,
    pub sectors_per_bs: u32,
    pub bs_height_m: f64,
    pub system_bandwidth_hz: f64,
    pub rb_bandwidth_hz: f64,
    pub max_rbs: u32,
    pub carrier_freq_ghz: f64,
    /// Mean packet arrivals per UE per time unit.
    pub arrival_rate: f64,
    pub arrival_time_unit_ttis: f64,
    pub packet_size_bits: u64,
    pub noise_psd_dbm_hz: f64,
    pub shadow_atten_db: f64,
    pub energy_zeta: f64,
    pub energy_xi: f64,
    pub energy_psi: f64,
    #[serde(default = "one")]
    pub sector_power_multiplier: f64,
    pub rx_power_floor_dbm: f64,
    pub inter_site_distance_m: f64,
    pub ue_radius_m: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl Default for Scenario {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_SCENARIO, Path::new("<default scenario>"))
            .expect("bundled scenario is valid")
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let scn: Scenario = files::parse_versioned_toml(text, origin, SCENARIO_SCHEMA_VERSION)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let scn: Scenario = files::load_versioned_toml(path, SCENARIO_SCHEMA_VERSION)?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_toml_string(&self) -> String {
        let mut table = toml::Table::new();
        table.insert(
            "schema_version".into(),
            toml::Value::Integer(SCENARIO_SCHEMA_VERSION.into()),
        );
        if let toml::Value::Table(fields) = toml::Value::try_from(self).expect("serializable") {
            table.extend(fields);
        }
        toml::to_string(&table).expect("serializable")
    }

    /// Same constants with a different cluster size.
    pub fn with_size(&self, n_bs: usize, n_ue: usize) -> Self {
        Self {
            n_bs,
            n_ue,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_bs == 0 || self.n_ue == 0 {
            return bad(format!(
                "need at least one BS and one UE (n_bs={}, n_ue={})",
                self.n_bs, self.n_ue
            ));
        }
        if !(0.0..=1.0).contains(&self.energy_zeta) {
            return bad(format!("energy_zeta {} outside [0, 1]", self.energy_zeta));
        }
        if self.rb_bandwidth_hz <= 0.0 || self.system_bandwidth_hz <= 0.0 {
            return bad("bandwidths must be positive".into());
        }
        if self.max_rbs == 0 {
            return bad("max_rbs must be at least 1".into());
        }
        // Guard bands make the usable RB count smaller than B / B_prb, never larger.
        let ceiling = (self.system_bandwidth_hz / self.rb_bandwidth_hz).floor() as u32 + 1;
        if self.max_rbs > ceiling {
            return bad(format!(
                "max_rbs {} exceeds the {} RBs that fit in {} Hz",
                self.max_rbs, ceiling, self.system_bandwidth_hz
            ));
        }
        for (name, v) in [
            ("bs_height_m", self.bs_height_m),
            ("carrier_freq_ghz", self.carrier_freq_ghz),
            ("arrival_rate", self.arrival_rate),
            ("arrival_time_unit_ttis", self.arrival_time_unit_ttis),
            ("energy_psi", self.energy_psi),
            ("sector_power_multiplier", self.sector_power_multiplier),
            ("inter_site_distance_m", self.inter_site_distance_m),
            ("ue_radius_m", self.ue_radius_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.energy_xi < 0.0 || self.shadow_atten_db < 0.0 {
            return bad("energy_xi and shadow_atten_db must be non-negative".into());
        }
        if self.packet_size_bits == 0 {
            return bad("packet_size_bits must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Radio configuration of one base station. A sleeping BS carries zero
/// transmit power and zero tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsConfig {
    pub id: usize,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub tilt_deg: f64,
    pub asleep: bool,
}

impl BsConfig {
    pub fn awake(id: usize, position: Position, tx_power_dbm: f64, tilt_deg: f64) -> Self {
        Self {
            id,
            position,
            tx_power_dbm,
            tilt_deg,
            asleep: false,
        }
    }

    pub fn sleeping(id: usize, position: Position) -> Self {
        Self {
            id,
            position,
            tx_power_dbm: 0.0,
            tilt_deg: 0.0,
            asleep: true,
        }
    }

    /// Transmit power in watts; zero while asleep.
    pub fn tx_power_w(&self) -> f64 {
        if self.asleep {
            0.0
        } else {
            super::dbm_to_watts(self.tx_power_dbm)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeConfig {
    pub id: usize,
    pub position: Position,
    /// Serving BS; `None` while detached.
    pub serving_bs: Option<usize>,
}

impl UeConfig {
    pub fn new(id: usize, position: Position) -> Self {
        Self {
            id,
            position,
            serving_bs: None,
        }
    }

    /// Association flag delta_{n,m}.
    pub fn associated_with(&self, bs_id: usize) -> bool {
        self.serving_bs == Some(bs_id)
    }
}
