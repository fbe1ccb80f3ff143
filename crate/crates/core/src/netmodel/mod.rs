//! Radio, energy and traffic model kernels.
//!
//! Everything here is a pure function of its arguments. The only stateful
//! input is the random generator handed to [`draw_packet_interarrival`].

mod cqi;
mod energy;
mod radio;
mod traffic;
mod types;

pub use cqi::{sinr_to_cqi, CqiTable, CqiTableEntry, CQI_SCHEMA_VERSION, DEFAULT_CQI_TABLE};
pub use energy::{bs_load, bs_power_w, operating_power_w};
pub use radio::{
    antenna_gain_db, channel_gain_db, distance_3d, noise_power_w, path_loss_db,
    received_power_dbm, sinr_linear, throughput_bps,
};
pub use traffic::draw_packet_interarrival;
pub use types::{
    BsConfig, Position, Scenario, UeConfig, DEFAULT_SCENARIO, SCENARIO_SCHEMA_VERSION,
};

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm. Zero watts maps to negative infinity.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn conversion_anchors() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(53.0) - 199.526_231_496_887_9).abs() < 1e-9);
        assert!((db_to_linear(-10.0) - 0.1).abs() < 1e-15);
        assert_eq!(watts_to_dbm(0.0), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn dbm_watts_round_trip(dbm in -200.0f64..100.0) {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        }

        #[test]
        fn db_linear_round_trip(lin in 1e-20f64..1e12) {
            let back = db_to_linear(linear_to_db(lin));
            prop_assert!(((back - lin) / lin).abs() <= 1e-12);
        }
    }
}
