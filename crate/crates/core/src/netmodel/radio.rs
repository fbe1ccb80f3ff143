use crate::error::{Error, Result};

use super::{db_to_linear, dbm_to_watts, BsConfig, Scenario, UeConfig};

/// Straight-line distance between a BS antenna at height `h` and a UE on the ground.
pub fn distance_3d(bs: &BsConfig, ue: &UeConfig, h: f64) -> f64 {
    let dx = bs.position.x - ue.position.x;
    let dy = bs.position.y - ue.position.y;
    (dx * dx + dy * dy + h * h).sqrt()
}

/// Urban-macro line-of-sight path loss in dB, distance in meters and carrier in GHz.
pub fn path_loss_db(d: f64, fc_ghz: f64) -> Result<f64> {
    if !(d > 0.0) || !(fc_ghz > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs d > 0 and fc > 0 (d={d}, fc={fc_ghz})"
        )));
    }
    Ok(28.0 + 22.0 * d.log10() + 20.0 * fc_ghz.log10())
}

/// Antenna gain for a downtilt of `tilt_deg` degrees: 10 - 20 lg(cos(theta)).
pub fn antenna_gain_db(tilt_deg: f64) -> Result<f64> {
    if !(0.0..90.0).contains(&tilt_deg) {
        return Err(Error::Domain(format!(
            "tilt must lie in [0, 90) degrees, got {tilt_deg}"
        )));
    }
    Ok(10.0 - 20.0 * tilt_deg.to_radians().cos().log10())
}

pub fn channel_gain_db(bs: &BsConfig, ue: &UeConfig, scn: &Scenario) -> Result<f64> {
    let d = distance_3d(bs, ue, scn.bs_height_m);
    Ok(antenna_gain_db(bs.tilt_deg)? - path_loss_db(d, scn.carrier_freq_ghz)? - scn.shadow_atten_db)
}

/// Received power at the UE, `tx_power + channel gain`. Meaningless for a
/// sleeping BS, which callers must skip.
pub fn received_power_dbm(bs: &BsConfig, ue: &UeConfig, scn: &Scenario) -> Result<f64> {
    Ok(bs.tx_power_dbm + channel_gain_db(bs, ue, scn)?)
}

/// Thermal noise integrated over `rb_count` resource blocks. At least one RB
/// is always integrated so the noise floor never vanishes.
pub fn noise_power_w(scn: &Scenario, rb_count: u32) -> f64 {
    dbm_to_watts(scn.noise_psd_dbm_hz) * f64::from(rb_count.max(1)) * scn.rb_bandwidth_hz
}

/// Linear SINR at `ue` from `serving`, with every awake BS in `interferers`
/// transmitting at its own power.
pub fn sinr_linear(
    serving: &BsConfig,
    interferers: &[BsConfig],
    ue: &UeConfig,
    scn: &Scenario,
    rb_count: u32,
) -> Result<f64> {
    let signal = if serving.asleep {
        0.0
    } else {
        serving.tx_power_w() * db_to_linear(channel_gain_db(serving, ue, scn)?)
    };
    let mut interference = 0.0;
    for bs in interferers.iter().filter(|b| !b.asleep && b.id != serving.id) {
        interference += bs.tx_power_w() * db_to_linear(channel_gain_db(bs, ue, scn)?);
    }
    Ok(signal / (interference + noise_power_w(scn, rb_count)))
}

/// Shannon rate over `rb_count` resource blocks, in bits per second.
pub fn throughput_bps(rb_count: u32, sinr: f64, scn: &Scenario) -> f64 {
    f64::from(rb_count) * scn.rb_bandwidth_hz * (1.0 + sinr.max(0.0)).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{linear_to_db, Position};
    use proptest::prelude::*;

    fn bs_at(x: f64, y: f64) -> BsConfig {
        BsConfig::awake(0, Position::new(x, y), 53.0, 0.0)
    }

    fn ue_at(x: f64, y: f64) -> UeConfig {
        UeConfig::new(0, Position::new(x, y))
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_3d(&bs_at(0.0, 0.0), &ue_at(0.0, 0.0), 25.0), 25.0);
        assert_eq!(distance_3d(&bs_at(0.0, 0.0), &ue_at(30.0, 40.0), 0.0), 50.0);
        assert!(close(
            distance_3d(&bs_at(0.0, 0.0), &ue_at(30.0, 40.0), 25.0),
            55.901_699_437_494_74,
            1e-9
        ));
    }

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss_db(1.0, 1.0).unwrap(), 28.0);
        assert!(close(path_loss_db(100.0, 3.5).unwrap(), 82.881_360_887_005_51, 1e-9));
        assert!(close(path_loss_db(25.0, 3.5).unwrap(), 69.636_041_077_790_34, 1e-9));
        assert!(path_loss_db(0.0, 3.5).is_err());
        assert!(path_loss_db(10.0, -1.0).is_err());
    }

    #[test]
    fn antenna_gain_examples() {
        assert_eq!(antenna_gain_db(0.0).unwrap(), 10.0);
        assert!(close(antenna_gain_db(20.0).unwrap(), 10.540_283_671_141_27, 1e-9));
        assert!(close(antenna_gain_db(60.0).unwrap(), 16.020_599_913_279_62, 1e-9));
        assert!(antenna_gain_db(90.0).is_err());
        assert!(antenna_gain_db(-1.0).is_err());
    }

    #[test]
    fn antenna_gain_increases_with_tilt() {
        let h = 1e-6;
        let mut t = 0.5;
        while t < 89.0 {
            let slope = (antenna_gain_db(t + h).unwrap() - antenna_gain_db(t - h).unwrap()) / (2.0 * h);
            assert!(slope > 0.0, "slope {slope} at {t}");
            t += 0.5;
        }
    }

    #[test]
    fn channel_gain_examples() {
        let mut scn = Scenario::default();
        scn.carrier_freq_ghz = 1.0;
        scn.shadow_atten_db = 0.0;
        // colocated with h = 1 gives d = 1
        scn.bs_height_m = 1.0;
        let g = channel_gain_db(&bs_at(0.0, 0.0), &ue_at(0.0, 0.0), &scn).unwrap();
        assert!(close(g, -18.0, 1e-12));

        scn.carrier_freq_ghz = 3.5;
        scn.shadow_atten_db = 6.0;
        scn.bs_height_m = 100.0;
        let g = channel_gain_db(&bs_at(0.0, 0.0), &ue_at(0.0, 0.0), &scn).unwrap();
        assert!(close(g, -78.881_360_887_005_51, 1e-9));

        scn.shadow_atten_db = 0.0;
        scn.bs_height_m = 25.0;
        let mut tilted = bs_at(0.0, 0.0);
        tilted.tilt_deg = 20.0;
        let g = channel_gain_db(&tilted, &ue_at(0.0, 0.0), &scn).unwrap();
        assert!(close(g, -59.095_757_406_649_07, 1e-9));
    }

    #[test]
    fn sinr_signal_equals_noise() {
        let mut scn = Scenario::default();
        let serving = bs_at(0.0, 0.0);
        let ue = ue_at(100.0, 0.0);
        let rx_w = serving.tx_power_w() * db_to_linear(channel_gain_db(&serving, &ue, &scn).unwrap());
        // choose the PSD so noise over one RB equals the received power
        scn.noise_psd_dbm_hz = linear_to_db(rx_w / scn.rb_bandwidth_hz) + 30.0;
        let s = sinr_linear(&serving, &[], &ue, &scn, 1).unwrap();
        assert!(close(s, 1.0, 1e-12));
    }

    #[test]
    fn sinr_all_asleep_is_zero() {
        let scn = Scenario::default();
        let serving = BsConfig::sleeping(0, Position::new(0.0, 0.0));
        let other = BsConfig::sleeping(1, Position::new(500.0, 0.0));
        let s = sinr_linear(&serving, &[other], &ue_at(10.0, 0.0), &scn, 4).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn sinr_equal_interferer_is_near_one() {
        let mut scn = Scenario::default();
        let serving = BsConfig::awake(0, Position::new(-100.0, 0.0), 53.0, 5.0);
        let other = BsConfig::awake(1, Position::new(100.0, 0.0), 53.0, 5.0);
        let ue = ue_at(0.0, 0.0);
        // brute force: received powers by hand, noise 60 dB under the signal
        let rx = serving.tx_power_w() * db_to_linear(channel_gain_db(&serving, &ue, &scn).unwrap());
        scn.noise_psd_dbm_hz = linear_to_db(rx * 1e-6 / scn.rb_bandwidth_hz) + 30.0;
        let s = sinr_linear(&serving, &[other], &ue, &scn, 1).unwrap();
        assert!(close(s, 1.0 / (1.0 + 1e-6), 1e-9));
    }

    #[test]
    fn sinr_matches_single_link_oracle() {
        let scn = Scenario::default();
        let serving = BsConfig::awake(0, Position::new(0.0, 0.0), 50.0, 15.0);
        let muted = BsConfig::sleeping(1, Position::new(300.0, 0.0));
        let ue = ue_at(120.0, 35.0);
        for rb in [1u32, 7, 106] {
            let got = sinr_linear(&serving, &[muted], &ue, &scn, rb).unwrap();
            let g = 10f64.powf(channel_gain_db(&serving, &ue, &scn).unwrap() / 10.0);
            let p = 10f64.powf((50.0 - 30.0) / 10.0);
            let noise = 10f64.powf((scn.noise_psd_dbm_hz - 30.0) / 10.0) * scn.rb_bandwidth_hz * rb as f64;
            let want = p * g / noise;
            assert!(((got - want) / want).abs() < 1e-12);
        }
    }

    #[test]
    fn throughput_examples() {
        let scn = Scenario::default();
        assert_eq!(throughput_bps(0, 123.0, &scn), 0.0);
        assert!(close(throughput_bps(1, 1.0, &scn), 180_000.0, 1e-9));
        assert!(close(throughput_bps(2, 3.0, &scn), 720_000.0, 1e-9));
    }

    proptest! {
        #[test]
        fn path_loss_is_monotone(d in 1.0f64..5000.0, dd in 0.01f64..100.0,
                                 fc in 0.5f64..60.0, dfc in 0.01f64..10.0) {
            let base = path_loss_db(d, fc).unwrap();
            prop_assert!(path_loss_db(d + dd, fc).unwrap() > base);
            prop_assert!(path_loss_db(d, fc + dfc).unwrap() > base);
        }

        #[test]
        fn throughput_linear_in_rbs_and_monotone_in_sinr(rb in 0u32..300, s in 0.0f64..1e4, ds in 0.0f64..100.0) {
            let scn = Scenario::default();
            let one = throughput_bps(1, s, &scn);
            prop_assert!((throughput_bps(rb, s, &scn) - rb as f64 * one).abs() <= 1e-6 * one.max(1.0) * rb as f64);
            prop_assert!(throughput_bps(rb, s + ds, &scn) >= throughput_bps(rb, s, &scn));
        }
    }
}
