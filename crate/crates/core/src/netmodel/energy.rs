use crate::error::{Error, Result};

use super::{BsConfig, Scenario};

/// RB utilisation of one BS.
pub fn bs_load(assigned_rbs: u32, max_rbs: u32) -> Result<f64> {
    if max_rbs == 0 {
        return Err(Error::Domain("max_rbs must be positive".into()));
    }
    if assigned_rbs > max_rbs {
        return Err(Error::Domain(format!(
            "{assigned_rbs} RBs assigned but only {max_rbs} exist"
        )));
    }
    Ok(f64::from(assigned_rbs) / f64::from(max_rbs))
}

/// Fully loaded operating power `xi * P_tx + psi`, with `P_tx` in watts and
/// the sector-common part `psi` scaled by the sector multiplier.
pub fn operating_power_w(cfg: &BsConfig, scn: &Scenario) -> f64 {
    scn.energy_xi * cfg.tx_power_w() + scn.energy_psi * scn.sector_power_multiplier
}

/// Power draw of one BS at load `load`:
/// `(1 - zeta) * load * P_om + zeta * P_om`.
///
/// A sleeping BS has no transmit power and no load, so it draws `zeta * psi`.
pub fn bs_power_w(cfg: &BsConfig, load: f64, scn: &Scenario) -> f64 {
    let load = if cfg.asleep { 0.0 } else { load };
    let p_om = operating_power_w(cfg, scn);
    let zeta = scn.energy_zeta;
    (1.0 - zeta) * load * p_om + zeta * p_om
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::Position;

    fn scn(zeta: f64) -> Scenario {
        let mut s = Scenario::default();
        s.energy_zeta = zeta;
        s.energy_xi = 21.45;
        s.energy_psi = 354.44;
        s
    }

    fn bs(dbm: f64) -> BsConfig {
        BsConfig::awake(0, Position::default(), dbm, 5.0)
    }

    #[test]
    fn load_examples() {
        assert_eq!(bs_load(0, 273).unwrap(), 0.0);
        assert_eq!(bs_load(273, 273).unwrap(), 1.0);
        assert_eq!(bs_load(52, 104).unwrap(), 0.5);
        assert!(bs_load(274, 273).is_err());
        assert!(bs_load(0, 0).is_err());
    }

    #[test]
    fn constant_power_model() {
        let s = scn(1.0);
        let want = 21.45 * 10f64.powf(2.3) + 354.44;
        for i in 0..=20 {
            let eta = i as f64 / 20.0;
            let p = bs_power_w(&bs(53.0), eta, &s);
            assert_eq!(p, bs_power_w(&bs(53.0), 0.0, &s));
            assert!((p - want).abs() < 1e-9);
        }
        assert!((want - 4634.277_665_608_244).abs() < 1e-9);
    }

    #[test]
    fn proportional_model_idle_is_zero() {
        assert_eq!(bs_power_w(&bs(53.0), 0.0, &scn(0.0)), 0.0);
        assert_eq!(bs_power_w(&bs(50.0), 0.0, &scn(0.0)), 0.0);
    }

    #[test]
    fn full_load_gives_operating_power() {
        let s = scn(0.5);
        let b = bs(51.0);
        assert!((bs_power_w(&b, 1.0, &s) - operating_power_w(&b, &s)).abs() < 1e-12);
    }

    #[test]
    fn sleep_leaves_residual_psi() {
        let s = scn(0.3);
        let b = BsConfig::sleeping(0, Position::default());
        assert!((bs_power_w(&b, 0.7, &s) - 0.3 * 354.44).abs() < 1e-12);
    }

    #[test]
    fn affine_nondecreasing_in_load() {
        let s = scn(0.4);
        let b = bs(52.0);
        let p0 = bs_power_w(&b, 0.0, &s);
        let p1 = bs_power_w(&b, 1.0, &s);
        let mut prev = p0;
        for i in 0..=100 {
            let eta = i as f64 / 100.0;
            let p = bs_power_w(&b, eta, &s);
            assert!(p >= prev);
            assert!((p - (p0 + eta * (p1 - p0))).abs() < 1e-9);
            prev = p;
        }
    }
}
