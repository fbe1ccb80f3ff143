use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;
use crate::netmodel::{BsConfig, Position};

pub const ACTION_SPACE_SCHEMA_VERSION: u32 = 1;

/// One BS's share of an operation combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsAssignment {
    pub id: usize,
    pub tx_power_dbm: f64,
    pub tilt_deg: f64,
    pub asleep: bool,
}

impl BsAssignment {
    pub fn awake(id: usize, tx_power_dbm: f64, tilt_deg: f64) -> Self {
        Self {
            id,
            tx_power_dbm,
            tilt_deg,
            asleep: false,
        }
    }

    pub fn sleeping(id: usize) -> Self {
        Self {
            id,
            tx_power_dbm: 0.0,
            tilt_deg: 0.0,
            asleep: true,
        }
    }

    fn key(&self) -> (u64, u64, bool) {
        (self.tx_power_dbm.to_bits(), self.tilt_deg.to_bits(), self.asleep)
    }
}

/// A per-BS assignment list covering every BS once, in id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationCombo {
    pub bs: Vec<BsAssignment>,
}

impl OperationCombo {
    /// Identity used to match combos across action spaces.
    pub fn key(&self) -> Vec<(u64, u64, bool)> {
        self.bs.iter().map(BsAssignment::key).collect()
    }

    pub fn sleep_fraction(&self) -> f64 {
        self.bs.iter().filter(|a| a.asleep).count() as f64 / self.bs.len() as f64
    }

    pub fn awake_count(&self) -> usize {
        self.bs.iter().filter(|a| !a.asleep).count()
    }

    /// Sum of transmit powers in dBm over awake BSs.
    pub fn power_dbm_sum(&self) -> f64 {
        self.bs.iter().filter(|a| !a.asleep).map(|a| a.tx_power_dbm).sum()
    }

    /// BS configurations at the given positions.
    pub fn to_configs(&self, positions: &[Position]) -> Result<Vec<BsConfig>> {
        if positions.len() != self.bs.len() {
            return Err(Error::Config(format!(
                "combo covers {} BSs, network has {}",
                self.bs.len(),
                positions.len()
            )));
        }
        Ok(self
            .bs
            .iter()
            .zip(positions)
            .map(|(a, &p)| {
                if a.asleep {
                    BsConfig::sleeping(a.id, p)
                } else {
                    BsConfig::awake(a.id, p, a.tx_power_dbm, a.tilt_deg)
                }
            })
            .collect())
    }

    /// Short text form: `power@tilt` per awake BS, `sleep` otherwise,
    /// separated by `;`.
    pub fn compact(&self) -> String {
        let parts: Vec<String> = self
            .bs
            .iter()
            .map(|a| if a.asleep { "sleep".into() } else { format!("{}@{}", a.tx_power_dbm, a.tilt_deg) })
            .collect();
        parts.join(";")
    }

    pub fn parse_compact(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad combo `{text}`; expected e.g. `53@5;sleep;50@25`"));
        let bs = text
            .split(';')
            .enumerate()
            .map(|(id, part)| {
                let part = part.trim();
                if part == "sleep" {
                    return Ok(BsAssignment::sleeping(id));
                }
                let (p, t) = part.split_once('@').ok_or_else(bad)?;
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                let t: f64 = t.trim().parse().map_err(|_| bad())?;
                Ok(BsAssignment::awake(id, p, t))
            })
            .collect::<Result<Vec<_>>>()?;
        let combo = Self { bs };
        combo.validate(combo.bs.len()).map_err(|_| bad())?;
        Ok(combo)
    }

    fn validate(&self, n_bs: usize) -> std::result::Result<(), String> {
        if self.bs.len() != n_bs {
            return Err(format!("covers {} BSs, expected {n_bs}", self.bs.len()));
        }
        for (i, a) in self.bs.iter().enumerate() {
            if a.id != i {
                return Err(format!("entry {i} carries BS id {}", a.id));
            }
            if a.asleep && (a.tx_power_dbm != 0.0 || a.tilt_deg != 0.0) {
                return Err(format!("BS {i} asleep with nonzero power or tilt"));
            }
            if !(a.tx_power_dbm.is_finite() && a.tilt_deg.is_finite()) {
                return Err(format!("BS {i} has a non-finite setting"));
            }
        }
        Ok(())
    }
}

/// Discrete settings per operation. Zero entries mean "sleep" and are
/// dropped from the awake options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Granularities {
    pub tx_powers_dbm: Vec<f64>,
    pub tilts_deg: Vec<f64>,
    pub allow_sleep: bool,
}

impl Default for Granularities {
    fn default() -> Self {
        Self {
            tx_powers_dbm: vec![53.0, 52.0, 51.0, 50.0, 0.0],
            tilts_deg: vec![5.0, 15.0, 20.0, 25.0, 0.0],
            allow_sleep: true,
        }
    }
}

impl Granularities {
    /// Per-BS options in enumeration order: power descending, tilt
    /// ascending, sleep last.
    pub fn per_bs_options(&self, id: usize) -> Result<Vec<BsAssignment>> {
        let sorted = |xs: &[f64]| -> Result<Vec<f64>> {
            let mut v: Vec<f64> = xs.iter().copied().filter(|&x| x != 0.0).collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("non-finite granularity".into()));
            }
            v.sort_by(f64::total_cmp);
            v.dedup();
            Ok(v)
        };
        let mut powers = sorted(&self.tx_powers_dbm)?;
        powers.reverse();
        let tilts = sorted(&self.tilts_deg)?;
        if powers.is_empty() || tilts.is_empty() {
            return Err(Error::Config("each operation needs at least one nonzero setting".into()));
        }
        let mut out = Vec::with_capacity(powers.len() * tilts.len() + 1);
        for &p in &powers {
            for &t in &tilts {
                out.push(BsAssignment::awake(id, p, t));
            }
        }
        if self.allow_sleep {
            out.push(BsAssignment::sleeping(id));
        }
        Ok(out)
    }
}

/// Enumerated combos plus whether they are a sample of a larger product.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub combos: Vec<OperationCombo>,
    /// Size of the full Cartesian product.
    pub full_size: u128,
    pub sampled: bool,
}

/// Number of combos the full product would hold.
pub fn action_space_size(n_bs: usize, g: &Granularities) -> Result<u128> {
    let k = g.per_bs_options(0)?.len() as u128;
    Ok((0..n_bs).fold(1u128, |acc, _| acc.saturating_mul(k)))
}

/// Cartesian product of per-BS options, BS 0 varying slowest.
///
/// Above `cap` combos the product is not materialised: a
/// [`Error::ComboExplosion`] warning is logged and `sample_size` distinct
/// combos are drawn uniformly (seeded) and returned in product order.
pub fn enumerate_action_space(
    n_bs: usize,
    g: &Granularities,
    cap: u64,
    sample_size: usize,
    seed: u64,
) -> Result<Enumeration> {
    if n_bs == 0 {
        return Err(Error::Config("no BSs to enumerate".into()));
    }
    let options: Vec<Vec<BsAssignment>> =
        (0..n_bs).map(|id| g.per_bs_options(id)).collect::<Result<_>>()?;
    let k = options[0].len();
    let full_size = action_space_size(n_bs, g)?;
    let decode = |mut index: u128| {
        let mut bs = vec![options[0][0]; n_bs];
        for id in (0..n_bs).rev() {
            bs[id] = options[id][(index % k as u128) as usize];
            index /= k as u128;
        }
        OperationCombo { bs }
    };
    if full_size <= u128::from(cap) {
        let combos = (0..full_size).map(decode).collect();
        return Ok(Enumeration {
            combos,
            full_size,
            sampled: false,
        });
    }
    let warning = Error::ComboExplosion { count: full_size, cap };
    tracing::warn!("{warning}; sampling {sample_size} combos");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    if full_size <= usize::MAX as u128 {
        for i in index::sample(&mut rng, full_size as usize, sample_size.min(full_size as usize)) {
            picked.insert(i as u128);
        }
    } else {
        use rand::Rng;
        while picked.len() < sample_size {
            picked.insert(rng.random_range(0..full_size));
        }
    }
    Ok(Enumeration {
        combos: picked.into_iter().map(decode).collect(),
        full_size,
        sampled: true,
    })
}

/// Hash of a combo list, used to check that indices refer to the list they
/// were computed against.
pub fn space_digest(combos: &[OperationCombo]) -> String {
    let mut bytes = Vec::with_capacity(combos.len() * combos.first().map_or(0, |c| c.bs.len()) * 17);
    for c in combos {
        for a in &c.bs {
            bytes.extend_from_slice(&a.tx_power_dbm.to_le_bytes());
            bytes.extend_from_slice(&a.tilt_deg.to_le_bytes());
            bytes.push(u8::from(a.asleep));
        }
        bytes.push(b';');
    }
    files::sha256_hex(&bytes)
}

/// On-disk action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpaceFile {
    pub schema_version: u32,
    /// Logical generation time, `episode:step`, so identical runs produce
    /// identical files.
    pub generated_at: String,
    /// Digest of the conflict report that produced this space, empty for a
    /// full enumeration.
    pub report_digest: String,
    pub combos: Vec<OperationCombo>,
}

pub fn export_action_space(
    combos: &[OperationCombo],
    path: &Path,
    generated_at: &str,
    report_digest: &str,
) -> Result<()> {
    if combos.is_empty() {
        return Err(Error::EmptyActionSpace);
    }
    let file = ActionSpaceFile {
        schema_version: ACTION_SPACE_SCHEMA_VERSION,
        generated_at: generated_at.to_owned(),
        report_digest: report_digest.to_owned(),
        combos: combos.to_vec(),
    };
    let text = serde_json::to_vec(&file).map_err(|e| Error::Malformed {
        path: path.to_owned(),
        detail: e.to_string(),
    })?;
    files::write_atomic(path, &text)
}

pub fn import_action_space_file(path: &Path) -> Result<ActionSpaceFile> {
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_action_space(&text, path)
}

pub fn import_action_space(path: &Path) -> Result<Vec<OperationCombo>> {
    Ok(import_action_space_file(path)?.combos)
}

pub fn parse_action_space(text: &[u8], path: &Path) -> Result<ActionSpaceFile> {
    let malformed = |detail: String| Error::Malformed {
        path: path.to_owned(),
        detail,
    };
    let value: serde_json::Value = serde_json::from_slice(text)
        .map_err(|e| malformed(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| malformed("missing integer field `schema_version`".into()))?;
    if found != u64::from(ACTION_SPACE_SCHEMA_VERSION) {
        return Err(Error::Schema {
            path: path.to_owned(),
            found: found as u32,
            expected: ACTION_SPACE_SCHEMA_VERSION,
        });
    }
    let file: ActionSpaceFile =
        serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
    if file.combos.is_empty() {
        return Err(malformed("`combos` is empty".into()));
    }
    let n_bs = file.combos[0].bs.len();
    for (i, c) in file.combos.iter().enumerate() {
        c.validate(n_bs)
            .map_err(|d| malformed(format!("combos[{i}]: {d}")))?;
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(powers: &[f64], tilts: &[f64]) -> Granularities {
        Granularities {
            tx_powers_dbm: powers.to_vec(),
            tilts_deg: tilts.to_vec(),
            allow_sleep: true,
        }
    }

    #[test]
    fn one_bs_two_combos() {
        let e = enumerate_action_space(1, &g(&[53.0, 0.0], &[5.0, 0.0]), 1_000_000, 0, 0).unwrap();
        assert_eq!(
            e.combos,
            vec![
                OperationCombo { bs: vec![BsAssignment::awake(0, 53.0, 5.0)] },
                OperationCombo { bs: vec![BsAssignment::sleeping(0)] },
            ]
        );
    }

    #[test]
    fn product_rule() {
        for n in 1..=3 {
            let e = enumerate_action_space(n, &g(&[53.0, 50.0], &[5.0]), 1_000_000, 0, 0).unwrap();
            assert_eq!(e.combos.len(), 3usize.pow(n as u32));
        }
    }

    #[test]
    fn default_granularities_four_bs() {
        let e = enumerate_action_space(4, &Granularities::default(), 1_000_000, 0, 0).unwrap();
        assert_eq!(e.combos.len(), 83_521);
        assert!(!e.sampled);
        // ordering: power descending, then tilt ascending, sleep last
        assert_eq!(e.combos[0].bs[3], BsAssignment::awake(3, 53.0, 5.0));
        assert_eq!(e.combos[1].bs[3], BsAssignment::awake(3, 53.0, 15.0));
        assert_eq!(e.combos[4].bs[3], BsAssignment::awake(3, 52.0, 5.0));
        assert_eq!(e.combos[16].bs[3], BsAssignment::sleeping(3));
        assert!(e.combos.last().unwrap().bs.iter().all(|a| a.asleep));
    }

    #[test]
    fn explosion_falls_back_to_sorted_sample() {
        let e = enumerate_action_space(10, &Granularities::default(), 1_000_000, 500, 3).unwrap();
        assert!(e.sampled);
        assert_eq!(e.full_size, 17u128.pow(10));
        assert_eq!(e.combos.len(), 500);
        let again = enumerate_action_space(10, &Granularities::default(), 1_000_000, 500, 3).unwrap();
        assert_eq!(e.combos, again.combos);
        let keys: BTreeSet<_> = e.combos.iter().map(|c| c.key()).collect();
        assert_eq!(keys.len(), 500);
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let e = enumerate_action_space(4, &Granularities::default(), 1_000_000, 0, 0).unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        export_action_space(&e.combos, &a, "0:0", "").unwrap();
        let back = import_action_space(&a).unwrap();
        assert_eq!(back, e.combos);
        export_action_space(&back, &b, "0:0", "").unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        assert!(matches!(
            export_action_space(&[], &p, "0:0", ""),
            Err(Error::EmptyActionSpace)
        ));
        std::fs::write(&p, r#"{"schema_version": 9, "generated_at": "", "report_digest": "", "combos": []}"#).unwrap();
        assert!(matches!(import_action_space(&p), Err(Error::Schema { found: 9, .. })));
        std::fs::write(&p, "{\n \"schema_version\": 1,\n oops }").unwrap();
        let err = import_action_space(&p).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        std::fs::write(
            &p,
            r#"{"schema_version": 1, "generated_at": "", "report_digest": "",
               "combos": [{"bs": [{"id": 0, "tx_power_dbm": 53, "tilt_deg": 5, "asleep": true}]}]}"#,
        )
        .unwrap();
        assert!(import_action_space(&p).unwrap_err().to_string().contains("combos[0]"));
    }

    #[test]
    fn digest_tracks_content() {
        let e = enumerate_action_space(2, &Granularities::default(), 1_000_000, 0, 0).unwrap();
        let d = space_digest(&e.combos);
        assert_eq!(d, space_digest(&e.combos.clone()));
        assert_ne!(d, space_digest(&e.combos[1..]));
    }

    #[test]
    fn compact_round_trip() {
        let e = enumerate_action_space(3, &Granularities::default(), 1_000_000, 0, 0).unwrap();
        for c in e.combos.iter().step_by(97) {
            assert_eq!(&OperationCombo::parse_compact(&c.compact()).unwrap(), c);
        }
        assert_eq!(e.combos[1].compact(), "53@5;53@5;53@15");
        assert!(OperationCombo::parse_compact("53;sleep").is_err());
    }

    proptest! {
        #[test]
        fn export_import_identity(picks in prop::collection::vec(0usize..289, 1..40)) {
            let e = enumerate_action_space(2, &Granularities::default(), 1_000_000, 0, 0).unwrap();
            let combos: Vec<_> = picks.iter().map(|&i| e.combos[i].clone()).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.json");
            export_action_space(&combos, &p, "1:2", "abc").unwrap();
            let file = import_action_space_file(&p).unwrap();
            prop_assert_eq!(file.combos, combos);
            prop_assert_eq!(file.generated_at, "1:2");
        }
    }
}
