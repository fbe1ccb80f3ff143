use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

pub const CQI_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_CQI_TABLE: &str = include_str!("../../../../configs/cqi_table.toml");

/// One CQI/MCS row. `rb_rate_bits_per_tti` is the coded bit budget of a
/// single RB in one TTI; the information it carries is that budget times
/// the code rate actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqiTableEntry {
    pub cqi_index: u32,
    pub sinr_threshold_db: f64,
    pub max_code_rate: f64,
    pub rb_rate_bits_per_tti: f64,
}

impl CqiTableEntry {
    /// Information bits one RB carries at the entry's maximum code rate.
    pub fn max_info_bits_per_rb(&self) -> f64 {
        self.rb_rate_bits_per_tti * self.max_code_rate
    }
}

/// Validated CQI table, sorted by threshold with indices 1..=K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CqiTable {
    entries: Vec<CqiTableEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CqiFile {
    entry: Vec<CqiTableEntry>,
}

impl Default for CqiTable {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CQI_TABLE, Path::new("<default cqi table>"))
            .expect("bundled CQI table is valid")
    }
}

impl CqiTable {
    pub fn new(entries: Vec<CqiTableEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("CQI table is empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.cqi_index as usize != i + 1 {
                return Err(Error::Config(format!(
                    "CQI entry {} carries index {}, expected {}",
                    i,
                    e.cqi_index,
                    i + 1
                )));
            }
            if !(e.max_code_rate > 0.0 && e.max_code_rate <= 1.0) {
                return Err(Error::Config(format!(
                    "CQI {}: max_code_rate {} outside (0, 1]",
                    e.cqi_index, e.max_code_rate
                )));
            }
            if !(e.rb_rate_bits_per_tti > 0.0) {
                return Err(Error::Config(format!(
                    "CQI {}: rb_rate must be positive",
                    e.cqi_index
                )));
            }
        }
        for w in entries.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.sinr_threshold_db <= a.sinr_threshold_db
                || b.max_code_rate < a.max_code_rate
                || b.rb_rate_bits_per_tti < a.rb_rate_bits_per_tti
            {
                return Err(Error::Config(format!(
                    "CQI {} -> {}: thresholds must increase strictly, code and RB rates must not decrease",
                    a.cqi_index, b.cqi_index
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: CqiFile = files::parse_versioned_toml(text, origin, CQI_SCHEMA_VERSION)?;
        Self::new(file.entry)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn entries(&self) -> &[CqiTableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry by 1-based CQI index.
    pub fn entry(&self, cqi_index: u32) -> &CqiTableEntry {
        &self.entries[cqi_index as usize - 1]
    }
}

/// Highest entry whose threshold does not exceed `sinr_db`; the lowest entry
/// when the SINR is below every threshold. A SINR exactly on a threshold
/// selects that entry.
pub fn sinr_to_cqi(sinr_db: f64, table: &CqiTable) -> &CqiTableEntry {
    let entries = table.entries();
    let above = entries.partition_point(|e| e.sinr_threshold_db <= sinr_db);
    &entries[above.saturating_sub(1)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_is_fifteen_rows_two_db_apart() {
        let t = CqiTable::default();
        assert_eq!(t.len(), 15);
        for (i, e) in t.entries().iter().enumerate() {
            assert_eq!(e.sinr_threshold_db, -6.0 + 2.0 * i as f64);
        }
    }

    #[test]
    fn clamps_and_boundaries() {
        let t = CqiTable::default();
        assert_eq!(sinr_to_cqi(-40.0, &t).cqi_index, 1);
        assert_eq!(sinr_to_cqi(f64::NEG_INFINITY, &t).cqi_index, 1);
        assert_eq!(sinr_to_cqi(90.0, &t).cqi_index, 15);
        // exactly on entry 4's threshold (0 dB)
        assert_eq!(sinr_to_cqi(0.0, &t).cqi_index, 4);
        assert_eq!(sinr_to_cqi(-0.000_001, &t).cqi_index, 3);
    }

    #[test]
    fn rejects_unsorted_tables() {
        let mut rows = CqiTable::default().entries().to_vec();
        rows.swap(3, 4);
        assert!(CqiTable::new(rows).is_err());
        assert!(CqiTable::new(vec![]).is_err());
    }

    #[test]
    fn rejects_unknown_schema_version() {
        let text = DEFAULT_CQI_TABLE.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            CqiTable::from_toml_str(&text, Path::new("t")),
            Err(Error::Schema { found: 2, .. })
        ));
    }
}
