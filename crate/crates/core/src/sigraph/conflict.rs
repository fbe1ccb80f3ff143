use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

use super::{
    classify_conflict, pearson, tukey_hsd_family, Alpha, BsAssignment, ConflictLevel,
    ConflictThresholds, DesignSample, Lsg, Op,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub a: Lsg,
    pub b: Lsg,
    /// Correlation of the satisfaction-oriented series; `None` when either
    /// series is flat (no evidence either way).
    pub rho: Option<f64>,
    pub level: ConflictLevel,
}

/// Tukey comparison of two settings of one operation at one BS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationPair {
    pub bs: usize,
    pub op: Op,
    /// Setting values: dBm for power, degrees for tilt, 1/0 for asleep/awake.
    pub setting_a: f64,
    pub setting_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub m_diff: f64,
    pub q: f64,
    pub q_th: f64,
    pub conflicting: bool,
}

impl OperationPair {
    /// The setting with the lower mean reward.
    pub fn worse_setting(&self) -> f64 {
        if self.mean_a < self.mean_b {
            self.setting_a
        } else {
            self.setting_b
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub objective_pairs: Vec<ObjectivePair>,
    pub operation_pairs: Vec<OperationPair>,
}

impl ConflictReport {
    pub fn level(&self, a: Lsg, b: Lsg) -> ConflictLevel {
        self.objective_pairs
            .iter()
            .find(|p| (p.a, p.b) == (a, b) || (p.a, p.b) == (b, a))
            .map_or(ConflictLevel::None, |p| p.level)
    }

    pub fn has_operation_conflict(&self) -> bool {
        self.operation_pairs.iter().any(|p| p.conflicting)
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("report serializes");
        files::sha256_hex(&bytes)
    }
}

/// The value of `op` in an assignment, or `None` when the op does not apply
/// (power and tilt of a sleeping BS).
pub fn op_setting(a: &BsAssignment, op: Op) -> Option<f64> {
    match op {
        Op::Sleep => Some(if a.asleep { 1.0 } else { 0.0 }),
        _ if a.asleep => None,
        Op::TxPower => Some(a.tx_power_dbm),
        Op::Tilt => Some(a.tilt_deg),
    }
}

/// Objective-level conflicts between every LSG pair. A negative correlation
/// of the satisfaction-oriented series means improving one objective came
/// with the other getting worse.
pub fn objective_conflicts(samples: &[DesignSample], thresholds: &ConflictThresholds) -> Vec<ObjectivePair> {
    let series = |lsg: Lsg| -> Vec<f64> { samples.iter().map(|s| lsg.orient(s.value(lsg))).collect() };
    let pairs = [
        (Lsg::Energy, Lsg::Throughput),
        (Lsg::Energy, Lsg::Delay),
        (Lsg::Throughput, Lsg::Delay),
    ];
    pairs
        .into_iter()
        .map(|(a, b)| {
            let rho = pearson(&series(a), &series(b)).ok();
            ObjectivePair {
                a,
                b,
                rho,
                level: rho.map_or(ConflictLevel::None, |r| classify_conflict(r, thresholds)),
            }
        })
        .collect()
}

/// Operation-level conflicts: at each BS and for each operation, rewards
/// are grouped by the setting in force and all settings compared with
/// Tukey's HSD. Settings seen fewer than twice are left out.
pub fn operation_conflicts(samples: &[DesignSample], alpha: Alpha) -> Result<Vec<OperationPair>> {
    let n_bs = samples.first().map_or(0, |s| s.combo.bs.len());
    let mut out = Vec::new();
    for bs in 0..n_bs {
        for op in Op::ALL {
            let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
            for s in samples {
                if let Some(v) = op_setting(&s.combo.bs[bs], op) {
                    // order keys by value; settings are finite
                    let key = if v.is_sign_negative() { !v.to_bits() } else { v.to_bits() | 1 << 63 };
                    groups.entry(key).or_insert((v, Vec::new())).1.push(s.reward);
                }
            }
            let groups: Vec<(f64, Vec<f64>)> = groups.into_values().filter(|(_, g)| g.len() >= 2).collect();
            if groups.len() < 2 || groups.len() > 10 {
                continue;
            }
            let total: usize = groups.iter().map(|(_, g)| g.len()).sum();
            if total <= groups.len() {
                continue;
            }
            let refs: Vec<&[f64]> = groups.iter().map(|(_, g)| g.as_slice()).collect();
            let results = match tukey_hsd_family(&refs, alpha) {
                Ok(r) => r,
                Err(Error::GroupTooSmall { .. }) => continue,
                Err(e) => return Err(e),
            };
            for (i, j, r) in results {
                out.push(OperationPair {
                    bs,
                    op,
                    setting_a: groups[i].0,
                    setting_b: groups[j].0,
                    n_a: groups[i].1.len(),
                    n_b: groups[j].1.len(),
                    mean_a: r.mean_a,
                    mean_b: r.mean_b,
                    m_diff: r.m_diff,
                    q: r.q,
                    q_th: r.q_th,
                    // a pooled variance of 0 makes any difference significant
                    conflicting: r.conflicting && r.m_diff.is_finite(),
                });
            }
        }
    }
    Ok(out)
}

pub fn identify_conflicts(
    samples: &[DesignSample],
    thresholds: &ConflictThresholds,
    alpha: Alpha,
) -> Result<ConflictReport> {
    Ok(ConflictReport {
        objective_pairs: objective_conflicts(samples, thresholds),
        operation_pairs: operation_conflicts(samples, alpha)?,
    })
}
