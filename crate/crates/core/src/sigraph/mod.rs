//! Design-time decomposition model.
//!
//! A softgoal interdependency graph links the energy-saving intent (SG) to
//! the three network objectives (LSGs) and on to the energy-saving
//! operations (OPs). Measured step metrics reweight the graph, the
//! propagated SG score gates conflict identification (Pearson between
//! objectives, Tukey's HSD between operation settings), and triggered
//! conflict rules prune the agent's action space.

mod actions;
mod conflict;
mod model;
mod rules;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use actions::{
    action_space_size, enumerate_action_space, export_action_space, import_action_space,
    import_action_space_file, parse_action_space, space_digest, ActionSpaceFile, BsAssignment,
    Enumeration, Granularities, OperationCombo, ACTION_SPACE_SCHEMA_VERSION,
};
pub use conflict::{
    identify_conflicts, objective_conflicts, op_setting, operation_conflicts, ConflictReport,
    ObjectivePair, OperationPair,
};
pub use model::{
    lsg_op_weight, lsg_satisfaction, propagate_scores, sigmoid, update_lsg_op_weight,
    update_sg_lsg_weight, Lsg, ObjectiveTargets, Op, SigModel,
};
pub use rules::{
    default_rules, filter_action_space, load_rules, parse_rules, ConflictRule, Exclusion,
    FilterOutcome, ForbiddenAssignment, RuleTrigger, DEFAULT_RULES, RULES_SCHEMA_VERSION,
};
pub use stats::{
    classify_conflict, pearson, studentized_range_q, tukey_hsd, tukey_hsd_family, Alpha,
    ConflictLevel, ConflictThresholds, HsdResult,
};

/// One decision step as seen by the design time: step averages, the reward
/// it earned, and the combo that was in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSample {
    pub energy_w: f64,
    pub throughput_bps: f64,
    pub delay_ttis: f64,
    pub reward: f64,
    pub combo: OperationCombo,
}

impl DesignSample {
    pub fn value(&self, lsg: Lsg) -> f64 {
        match lsg {
            Lsg::Energy => self.energy_w,
            Lsg::Throughput => self.throughput_bps,
            Lsg::Delay => self.delay_ttis,
        }
    }
}

/// Whether `op` departs from the baseline setting (highest power, lowest
/// tilt, awake) at any BS of the combo.
pub fn op_engaged(combo: &OperationCombo, op: Op, g: &Granularities) -> bool {
    let max_power = g.tx_powers_dbm.iter().copied().filter(|&p| p != 0.0).fold(f64::NEG_INFINITY, f64::max);
    let min_tilt = g.tilts_deg.iter().copied().filter(|&t| t != 0.0).fold(f64::INFINITY, f64::min);
    combo.bs.iter().any(|a| match op {
        Op::Sleep => a.asleep,
        Op::TxPower => !a.asleep && a.tx_power_dbm < max_power,
        Op::Tilt => !a.asleep && a.tilt_deg > min_tilt,
    })
}

/// Updates both weight layers from a window of design samples and
/// re-propagates scores.
///
/// The SG -> LSG weights come from each objective's series. For each
/// (LSG, OP) pair the measured value is the objective's mean over steps
/// where the OP was engaged (all steps if it never was), compared with
/// `desired`. LSG satisfaction is the mean of the last `recent` samples
/// placed in the window's range.
pub fn update_model(
    model: &mut SigModel,
    samples: &[DesignSample],
    desired: [f64; 3],
    granularities: &Granularities,
    recent: usize,
) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut satisfaction = [0.0; 3];
    let recent = recent.clamp(1, samples.len());
    for lsg in Lsg::ALL {
        let series: Vec<f64> = samples.iter().map(|s| s.value(lsg)).collect();
        model.w_sg_lsg[lsg.index()] = update_sg_lsg_weight(&series)?;
        let tail = &series[series.len() - recent..];
        let recent_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        satisfaction[lsg.index()] = lsg_satisfaction(&series, recent_mean, lsg);
    }
    for op in Op::ALL {
        let engaged: Vec<&DesignSample> =
            samples.iter().filter(|s| op_engaged(&s.combo, op, granularities)).collect();
        let pool: Vec<&DesignSample> = if engaged.is_empty() { samples.iter().collect() } else { engaged };
        let actual = Lsg::ALL.map(|lsg| pool.iter().map(|s| s.value(lsg)).sum::<f64>() / pool.len() as f64);
        let targets = ObjectiveTargets::new(desired, actual)?;
        for lsg in Lsg::ALL {
            model.w_lsg_op[lsg.index()][op.index()] =
                update_lsg_op_weight(&targets, lsg, model.alpha_min, model.alpha_max);
        }
    }
    propagate_scores(model, satisfaction);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(e: f64, combo: OperationCombo) -> DesignSample {
        DesignSample {
            energy_w: e,
            throughput_bps: 1e7,
            delay_ttis: 1.0,
            reward: 0.0,
            combo,
        }
    }

    #[test]
    fn engagement_relative_to_baseline() {
        let g = Granularities::default();
        let base = OperationCombo { bs: vec![BsAssignment::awake(0, 53.0, 5.0)] };
        assert!(Op::ALL.iter().all(|&op| !op_engaged(&base, op, &g)));
        let low = OperationCombo { bs: vec![BsAssignment::awake(0, 50.0, 25.0)] };
        assert!(op_engaged(&low, Op::TxPower, &g) && op_engaged(&low, Op::Tilt, &g));
        let off = OperationCombo { bs: vec![BsAssignment::sleeping(0)] };
        assert!(op_engaged(&off, Op::Sleep, &g) && !op_engaged(&off, Op::TxPower, &g));
    }

    #[test]
    fn sleep_meeting_energy_target_gets_high_weight() {
        let g = Granularities::default();
        let on = OperationCombo { bs: vec![BsAssignment::awake(0, 53.0, 5.0)] };
        let off = OperationCombo { bs: vec![BsAssignment::sleeping(0)] };
        let samples = vec![sample(4000.0, on.clone()), sample(200.0, off), sample(4000.0, on)];
        let mut m = SigModel::new(0.6);
        update_model(&mut m, &samples, [1000.0, 1e7, 2.0], &g, 1).unwrap();
        let sleep_w = m.w_lsg_op[Lsg::Energy.index()][Op::Sleep.index()];
        let power_w = m.w_lsg_op[Lsg::Energy.index()][Op::TxPower.index()];
        assert!(sleep_w > 0.5 && power_w < 0.5);
        // mean 2733 sits two thirds up the 200..4000 range
        assert!((m.w_sg_lsg[Lsg::Energy.index()] - (2.0 * (8200.0 / 3.0 - 200.0) / 3800.0 - 1.0)).abs() < 1e-12);
        // the last sample is the worst energy seen
        assert_eq!(m.lsg_scores[Lsg::Energy.index()], 0.0);
    }
}
