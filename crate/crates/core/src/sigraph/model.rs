use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leaf softgoals: the three network objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lsg {
    Energy,
    Throughput,
    Delay,
}

impl Lsg {
    pub const ALL: [Lsg; 3] = [Lsg::Energy, Lsg::Throughput, Lsg::Delay];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether a larger value of the objective is better.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Lsg::Throughput)
    }

    /// Maps a raw value so that larger always means more satisfied.
    pub fn orient(self, x: f64) -> f64 {
        if self.higher_is_better() {
            x
        } else {
            -x
        }
    }
}

/// Energy-saving operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    TxPower,
    Tilt,
    Sleep,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::TxPower, Op::Tilt, Op::Sleep];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Desired and measured values per objective, indexed by [`Lsg::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTargets {
    pub desired: [f64; 3],
    pub actual: [f64; 3],
}

impl ObjectiveTargets {
    pub fn new(desired: [f64; 3], actual: [f64; 3]) -> Result<Self> {
        if desired.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!(
                "desired objective values must be positive, got {desired:?}"
            )));
        }
        Ok(Self { desired, actual })
    }

    /// Relative shortfall, signed so that meeting the target is positive:
    /// `(desired - actual) / desired` for energy and delay, the negation for
    /// throughput.
    pub fn error(&self, lsg: Lsg) -> f64 {
        let i = lsg.index();
        let er = (self.desired[i] - self.actual[i]) / self.desired[i];
        if lsg.higher_is_better() {
            -er
        } else {
            er
        }
    }
}

/// SG -> LSG weight from a window of samples: the mean's position in the
/// sample range mapped to [-1, 1], 0 when the range is empty.
pub fn update_sg_lsg_weight(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(0.0);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok((2.0 * (mean - min) / (max - min) - 1.0).clamp(-1.0, 1.0))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// LSG -> OP weight: `clip(sigmoid(er), alpha_min, alpha_max)`. With the
/// default range [-1, 1] the clip never binds.
pub fn lsg_op_weight(er: f64, alpha_min: f64, alpha_max: f64) -> f64 {
    sigmoid(er).clamp(alpha_min, alpha_max)
}

pub fn update_lsg_op_weight(targets: &ObjectiveTargets, lsg: Lsg, alpha_min: f64, alpha_max: f64) -> f64 {
    lsg_op_weight(targets.error(lsg), alpha_min, alpha_max)
}

/// Where `recent` sits in the range of `series`, oriented so 1 is the best
/// value seen; 0.5 when the series is flat.
pub fn lsg_satisfaction(series: &[f64], recent: f64, lsg: Lsg) -> f64 {
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return 0.5;
    }
    let x = ((recent - min) / (max - min)).clamp(0.0, 1.0);
    if lsg.higher_is_better() {
        x
    } else {
        1.0 - x
    }
}

/// SG -> LSG -> OP graph with both weight layers and node scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigModel {
    pub sg_score: f64,
    pub sg_threshold: f64,
    /// Indexed by [`Lsg::index`].
    pub lsg_scores: [f64; 3],
    /// Indexed by [`Op::index`].
    pub op_scores: [f64; 3],
    pub w_sg_lsg: [f64; 3],
    /// `w_lsg_op[lsg][op]`.
    pub w_lsg_op: [[f64; 3]; 3],
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl SigModel {
    pub fn new(sg_threshold: f64) -> Self {
        Self {
            sg_score: 0.0,
            sg_threshold,
            lsg_scores: [0.0; 3],
            op_scores: [0.0; 3],
            w_sg_lsg: [0.0; 3],
            w_lsg_op: [[0.5; 3]; 3],
            alpha_min: -1.0,
            alpha_max: 1.0,
        }
    }

    /// Conflict identification runs when the intent is not satisfied.
    pub fn needs_conflict_check(&self) -> bool {
        self.sg_score <= self.sg_threshold
    }
}

fn clamp01(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Recomputes all scores from per-LSG satisfaction in [0, 1].
///
/// OP scores are `sum_lsg w * s / sum_lsg |w|`. The SG score is a weighted
/// mean of LSG scores with the SG -> LSG weights rescaled to [0, 1]; if all
/// rescaled weights are 0 it falls back to the plain mean.
pub fn propagate_scores(model: &mut SigModel, satisfaction: [f64; 3]) {
    for (score, s) in model.lsg_scores.iter_mut().zip(satisfaction) {
        *score = clamp01(s);
    }
    for op in Op::ALL {
        let (mut num, mut den) = (0.0, 0.0);
        for lsg in Lsg::ALL {
            let w = model.w_lsg_op[lsg.index()][op.index()];
            num += w * model.lsg_scores[lsg.index()];
            den += w.abs();
        }
        model.op_scores[op.index()] = if den > 0.0 { clamp01(num / den) } else { 0.0 };
    }
    let rescaled = model.w_sg_lsg.map(|w| (w.clamp(-1.0, 1.0) + 1.0) / 2.0);
    let den: f64 = rescaled.iter().sum();
    model.sg_score = if den > 0.0 {
        clamp01(rescaled.iter().zip(&model.lsg_scores).map(|(w, s)| w * s).sum::<f64>() / den)
    } else {
        clamp01(model.lsg_scores.iter().sum::<f64>() / 3.0)
    };
}
