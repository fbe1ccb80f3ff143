use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

use super::{ConflictLevel, ConflictReport, Lsg, Op, OperationCombo};

pub const RULES_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_RULES: &str = include_str!("../../../../configs/conflict_rules.toml");

/// When a rule applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleTrigger {
    /// The objective pair reaches at least `min_level`.
    Objective { a: Lsg, b: Lsg, min_level: ConflictLevel },
    /// Some operation pair tested as conflicting.
    Operation,
    Always,
}

/// A single forbidden setting; unset fields match anything.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForbiddenAssignment {
    pub bs: Option<usize>,
    pub tx_power_dbm: Option<f64>,
    pub tilt_deg: Option<f64>,
    pub asleep: Option<bool>,
}

impl ForbiddenAssignment {
    fn matches(&self, combo: &OperationCombo) -> bool {
        combo.bs.iter().any(|a| {
            self.bs.is_none_or(|b| b == a.id)
                && self.asleep.is_none_or(|s| s == a.asleep)
                && self.tx_power_dbm.is_none_or(|p| !a.asleep && p == a.tx_power_dbm)
                && self.tilt_deg.is_none_or(|t| !a.asleep && t == a.tilt_deg)
        })
    }
}

/// What a triggered rule removes. All set bounds must hold for a combo to
/// survive.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exclusion {
    pub max_sleep_fraction: Option<f64>,
    pub min_awake: Option<usize>,
    /// Lower bound on the sum of awake BSs' transmit powers in dBm.
    pub min_power_dbm_sum: Option<f64>,
    pub forbidden: Vec<ForbiddenAssignment>,
    /// Forbid, at each BS, the lower-reward setting of every conflicting
    /// operation pair in the report. Being awake is never forbidden this
    /// way, only energy-saving settings are.
    pub forbid_conflicting_settings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictRule {
    pub name: String,
    pub trigger: RuleTrigger,
    pub exclusion: Exclusion,
}

impl ConflictRule {
    pub fn triggered(&self, report: &ConflictReport) -> bool {
        match &self.trigger {
            RuleTrigger::Objective { a, b, min_level } => {
                *min_level > ConflictLevel::None && report.level(*a, *b) >= *min_level
            }
            RuleTrigger::Operation => report.has_operation_conflict(),
            RuleTrigger::Always => true,
        }
    }

    /// The rule's predicate, with report-derived settings resolved.
    fn compile(&self, report: &ConflictReport) -> Compiled {
        let mut forbidden = self.exclusion.forbidden.clone();
        if self.exclusion.forbid_conflicting_settings {
            for p in report.operation_pairs.iter().filter(|p| p.conflicting) {
                let worse = p.worse_setting();
                let f = match p.op {
                    Op::Sleep if worse == 1.0 => ForbiddenAssignment {
                        bs: Some(p.bs),
                        asleep: Some(true),
                        ..Default::default()
                    },
                    Op::Sleep => continue,
                    Op::TxPower => ForbiddenAssignment {
                        bs: Some(p.bs),
                        tx_power_dbm: Some(worse),
                        ..Default::default()
                    },
                    Op::Tilt => ForbiddenAssignment {
                        bs: Some(p.bs),
                        tilt_deg: Some(worse),
                        ..Default::default()
                    },
                };
                if !forbidden.contains(&f) {
                    forbidden.push(f);
                }
            }
        }
        Compiled {
            exclusion: Exclusion {
                forbidden,
                forbid_conflicting_settings: false,
                ..self.exclusion.clone()
            },
        }
    }
}

struct Compiled {
    exclusion: Exclusion,
}

impl Compiled {
    fn keeps(&self, c: &OperationCombo) -> bool {
        let e = &self.exclusion;
        e.max_sleep_fraction.is_none_or(|m| c.sleep_fraction() <= m + 1e-12)
            && e.min_awake.is_none_or(|m| c.awake_count() >= m)
            && e.min_power_dbm_sum.is_none_or(|m| c.power_dbm_sum() >= m)
            && !e.forbidden.iter().any(|f| f.matches(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    #[serde(default)]
    rule: Vec<ConflictRule>,
}

pub fn parse_rules(text: &str, origin: &Path) -> Result<Vec<ConflictRule>> {
    let file: RulesFile = files::parse_versioned_toml(text, origin, RULES_SCHEMA_VERSION)?;
    for r in &file.rule {
        if let Some(m) = r.exclusion.max_sleep_fraction {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::Config(format!(
                    "rule `{}`: max_sleep_fraction {m} outside [0, 1]",
                    r.name
                )));
            }
        }
    }
    Ok(file.rule)
}

pub fn load_rules(path: &Path) -> Result<Vec<ConflictRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rules(&text, path)
}

pub fn default_rules() -> Vec<ConflictRule> {
    parse_rules(DEFAULT_RULES, Path::new("<default rules>")).expect("bundled rules are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub combos: Vec<OperationCombo>,
    pub triggered: Vec<String>,
    /// Rules dropped, in order, to keep the result nonempty.
    pub relaxed: Vec<String>,
}

/// Removes combos rejected by any triggered rule, keeping input order.
///
/// If the triggered rules together would remove everything, the rule that
/// removes the fewest (but at least one) combos on its own is relaxed
/// (dropped) and filtering is retried, until something survives.
pub fn filter_action_space(
    combos: &[OperationCombo],
    report: &ConflictReport,
    rules: &[ConflictRule],
) -> FilterOutcome {
    let mut active: Vec<(&ConflictRule, Compiled)> = rules
        .iter()
        .filter(|r| r.triggered(report))
        .map(|r| (r, r.compile(report)))
        .collect();
    let triggered = active.iter().map(|(r, _)| r.name.clone()).collect();
    let mut relaxed = Vec::new();
    loop {
        let kept: Vec<OperationCombo> = combos
            .iter()
            .filter(|c| active.iter().all(|(_, p)| p.keeps(c)))
            .cloned()
            .collect();
        if !kept.is_empty() || active.is_empty() || combos.is_empty() {
            return FilterOutcome {
                combos: kept,
                triggered,
                relaxed,
            };
        }
        // a rule that removes nothing alone cannot be why nothing survives
        let weakest = active
            .iter()
            .enumerate()
            .map(|(i, (_, p))| (combos.iter().filter(|c| !p.keeps(c)).count(), i))
            .filter(|&(removed, _)| removed > 0)
            .min()
            .map(|(_, i)| i)
            .expect("an empty result needs a rule that removes something");
        let (rule, _) = active.remove(weakest);
        tracing::warn!(rule = %rule.name, "relaxing conflict rule to keep the action space nonempty");
        relaxed.push(rule.name.clone());
    }
}
