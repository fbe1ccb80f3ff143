//! Couples the run time (simulator and agent) with the design time (SIG
//! model, conflict identification and action-space filtering).

mod compare;
mod design;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, RewardWeights};
use crate::error::{Error, Result};
use crate::files;
use crate::netmodel::{CqiTable, Scenario};
use crate::sigraph::{default_rules, load_rules, Alpha, ConflictRule, ConflictThresholds, Granularities};
use crate::simkernel::ConstraintBounds;

pub use compare::{compare_schemes, sign_test_p, Comparison, ModeSummary, PairwiseWins, COMPARISON_CSV_HEADER};
pub use design::{design_time_cycle, read_training_log, swap_action_space, CycleOutcome, DesignContext};
pub use run::{run, CycleSummary, RunReport, RunState, TRAINING_LOG_HEADER};

pub const RUN_CONFIG_SCHEMA_VERSION: u32 = 1;

/// The three schemes compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Weight updates, scoring, conflict identification and filtering.
    Assisted,
    /// Weight updates and scoring only; the action space never shrinks.
    AssistedNoConflict,
    /// Plain DQN over the full action space.
    Unassisted,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Assisted, Mode::AssistedNoConflict, Mode::Unassisted];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Assisted => "assisted",
            Mode::AssistedNoConflict => "assisted-no-conflict",
            Mode::Unassisted => "unassisted",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}` (expected assisted, assisted-no-conflict or unassisted)")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Target values the LSG -> OP weights measure shortfall against. Unset
/// fields fall back to the constraint bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesiredTargets {
    pub energy_w: Option<f64>,
    pub throughput_bps: Option<f64>,
    pub delay_ttis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionSpaceConfig {
    pub granularities: Granularities,
    /// Largest product enumerated in full.
    pub cap: u64,
    /// Combos sampled when the product exceeds `cap`.
    pub sample_size: usize,
}

impl Default for ActionSpaceConfig {
    fn default() -> Self {
        Self {
            granularities: Granularities::default(),
            cap: 1_000_000,
            sample_size: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConflictConfig {
    pub thresholds: ConflictThresholds,
    pub alpha: Alpha,
    /// Rule file; the bundled rules when unset.
    pub rules: Option<PathBuf>,
}

impl Default for ConflictConfig {
    fn default() -> Self {
        Self {
            thresholds: ConflictThresholds::default(),
            alpha: Alpha::P05,
            rules: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub cqi_table: PathBuf,
    pub mode: Mode,
    pub episodes: u32,
    pub steps_per_episode: u32,
    pub ttis_per_step: u32,
    /// Per-TTI metric window of the simulator.
    pub tti_window_len: usize,
    /// Step averages the reward and state are normalised against.
    pub reward_window_steps: usize,
    /// Steps between design-time cycles.
    pub design_cadence_steps: u32,
    /// Most recent steps handed to each design-time cycle.
    pub design_window_steps: usize,
    /// Trailing steps whose mean sets each LSG's satisfaction.
    pub recent_steps: usize,
    pub sg_threshold: f64,
    pub desired: DesiredTargets,
    pub reward: RewardWeights,
    pub agent: AgentConfig,
    pub bounds: ConstraintBounds,
    pub action_space: ActionSpaceConfig,
    pub conflict: ConflictConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Write the per-TTI metric CSV.
    pub write_metrics: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "scenario.toml".into(),
            cqi_table: "cqi_table.toml".into(),
            mode: Mode::Assisted,
            episodes: 1,
            steps_per_episode: 1000,
            ttis_per_step: 100,
            tti_window_len: 1000,
            reward_window_steps: 1000,
            design_cadence_steps: 1000,
            design_window_steps: 1000,
            recent_steps: 100,
            sg_threshold: 0.6,
            desired: DesiredTargets::default(),
            reward: RewardWeights::default(),
            agent: AgentConfig::default(),
            bounds: ConstraintBounds::default(),
            action_space: ActionSpaceConfig::default(),
            conflict: ConflictConfig::default(),
            seeds: vec![1],
            out_dir: "runs".into(),
            write_metrics: true,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = files::load_versioned_toml(path, RUN_CONFIG_SCHEMA_VERSION)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.scenario);
        fix(&mut self.cqi_table);
        fix(&mut self.out_dir);
        if let Some(r) = &mut self.conflict.rules {
            fix(r);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.episodes == 0 || self.steps_per_episode == 0 || self.ttis_per_step == 0 {
            return bad("episodes, steps_per_episode and ttis_per_step must be positive");
        }
        if self.tti_window_len == 0 || self.reward_window_steps == 0 || self.design_window_steps == 0 {
            return bad("window lengths must be positive");
        }
        if self.design_cadence_steps == 0 || self.recent_steps == 0 {
            return bad("design_cadence_steps and recent_steps must be positive");
        }
        if !(0.0..=1.0).contains(&self.sg_threshold) {
            return bad("sg_threshold must lie in [0, 1]");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        self.reward.validate()?;
        self.agent.validate()
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        Scenario::load(&self.scenario).map_err(|e| e.context("loading scenario"))
    }

    pub fn load_cqi_table(&self) -> Result<CqiTable> {
        CqiTable::load(&self.cqi_table).map_err(|e| e.context("loading CQI table"))
    }

    pub fn load_rules(&self) -> Result<Vec<ConflictRule>> {
        match &self.conflict.rules {
            Some(p) => load_rules(p).map_err(|e| e.context("loading conflict rules")),
            None => Ok(default_rules()),
        }
    }

    /// Desired energy, throughput and delay, in [`crate::sigraph::Lsg`] order.
    pub fn desired_targets(&self, scn: &Scenario) -> [f64; 3] {
        [
            self.desired.energy_w.unwrap_or_else(|| self.bounds.p_max_w(scn)),
            self.desired.throughput_bps.unwrap_or(self.bounds.c_min_bps),
            self.desired.delay_ttis.unwrap_or(self.bounds.delay_bound_ttis),
        ]
    }

    /// Output directory of one (mode, seed) run.
    pub fn run_dir(&self, mode: Mode, seed: u64) -> PathBuf {
        self.out_dir.join(mode.name()).join(format!("seed-{seed}"))
    }
}

/// Seed of a named random stream derived from a run's root seed, so each
/// consumer draws independently of the others and of the mode.
pub fn stream_seed(root: u64, name: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let text = "schema_version = 1\nmode = \"unassisted\"\nseeds = [3, 4]\n[agent]\nwarmup_steps = 10\n";
        let cfg: RunConfig = files::parse_versioned_toml(text, Path::new("x.toml"), 1).unwrap();
        assert_eq!(cfg.mode, Mode::Unassisted);
        assert_eq!(cfg.agent.warmup_steps, 10);
        assert_eq!(cfg.agent.batch_size, 32);
        assert_eq!(cfg.steps_per_episode, 1000);
        assert!(files::parse_versioned_toml::<RunConfig>("schema_version = 1\nbogus = 1\n", Path::new("x.toml"), 1).is_err());
        let bad = RunConfig {
            ttis_per_step: 0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn modes_parse() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("greedy".parse::<Mode>().is_err());
    }

    #[test]
    fn streams_are_independent() {
        assert_ne!(stream_seed(1, "traffic"), stream_seed(1, "replay"));
        assert_ne!(stream_seed(1, "traffic"), stream_seed(2, "traffic"));
        assert_eq!(stream_seed(5, "traffic"), stream_seed(5, "traffic"));
    }
}
