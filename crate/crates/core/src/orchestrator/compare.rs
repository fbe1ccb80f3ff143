use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

use super::{run, Mode, RunConfig, RunReport};

pub const COMPARISON_CSV_HEADER: &str =
    "mode,seed,energy_w,throughput_bps,delay_ttis,final_reward,increase_phase_step";

/// One mode's results across the seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    /// Per seed: mean energy, throughput and delay over the final steps.
    pub finals: Vec<[f64; 3]>,
    pub final_rewards: Vec<f64>,
    pub increase_phase_steps: Vec<Option<usize>>,
    pub mean: [f64; 3],
    pub mean_reward: f64,
}

/// Paired per-seed comparison of two modes on one objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseWins {
    pub a: Mode,
    pub b: Mode,
    pub objective: String,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    /// Two-sided exact sign-test p-value; ties are left out.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub final_steps: usize,
    pub modes: Vec<ModeSummary>,
    pub pairs: Vec<PairwiseWins>,
    pub csv: PathBuf,
}

/// Two-sided exact binomial sign test with `wins` successes out of
/// `wins + losses` fair trials.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    // sum C(n, i) / 2^n for i <= k, built up in floating point
    let mut term = 0.5f64.powi(n as i32);
    let mut tail = term;
    for i in 0..k {
        term *= (n - i) as f64 / (i + 1) as f64;
        tail += term;
    }
    (2.0 * tail).min(1.0)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl ModeSummary {
    fn from_reports(mode: Mode, reports: &[RunReport], final_steps: usize) -> Self {
        let finals: Vec<[f64; 3]> = reports.iter().map(|r| r.final_averages(final_steps)).collect();
        let final_rewards: Vec<f64> = reports.iter().map(|r| r.final_reward(final_steps)).collect();
        Self {
            mode,
            seeds: reports.iter().map(|r| r.seed).collect(),
            mean: [0, 1, 2].map(|i| mean(finals.iter().map(|f| f[i]))),
            mean_reward: mean(final_rewards.iter().copied()),
            increase_phase_steps: reports.iter().map(RunReport::increase_phase_step).collect(),
            finals,
            final_rewards,
        }
    }
}

fn pairwise(a: &ModeSummary, b: &ModeSummary) -> Vec<PairwiseWins> {
    // (name, values, larger is better)
    type Getter = fn(&ModeSummary, usize) -> f64;
    let objectives: [(&str, Getter, bool); 4] = [
        ("energy", |m, i| m.finals[i][0], false),
        ("throughput", |m, i| m.finals[i][1], true),
        ("delay", |m, i| m.finals[i][2], false),
        ("reward", |m, i| m.final_rewards[i], true),
    ];
    objectives
        .into_iter()
        .map(|(name, get, higher)| {
            let (mut wa, mut wb, mut ties) = (0, 0, 0);
            for i in 0..a.seeds.len() {
                let (x, y) = (get(a, i), get(b, i));
                let (x, y) = if higher { (x, y) } else { (-x, -y) };
                match x.partial_cmp(&y) {
                    Some(std::cmp::Ordering::Greater) => wa += 1,
                    Some(std::cmp::Ordering::Less) => wb += 1,
                    _ => ties += 1,
                }
            }
            PairwiseWins {
                a: a.mode,
                b: b.mode,
                objective: name.into(),
                wins_a: wa,
                wins_b: wb,
                ties,
                p_value: sign_test_p(wa, wb),
            }
        })
        .collect()
}

/// Runs every mode on every seed of `cfg.seeds` (paired: a seed drives the
/// same traffic in every mode), summarises the last `final_steps` steps and
/// writes `comparison.csv` under `cfg.out_dir`.
pub fn compare_schemes(cfg: &RunConfig, modes: &[Mode], final_steps: usize) -> Result<Comparison> {
    if modes.is_empty() {
        return Err(Error::Config("compare needs at least one mode".into()));
    }
    let mut summaries = Vec::new();
    let mut csv = format!("{COMPARISON_CSV_HEADER}\n");
    for &mode in modes {
        let mut reports = Vec::new();
        for &seed in &cfg.seeds {
            let r = run(cfg, mode, seed).map_err(|e| e.context(format!("{mode} seed {seed}")))?;
            let [e, c, t] = r.final_averages(final_steps);
            let inflection = r.increase_phase_step().map(|s| s.to_string()).unwrap_or_default();
            writeln!(csv, "{mode},{seed},{e},{c},{t},{},{inflection}", r.final_reward(final_steps)).expect("string write");
            reports.push(r);
        }
        summaries.push(ModeSummary::from_reports(mode, &reports, final_steps));
    }
    let mut pairs = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            pairs.extend(pairwise(&summaries[i], &summaries[j]));
        }
    }
    let path = cfg.out_dir.join("comparison.csv");
    files::write_atomic(&path, csv.as_bytes())?;
    Ok(Comparison {
        final_steps,
        modes: summaries,
        pairs,
        csv: path,
    })
}

impl Comparison {
    /// Plain-text table of per-mode means and pairwise win counts.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "final {} steps, mean over seeds", self.final_steps).unwrap();
        writeln!(
            s,
            "{:<22} {:>12} {:>16} {:>11} {:>10}",
            "mode", "energy_w", "throughput_bps", "delay_tti", "reward"
        )
        .unwrap();
        for m in &self.modes {
            writeln!(
                s,
                "{:<22} {:>12.2} {:>16.0} {:>11.4} {:>10.4}",
                m.mode.name(),
                m.mean[0],
                m.mean[1],
                m.mean[2],
                m.mean_reward
            )
            .unwrap();
        }
        if !self.pairs.is_empty() {
            writeln!(s).unwrap();
            writeln!(s, "{:<44} {:<10} {:>5} {:>5} {:>5} {:>8}", "pair", "objective", "a", "b", "ties", "p").unwrap();
            for p in &self.pairs {
                writeln!(
                    s,
                    "{:<44} {:<10} {:>5} {:>5} {:>5} {:>8.4}",
                    format!("{} vs {}", p.a, p.b),
                    p.objective,
                    p.wins_a,
                    p.wins_b,
                    p.ties,
                    p.p_value
                )
                .unwrap();
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test_p(0, 0), 1.0);
        assert!((sign_test_p(9, 1) - 22.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(1, 9) - 22.0 / 1024.0).abs() < 1e-15);
        assert_eq!(sign_test_p(5, 5), 1.0);
        assert!((sign_test_p(10, 0) - 2.0 / 1024.0).abs() < 1e-15);
    }

    fn summary(mode: Mode, finals: Vec<[f64; 3]>, rewards: Vec<f64>) -> ModeSummary {
        ModeSummary {
            mode,
            seeds: (0..finals.len() as u64).collect(),
            mean: [0.0; 3],
            mean_reward: 0.0,
            increase_phase_steps: vec![None; finals.len()],
            finals,
            final_rewards: rewards,
        }
    }

    #[test]
    fn identical_modes_tie_everywhere() {
        let a = summary(Mode::Assisted, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], vec![0.1, 0.2]);
        let b = ModeSummary { mode: Mode::Unassisted, ..a.clone() };
        for p in pairwise(&a, &b) {
            assert_eq!((p.wins_a, p.wins_b, p.ties), (0, 0, 2));
        }
    }

    #[test]
    fn wins_respect_orientation() {
        let a = summary(Mode::Assisted, vec![[1.0, 9.0, 1.0]], vec![0.5]);
        let b = summary(Mode::Unassisted, vec![[2.0, 8.0, 2.0]], vec![0.1]);
        for p in pairwise(&a, &b) {
            assert_eq!((p.wins_a, p.wins_b), (1, 0), "{}", p.objective);
        }
    }
}
