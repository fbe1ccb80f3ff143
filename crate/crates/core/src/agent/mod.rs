//! Run-time DQN agent.
//!
//! States are the step-level energy, throughput and delay averages
//! normalised against a sliding window of past steps; actions index the
//! current operation-combo list; rewards trade the three objectives off
//! with fixed weights.

mod checkpoint;
mod dqn;
mod net;
mod replay;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkernel::{MetricWindow, StepAverages};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use dqn::{bandit_check, Agent, AgentConfig, AgentRngs, ActionIndex};
pub use net::{gradient_check, Gradients, Layer, QNetwork};
pub use replay::{ReplayMemory, Transition};

/// Normalised (energy, throughput, delay).
pub type MdpState = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub throughput: f64,
    pub energy: f64,
    pub delay: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            throughput: 1.0,
            energy: 1.0,
            delay: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.throughput, self.energy, self.delay];
        if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || w.iter().all(|&x| x == 0.0) {
            return Err(Error::Config(format!(
                "reward weights must be nonnegative with one positive, got {w:?}"
            )));
        }
        Ok(())
    }
}

/// `(x - min) / (max - min)` over `series`, 0 when the series is flat.
pub fn minmax_norm(x: f64, series: impl Iterator<Item = f64>) -> f64 {
    let (min, max) = series.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(max > min) {
        return 0.0;
    }
    ((x - min) / (max - min)).clamp(0.0, 1.0)
}

/// Normalised step state against a window of step averages.
pub fn normalize_state(window: &MetricWindow, current: &StepAverages) -> Result<MdpState> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok([
        minmax_norm(current.energy_w, window.energy_w.iter().copied()),
        minmax_norm(current.throughput_bps, window.throughput_bps.iter().copied()),
        minmax_norm(current.delay_ttis, window.delay_values()),
    ])
}

/// `w_thp * norm(C) - w_ec * norm(P) - w_d * norm(T)`, each term normalised
/// against the window of step averages.
pub fn compute_reward(window: &MetricWindow, current: &StepAverages, w: &RewardWeights) -> Result<f64> {
    let [e, c, t] = normalize_state(window, current)?;
    Ok(reward_from_norms(c, e, t, w))
}

pub fn reward_from_norms(throughput: f64, energy: f64, delay: f64, w: &RewardWeights) -> f64 {
    w.throughput * throughput - w.energy * energy - w.delay * delay
}

/// `r` for terminal transitions, `r + gamma * max_next_q` otherwise.
pub fn bellman_target(reward: f64, max_next_q: f64, gamma: f64, terminal: bool) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * max_next_q
    }
}

/// Index of the largest value, ties going to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over `q_values`.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    // draw unconditionally so the stream does not depend on epsilon
    let explore = rng.random::<f64>() < epsilon;
    let pick = rng.random_range(0..q_values.len());
    if explore {
        pick
    } else {
        argmax(q_values)
    }
}

/// Linear annealing from `start` to `end` over `steps` steps.
pub fn epsilon_at(step: u64, start: f64, end: f64, steps: u64) -> f64 {
    if steps == 0 {
        return end;
    }
    if step >= steps {
        return end;
    }
    start + (end - start) * (step as f64 / steps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window(rows: &[(f64, f64, f64)]) -> MetricWindow {
        let mut w = MetricWindow::new(1000);
        for &(e, c, t) in rows {
            w.push(e, c, Some(t), 1);
        }
        w
    }

    fn avg(e: f64, c: f64, t: f64) -> StepAverages {
        StepAverages {
            energy_w: e,
            throughput_bps: c,
            delay_ttis: t,
            delay_carried: false,
        }
    }

    #[test]
    fn reward_examples() {
        let w = window(&[(10.0, 1.0, 1.0), (20.0, 5.0, 3.0)]);
        let ones = RewardWeights::default();
        assert_eq!(compute_reward(&w, &avg(10.0, 5.0, 1.0), &ones).unwrap(), 1.0);
        assert_eq!(compute_reward(&w, &avg(10.0, 1.0, 1.0), &ones).unwrap(), 0.0);
        let w2 = RewardWeights {
            throughput: 2.0,
            energy: 1.0,
            delay: 1.0,
        };
        assert_eq!(reward_from_norms(0.5, 0.25, 0.25, &w2), 0.5);
        assert!(matches!(
            compute_reward(&MetricWindow::new(3), &avg(0.0, 0.0, 0.0), &ones),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn flat_window_contributes_nothing() {
        let w = window(&[(5.0, 5.0, 5.0), (5.0, 5.0, 5.0)]);
        assert_eq!(compute_reward(&w, &avg(5.0, 5.0, 5.0), &RewardWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn bellman_examples() {
        assert_eq!(bellman_target(0.7, 100.0, 0.9, true), 0.7);
        assert_eq!(bellman_target(0.3, 100.0, 0.0, false), 0.3);
        assert!((bellman_target(1.0, 2.0, 0.9, false) - 2.8).abs() < 1e-15);
    }

    #[test]
    fn greedy_ties_go_low() {
        let mut q = vec![0.0; 12];
        q[3] = 5.0;
        q[9] = 5.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&q, 0.0, &mut rng), 3);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = vec![0.0; 17];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0u32; 17];
        let n = 100_000;
        for _ in 0..n {
            counts[select_action(&q, 1.0, &mut rng)] += 1;
        }
        let p = 1.0 / 17.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sd, "count {c}");
        }
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon_at(0, 1.0, 0.05, 100), 1.0);
        assert!((epsilon_at(50, 1.0, 0.05, 100) - 0.525).abs() < 1e-15);
        assert_eq!(epsilon_at(500, 1.0, 0.05, 100), 0.05);
    }

    proptest! {
        #[test]
        fn reward_bounded(
            rows in prop::collection::vec((0.0f64..1e4, 0.0f64..1e8, 0.0f64..50.0), 1..30),
            pick in 0usize..30,
            w in (0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0),
        ) {
            let win = window(&rows);
            let (e, c, t) = rows[pick % rows.len()];
            let weights = RewardWeights { throughput: w.0, energy: w.1, delay: w.2 };
            let r = compute_reward(&win, &avg(e, c, t), &weights).unwrap();
            prop_assert!(r >= -(w.1 + w.2) - 1e-12 && r <= w.0 + 1e-12);
        }

        #[test]
        fn greedy_invariant_under_affine_maps(
            q in prop::collection::vec(-10.0f64..10.0, 1..40),
            a in 0.01f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let mapped: Vec<f64> = q.iter().map(|x| a * x + b).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let i = select_action(&q, 0.0, &mut rng);
            let j = select_action(&mapped, 0.0, &mut rng);
            // ties created by rounding in the map are the only way to differ
            prop_assert!(i == j || (mapped[i] - mapped[j]).abs() < 1e-9);
        }
    }
}
