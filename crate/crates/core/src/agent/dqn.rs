use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigraph::{space_digest, OperationCombo};

use super::{bellman_target, epsilon_at, select_action, MdpState, QNetwork, ReplayMemory, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup_steps: usize,
    pub target_sync_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon anneals linearly from start to end.
    pub epsilon_decay_steps: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-3,
            gamma: 0.9,
            batch_size: 32,
            replay_capacity: 10_000,
            warmup_steps: 200,
            target_sync_interval: 50,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 700,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("agent: {m}")));
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 0 < batch_size <= replay_capacity");
        }
        if self.target_sync_interval == 0 {
            return bad("target_sync_interval must be positive");
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Seeds for the agent's independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentRngs {
    pub init: u64,
    pub explore: u64,
    pub replay: u64,
}

impl AgentRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            init: seed,
            explore: seed ^ 0x9e37_79b9_7f4a_7c15,
            replay: seed ^ 0xc2b2_ae3d_27d4_eb4f,
        }
    }
}

/// An action index tagged with the digest of the space it indexes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionIndex {
    pub index: usize,
    pub space_digest: String,
}

/// DQN agent with an evaluation network, a periodically synced target
/// network and uniform experience replay.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub eval: QNetwork,
    pub target: QNetwork,
    pub memory: ReplayMemory,
    space: Vec<OperationCombo>,
    digest: String,
    init_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    /// Decision steps taken; drives epsilon.
    pub steps: u64,
    /// Gradient updates applied.
    pub updates: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, space: Vec<OperationCombo>, seeds: AgentRngs) -> Result<Self> {
        config.validate()?;
        if space.is_empty() {
            return Err(Error::EmptyActionSpace);
        }
        let mut init_rng = ChaCha8Rng::seed_from_u64(seeds.init);
        let eval = QNetwork::new(3, config.hidden, space.len(), &mut init_rng);
        Ok(Self {
            target: eval.clone(),
            eval,
            memory: ReplayMemory::new(config.replay_capacity, config.warmup_steps),
            digest: space_digest(&space),
            space,
            init_rng,
            explore_rng: ChaCha8Rng::seed_from_u64(seeds.explore),
            replay_rng: ChaCha8Rng::seed_from_u64(seeds.replay),
            config,
            steps: 0,
            updates: 0,
        })
    }

    pub fn space(&self) -> &[OperationCombo] {
        &self.space
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn epsilon(&self) -> f64 {
        let c = &self.config;
        epsilon_at(self.steps, c.epsilon_start, c.epsilon_end, c.epsilon_decay_steps)
    }

    /// Epsilon-greedy action for `state`; advances the step counter.
    pub fn act(&mut self, state: &MdpState) -> ActionIndex {
        let q = self.eval.q_values(state);
        let index = select_action(&q, self.epsilon(), &mut self.explore_rng);
        self.steps += 1;
        ActionIndex {
            index,
            space_digest: self.digest.clone(),
        }
    }

    pub fn greedy(&self, state: &MdpState) -> ActionIndex {
        ActionIndex {
            index: super::argmax(&self.eval.q_values(state)),
            space_digest: self.digest.clone(),
        }
    }

    /// Resolves an action against the active space.
    pub fn combo(&self, action: &ActionIndex) -> Result<&OperationCombo> {
        self.check(action)?;
        Ok(&self.space[action.index])
    }

    fn check(&self, action: &ActionIndex) -> Result<()> {
        if action.space_digest != self.digest || action.index >= self.space.len() {
            return Err(Error::StaleDigest {
                index: action.index,
                got: action.space_digest.clone(),
                active: self.digest.clone(),
            });
        }
        Ok(())
    }

    /// Stores a transition and, once past warmup, runs one gradient update.
    /// Returns the loss when an update ran.
    pub fn observe(
        &mut self,
        s: MdpState,
        action: &ActionIndex,
        reward: f64,
        s_next: MdpState,
        terminal: bool,
    ) -> Result<Option<f64>> {
        self.check(action)?;
        self.memory.store(Transition {
            s,
            action: action.index,
            s_next,
            reward,
            terminal,
        });
        if self.memory.stored() <= self.config.warmup_steps as u64 || !self.memory.ready(self.config.batch_size) {
            return Ok(None);
        }
        self.train_step().map(Some)
    }

    /// One minibatch update of the evaluation network.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.memory.sample(self.config.batch_size, &mut self.replay_rng)?;
        let next: Vec<[f64; 3]> = batch.iter().map(|t| t.s_next).collect();
        let max_next = self.target.max_q_batch(&next);
        let targets: Vec<([f64; 3], usize, f64)> = batch
            .iter()
            .zip(max_next)
            .map(|(t, m)| (t.s, t.action, bellman_target(t.reward, m, self.config.gamma, t.terminal)))
            .collect();
        let (loss, grads) = self.eval.gradients(&targets);
        if !loss.is_finite() || grads.flat().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                loss,
                step: self.updates,
            });
        }
        self.eval.apply(&grads, self.config.learning_rate);
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync_interval) {
            self.sync_target();
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.eval);
    }

    /// Replaces the action space. Output rows of both networks and stored
    /// transitions follow their combo to its new index; combos absent from
    /// the old space get fresh output weights, identical in both networks.
    pub fn swap_space(&mut self, space: Vec<OperationCombo>) -> Result<()> {
        if space.is_empty() {
            return Err(Error::EmptyActionSpace);
        }
        let old: HashMap<_, usize> = self.space.iter().enumerate().map(|(i, c)| (c.key(), i)).collect();
        let new_to_old: Vec<Option<usize>> = space.iter().map(|c| old.get(&c.key()).copied()).collect();
        let mut old_to_new = vec![None; self.space.len()];
        for (n, o) in new_to_old.iter().enumerate() {
            if let Some(o) = o {
                old_to_new[*o] = Some(n);
            }
        }
        self.eval.remap_outputs(&new_to_old, &mut self.init_rng);
        let fresh = self.eval.layers[2].clone();
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.target.remap_outputs(&new_to_old, &mut unused);
        let h = fresh.n_in;
        let out = &mut self.target.layers[2];
        for (i, m) in new_to_old.iter().enumerate() {
            if m.is_none() {
                out.w[i * h..(i + 1) * h].copy_from_slice(&fresh.w[i * h..(i + 1) * h]);
                out.b[i] = fresh.b[i];
            }
        }
        self.memory.remap_actions(&old_to_new);
        self.digest = space_digest(&space);
        self.space = space;
        Ok(())
    }

    /// Restores networks and counters from a checkpoint taken on the same
    /// action space.
    pub fn restore(&mut self, eval: QNetwork, target: QNetwork, steps: u64, updates: u64) -> Result<()> {
        if eval.n_out() != self.space.len() || target.n_out() != self.space.len() || eval.hidden() != self.config.hidden {
            return Err(Error::Config(format!(
                "checkpoint shape {}x{} does not match agent {}x{}",
                eval.hidden(),
                eval.n_out(),
                self.config.hidden,
                self.space.len()
            )));
        }
        self.eval = eval;
        self.target = target;
        self.steps = steps;
        self.updates = updates;
        Ok(())
    }
}

/// Trains on a one-state, two-action bandit where action 0 pays 1 and
/// action 1 pays 0, with non-terminal self-transitions. Returns the learnt
/// Q-value of action 0 after `updates` gradient steps; the fixed point is
/// `1 / (1 - gamma)`.
pub fn bandit_check(seed: u64, updates: u64) -> f64 {
    use crate::sigraph::BsAssignment;
    let space = vec![
        OperationCombo {
            bs: vec![BsAssignment::awake(0, 53.0, 5.0)],
        },
        OperationCombo {
            bs: vec![BsAssignment::sleeping(0)],
        },
    ];
    // plain SGD at 1e-2 overshoots once the hidden activations grow
    let config = AgentConfig {
        warmup_steps: 64,
        epsilon_decay_steps: 2_000,
        epsilon_end: 0.1,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(config, space, AgentRngs::from_seed(seed)).expect("valid bandit agent");
    let s = [0.5, 0.5, 0.5];
    while agent.updates < updates {
        let a = agent.act(&s);
        let r = if a.index == 0 { 1.0 } else { 0.0 };
        agent.observe(s, &a, r, s, false).expect("finite bandit training");
    }
    agent.eval.q_value(&s, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigraph::{enumerate_action_space, Granularities};

    fn space(n: usize) -> Vec<OperationCombo> {
        enumerate_action_space(1, &Granularities::default(), 1_000_000, 0, 0).unwrap().combos[..n].to_vec()
    }

    fn agent(n: usize, config: AgentConfig) -> Agent {
        Agent::new(config, space(n), AgentRngs::from_seed(7)).unwrap()
    }

    fn probes() -> Vec<[f64; 3]> {
        (0..10).map(|i| [i as f64 / 10.0, 1.0 - i as f64 / 10.0, (i as f64).sin().abs()]).collect()
    }

    #[test]
    fn target_sync_copies_exactly() {
        let mut a = agent(5, AgentConfig::default());
        for p in a.eval.params_mut() {
            *p += 0.01;
        }
        a.sync_target();
        for x in probes() {
            for (u, v) in a.eval.q_values(&x).iter().zip(a.target.q_values(&x)) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
        let before = a.target.clone();
        a.sync_target();
        assert_eq!(a.target, before);
    }

    #[test]
    fn target_stays_stale_between_syncs() {
        let config = AgentConfig {
            warmup_steps: 32,
            target_sync_interval: 50,
            ..AgentConfig::default()
        };
        let mut a = agent(4, config);
        let frozen = a.target.clone();
        let s = [0.2, 0.4, 0.6];
        while a.updates < 49 {
            let act = a.act(&s);
            a.observe(s, &act, 1.0, s, false).unwrap();
        }
        assert_eq!(a.target, frozen);
        assert_ne!(a.eval, frozen);
        let act = a.act(&s);
        a.observe(s, &act, 1.0, s, false).unwrap();
        assert_eq!(a.updates, 50);
        assert_eq!(a.target, a.eval);
    }

    #[test]
    fn no_updates_during_warmup() {
        let mut a = agent(4, AgentConfig::default());
        let s = [0.1; 3];
        for _ in 0..200 {
            let act = a.act(&s);
            assert_eq!(a.observe(s, &act, 0.0, s, false).unwrap(), None);
        }
        let act = a.act(&s);
        assert!(a.observe(s, &act, 0.0, s, false).unwrap().is_some());
        assert_eq!(a.updates, 1);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let config = AgentConfig {
            learning_rate: 0.0,
            warmup_steps: 32,
            ..AgentConfig::default()
        };
        let mut a = agent(6, config);
        let before = a.eval.flat_params();
        let s = [0.3; 3];
        for _ in 0..100 {
            let act = a.act(&s);
            a.observe(s, &act, -1.0, s, false).unwrap();
        }
        assert!(a.updates > 0);
        assert_eq!(a.eval.flat_params(), before);
    }

    #[test]
    fn bandit_converges() {
        let q = bandit_check(3, 5_000);
        assert!((q - 10.0).abs() <= 0.01, "Q(a0) = {q}");
    }

    #[test]
    fn stale_indices_are_rejected() {
        let mut a = agent(6, AgentConfig::default());
        let old = a.act(&[0.0; 3]);
        a.swap_space(space(4)).unwrap();
        assert!(matches!(a.combo(&old), Err(Error::StaleDigest { .. })));
        assert!(matches!(
            a.observe([0.0; 3], &old, 0.0, [0.0; 3], false),
            Err(Error::StaleDigest { .. })
        ));
        let fresh = a.act(&[0.0; 3]);
        assert!(a.combo(&fresh).is_ok());
    }

    #[test]
    fn swap_keeps_surviving_rows() {
        let full = space(8);
        let mut a = Agent::new(AgentConfig::default(), full.clone(), AgentRngs::from_seed(1)).unwrap();
        for p in a.eval.params_mut() {
            *p *= 1.5;
        }
        let x = [0.4, 0.1, 0.9];
        let q_old = a.eval.q_values(&x);
        a.memory.store(Transition {
            s: x,
            action: 5,
            s_next: x,
            reward: 0.0,
            terminal: false,
        });
        a.memory.store(Transition {
            s: x,
            action: 1,
            s_next: x,
            reward: 0.0,
            terminal: false,
        });
        // reversed, minus combos 1 and 2, plus one the agent never saw
        let extra = enumerate_action_space(1, &Granularities::default(), 1_000_000, 0, 0).unwrap().combos[10].clone();
        let new: Vec<_> = [7, 6, 5, 4, 3, 0].iter().map(|&i| full[i].clone()).chain([extra]).collect();
        a.swap_space(new).unwrap();
        let q_new = a.eval.q_values(&x);
        for (n, o) in [7, 6, 5, 4, 3, 0].iter().enumerate() {
            assert_eq!(q_new[n], q_old[*o]);
        }
        let (e3, t3) = (&a.eval.layers[2], &a.target.layers[2]);
        let h = e3.n_in;
        assert_eq!(t3.w[6 * h..7 * h], e3.w[6 * h..7 * h]);
        assert_eq!(t3.b[6], e3.b[6]);
        let actions: Vec<usize> = a.memory.iter().map(|t| t.action).collect();
        assert_eq!(actions, vec![2]);
    }
}
