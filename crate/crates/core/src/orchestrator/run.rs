use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    normalize_state, reward_from_norms, save_checkpoint, Agent, AgentRngs, MdpState,
};
use crate::error::{Error, Result};
use crate::files;
use crate::netmodel::Position;
use crate::sigraph::{
    enumerate_action_space, export_action_space, import_action_space, ConflictRule, DesignSample,
    SigModel,
};
use crate::simkernel::{MetricCsvWriter, MetricWindow, NetworkState, SimConfig, Simulator};

use super::{design_time_cycle, stream_seed, swap_action_space, DesignContext, Mode, RunConfig};

pub const TRAINING_LOG_HEADER: &str =
    "episode,step,energy_w,throughput_bps,delay_ttis,reward,loss,epsilon,action_index,action_space_size,combo";

/// One design-time cycle as recorded in the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub episode: u64,
    pub step: u64,
    pub sg_score: f64,
    pub checked: bool,
    pub triggered: Vec<String>,
    pub relaxed: Vec<String>,
    pub space_before: usize,
    pub space_after: usize,
    #[serde(skip)]
    pub latency_s: f64,
}

/// Per-step curves and summary of one (mode, seed) run. Curves are indexed
/// by the run's global step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub dir: PathBuf,
    pub metrics_csv: Option<PathBuf>,
    pub training_log: PathBuf,
    pub energy_w: Vec<f64>,
    pub throughput_bps: Vec<f64>,
    pub delay_ttis: Vec<f64>,
    pub rewards: Vec<f64>,
    pub cumulative_reward: Vec<f64>,
    pub losses: Vec<Option<f64>>,
    pub space_sizes: Vec<usize>,
    pub cycles: Vec<CycleSummary>,
    pub updates: u64,
    pub dropped_packets: u64,
    /// TTIs on which each of C1..C6 was violated.
    pub violations: [u64; 6],
}

fn tail_mean(xs: &[f64], n: usize) -> f64 {
    let tail = &xs[xs.len().saturating_sub(n)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

impl RunReport {
    /// Mean energy, throughput and delay over the last `n` steps.
    pub fn final_averages(&self, n: usize) -> [f64; 3] {
        [
            tail_mean(&self.energy_w, n),
            tail_mean(&self.throughput_bps, n),
            tail_mean(&self.delay_ttis, n),
        ]
    }

    pub fn final_reward(&self, n: usize) -> f64 {
        tail_mean(&self.rewards, n)
    }

    /// Step at which the cumulative reward bottoms out and starts to rise,
    /// `None` if it never does.
    pub fn increase_phase_step(&self) -> Option<usize> {
        let c = &self.cumulative_reward;
        let (i, _) = c.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        (i + 1 < c.len()).then_some(i)
    }

    /// First cycle in which conflict identification ran.
    pub fn first_checked_cycle(&self) -> Option<&CycleSummary> {
        self.cycles.iter().find(|c| c.checked)
    }

    pub fn all_finite(&self) -> bool {
        let curves = [&self.energy_w, &self.throughput_bps, &self.delay_ttis, &self.rewards];
        curves.iter().all(|c| c.iter().all(|x| x.is_finite()))
            && self.losses.iter().flatten().all(|x| x.is_finite())
    }
}

/// Live state of one run, carried across episodes.
pub struct RunState {
    pub mode: Mode,
    pub sim: Simulator,
    pub agent: Agent,
    pub sig: SigModel,
    /// Step averages the state and reward are normalised against.
    pub step_window: MetricWindow,
    pub samples: VecDeque<DesignSample>,
    pub state: MdpState,
    pub global_step: u64,
    positions: Vec<Position>,
    rules: Vec<ConflictRule>,
    desired: [f64; 3],
    space_file: PathBuf,
}

impl RunState {
    pub fn new(cfg: &RunConfig, mode: Mode, seed: u64, dir: &Path) -> Result<Self> {
        let scenario = cfg.load_scenario()?;
        let table = cfg.load_cqi_table()?;
        let desired = cfg.desired_targets(&scenario);
        let net = NetworkState::new(scenario, table)?;
        let positions: Vec<Position> = net.bss.iter().map(|b| b.position).collect();
        let sim_cfg = SimConfig {
            ttis_per_step: cfg.ttis_per_step,
            steps_per_episode: cfg.steps_per_episode,
            window_len: cfg.tti_window_len,
            bounds: cfg.bounds,
            record_events: false,
        };
        let sim = Simulator::new(net, ChaCha8Rng::seed_from_u64(stream_seed(seed, "traffic")), sim_cfg);
        let asp = &cfg.action_space;
        let full = enumerate_action_space(
            positions.len(),
            &asp.granularities,
            asp.cap,
            asp.sample_size,
            stream_seed(seed, "sampling"),
        )?;
        let space_file = dir.join("action_space.json");
        let space = if mode == Mode::Unassisted {
            full.combos
        } else {
            export_action_space(&full.combos, &space_file, "0:0", "")?;
            import_action_space(&space_file)?
        };
        let seeds = AgentRngs {
            init: stream_seed(seed, "agent"),
            explore: stream_seed(seed, "exploration"),
            replay: stream_seed(seed, "replay"),
        };
        Ok(Self {
            mode,
            sim,
            agent: Agent::new(cfg.agent.clone(), space, seeds)?,
            sig: SigModel::new(cfg.sg_threshold),
            step_window: MetricWindow::new(cfg.reward_window_steps),
            samples: VecDeque::with_capacity(cfg.design_window_steps),
            state: [0.0; 3],
            global_step: 0,
            positions,
            rules: cfg.load_rules()?,
            desired,
            space_file,
        })
    }
}

struct Sinks {
    metrics: Option<MetricCsvWriter<BufWriter<File>>>,
    training: BufWriter<File>,
    latency: BufWriter<File>,
    sig_dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Runs one episode of `cfg.steps_per_episode` decision steps.
///
/// Each step the agent picks a combo, the simulator runs `ttis_per_step`
/// TTIs under it, and the step averages give the reward and next state.
/// The transition is stored (training starts after warmup) and every
/// `design_cadence_steps` steps the design time runs and may swap the
/// agent's action space.
fn run_episode(cfg: &RunConfig, rs: &mut RunState, sinks: &mut Sinks, report: &mut RunReport) -> Result<()> {
    let episode = rs.sim.clock.episode();
    let dir = report.dir.clone();
    let ctx = DesignContext {
        rules: &rs.rules.clone(),
        granularities: &cfg.action_space.granularities,
        thresholds: cfg.conflict.thresholds,
        alpha: cfg.conflict.alpha,
        desired: rs.desired,
        recent_steps: cfg.recent_steps,
        identify_conflicts: rs.mode == Mode::Assisted,
    };
    for step in 0..u64::from(cfg.steps_per_episode) {
        let at = |e: Error| e.context(format!("episode {episode}, step {step}"));
        let action = rs.agent.act(&rs.state);
        let epsilon = rs.agent.epsilon();
        let combo = rs.agent.combo(&action).map_err(at)?.clone();
        rs.sim.apply_configs(&combo.to_configs(&rs.positions)?).map_err(at)?;
        let (ttis, avg) = rs.sim.run_step().map_err(at)?;
        for t in &ttis {
            for (count, ok) in report.violations.iter_mut().zip(t.flags.as_array()) {
                *count += u64::from(!ok);
            }
        }
        if let (Some(w), Some(path)) = (&mut sinks.metrics, &report.metrics_csv) {
            for t in &ttis {
                w.write(t).map_err(io_at(path))?;
            }
        }

        rs.step_window.push(avg.energy_w, avg.throughput_bps, Some(avg.delay_ttis), 1);
        let next = normalize_state(&rs.step_window, &avg).map_err(at)?;
        let reward = reward_from_norms(next[1], next[0], next[2], &cfg.reward);
        if !reward.is_finite() {
            return Err(Error::NonFinite {
                what: "reward",
                episode,
                step,
                tti: rs.sim.clock.tti,
            });
        }
        let terminal = step + 1 == u64::from(cfg.steps_per_episode);
        let loss = rs.agent.observe(rs.state, &action, reward, next, terminal).map_err(at)?;
        rs.state = next;

        let space_size = rs.agent.space().len();
        writeln!(
            sinks.training,
            "{episode},{step},{},{},{},{reward},{},{epsilon},{},{space_size},{}",
            avg.energy_w,
            avg.throughput_bps,
            avg.delay_ttis,
            loss.map(|l| l.to_string()).unwrap_or_default(),
            action.index,
            combo.compact(),
        )
        .map_err(io_at(&report.training_log))?;
        report.energy_w.push(avg.energy_w);
        report.throughput_bps.push(avg.throughput_bps);
        report.delay_ttis.push(avg.delay_ttis);
        report.rewards.push(reward);
        report
            .cumulative_reward
            .push(report.cumulative_reward.last().copied().unwrap_or(0.0) + reward);
        report.losses.push(loss);
        report.space_sizes.push(space_size);

        if rs.samples.len() == cfg.design_window_steps {
            rs.samples.pop_front();
        }
        rs.samples.push_back(DesignSample {
            energy_w: avg.energy_w,
            throughput_bps: avg.throughput_bps,
            delay_ttis: avg.delay_ttis,
            reward,
            combo,
        });
        rs.global_step += 1;

        if rs.mode != Mode::Unassisted && rs.global_step % u64::from(cfg.design_cadence_steps) == 0 {
            let samples: Vec<DesignSample> = rs.samples.iter().cloned().collect();
            let stamp = format!("{episode}:{}", step + 1);
            let space_file = rs.space_file.clone();
            let outcome = design_time_cycle(&ctx, &mut rs.sig, &samples, rs.agent.space(), Some((&space_file, &stamp)))
                .map_err(at)?;
            if let Some(path) = &outcome.exported {
                // a rejected file leaves the agent on its old space
                if let Err(e) = swap_action_space(&mut rs.agent, path) {
                    tracing::error!("{}", at(e));
                }
            }
            let n = report.cycles.len() + 1;
            writeln!(
                sinks.latency,
                "cycle {n} episode {episode} step {} latency_s {:.6}",
                step + 1,
                outcome.latency_s
            )
            .map_err(io_at(&dir))?;
            let mut snapshot = serde_json::json!({
                "episode": episode,
                "step": step + 1,
                "model": &rs.sig,
                "outcome": &outcome,
                "space_digest": rs.agent.digest(),
            });
            // keep snapshots independent of where the run directory lives
            snapshot["outcome"]["exported"] = serde_json::json!(outcome
                .exported
                .as_ref()
                .and_then(|p| p.file_name())
                .map(|f| f.to_string_lossy()));
            let snap_path = sinks.sig_dir.join(format!("cycle-{n:04}.json"));
            files::write_atomic(&snap_path, &serde_json::to_vec_pretty(&snapshot).expect("snapshot serializes"))?;
            report.cycles.push(CycleSummary {
                episode,
                step: step + 1,
                sg_score: outcome.sg_score,
                checked: outcome.checked,
                triggered: outcome.triggered,
                relaxed: outcome.relaxed,
                space_before: outcome.space_before,
                space_after: rs.agent.space().len(),
                latency_s: outcome.latency_s,
            });
        }
    }
    Ok(())
}

/// Runs every episode of one (mode, seed) pair and writes its outputs under
/// `cfg.run_dir(mode, seed)`: per-TTI metrics, the training log, SIG
/// snapshots, the current action space, design-time latencies, a JSON
/// report and a final agent checkpoint.
pub fn run(cfg: &RunConfig, mode: Mode, seed: u64) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.run_dir(mode, seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let sig_dir = dir.join("sig");
    if mode != Mode::Unassisted {
        fs::create_dir_all(&sig_dir).map_err(|e| Error::io(&sig_dir, e))?;
    }
    let mut rs = RunState::new(cfg, mode, seed, &dir)?;

    let metrics_csv = cfg.write_metrics.then(|| dir.join("metrics.csv"));
    let training_log = dir.join("training_log.csv");
    let metrics = match &metrics_csv {
        Some(p) => Some(MetricCsvWriter::new(create(p)?).map_err(io_at(p))?),
        None => None,
    };
    let mut training = create(&training_log)?;
    writeln!(training, "{TRAINING_LOG_HEADER}").map_err(io_at(&training_log))?;
    let latency_path = dir.join("design_latency.log");
    let mut sinks = Sinks {
        metrics,
        training,
        latency: create(&latency_path)?,
        sig_dir,
    };
    let mut report = RunReport {
        mode,
        seed,
        dir: dir.clone(),
        metrics_csv,
        training_log,
        energy_w: Vec::new(),
        throughput_bps: Vec::new(),
        delay_ttis: Vec::new(),
        rewards: Vec::new(),
        cumulative_reward: Vec::new(),
        losses: Vec::new(),
        space_sizes: Vec::new(),
        cycles: Vec::new(),
        updates: 0,
        dropped_packets: 0,
        violations: [0; 6],
    };
    for _ in 0..cfg.episodes {
        run_episode(cfg, &mut rs, &mut sinks, &mut report)?;
    }
    if let Some(w) = sinks.metrics.take() {
        let path = report.metrics_csv.as_deref().expect("metrics path set");
        w.into_inner().flush().map_err(io_at(path))?;
    }
    sinks.training.flush().map_err(io_at(&report.training_log))?;
    sinks.latency.flush().map_err(io_at(&latency_path))?;
    report.updates = rs.agent.updates;
    report.dropped_packets = rs.sim.dropped_packets();
    save_checkpoint(&rs.agent, &dir.join("agent.ckpt"))?;
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    files::write_atomic(&dir.join("report.json"), &json)?;
    Ok(report)
}
