use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{draw_packet_interarrival, BsConfig};

use super::{
    complete_transmissions, record_metrics, schedule_tti, step_averages, ConstraintBounds,
    MetricWindow, NetworkState, Packet, StepAverages, TtiClock, TtiSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub ttis_per_step: u32,
    pub steps_per_episode: u32,
    /// Length of the per-TTI metric window.
    pub window_len: usize,
    pub bounds: ConstraintBounds,
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            ttis_per_step: 100,
            steps_per_episode: 1000,
            window_len: 1000,
            bounds: ConstraintBounds::default(),
            record_events: false,
        }
    }
}

/// One line of the optional event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Enqueue {
        tti: u64,
        packet_id: u64,
        ue_id: usize,
        bs_id: usize,
        size_bits: u64,
    },
    Serve {
        tti: u64,
        packet_id: u64,
        bs_id: usize,
        cqi: u32,
        rb_count: u32,
        rb_rate: f64,
        code_rate: f64,
        bits: f64,
    },
    Complete {
        tti: u64,
        packet_id: u64,
        delay_ttis: f64,
    },
    Drop {
        tti: u64,
        packet_id: u64,
    },
}

/// Per-UE Poisson arrival processes. Arrival times are continuous, in TTIs.
#[derive(Debug, Clone)]
pub struct TrafficState {
    rng: ChaCha8Rng,
    next_arrival: Vec<f64>,
    next_packet_id: u64,
    /// Mean interarrival in TTIs is `ttis_per_unit / rate`.
    rate: f64,
    ttis_per_unit: f64,
}

impl TrafficState {
    pub fn new(state: &NetworkState, mut rng: ChaCha8Rng) -> Self {
        let rate = state.scenario.arrival_rate;
        let ttis_per_unit = state.scenario.arrival_time_unit_ttis;
        let next_arrival = (0..state.ues.len())
            .map(|_| draw_packet_interarrival(&mut rng, rate) * ttis_per_unit)
            .collect();
        Self {
            rng,
            next_arrival,
            next_packet_id: 0,
            rate,
            ttis_per_unit,
        }
    }

    pub fn seeded(state: &NetworkState, seed: u64) -> Self {
        Self::new(state, ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Generates the packets arriving during TTI `tti` and enqueues them at each
/// UE's serving BS. Packets of detached UEs are returned as dropped.
pub fn generate_traffic(
    state: &mut NetworkState,
    traffic: &mut TrafficState,
    tti: u64,
) -> (Vec<Packet>, Vec<Packet>) {
    let mut enqueued = Vec::new();
    let mut dropped = Vec::new();
    let end = (tti + 1) as f64;
    for ue in 0..state.ues.len() {
        while traffic.next_arrival[ue] < end {
            let p = Packet::new(traffic.next_packet_id, ue, state.scenario.packet_size_bits, tti);
            traffic.next_packet_id += 1;
            traffic.next_arrival[ue] +=
                draw_packet_interarrival(&mut traffic.rng, traffic.rate) * traffic.ttis_per_unit;
            match state.ues[ue].serving_bs {
                Some(bs) => {
                    state.buffers[bs].queue.push_back(p.clone());
                    enqueued.push(p);
                }
                None => dropped.push(p),
            }
        }
    }
    (enqueued, dropped)
}

/// Owns the network and steps it one TTI at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub state: NetworkState,
    pub traffic: TrafficState,
    pub clock: TtiClock,
    pub window: MetricWindow,
    pub config: SimConfig,
    events: Option<Vec<SimEvent>>,
    last_delay: Option<f64>,
    dropped: u64,
}

impl Simulator {
    pub fn new(state: NetworkState, traffic_rng: ChaCha8Rng, config: SimConfig) -> Self {
        let traffic = TrafficState::new(&state, traffic_rng);
        Self {
            state,
            traffic,
            clock: TtiClock::new(config.ttis_per_step, config.steps_per_episode),
            window: MetricWindow::new(config.window_len.max(config.ttis_per_step as usize)),
            events: config.record_events.then(Vec::new),
            config,
            last_delay: None,
            dropped: 0,
        }
    }

    /// Applies per-BS configurations and reattaches UEs. Buffered packets of
    /// UEs that lose their BS are dropped.
    pub fn apply_configs(&mut self, configs: &[BsConfig]) -> Result<()> {
        let dropped = self.state.reconfigure(configs)?;
        self.log_drops(&dropped);
        Ok(())
    }

    fn log_drops(&mut self, dropped: &[Packet]) {
        self.dropped += dropped.len() as u64;
        if let Some(ev) = &mut self.events {
            ev.extend(dropped.iter().map(|p| SimEvent::Drop {
                tti: self.clock.tti,
                packet_id: p.id,
            }));
        }
    }

    pub fn dropped_packets(&self) -> u64 {
        self.dropped
    }

    /// Runs one TTI: arrivals, scheduling, transmission, metrics.
    pub fn step_tti(&mut self) -> Result<TtiSample> {
        let tti = self.clock.tti;
        let (enqueued, dropped) = generate_traffic(&mut self.state, &mut self.traffic, tti);
        self.log_drops(&dropped);
        let decisions = schedule_tti(&self.state);
        let completed = complete_transmissions(&mut self.state, &decisions, tti);
        let sample = record_metrics(
            &self.state,
            &decisions,
            &completed,
            &mut self.window,
            &self.config.bounds,
            &self.clock,
        )?;
        if !(sample.energy_w.is_finite()
            && sample.throughput_bps.is_finite()
            && sample.delay_ttis.is_none_or(f64::is_finite))
        {
            return Err(Error::NonFinite {
                what: "TTI metrics",
                episode: sample.episode,
                step: sample.step,
                tti,
            });
        }
        if let Some(ev) = &mut self.events {
            for p in &enqueued {
                ev.push(SimEvent::Enqueue {
                    tti,
                    packet_id: p.id,
                    ue_id: p.ue_id,
                    bs_id: self.state.ues[p.ue_id].serving_bs.unwrap_or(usize::MAX),
                    size_bits: p.size_bits,
                });
            }
            for d in &decisions {
                ev.push(SimEvent::Serve {
                    tti,
                    packet_id: d.packet_id,
                    bs_id: d.bs_id,
                    cqi: d.cqi,
                    rb_count: d.rb_count,
                    rb_rate: d.rb_rate,
                    code_rate: d.code_rate,
                    bits: d.bits,
                });
            }
            for c in &completed {
                ev.push(SimEvent::Complete {
                    tti,
                    packet_id: c.packet.id,
                    delay_ttis: c.delay_ttis,
                });
            }
        }
        self.clock.advance();
        Ok(sample)
    }

    /// Runs one decision step and returns its TTI samples and averages.
    pub fn run_step(&mut self) -> Result<(Vec<TtiSample>, StepAverages)> {
        let n = self.config.ttis_per_step as usize;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            samples.push(self.step_tti()?);
        }
        let avg = step_averages(&self.window, n, self.last_delay)?;
        self.last_delay = Some(avg.delay_ttis);
        Ok((samples, avg))
    }

    pub fn events(&self) -> Option<&[SimEvent]> {
        self.events.as_deref()
    }

    pub fn take_events(&mut self) -> Vec<SimEvent> {
        self.events.as_mut().map(std::mem::take).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::netmodel::{CqiTable, Scenario};

    fn sim_with(scn: Scenario, record_events: bool) -> Simulator {
        let state = NetworkState::new(scn, CqiTable::default()).unwrap();
        let cfg = SimConfig {
            record_events,
            ..SimConfig::default()
        };
        Simulator::new(state, ChaCha8Rng::seed_from_u64(99), cfg)
    }

    #[test]
    fn negligible_rate_generates_nothing() {
        let mut scn = Scenario::default();
        scn.arrival_rate = 1e-9;
        let mut state = NetworkState::new(scn, CqiTable::default()).unwrap();
        let mut traffic = TrafficState::seeded(&state, 1);
        let total: usize = (0..1000).map(|t| generate_traffic(&mut state, &mut traffic, t).0.len()).sum();
        assert_eq!(total, 0);
    }

    #[test]
    fn arrival_count_matches_rate() {
        let mut scn = Scenario::default().with_size(1, 4);
        scn.arrival_rate = 8.0;
        let mut state = NetworkState::new(scn.clone(), CqiTable::default()).unwrap();
        let mut traffic = TrafficState::seeded(&state, 3);
        let mut counts = vec![0usize; 4];
        let ttis = 100_000u64;
        for t in 0..ttis {
            for p in generate_traffic(&mut state, &mut traffic, t).0 {
                counts[p.ue_id] += 1;
            }
            state.buffers[0].queue.clear();
        }
        let units = ttis as f64 / scn.arrival_time_unit_ttis;
        for c in counts {
            let per_unit = c as f64 / units;
            assert!((per_unit - 8.0).abs() / 8.0 < 0.02, "rate {per_unit}");
        }
    }

    #[test]
    fn detached_ue_enqueues_nothing() {
        let mut state = NetworkState::new(Scenario::default(), CqiTable::default()).unwrap();
        state.ues[0].serving_bs = None;
        let mut traffic = TrafficState::seeded(&state, 4);
        for t in 0..2000 {
            let (enq, _) = generate_traffic(&mut state, &mut traffic, t);
            assert!(enq.iter().all(|p| p.ue_id != 0));
        }
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let run = || {
            let mut sim = sim_with(Scenario::default(), false);
            (0..10_000).map(|_| sim.step_tti().unwrap()).collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| {
            x.energy_w.to_bits() == y.energy_w.to_bits()
                && x.throughput_bps.to_bits() == y.throughput_bps.to_bits()
                && x.delay_ttis.map(f64::to_bits) == y.delay_ttis.map(f64::to_bits)
                && x.flags == y.flags
        }));
    }

    #[test]
    fn delays_match_event_log_replay() {
        let mut sim = sim_with(Scenario::default(), true);
        for _ in 0..3000 {
            sim.step_tti().unwrap();
        }
        let mut arrived: HashMap<u64, u64> = HashMap::new();
        let mut first_served: HashMap<u64, u64> = HashMap::new();
        let mut trans: HashMap<u64, f64> = HashMap::new();
        let mut checked = 0;
        for e in sim.events().unwrap() {
            match *e {
                SimEvent::Enqueue { tti, packet_id, .. } => {
                    arrived.insert(packet_id, tti);
                }
                SimEvent::Serve { tti, packet_id, rb_count, rb_rate, code_rate, bits, .. } => {
                    first_served.entry(packet_id).or_insert(tti);
                    *trans.entry(packet_id).or_default() += bits / (f64::from(rb_count) * rb_rate * code_rate);
                }
                SimEvent::Complete { packet_id, delay_ttis, .. } => {
                    let want = (first_served[&packet_id] - arrived[&packet_id]) as f64 + trans[&packet_id];
                    assert!((delay_ttis - want).abs() <= 1e-9 * want.max(1.0));
                    checked += 1;
                }
                SimEvent::Drop { .. } => {}
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn work_conserving_when_backlogged() {
        let mut sim = sim_with(Scenario::default(), false);
        for _ in 0..2000 {
            let tti = sim.clock.tti;
            generate_traffic(&mut sim.state, &mut sim.traffic, tti);
            let ds = schedule_tti(&sim.state);
            for (bs, buf) in sim.state.buffers.iter().enumerate() {
                if !buf.queue.is_empty() && !sim.state.bss[bs].asleep {
                    assert!(ds.iter().any(|d| d.bs_id == bs));
                }
            }
            complete_transmissions(&mut sim.state, &ds, tti);
            sim.clock.advance();
        }
    }

    #[test]
    fn step_runs_one_step_of_ttis() {
        let mut sim = sim_with(Scenario::default(), false);
        let (samples, avg) = sim.run_step().unwrap();
        assert_eq!(samples.len(), 100);
        assert_eq!(sim.clock.tti, 100);
        assert!(avg.energy_w > 0.0);
    }
}
