//! TTI-granularity RAN simulator.
//!
//! One [`Simulator`] owns all mutable network state and advances it one TTI
//! at a time: traffic arrival, CQI-driven MCS selection, FIFO RB scheduling,
//! transmission, and per-TTI metric recording with constraint monitors.
//! Delays are measured in TTIs throughout.

mod metrics;
mod scheduler;
mod sim;
mod state;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use metrics::{
    record_metrics, step_averages, C3Mode, ConstraintBounds, ConstraintFlags, MetricCsvWriter,
    StepAverages, TtiSample, METRIC_CSV_HEADER,
};
pub use scheduler::{complete_transmissions, schedule_tti, select_mcs, CompletedPacket};
pub use sim::{generate_traffic, SimConfig, SimEvent, Simulator, TrafficState};
pub use state::{attach_ues, LinkState, NetworkState, DEFAULT_TX_POWER_DBM};

/// A downlink packet waiting in (or moving through) a BS buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    /// Globally increasing in arrival order.
    pub id: u64,
    pub ue_id: usize,
    pub size_bits: u64,
    pub enqueue_tti: u64,
    /// First TTI in which any part of the packet was transmitted.
    pub dequeue_tti: Option<u64>,
    pub remaining_bits: f64,
    /// Accumulated transmission term, in TTIs.
    pub transmission_ttis: f64,
}

impl Packet {
    pub fn new(id: u64, ue_id: usize, size_bits: u64, enqueue_tti: u64) -> Self {
        Self {
            id,
            ue_id,
            size_bits,
            enqueue_tti,
            dequeue_tti: None,
            remaining_bits: size_bits as f64,
            transmission_ttis: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BsBuffer {
    pub bs_id: usize,
    pub queue: VecDeque<Packet>,
}

impl BsBuffer {
    pub fn new(bs_id: usize) -> Self {
        Self {
            bs_id,
            queue: VecDeque::new(),
        }
    }
}

/// RBs and MCS granted to one packet (or packet segment) in one TTI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub ue_id: usize,
    pub bs_id: usize,
    pub packet_id: u64,
    pub cqi: u32,
    pub code_rate: f64,
    pub rb_count: u32,
    pub rb_rate: f64,
    /// Information bits delivered by this grant.
    pub bits: f64,
    /// The packet did not fit in the free RBs and continues next TTI.
    pub segmented: bool,
    /// CQI was lowered from the reported value by the code-rate check.
    pub mcs_lowered: bool,
}

/// TTI counter with decision-step and episode boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtiClock {
    pub tti: u64,
    pub ttis_per_step: u32,
    pub steps_per_episode: u32,
}

impl TtiClock {
    pub fn new(ttis_per_step: u32, steps_per_episode: u32) -> Self {
        assert!(ttis_per_step > 0 && steps_per_episode > 0);
        Self {
            tti: 0,
            ttis_per_step,
            steps_per_episode,
        }
    }

    pub fn advance(&mut self) {
        self.tti += 1;
    }

    /// Decision step the current TTI belongs to (0-based, across episodes).
    pub fn step(&self) -> u64 {
        self.tti / u64::from(self.ttis_per_step)
    }

    pub fn episode(&self) -> u64 {
        self.step() / u64::from(self.steps_per_episode)
    }

    pub fn at_step_boundary(&self) -> bool {
        self.tti % u64::from(self.ttis_per_step) == 0
    }
}

/// Bounded time series of energy, throughput and first-packet delay.
///
/// The three lists always have equal length. A TTI without completed packets
/// stores no delay sample (`None`), never a zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    pub energy_w: VecDeque<f64>,
    pub throughput_bps: VecDeque<f64>,
    pub delay_ttis: VecDeque<Option<f64>>,
    /// Number of completed packets behind each delay sample.
    pub completions: VecDeque<u32>,
    pub window_len: usize,
}

impl MetricWindow {
    pub fn new(window_len: usize) -> Self {
        assert!(window_len > 0, "window length must be positive");
        Self {
            energy_w: VecDeque::with_capacity(window_len),
            throughput_bps: VecDeque::with_capacity(window_len),
            delay_ttis: VecDeque::with_capacity(window_len),
            completions: VecDeque::with_capacity(window_len),
            window_len,
        }
    }

    pub fn len(&self) -> usize {
        self.energy_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy_w.is_empty()
    }

    /// Appends one sample, evicting the oldest once `window_len` is reached.
    pub fn push(&mut self, energy_w: f64, throughput_bps: f64, delay: Option<f64>, completions: u32) {
        if self.len() == self.window_len {
            self.energy_w.pop_front();
            self.throughput_bps.pop_front();
            self.delay_ttis.pop_front();
            self.completions.pop_front();
        }
        self.energy_w.push_back(energy_w);
        self.throughput_bps.push_back(throughput_bps);
        self.delay_ttis.push_back(delay);
        self.completions.push_back(completions);
    }

    pub fn delay_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.delay_ttis.iter().flatten().copied()
    }
}
