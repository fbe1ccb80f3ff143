use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netmodel::{
    channel_gain_db, db_to_linear, linear_to_db, noise_power_w, received_power_dbm, sinr_to_cqi,
    BsConfig, CqiTable, Position, Scenario, UeConfig,
};

use super::BsBuffer;

/// Transmit power every BS starts with before the first action is applied.
pub const DEFAULT_TX_POWER_DBM: f64 = 53.0;

/// Per-UE radio link towards its serving BS, refreshed whenever BS
/// configurations or associations change. Interference assumes every awake
/// non-serving BS transmits at its configured power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub serving: usize,
    pub signal_w: f64,
    pub interference_w: f64,
    pub noise_per_rb_w: f64,
    pub rx_power_dbm: f64,
    /// SINR reported for CQI selection, noise over one RB.
    pub report_sinr_db: f64,
    pub cqi: u32,
}

impl LinkState {
    /// Linear SINR with noise integrated over `rb_count` RBs.
    pub fn sinr(&self, rb_count: u32) -> f64 {
        self.signal_w / (self.interference_w + self.noise_per_rb_w * f64::from(rb_count.max(1)))
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub scenario: Scenario,
    pub table: CqiTable,
    pub bss: Vec<BsConfig>,
    pub ues: Vec<UeConfig>,
    pub buffers: Vec<BsBuffer>,
    pub links: Vec<Option<LinkState>>,
}

impl NetworkState {
    /// Places BSs on a square grid `inter_site_distance_m` apart and drops
    /// each UE uniformly in a disc of `ue_radius_m` around a random BS.
    /// The layout depends only on the scenario (including its seed).
    pub fn new(scenario: Scenario, table: CqiTable) -> Result<Self> {
        scenario.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let n = scenario.n_bs;
        let cols = (n as f64).sqrt().ceil() as usize;
        let rows = n.div_ceil(cols);
        let isd = scenario.inter_site_distance_m;
        let x0 = (cols as f64 - 1.0) * isd / 2.0;
        let y0 = (rows as f64 - 1.0) * isd / 2.0;
        let bss: Vec<BsConfig> = (0..n)
            .map(|id| {
                let pos = Position::new((id % cols) as f64 * isd - x0, (id / cols) as f64 * isd - y0);
                BsConfig::awake(id, pos, DEFAULT_TX_POWER_DBM, 0.0)
            })
            .collect();
        let ues = (0..scenario.n_ue)
            .map(|id| {
                let anchor = bss[rng.random_range(0..n)].position;
                let r = scenario.ue_radius_m * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                UeConfig::new(
                    id,
                    Position::new(anchor.x + r * theta.cos(), anchor.y + r * theta.sin()),
                )
            })
            .collect();
        let buffers = (0..n).map(BsBuffer::new).collect();
        let mut state = Self {
            links: vec![None; scenario.n_ue],
            scenario,
            table,
            bss,
            ues,
            buffers,
        };
        // every BS starts awake, so attachment cannot fail here
        attach_ues(&mut state)?;
        Ok(state)
    }

    pub fn awake_count(&self) -> usize {
        self.bss.iter().filter(|b| !b.asleep).count()
    }

    /// Replaces BS configurations and re-runs attachment. Buffered packets
    /// follow their UE to its new serving BS; packets of UEs left without a
    /// BS are returned as dropped.
    pub fn reconfigure(&mut self, configs: &[BsConfig]) -> Result<Vec<super::Packet>> {
        if configs.len() != self.bss.len() {
            return Err(Error::Config(format!(
                "{} BS configurations for {} BSs",
                configs.len(),
                self.bss.len()
            )));
        }
        for (bs, cfg) in self.bss.iter_mut().zip(configs) {
            let position = bs.position;
            *bs = BsConfig { position, id: bs.id, ..*cfg };
        }
        let attach = attach_ues(self);
        let dropped = self.migrate_packets();
        match attach {
            Ok(()) | Err(Error::AllAsleep { .. }) => Ok(dropped),
            Err(e) => Err(e),
        }
    }

    fn migrate_packets(&mut self) -> Vec<super::Packet> {
        let mut dropped = Vec::new();
        let mut moved: Vec<Vec<super::Packet>> = vec![Vec::new(); self.buffers.len()];
        for buf in &mut self.buffers {
            let bs_id = buf.bs_id;
            let queue = std::mem::take(&mut buf.queue);
            for p in queue {
                match self.ues[p.ue_id].serving_bs {
                    Some(s) if s == bs_id => buf.queue.push_back(p),
                    Some(s) => moved[s].push(p),
                    None => dropped.push(p),
                }
            }
        }
        for (buf, extra) in self.buffers.iter_mut().zip(moved) {
            if extra.is_empty() {
                continue;
            }
            buf.queue.extend(extra);
            // ids grow with arrival time, so this restores arrival order
            buf.queue.make_contiguous().sort_by_key(|p| p.id);
        }
        dropped
    }

    fn refresh_links(&mut self) -> Result<()> {
        let scn = &self.scenario;
        for ue in &self.ues {
            let link = match ue.serving_bs {
                None => None,
                Some(s) => {
                    let serving = &self.bss[s];
                    let signal_w = serving.tx_power_w() * db_to_linear(channel_gain_db(serving, ue, scn)?);
                    let mut interference_w = 0.0;
                    for bs in self.bss.iter().filter(|b| !b.asleep && b.id != s) {
                        interference_w += bs.tx_power_w() * db_to_linear(channel_gain_db(bs, ue, scn)?);
                    }
                    let noise_per_rb_w = noise_power_w(scn, 1);
                    let report_sinr_db = linear_to_db(signal_w / (interference_w + noise_per_rb_w));
                    Some(LinkState {
                        serving: s,
                        signal_w,
                        interference_w,
                        noise_per_rb_w,
                        rx_power_dbm: received_power_dbm(serving, ue, scn)?,
                        report_sinr_db,
                        cqi: sinr_to_cqi(report_sinr_db, &self.table).cqi_index,
                    })
                }
            };
            self.links[ue.id] = link;
        }
        Ok(())
    }
}

/// Attaches every UE to the awake BS with the highest received power, ties
/// going to the lowest BS id. With no BS awake all UEs detach and
/// [`Error::AllAsleep`] is returned.
pub fn attach_ues(state: &mut NetworkState) -> Result<()> {
    if state.awake_count() == 0 {
        for ue in &mut state.ues {
            ue.serving_bs = None;
        }
        state.links.iter_mut().for_each(|l| *l = None);
        return Err(Error::AllAsleep {
            detached: state.ues.len(),
        });
    }
    for i in 0..state.ues.len() {
        let ue = state.ues[i];
        let mut best: Option<(usize, f64)> = None;
        for bs in state.bss.iter().filter(|b| !b.asleep) {
            let rx = received_power_dbm(bs, &ue, &state.scenario)?;
            if best.is_none_or(|(_, b)| rx > b) {
                best = Some((bs.id, rx));
            }
        }
        state.ues[i].serving_bs = best.map(|(id, _)| id);
    }
    state.refresh_links()
}
