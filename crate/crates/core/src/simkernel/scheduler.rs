use crate::netmodel::{sinr_to_cqi, CqiTable, CqiTableEntry};

use super::{NetworkState, Packet, ScheduleDecision};

/// Relative slack for the `Cr <= Cr_max` comparison; the RB count is derived
/// from the same quantities, so only rounding can push it over.
const CODE_RATE_SLACK: f64 = 1e-12;

/// A packet that left its BS buffer this TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedPacket {
    pub packet: Packet,
    pub bs_id: usize,
    pub completion_tti: u64,
    pub queue_ttis: f64,
    pub transmission_ttis: f64,
    pub delay_ttis: f64,
}

fn rbs_at_max_rate(bits: f64, entry: &CqiTableEntry) -> u32 {
    let rbs = (bits / entry.max_info_bits_per_rb()).ceil();
    // fits in u32 for any realistic packet; saturate otherwise
    if rbs >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        (rbs as u32).max(1)
    }
}

/// Chooses CQI, RB count and code rate for the unsent part of `packet`.
///
/// Starting at the CQI reported for `sinr_db`, the RB count is the smallest
/// that carries the remaining bits at the entry's maximum code rate, capped
/// by `free_rbs`. The code rate is then `bits / (rbs * rb_rate)`; while it
/// exceeds the entry's maximum, the CQI is lowered by one. If no entry can
/// carry the whole remainder in the free RBs, the packet is segmented at the
/// reported CQI, using every free RB at the maximum code rate.
pub fn select_mcs(
    sinr_db: f64,
    packet: &Packet,
    bs_id: usize,
    free_rbs: u32,
    table: &CqiTable,
) -> ScheduleDecision {
    debug_assert!(free_rbs > 0, "scheduling with no free RBs");
    let bits = packet.remaining_bits;
    let reported = sinr_to_cqi(sinr_db, table);
    let decision = |entry: &CqiTableEntry, rb_count: u32, code_rate: f64, bits: f64, segmented: bool| {
        ScheduleDecision {
            ue_id: packet.ue_id,
            bs_id,
            packet_id: packet.id,
            cqi: entry.cqi_index,
            code_rate,
            rb_count,
            rb_rate: entry.rb_rate_bits_per_tti,
            bits,
            segmented,
            mcs_lowered: entry.cqi_index != reported.cqi_index,
        }
    };
    for k in (1..=reported.cqi_index).rev() {
        let entry = table.entry(k);
        let rb_count = rbs_at_max_rate(bits, entry).min(free_rbs);
        let code_rate = bits / (f64::from(rb_count) * entry.rb_rate_bits_per_tti);
        if code_rate <= entry.max_code_rate * (1.0 + CODE_RATE_SLACK) {
            return decision(entry, rb_count, code_rate, bits, false);
        }
    }
    let capacity = f64::from(free_rbs) * reported.max_info_bits_per_rb();
    decision(reported, free_rbs, reported.max_code_rate, capacity.min(bits), true)
}

/// FIFO grant plan for one TTI: each awake BS serves its buffer head-first
/// until its RBs run out. Does not modify the buffers.
pub fn schedule_tti(state: &NetworkState) -> Vec<ScheduleDecision> {
    let max_rbs = state.scenario.max_rbs;
    let mut out = Vec::new();
    for buf in &state.buffers {
        if state.bss[buf.bs_id].asleep {
            continue;
        }
        let mut free = max_rbs;
        for packet in &buf.queue {
            if free == 0 {
                break;
            }
            let Some(link) = state.links[packet.ue_id] else {
                continue;
            };
            debug_assert_eq!(link.serving, buf.bs_id);
            let d = select_mcs(link.report_sinr_db, packet, buf.bs_id, free, &state.table);
            free -= d.rb_count;
            out.push(d);
        }
        debug_assert!(
            out.iter().filter(|d| d.bs_id == buf.bs_id).map(|d| d.rb_count).sum::<u32>() <= max_rbs
        );
    }
    out
}

/// Applies the grants of TTI `tti`, removing finished packets.
///
/// A packet's delay is its queueing term (first service TTI minus arrival
/// TTI) plus its transmission term, the sum over grants of
/// `bits / (rbs * rb_rate * code_rate)`.
pub fn complete_transmissions(
    state: &mut NetworkState,
    decisions: &[ScheduleDecision],
    tti: u64,
) -> Vec<CompletedPacket> {
    let mut completed = Vec::new();
    for buf in &mut state.buffers {
        let mut finished = 0usize;
        let mut cursor = 0usize;
        for d in decisions.iter().filter(|d| d.bs_id == buf.bs_id) {
            while cursor < buf.queue.len() && buf.queue[cursor].id != d.packet_id {
                cursor += 1;
            }
            let Some(p) = buf.queue.get_mut(cursor) else {
                break;
            };
            if d.rb_count == 0 || d.bits <= 0.0 {
                continue;
            }
            p.dequeue_tti.get_or_insert(tti);
            p.remaining_bits -= d.bits;
            p.transmission_ttis += d.bits / (f64::from(d.rb_count) * d.rb_rate * d.code_rate);
            if p.remaining_bits <= 1e-9 {
                p.remaining_bits = 0.0;
                finished += 1;
            }
        }
        // grants go head-first, so finished packets form a prefix
        for _ in 0..finished {
            let Some(p) = buf.queue.pop_front() else { break };
            debug_assert_eq!(p.remaining_bits, 0.0);
            let queue_ttis = (p.dequeue_tti.unwrap_or(tti) - p.enqueue_tti) as f64;
            completed.push(CompletedPacket {
                bs_id: buf.bs_id,
                completion_tti: tti,
                queue_ttis,
                transmission_ttis: p.transmission_ttis,
                delay_ttis: queue_ttis + p.transmission_ttis,
                packet: p,
            });
        }
    }
    completed
}
