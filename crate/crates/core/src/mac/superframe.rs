use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::channel::SlotOutcome;
use crate::energy::{frame_rx_energy, frame_tx_energy, Energy, PulseEnergyParams};
use crate::frames::{FrameKind, PacketScale, ShortAddress};
use crate::sim::RandomStream;

use super::{
    allocate_slots, CoordinatorState, SensorPhase, SensorState, SlotAccess, SuperframeConfig,
    CAP_SLOTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SuperframeStatus {
    Completed,
    Skipped,
}

impl SuperframeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SuperframeStatus::Completed => "Completed",
            SuperframeStatus::Skipped => "Skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperframeResult {
    pub index: u64,
    pub status: SuperframeStatus,
    /// Active sensors served, capped at 15.
    pub m: usize,
    pub budget: Energy,
    /// One entry per CAP slot, empty when skipped.
    pub slot_outcomes: Vec<SlotOutcome>,
    pub coordinator_energy_spent: Energy,
    pub per_sensor_energy_spent: BTreeMap<ShortAddress, Energy>,
    /// Coordinator level after the superframe.
    pub coordinator_level: Energy,
    pub carried_over: Vec<ShortAddress>,
}

impl SuperframeResult {
    fn count(&self, f: impl Fn(&SlotOutcome) -> bool) -> usize {
        self.slot_outcomes.iter().filter(|o| f(o)).count()
    }

    pub fn success_slots(&self) -> usize {
        self.count(|o| o.is_success())
    }

    pub fn collision_slots(&self) -> usize {
        self.count(|o| matches!(o, SlotOutcome::Collision(_)))
    }

    pub fn idle_slots(&self) -> usize {
        self.count(|o| *o == SlotOutcome::Idle)
    }

    pub fn ledger_row(&self) -> LedgerRow {
        LedgerRow {
            superframe_index: self.index,
            status: self.status.as_str(),
            m: self.m,
            budget_pj: self.budget.picojoules(),
            coordinator_level_pj: self.coordinator_level.picojoules(),
            success_slots: self.success_slots(),
            collision_slots: self.collision_slots(),
            idle_slots: self.idle_slots(),
        }
    }
}

/// Worst-case coordinator spend: the beacon plus, for each of `m` slots,
/// receiving a data frame and acknowledging it.
pub fn superframe_budget(m: usize, scale: PacketScale, params: &PulseEnergyParams) -> Energy {
    let per_slot = frame_rx_energy(FrameKind::Data, scale, params)
        + frame_tx_energy(FrameKind::Ack, scale, params);
    frame_tx_energy(FrameKind::Beacon, scale, params) + per_slot * m.min(CAP_SLOTS) as u64
}

/// Runs one superframe for the given active sensors.
///
/// The coordinator skips the superframe, spending nothing, unless it holds
/// the worst-case budget. Sensors that cannot pay for a full exchange (beacon
/// rx, data tx, ack rx) or are not members sit the round out. Only
/// successful slots cost anything beyond the beacon.
pub fn run_superframe(
    index: u64,
    coordinator: &mut CoordinatorState,
    active_sensors: &mut [SensorState],
    config: &SuperframeConfig,
    params: &PulseEnergyParams,
    rng: &mut RandomStream,
) -> SuperframeResult {
    let scale = config.packet_scale;
    let m = active_sensors.len().min(CAP_SLOTS);
    let budget = superframe_budget(m, scale, params);

    if !coordinator.energy.can_afford(budget) {
        return SuperframeResult {
            index,
            status: SuperframeStatus::Skipped,
            m,
            budget,
            slot_outcomes: Vec::new(),
            coordinator_energy_spent: Energy::ZERO,
            per_sensor_energy_spent: BTreeMap::new(),
            coordinator_level: coordinator.energy.level(),
            carried_over: Vec::new(),
        };
    }

    let beacon_tx = frame_tx_energy(FrameKind::Beacon, scale, params);
    let beacon_rx = frame_rx_energy(FrameKind::Beacon, scale, params);
    let data_tx = frame_tx_energy(FrameKind::Data, scale, params);
    let data_rx = frame_rx_energy(FrameKind::Data, scale, params);
    let ack_tx = frame_tx_energy(FrameKind::Ack, scale, params);
    let ack_rx = frame_rx_energy(FrameKind::Ack, scale, params);
    let sensor_cost = beacon_rx + data_tx + ack_rx;

    let participants: Vec<ShortAddress> = active_sensors
        .iter()
        .filter(|s| s.phase().is_member() && s.energy.can_afford(sensor_cost))
        .map(|s| s.address)
        .collect();

    let (slot_outcomes, carried_over) = match config.access {
        SlotAccess::Contention(backoff) => {
            let alloc = allocate_slots(&participants, backoff, rng);
            (alloc.outcomes, alloc.carried_over)
        }
        SlotAccess::BeaconScheduled => {
            let mut outcomes: Vec<SlotOutcome> = participants
                .iter()
                .take(CAP_SLOTS)
                .map(|&a| SlotOutcome::Success(a))
                .collect();
            outcomes.resize(CAP_SLOTS, SlotOutcome::Idle);
            (
                outcomes,
                participants.iter().skip(CAP_SLOTS).copied().collect(),
            )
        }
    };

    let mut spent = beacon_tx;
    let mut per_sensor = BTreeMap::new();
    for outcome in &slot_outcomes {
        if let SlotOutcome::Success(addr) = *outcome {
            spent = spent + data_rx + ack_tx;
            let sensor = active_sensors
                .iter_mut()
                .find(|s| s.address == addr)
                .expect("winner is an active sensor");
            let _ = sensor.set_phase(SensorPhase::Transmitting);
            sensor
                .energy
                .consume(sensor_cost)
                .expect("participants were checked for affordability");
            let _ = sensor.set_phase(SensorPhase::Associated);
            sensor.next_sequence();
            per_sensor.insert(addr, sensor_cost);
        }
    }
    coordinator
        .energy
        .consume(spent)
        .expect("realized spend never exceeds the budget");
    coordinator.sequence = coordinator.sequence.wrapping_add(1);

    SuperframeResult {
        index,
        status: SuperframeStatus::Completed,
        m,
        budget,
        slot_outcomes,
        coordinator_energy_spent: spent,
        per_sensor_energy_spent: per_sensor,
        coordinator_level: coordinator.energy.level(),
        carried_over,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub superframe_index: u64,
    pub status: &'static str,
    pub m: usize,
    #[serde(rename = "budget_pJ")]
    pub budget_pj: f64,
    #[serde(rename = "coordinator_level_pJ")]
    pub coordinator_level_pj: f64,
    pub success_slots: usize,
    pub collision_slots: usize,
    pub idle_slots: usize,
}

/// Writes the per-superframe ledger as CSV with a header row.
pub fn write_ledger<W: Write>(out: W, results: &[SuperframeResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r.ledger_row())?;
    }
    w.flush()?;
    Ok(())
}
