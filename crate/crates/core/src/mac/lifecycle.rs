use crate::channel::SlotOutcome;
use crate::energy::{frame_rx_energy, frame_tx_energy, Energy, EnergyStore, PulseEnergyParams};
use crate::frames::{
    BeaconPayload, CommandId, FrameKind, MacFrame, PacketScale, ShortAddress, SuperframeSpec,
    BEACON_ADDRESS_SLOTS,
};
use crate::sim::RandomStream;

use super::{
    csma_contend, BackoffConfig, CoordinatorState, MacError, SensorPhase, SensorState,
    SuperframeConfig, CAP_SLOTS,
};

fn debit(store: &mut EnergyStore, node: ShortAddress, amount: Energy) -> Result<(), MacError> {
    store
        .consume(amount)
        .map_err(|source| MacError::InsufficientEnergy { node, source })
}

fn afford(store: &EnergyStore, node: ShortAddress, amount: Energy) -> Result<(), MacError> {
    if store.can_afford(amount) {
        Ok(())
    } else {
        Err(MacError::InsufficientEnergy {
            node,
            source: crate::energy::EnergyError::InsufficientEnergy {
                requested: amount,
                available: store.level(),
            },
        })
    }
}

/// Builds the next beacon and advances the beacon sequence number.
///
/// Entries with queued downlink data are listed first and counted in the
/// pending octet. Entries listed only to confirm an association are dropped
/// from the coordinator's list once announced.
pub fn build_beacon(coordinator: &mut CoordinatorState, config: &SuperframeConfig) -> MacFrame {
    let pending = coordinator.pending_frames().clone();
    let list = coordinator.beacon_list_mut();
    list.sort_by_key(|a| !pending.contains_key(a));
    let pending_count = list.iter().filter(|a| pending.contains_key(a)).count();

    let mut addresses = [ShortAddress::BROADCAST; BEACON_ADDRESS_SLOTS];
    for (slot, addr) in addresses.iter_mut().zip(list.iter()) {
        *slot = *addr;
    }
    list.retain(|a| pending.contains_key(a));

    let spec = SuperframeSpec {
        beacon_interval_minutes: config.duration_minutes.min(255) as u8,
        final_cap_slot: CAP_SLOTS as u8,
        pan_coordinator: true,
        association_permit: true,
    };
    let payload = BeaconPayload {
        superframe_spec: spec.pack(),
        pending_count: pending_count as u8,
        addresses,
    };
    let seq = coordinator.sequence;
    coordinator.sequence = seq.wrapping_add(1);
    MacFrame::beacon(seq, coordinator.address, &payload)
}

/// Sends an association request.
///
/// On success the coordinator admits the sensor and lists it in the next
/// beacon; the sensor waits in `AwaitingAssociation` until it sees that
/// beacon. A sensor that cannot pay for the request defers without
/// spending. A full beacon list defers the request after it was sent.
pub fn associate(
    sensor: &mut SensorState,
    coordinator: &mut CoordinatorState,
    scale: PacketScale,
    params: &PulseEnergyParams,
) -> Result<(), MacError> {
    if sensor.phase() != SensorPhase::Unassociated {
        return Err(MacError::InvalidPhase {
            node: sensor.address,
            phase: sensor.phase(),
        });
    }
    let tx = frame_tx_energy(FrameKind::MacCommand, scale, params);
    let rx = frame_rx_energy(FrameKind::MacCommand, scale, params);
    afford(&sensor.energy, sensor.address, tx)?;
    afford(&coordinator.energy, coordinator.address, rx)?;

    let _request = MacFrame::command(
        sensor.next_sequence(),
        sensor.address,
        coordinator.address,
        CommandId::AssociationRequest,
        [0; 4],
    );
    debit(&mut sensor.energy, sensor.address, tx)?;
    debit(&mut coordinator.energy, coordinator.address, rx)?;

    if coordinator.beacon_list().len() >= BEACON_ADDRESS_SLOTS
        && !coordinator.beacon_list().contains(&sensor.address)
    {
        return Err(MacError::TableFull);
    }
    coordinator.admit(sensor.address)?;
    coordinator.announce(sensor.address)?;
    sensor.set_phase(SensorPhase::AwaitingAssociation)
}

/// Sensor side of a beacon: pays for reception and completes a pending
/// association if its address is listed. An awaiting sensor that is not
/// listed falls back to `Unassociated` and must ask again. Returns whether
/// it is now a member.
pub fn observe_beacon(
    sensor: &mut SensorState,
    beacon: &MacFrame,
    scale: PacketScale,
    params: &PulseEnergyParams,
) -> Result<bool, MacError> {
    let Some(payload) = beacon.beacon_payload() else {
        return Ok(sensor.phase().is_member());
    };
    debit(
        &mut sensor.energy,
        sensor.address,
        frame_rx_energy(FrameKind::Beacon, scale, params),
    )?;
    if sensor.phase() == SensorPhase::AwaitingAssociation {
        if payload.listed().any(|a| a == sensor.address) {
            sensor.set_phase(SensorPhase::Associated)?;
        } else {
            sensor.set_phase(SensorPhase::Unassociated)?;
        }
    }
    Ok(sensor.phase().is_member())
}

/// Sends a disassociation notification and leaves the network.
pub fn disassociate(
    sensor: &mut SensorState,
    coordinator: &mut CoordinatorState,
    scale: PacketScale,
    params: &PulseEnergyParams,
) -> Result<(), MacError> {
    if !coordinator.is_member(sensor.address) {
        return Err(MacError::NotMember(sensor.address));
    }
    if !sensor.phase().is_member() {
        return Err(MacError::InvalidPhase {
            node: sensor.address,
            phase: sensor.phase(),
        });
    }
    let tx = frame_tx_energy(FrameKind::MacCommand, scale, params);
    let rx = frame_rx_energy(FrameKind::MacCommand, scale, params);
    afford(&sensor.energy, sensor.address, tx)?;
    afford(&coordinator.energy, coordinator.address, rx)?;
    debit(&mut sensor.energy, sensor.address, tx)?;
    debit(&mut coordinator.energy, coordinator.address, rx)?;
    coordinator.remove_member(sensor.address)?;
    sensor.set_phase(SensorPhase::Disassociated)
}

/// Coordinator-to-sensor delivery announced by the beacon's pending list.
///
/// The sensor contends (against `rivals`) for a slot to send a DataRequest;
/// on winning, the coordinator sends the data and the sensor acknowledges.
/// If the request collides the sensor still paid for sending it; if another
/// node won outright the sensor never transmitted. Either way the payload
/// stays queued.
#[allow(clippy::too_many_arguments)]
pub fn transfer_indirect(
    coordinator: &mut CoordinatorState,
    sensor: &mut SensorState,
    rivals: &[ShortAddress],
    backoff: BackoffConfig,
    scale: PacketScale,
    params: &PulseEnergyParams,
    rng: &mut RandomStream,
) -> Result<[u8; 4], MacError> {
    let addr = sensor.address;
    if !sensor.phase().is_member() {
        return Err(MacError::InvalidPhase {
            node: addr,
            phase: sensor.phase(),
        });
    }
    if !coordinator.pending_frames().contains_key(&addr) {
        return Err(MacError::NoPendingData(addr));
    }
    let cmd_tx = frame_tx_energy(FrameKind::MacCommand, scale, params);
    let cmd_rx = frame_rx_energy(FrameKind::MacCommand, scale, params);
    let data_tx = frame_tx_energy(FrameKind::Data, scale, params);
    let data_rx = frame_rx_energy(FrameKind::Data, scale, params);
    let ack_tx = frame_tx_energy(FrameKind::Ack, scale, params);
    let ack_rx = frame_rx_energy(FrameKind::Ack, scale, params);
    afford(&sensor.energy, addr, cmd_tx + data_rx + ack_tx)?;
    afford(
        &coordinator.energy,
        coordinator.address,
        cmd_rx + data_tx + ack_rx,
    )?;

    let mut contenders = rivals.to_vec();
    contenders.push(addr);
    sensor.set_phase(SensorPhase::AwaitingSlot)?;
    let outcome = csma_contend(&contenders, rng, backoff);
    match outcome {
        SlotOutcome::Success(w) if w == addr => {}
        SlotOutcome::Collision(_) => {
            debit(&mut sensor.energy, addr, cmd_tx)?;
            sensor.set_phase(SensorPhase::Associated)?;
            return Err(MacError::ContentionLost(addr));
        }
        _ => {
            sensor.set_phase(SensorPhase::Associated)?;
            return Err(MacError::ContentionLost(addr));
        }
    }

    sensor.set_phase(SensorPhase::Transmitting)?;
    let _request = MacFrame::command(
        sensor.next_sequence(),
        addr,
        coordinator.address,
        CommandId::DataRequest,
        [0; 4],
    );
    debit(&mut sensor.energy, addr, cmd_tx)?;
    debit(&mut coordinator.energy, coordinator.address, cmd_rx)?;

    let payload = coordinator
        .take_pending(addr)
        .ok_or(MacError::NoPendingData(addr))?;
    let _data = MacFrame::data(coordinator.sequence, coordinator.address, addr, payload);
    debit(&mut coordinator.energy, coordinator.address, data_tx)?;
    debit(&mut sensor.energy, addr, data_rx)?;

    let _ack = MacFrame::ack(sensor.next_sequence());
    debit(&mut sensor.energy, addr, ack_tx)?;
    debit(&mut coordinator.energy, coordinator.address, ack_rx)?;
    sensor.set_phase(SensorPhase::Associated)?;
    Ok(payload)
}
