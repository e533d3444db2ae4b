//! Beacon-enabled superframe MAC for a star of nano-sensors.
//!
//! A superframe is 16 slots: the beacon, then 15 contention-access slots.
//! The coordinator only opens a superframe when its store covers the worst
//! case for every active sensor; otherwise it skips to the next beacon.

mod contention;
mod lifecycle;
mod superframe;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyError, EnergyStore};
use crate::frames::{PacketScale, ShortAddress, BEACON_ADDRESS_SLOTS};
use crate::sim::SimTime;

pub use contention::{
    allocate_slots, csma_contend, rr_slot_usable, RoundRobinSchedule, SlotAllocation,
};
pub use lifecycle::{associate, build_beacon, disassociate, observe_beacon, transfer_indirect};
pub use superframe::{
    run_superframe, superframe_budget, write_ledger, LedgerRow, SuperframeResult, SuperframeStatus,
};

pub const TOTAL_SLOTS: usize = 16;
pub const CAP_SLOTS: usize = 15;
pub const MAX_MEMBERS: usize = 65_535;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("beacon list already holds {CAP_SLOTS} entries")]
    TableFull,
    #[error("{0:?} is not a member")]
    NotMember(ShortAddress),
    #[error("{0:?} lost the contention for its slot")]
    ContentionLost(ShortAddress),
    #[error("{node:?}: {source}")]
    InsufficientEnergy {
        node: ShortAddress,
        #[source]
        source: EnergyError,
    },
    #[error("{node:?} cannot do this in phase {phase:?}")]
    InvalidPhase {
        node: ShortAddress,
        phase: SensorPhase,
    },
    #[error("illegal phase change {from:?} -> {to:?}")]
    IllegalTransition { from: SensorPhase, to: SensorPhase },
    #[error("no downlink data queued for {0:?}")]
    NoPendingData(ShortAddress),
    #[error("backoff exponent {0} outside 1..=8")]
    InvalidBackoff(u8),
    #[error("superframe duration must be positive")]
    ZeroDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackoffConfig {
    pub backoff_exponent: u8,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self {
            backoff_exponent: 3,
        }
    }
}

impl BackoffConfig {
    pub fn new(backoff_exponent: u8) -> Result<Self, MacError> {
        let cfg = Self { backoff_exponent };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MacError> {
        if (1..=8).contains(&self.backoff_exponent) {
            Ok(())
        } else {
            Err(MacError::InvalidBackoff(self.backoff_exponent))
        }
    }

    /// Backoff window `2^BE`.
    pub fn window(&self) -> u64 {
        1u64 << self.backoff_exponent
    }
}

/// How the 15 CAP slots are handed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotAccess {
    /// Slotted CSMA/CA: every slot is contended by the remaining requesters.
    Contention(BackoffConfig),
    /// The beacon's address list grants slot `i` to entry `i`.
    BeaconScheduled,
}

impl Default for SlotAccess {
    fn default() -> Self {
        SlotAccess::Contention(BackoffConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperframeConfig {
    pub duration_minutes: u32,
    pub packet_scale: PacketScale,
    pub access: SlotAccess,
}

impl Default for SuperframeConfig {
    fn default() -> Self {
        Self {
            duration_minutes: 10,
            packet_scale: PacketScale::FULL,
            access: SlotAccess::default(),
        }
    }
}

impl SuperframeConfig {
    pub fn validate(&self) -> Result<(), MacError> {
        if self.duration_minutes == 0 {
            return Err(MacError::ZeroDuration);
        }
        if let SlotAccess::Contention(b) = self.access {
            b.validate()?;
        }
        Ok(())
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_minutes(u128::from(self.duration_minutes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorPhase {
    Unassociated,
    AwaitingAssociation,
    Associated,
    AwaitingSlot,
    Transmitting,
    Disassociated,
}

impl SensorPhase {
    /// Associated, AwaitingSlot or Transmitting.
    pub fn is_member(self) -> bool {
        matches!(
            self,
            SensorPhase::Associated | SensorPhase::AwaitingSlot | SensorPhase::Transmitting
        )
    }

    pub fn can_transition_to(self, next: SensorPhase) -> bool {
        use SensorPhase::*;
        match (self, next) {
            (Unassociated, AwaitingAssociation) => true,
            (AwaitingAssociation, Associated) => true,
            (AwaitingAssociation, Unassociated) => true,
            (from, to) if from.is_member() && to.is_member() => from != to,
            (from, Disassociated) => from.is_member(),
            (Disassociated, Unassociated) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorState {
    pub address: ShortAddress,
    phase: SensorPhase,
    pub energy: EnergyStore,
    pub pending_data: Option<[u8; 4]>,
    pub sequence: u8,
}

impl SensorState {
    pub fn new(address: ShortAddress, energy: EnergyStore) -> Self {
        Self {
            address,
            phase: SensorPhase::Unassociated,
            energy,
            pending_data: None,
            sequence: 0,
        }
    }

    /// A sensor that has already completed association.
    pub fn associated(address: ShortAddress, energy: EnergyStore) -> Self {
        Self {
            phase: SensorPhase::Associated,
            ..Self::new(address, energy)
        }
    }

    pub fn phase(&self) -> SensorPhase {
        self.phase
    }

    pub fn set_phase(&mut self, next: SensorPhase) -> Result<(), MacError> {
        if !self.phase.can_transition_to(next) {
            return Err(MacError::IllegalTransition {
                from: self.phase,
                to: next,
            });
        }
        self.phase = next;
        Ok(())
    }

    /// Disassociated back to Unassociated.
    pub fn rejoin(&mut self) -> Result<(), MacError> {
        self.set_phase(SensorPhase::Unassociated)
    }

    pub(crate) fn next_sequence(&mut self) -> u8 {
        let s = self.sequence;
        self.sequence = self.sequence.wrapping_add(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorState {
    pub address: ShortAddress,
    members: BTreeSet<ShortAddress>,
    beacon_list: Vec<ShortAddress>,
    pending_frames: BTreeMap<ShortAddress, [u8; 4]>,
    pub energy: EnergyStore,
    pub sequence: u8,
}

impl CoordinatorState {
    pub fn new(address: ShortAddress, energy: EnergyStore) -> Self {
        Self {
            address,
            members: BTreeSet::new(),
            beacon_list: Vec::new(),
            pending_frames: BTreeMap::new(),
            energy,
            sequence: 0,
        }
    }

    pub fn members(&self) -> &BTreeSet<ShortAddress> {
        &self.members
    }

    pub fn is_member(&self, addr: ShortAddress) -> bool {
        self.members.contains(&addr)
    }

    pub fn beacon_list(&self) -> &[ShortAddress] {
        &self.beacon_list
    }

    pub fn pending_frames(&self) -> &BTreeMap<ShortAddress, [u8; 4]> {
        &self.pending_frames
    }

    /// Admits `addr` without the over-the-air exchange.
    pub fn admit(&mut self, addr: ShortAddress) -> Result<(), MacError> {
        if self.members.len() >= MAX_MEMBERS && !self.members.contains(&addr) {
            return Err(MacError::TableFull);
        }
        self.members.insert(addr);
        Ok(())
    }

    /// Adds `addr` to the next beacon's address list.
    pub fn announce(&mut self, addr: ShortAddress) -> Result<(), MacError> {
        if !self.members.contains(&addr) {
            return Err(MacError::NotMember(addr));
        }
        if self.beacon_list.contains(&addr) {
            return Ok(());
        }
        if self.beacon_list.len() >= BEACON_ADDRESS_SLOTS {
            return Err(MacError::TableFull);
        }
        self.beacon_list.push(addr);
        Ok(())
    }

    /// Queues a downlink payload and announces it in the next beacon.
    pub fn queue_downlink(&mut self, addr: ShortAddress, payload: [u8; 4]) -> Result<(), MacError> {
        self.announce(addr)?;
        self.pending_frames.insert(addr, payload);
        Ok(())
    }

    pub(crate) fn remove_member(&mut self, addr: ShortAddress) -> Result<(), MacError> {
        if !self.members.remove(&addr) {
            return Err(MacError::NotMember(addr));
        }
        self.beacon_list.retain(|&a| a != addr);
        self.pending_frames.remove(&addr);
        Ok(())
    }

    pub(crate) fn take_pending(&mut self, addr: ShortAddress) -> Option<[u8; 4]> {
        let payload = self.pending_frames.remove(&addr)?;
        self.beacon_list.retain(|&a| a != addr);
        Some(payload)
    }

    pub(crate) fn beacon_list_mut(&mut self) -> &mut Vec<ShortAddress> {
        &mut self.beacon_list
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::HarvestConfig;
    use proptest::prelude::*;

    const ALL: [SensorPhase; 6] = [
        SensorPhase::Unassociated,
        SensorPhase::AwaitingAssociation,
        SensorPhase::Associated,
        SensorPhase::AwaitingSlot,
        SensorPhase::Transmitting,
        SensorPhase::Disassociated,
    ];

    #[test]
    fn backoff_bounds() {
        assert_eq!(BackoffConfig::default().window(), 8);
        assert!(BackoffConfig::new(0).is_err());
        assert!(BackoffConfig::new(9).is_err());
        assert_eq!(BackoffConfig::new(8).unwrap().window(), 256);
    }

    #[test]
    fn superframe_config_checks() {
        let cfg = SuperframeConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.duration(), SimTime::from_minutes(10));
        let zero = SuperframeConfig {
            duration_minutes: 0,
            ..cfg
        };
        assert_eq!(zero.validate(), Err(MacError::ZeroDuration));
    }

    #[test]
    fn no_backward_edges_into_join_path() {
        for from in ALL {
            for to in [SensorPhase::Unassociated, SensorPhase::AwaitingAssociation] {
                let allowed = from.can_transition_to(to);
                let expected = matches!(
                    (from, to),
                    (SensorPhase::Unassociated, SensorPhase::AwaitingAssociation)
                        | (SensorPhase::AwaitingAssociation, SensorPhase::Unassociated)
                        | (SensorPhase::Disassociated, SensorPhase::Unassociated)
                );
                assert_eq!(allowed, expected, "{from:?} -> {to:?}");
            }
        }
        assert!(!SensorPhase::Unassociated.can_transition_to(SensorPhase::Associated));
        assert!(!SensorPhase::Unassociated.can_transition_to(SensorPhase::Transmitting));
    }

    #[test]
    fn beacon_list_is_bounded_and_members_only() {
        let mut c = CoordinatorState::new(
            ShortAddress(0),
            EnergyStore::coordinator(HarvestConfig::default()),
        );
        assert_eq!(
            c.announce(ShortAddress(1)),
            Err(MacError::NotMember(ShortAddress(1)))
        );
        for a in 1..=16 {
            c.admit(ShortAddress(a)).unwrap();
        }
        for a in 1..=15 {
            c.announce(ShortAddress(a)).unwrap();
        }
        assert_eq!(c.announce(ShortAddress(16)), Err(MacError::TableFull));
        assert_eq!(c.beacon_list().len(), 15);
    }

    proptest! {
        #[test]
        fn membership_requires_join_handshake(steps in proptest::collection::vec(0usize..6, 0..40)) {
            let mut s = SensorState::new(ShortAddress(1), EnergyStore::sensor(HarvestConfig::default()));
            let mut handshake_done = false;
            for i in steps {
                let prev = s.phase();
                if s.set_phase(ALL[i]).is_err() {
                    prop_assert_eq!(s.phase(), prev);
                    continue;
                }
                match (prev, s.phase()) {
                    (SensorPhase::AwaitingAssociation, SensorPhase::Associated) => handshake_done = true,
                    (_, SensorPhase::Unassociated) => handshake_done = false,
                    _ => {}
                }
                if s.phase().is_member() {
                    prop_assert!(handshake_done);
                }
            }
        }
    }
}
