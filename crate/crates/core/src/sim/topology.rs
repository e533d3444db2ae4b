use crate::channel::PropagationModel;
use crate::energy::{EnergyStore, HarvestConfig};
use crate::frames::ShortAddress;
use crate::mac::{CoordinatorState, SensorState};

/// A coordinator with sensors that each talk only to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub coordinator: CoordinatorState,
    pub sensors: Vec<SensorState>,
    pub propagation: PropagationModel,
}

impl Topology {
    /// Coordinator `0x0000` and `sensor_count` already-associated sensors
    /// addressed `1..=sensor_count`, every store fully charged.
    pub fn star(sensor_count: u16, harvest: HarvestConfig) -> Self {
        let mut coordinator =
            CoordinatorState::new(ShortAddress(0), EnergyStore::coordinator(harvest));
        let sensors = (1..=sensor_count)
            .map(|a| {
                let addr = ShortAddress(a);
                coordinator.admit(addr).expect("member table has room");
                SensorState::associated(addr, EnergyStore::sensor(harvest))
            })
            .collect();
        Self {
            coordinator,
            sensors,
            propagation: PropagationModel::default(),
        }
    }

    pub fn with_propagation(mut self, propagation: PropagationModel) -> Self {
        self.propagation = propagation;
        self
    }

    pub fn sensor(&self, addr: ShortAddress) -> Option<&SensorState> {
        self.sensors.iter().find(|s| s.address == addr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{COORDINATOR_CAPACITY, SENSOR_CAPACITY};

    #[test]
    fn star_is_fully_joined_and_charged() {
        let t = Topology::star(12, HarvestConfig::default());
        assert_eq!(t.sensors.len(), 12);
        assert_eq!(t.coordinator.members().len(), 12);
        assert!(t.sensors.iter().all(|s| s.phase().is_member()));
        assert!(t
            .sensors
            .iter()
            .all(|s| s.energy.level() == SENSOR_CAPACITY));
        assert_eq!(t.coordinator.energy.level(), COORDINATOR_CAPACITY);
        assert!(t.sensor(ShortAddress(12)).is_some());
        assert!(t.sensor(ShortAddress(13)).is_none());
    }
}
