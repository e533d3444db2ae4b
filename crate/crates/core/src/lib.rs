//! Energy-harvesting MAC simulation for terahertz nano-sensor networks.
//!
//! A coordinator and its nano-sensors share a beacon-enabled superframe.
//! Every node runs off an energy-harvesting capacitor, and the coordinator
//! skips a superframe when it cannot afford one. The crate provides:
//! - frame codecs
//! - the pulse-level channel
//! - the energy model
//! - the MAC state machines
//! - a deterministic discrete-event engine
//! - the experiment drivers built on top of them.

pub mod channel;
pub mod energy;
pub mod experiments;
pub mod frames;
pub mod mac;
pub mod sim;

pub use channel::{PropagationModel, PulseTrain, SlotOutcome};
pub use energy::{Energy, EnergyStore, HarvestConfig, PulseEnergyParams, RxMode};
pub use experiments::{ContentionSpec, SweepSpec, Table};
pub use frames::{FrameKind, MacFrame, PacketScale, ShortAddress};
pub use mac::{BackoffConfig, CoordinatorState, SensorState, SlotAccess, SuperframeConfig};
pub use sim::{RandomStream, SimTime, Topology};
