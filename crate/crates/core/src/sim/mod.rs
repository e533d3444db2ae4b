//! Deterministic discrete-event engine.
//!
//! The clock counts integer femtoseconds, events are dispatched in
//! `(time, insertion sequence)` order, and every random draw comes from a
//! [`RandomStream`] derived from a master seed, so a `(seed, config)` pair
//! fully determines a run.

mod queue;
mod rng;
mod time;
mod topology;

pub use queue::{Event, EventKind, Handler, Scheduler, SimError, Simulation};
pub use rng::{derive_stream_seed, RandomStream};
pub use time::{SimTime, FS_PER_MINUTE, FS_PER_NS, FS_PER_PS, FS_PER_SECOND};
pub use topology::Topology;
