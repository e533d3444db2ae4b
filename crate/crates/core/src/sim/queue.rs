use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

use super::SimTime;
use crate::frames::ShortAddress;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event at {at} is earlier than the clock ({now})")]
    PastEvent { at: SimTime, now: SimTime },
}

/// Closed set of things that can happen in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    BeaconDue,
    SlotBoundary,
    FrameArrival,
    HarvestSample,
    ExperimentCheckpoint,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::BeaconDue => "BeaconDue",
            EventKind::SlotBoundary => "SlotBoundary",
            EventKind::FrameArrival => "FrameArrival",
            EventKind::HarvestSample => "HarvestSample",
            EventKind::ExperimentCheckpoint => "ExperimentCheckpoint",
        }
    }
}

/// A scheduled occurrence. Events are totally ordered by `(at, seq)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
    pub target: ShortAddress,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One line of the replay log: `time_fs,seq,kind,target`.
impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.at.as_femtos(),
            self.seq,
            self.kind.name(),
            self.target.0
        )
    }
}

/// Pending-event set plus the virtual clock.
#[derive(Debug, Default)]
pub struct Scheduler {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Event>>,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.at)
    }

    /// Inserts an event and returns its sequence number.
    pub fn schedule(
        &mut self,
        at: SimTime,
        kind: EventKind,
        target: ShortAddress,
    ) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::PastEvent { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event {
            at,
            seq,
            kind,
            target,
        }));
        Ok(seq)
    }

    pub fn schedule_after(
        &mut self,
        delay: SimTime,
        kind: EventKind,
        target: ShortAddress,
    ) -> Result<u64, SimError> {
        self.schedule(self.now + delay, kind, target)
    }

    /// Removes the earliest event if it is due at or before `horizon` and
    /// advances the clock to it.
    fn pop_due(&mut self, horizon: SimTime) -> Option<Event> {
        match self.heap.peek() {
            Some(Reverse(e)) if e.at <= horizon => {
                let Reverse(event) = self.heap.pop()?;
                debug_assert!(event.at >= self.now);
                self.now = event.at;
                Some(event)
            }
            _ => None,
        }
    }
}

/// Receives every dispatched event and may schedule follow-ups.
pub trait Handler {
    fn handle(&mut self, event: &Event, scheduler: &mut Scheduler);
}

/// A single-threaded run: a world (`H`) driven by a [`Scheduler`].
pub struct Simulation<H> {
    scheduler: Scheduler,
    handler: H,
    trace: Option<Vec<Event>>,
}

impl<H: Handler> Simulation<H> {
    pub fn new(handler: H) -> Self {
        Self {
            scheduler: Scheduler::new(),
            handler,
            trace: None,
        }
    }

    /// Records every dispatched event for replay debugging.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn scheduler_mut(&mut self) -> &mut Scheduler {
        &mut self.scheduler
    }

    pub fn handler(&self) -> &H {
        &self.handler
    }

    pub fn handler_mut(&mut self) -> &mut H {
        &mut self.handler
    }

    pub fn now(&self) -> SimTime {
        self.scheduler.now
    }

    pub fn trace(&self) -> &[Event] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn into_parts(self) -> (H, Vec<Event>) {
        (self.handler, self.trace.unwrap_or_default())
    }

    /// Dispatches events in `(at, seq)` order until the queue is empty or the
    /// next event lies beyond `horizon`; events exactly at `horizon` run. The
    /// clock ends at `horizon`. Returns the number of events dispatched.
    pub fn run_until(&mut self, horizon: SimTime) -> Result<usize, SimError> {
        if horizon < self.scheduler.now {
            return Err(SimError::PastEvent {
                at: horizon,
                now: self.scheduler.now,
            });
        }
        let mut dispatched = 0;
        while let Some(event) = self.scheduler.pop_due(horizon) {
            if let Some(trace) = self.trace.as_mut() {
                trace.push(event);
            }
            self.handler.handle(&event, &mut self.scheduler);
            dispatched += 1;
        }
        self.scheduler.now = horizon;
        Ok(dispatched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default)]
    struct Recorder {
        seen: Vec<(SimTime, u64, EventKind)>,
    }

    impl Handler for Recorder {
        fn handle(&mut self, event: &Event, _: &mut Scheduler) {
            self.seen.push((event.at, event.seq, event.kind));
        }
    }

    struct Beaconer {
        interval: SimTime,
        beacons: usize,
    }

    impl Handler for Beaconer {
        fn handle(&mut self, event: &Event, scheduler: &mut Scheduler) {
            if event.kind == EventKind::BeaconDue {
                self.beacons += 1;
                scheduler
                    .schedule_after(self.interval, EventKind::BeaconDue, event.target)
                    .unwrap();
            }
        }
    }

    const NODE: ShortAddress = ShortAddress(0);

    #[test]
    fn now_runs_before_later_events() {
        let mut sim = Simulation::new(Recorder::default());
        let s = sim.scheduler_mut();
        s.schedule(SimTime::from_femtos(5), EventKind::SlotBoundary, NODE)
            .unwrap();
        s.schedule(SimTime::ZERO, EventKind::BeaconDue, NODE)
            .unwrap();
        sim.run_until(SimTime::from_femtos(10)).unwrap();
        let kinds: Vec<_> = sim.handler().seen.iter().map(|s| s.2).collect();
        assert_eq!(kinds, [EventKind::BeaconDue, EventKind::SlotBoundary]);
    }

    #[test]
    fn simultaneous_events_keep_insertion_order() {
        let mut sim = Simulation::new(Recorder::default());
        let t = SimTime::from_femtos(3);
        for kind in [
            EventKind::HarvestSample,
            EventKind::FrameArrival,
            EventKind::BeaconDue,
        ] {
            sim.scheduler_mut().schedule(t, kind, NODE).unwrap();
        }
        sim.run_until(t).unwrap();
        let seqs: Vec<_> = sim.handler().seen.iter().map(|s| s.1).collect();
        assert_eq!(seqs, [0, 1, 2]);
    }

    #[test]
    fn past_event_is_rejected() {
        let mut sim = Simulation::new(Recorder::default());
        sim.run_until(SimTime::from_femtos(100)).unwrap();
        let err = sim
            .scheduler_mut()
            .schedule(SimTime::from_femtos(99), EventKind::BeaconDue, NODE)
            .unwrap_err();
        assert_eq!(
            err,
            SimError::PastEvent {
                at: SimTime::from_femtos(99),
                now: SimTime::from_femtos(100)
            }
        );
    }

    #[test]
    fn empty_queue_jumps_to_horizon() {
        let mut sim = Simulation::new(Recorder::default());
        let n = sim.run_until(SimTime::from_minutes(3)).unwrap();
        assert_eq!(n, 0);
        assert_eq!(sim.now(), SimTime::from_minutes(3));
    }

    #[test]
    fn ten_beacons_in_a_hundred_minutes() {
        let interval = SimTime::from_minutes(10);
        let mut sim = Simulation::new(Beaconer {
            interval,
            beacons: 0,
        });
        sim.scheduler_mut()
            .schedule(interval, EventKind::BeaconDue, NODE)
            .unwrap();
        sim.run_until(SimTime::from_minutes(100)).unwrap();
        assert_eq!(sim.handler().beacons, 10);
    }

    #[test]
    fn trace_is_reproducible_and_monotone() {
        let run = || {
            let mut sim = Simulation::new(Beaconer {
                interval: SimTime::from_secs(7),
                beacons: 0,
            })
            .with_trace();
            sim.scheduler_mut()
                .schedule(SimTime::ZERO, EventKind::BeaconDue, ShortAddress(4))
                .unwrap();
            sim.run_until(SimTime::from_secs(60)).unwrap();
            sim.trace()
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("\n")
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.starts_with("0,0,BeaconDue,4\n7000000000000000,1,BeaconDue,4"));
        let times: Vec<u128> = a
            .lines()
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}
