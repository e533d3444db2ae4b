use rayon::prelude::*;

use crate::energy::{HarvestConfig, PulseEnergyParams};
use crate::frames::PacketScale;
use crate::mac::{run_superframe, LedgerRow, SlotAccess, SuperframeConfig, SuperframeStatus};
use crate::sim::{
    derive_stream_seed, Event, EventKind, Handler, RandomStream, Scheduler, SimTime, Simulation,
    Topology,
};

use super::{analytic_success_rate, format_sig, ExperimentError, SweepSpec, Table};

/// One grid cell of a completion sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub duration_minutes: u32,
    pub packet_scale: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    pub keep_ledger: bool,
    pub keep_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: SweepPoint,
    pub completed: u64,
    pub total: u64,
    pub ledger: Vec<LedgerRow>,
    pub trace: Vec<Event>,
}

impl PointResult {
    pub fn success_rate(&self) -> f64 {
        self.completed as f64 / self.total as f64
    }
}

struct BeaconLoop {
    world: Topology,
    config: SuperframeConfig,
    params: PulseEnergyParams,
    rng: RandomStream,
    last_beacon: SimTime,
    index: u64,
    total: u64,
    completed: u64,
    ledger: Option<Vec<LedgerRow>>,
}

impl Handler for BeaconLoop {
    fn handle(&mut self, event: &Event, scheduler: &mut Scheduler) {
        if event.kind != EventKind::BeaconDue {
            return;
        }
        let elapsed = event.at - self.last_beacon;
        self.last_beacon = event.at;
        self.world.coordinator.energy.harvest(elapsed);
        for s in &mut self.world.sensors {
            s.energy.harvest(elapsed);
        }
        let result = run_superframe(
            self.index,
            &mut self.world.coordinator,
            &mut self.world.sensors,
            &self.config,
            &self.params,
            &mut self.rng,
        );
        if result.status == SuperframeStatus::Completed {
            self.completed += 1;
        }
        if let Some(ledger) = self.ledger.as_mut() {
            ledger.push(result.ledger_row());
        }
        self.index += 1;
        if self.index < self.total {
            scheduler
                .schedule_after(self.config.duration(), EventKind::BeaconDue, event.target)
                .expect("next beacon lies in the future");
        }
    }
}

/// Runs `superframes` beacon intervals of one grid cell.
///
/// Every node starts fully charged, the first beacon goes out at time zero,
/// and all stores harvest linearly between beacons.
pub fn simulate_point(
    point: SweepPoint,
    superframes: u64,
    harvest_rate_pj_per_min: f64,
    access: SlotAccess,
    seed: u64,
    options: SweepOptions,
) -> Result<PointResult, ExperimentError> {
    let scale = PacketScale::new(point.packet_scale)
        .map_err(|e| super::invalid("packet_scales", e.to_string()))?;
    let harvest = HarvestConfig::LinearRate {
        pj_per_minute: harvest_rate_pj_per_min,
    };
    let world = Topology::star(point.m as u16, harvest);
    let config = SuperframeConfig {
        duration_minutes: point.duration_minutes,
        packet_scale: scale,
        access,
    };
    let coordinator = world.coordinator.address;
    let handler = BeaconLoop {
        world,
        config,
        params: PulseEnergyParams::default(),
        rng: RandomStream::new(seed, 0),
        last_beacon: SimTime::ZERO,
        index: 0,
        total: superframes,
        completed: 0,
        ledger: options.keep_ledger.then(Vec::new),
    };
    let mut sim = Simulation::new(handler);
    if options.keep_trace {
        sim = sim.with_trace();
    }
    sim.scheduler_mut()
        .schedule(SimTime::ZERO, EventKind::BeaconDue, coordinator)?;
    let last = config
        .duration()
        .checked_mul(u128::from(superframes.saturating_sub(1)))
        .expect("horizon fits in SimTime");
    sim.run_until(last)?;
    let (handler, trace) = sim.into_parts();
    Ok(PointResult {
        point,
        completed: handler.completed,
        total: handler.index,
        ledger: handler.ledger.unwrap_or_default(),
        trace,
    })
}

fn run_grid(
    spec: &SweepSpec,
    points: Vec<SweepPoint>,
    options: SweepOptions,
) -> Result<Vec<PointResult>, ExperimentError> {
    spec.validate()?;
    points
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| {
            simulate_point(
                p,
                spec.superframes_per_point,
                spec.harvest_rate_pj_per_min,
                spec.slot_access,
                derive_stream_seed(spec.seed, i as u64),
                options,
            )
        })
        .collect()
}

fn grid(spec: &SweepSpec, scales: &[f64]) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &d in &spec.durations {
        for &s in scales {
            for &m in &spec.concurrent_slots {
                points.push(SweepPoint {
                    duration_minutes: d,
                    packet_scale: s,
                    m,
                });
            }
        }
    }
    points
}

/// Completion rate over durations and slot counts at full packet size.
pub fn duration_sweep(
    spec: &SweepSpec,
    options: SweepOptions,
) -> Result<(Table, Vec<PointResult>), ExperimentError> {
    let results = run_grid(spec, grid(spec, &[1.0]), options)?;
    let mut table = Table::new(["duration_min", "m", "success_rate"]);
    for r in &results {
        table.push(vec![
            f64::from(r.point.duration_minutes),
            r.point.m as f64,
            r.success_rate(),
        ]);
    }
    Ok((table, results))
}

/// Completion rate over durations, packet scales and slot counts.
pub fn packet_size_sweep(
    spec: &SweepSpec,
    options: SweepOptions,
) -> Result<(Table, Vec<PointResult>), ExperimentError> {
    let results = run_grid(spec, grid(spec, &spec.packet_scales), options)?;
    let mut table = Table::new(["duration_min", "scale", "m", "success_rate"]);
    for r in &results {
        table.push(vec![
            f64::from(r.point.duration_minutes),
            r.point.packet_scale,
            r.point.m as f64,
            r.success_rate(),
        ]);
    }
    Ok((table, results))
}

/// Per-superframe ledgers of several grid cells, each row prefixed by its
/// cell's duration and packet scale.
pub fn write_point_ledgers<W: std::io::Write>(out: W, results: &[PointResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "duration_min",
        "scale",
        "superframe_index",
        "status",
        "m",
        "budget_pJ",
        "coordinator_level_pJ",
        "success_slots",
        "collision_slots",
        "idle_slots",
    ])?;
    for r in results {
        for row in &r.ledger {
            w.write_record([
                r.point.duration_minutes.to_string(),
                format_sig(r.point.packet_scale),
                row.superframe_index.to_string(),
                row.status.to_string(),
                row.m.to_string(),
                format_sig(row.budget_pj),
                format_sig(row.coordinator_level_pj),
                row.success_slots.to_string(),
                row.collision_slots.to_string(),
                row.idle_slots.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub max_deviation: f64,
    pub worst: SweepPoint,
    pub table: Table,
}

/// Largest `|simulated - analytic|` over the full sweep grid.
pub fn oracle_grid_check(spec: &SweepSpec) -> Result<OracleReport, ExperimentError> {
    let results = run_grid(
        spec,
        grid(spec, &spec.packet_scales),
        SweepOptions::default(),
    )?;
    let mut table = Table::new([
        "duration_min",
        "scale",
        "m",
        "simulated",
        "analytic",
        "deviation",
    ]);
    let mut max_deviation = -1.0;
    let mut worst = results[0].point;
    for r in &results {
        let p = r.point;
        let analytic = analytic_success_rate(
            p.m,
            p.packet_scale,
            f64::from(p.duration_minutes),
            spec.harvest_rate_pj_per_min,
        );
        let dev = (r.success_rate() - analytic).abs();
        if dev > max_deviation {
            max_deviation = dev;
            worst = p;
        }
        table.push(vec![
            f64::from(p.duration_minutes),
            p.packet_scale,
            p.m as f64,
            r.success_rate(),
            analytic,
            dev,
        ]);
    }
    Ok(OracleReport {
        max_deviation,
        worst,
        table,
    })
}
