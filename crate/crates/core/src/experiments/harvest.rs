use serde::{Deserialize, Serialize};

use crate::energy::{harvested_energy, Energy, HarvestConfig, SENSOR_CAPACITY};
use crate::frames::ShortAddress;
use crate::sim::{Event, EventKind, Handler, Scheduler, SimTime, Simulation};

use super::{invalid, ExperimentError, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestSpec {
    pub frequencies_hz: Vec<f64>,
    pub horizon_s: u64,
    pub sample_step_s: u64,
}

impl Default for HarvestSpec {
    fn default() -> Self {
        Self {
            frequencies_hz: vec![1.0, 50.0],
            horizon_s: 3000,
            sample_step_s: 1,
        }
    }
}

impl HarvestSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.frequencies_hz.is_empty()
            || self
                .frequencies_hz
                .iter()
                .any(|f| !(*f > 0.0 && f.is_finite()))
        {
            return Err(invalid("frequencies_hz", "need positive frequencies"));
        }
        if self.horizon_s == 0 {
            return Err(invalid("horizon_s", "must be positive"));
        }
        if self.sample_step_s == 0 {
            return Err(invalid("sample_step_s", "must be positive"));
        }
        Ok(())
    }
}

struct Sampler {
    harvests: Vec<HarvestConfig>,
    step: SimTime,
    horizon: SimTime,
    table: Table,
}

impl Handler for Sampler {
    fn handle(&mut self, event: &Event, scheduler: &mut Scheduler) {
        if event.kind != EventKind::HarvestSample {
            return;
        }
        let mut row = vec![event.at.as_secs_f64()];
        for h in &self.harvests {
            let level = harvested_energy(event.at, Energy::ZERO, h, SENSOR_CAPACITY);
            row.push(level.picojoules());
        }
        self.table.push(row);
        if event.at + self.step <= self.horizon {
            scheduler
                .schedule_after(self.step, EventKind::HarvestSample, event.target)
                .expect("future sample");
        }
    }
}

/// Charge of an initially empty 800 pJ store, one column per cycle frequency.
///
/// Returns the table and the event trace.
pub fn harvest_curve_experiment(
    spec: &HarvestSpec,
) -> Result<(Table, Vec<Event>), ExperimentError> {
    spec.validate()?;
    let mut header = vec!["time_s".to_string()];
    header.extend(
        spec.frequencies_hz
            .iter()
            .map(|f| format!("energy_pJ_{}Hz", super::format_sig(*f))),
    );
    let sampler = Sampler {
        harvests: spec
            .frequencies_hz
            .iter()
            .map(|&f| HarvestConfig::saturating(f))
            .collect(),
        step: SimTime::from_secs(u128::from(spec.sample_step_s)),
        horizon: SimTime::from_secs(u128::from(spec.horizon_s)),
        table: Table::new(header),
    };
    let horizon = sampler.horizon;
    let mut sim = Simulation::new(sampler).with_trace();
    sim.scheduler_mut()
        .schedule(SimTime::ZERO, EventKind::HarvestSample, ShortAddress(0))?;
    sim.run_until(horizon)?;
    let (sampler, trace) = sim.into_parts();
    Ok((sampler.table, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(table: &Table, t: f64, col: usize) -> f64 {
        table.rows.iter().find(|r| r[0] == t).unwrap()[col]
    }

    #[test]
    fn reference_points() {
        let (t, trace) = harvest_curve_experiment(&HarvestSpec::default()).unwrap();
        assert_eq!(t.header, ["time_s", "energy_pJ_1Hz", "energy_pJ_50Hz"]);
        assert_eq!(t.rows.len(), 3001);
        assert_eq!(trace.len(), 3001);
        assert_eq!(at(&t, 0.0, 1), 0.0);
        assert_eq!(at(&t, 0.0, 2), 0.0);
        assert!((at(&t, 2419.0, 1) - 760.0).abs() <= 760.0 * 1e-6);
        let first_95 = t.rows.iter().find(|r| r[2] >= 760.0).unwrap()[0];
        assert!((46.0..=50.0).contains(&first_95), "{first_95}");
    }

    #[test]
    fn columns_are_monotone_and_bounded() {
        let spec = HarvestSpec {
            frequencies_hz: vec![0.5, 1.0, 5.0, 50.0],
            horizon_s: 600,
            sample_step_s: 7,
        };
        let (t, _) = harvest_curve_experiment(&spec).unwrap();
        for c in 1..=4 {
            let col: Vec<f64> = t.rows.iter().map(|r| r[c]).collect();
            assert!(col.windows(2).all(|w| w[0] <= w[1]));
            assert!(col.iter().all(|&x| (0.0..=800.0).contains(&x)));
        }
        assert_eq!(t.rows.last().unwrap()[0], 595.0);
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = HarvestSpec {
            sample_step_s: 0,
            ..Default::default()
        };
        assert!(harvest_curve_experiment(&spec).is_err());
    }
}
