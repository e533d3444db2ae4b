//! Scenario drivers that regenerate the evaluation tables as CSV.

mod contention;
mod harvest;
mod oracle;
mod plot;
mod sweep;
mod table;
mod tsook;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::DEFAULT_HARVEST_RATE_PJ_PER_MIN;
use crate::mac::{BackoffConfig, SlotAccess, CAP_SLOTS};
use crate::sim::SimError;

pub use contention::{contention_compare, find_crossovers, linear_fit, ContentionRow, LinearFit};
pub use harvest::{harvest_curve_experiment, HarvestSpec};
pub use oracle::{analytic_success_rate, coordinator_budget_pj};
pub use plot::{svg_line_plot, Series};
pub use sweep::{
    duration_sweep, oracle_grid_check, packet_size_sweep, simulate_point, write_point_ledgers,
    OracleReport, PointResult, SweepOptions, SweepPoint,
};
pub use table::{format_sig, Table};
pub use tsook::{tsook_trace, TsookSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidSpec {
        field,
        reason: reason.into(),
    }
}

/// Grid for the superframe-completion sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub durations: Vec<u32>,
    pub concurrent_slots: Vec<usize>,
    pub packet_scales: Vec<f64>,
    pub superframes_per_point: u64,
    pub harvest_rate_pj_per_min: f64,
    pub slot_access: SlotAccess,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            durations: vec![8, 10, 12],
            concurrent_slots: (1..=CAP_SLOTS).collect(),
            packet_scales: vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.5],
            superframes_per_point: 1000,
            harvest_rate_pj_per_min: DEFAULT_HARVEST_RATE_PJ_PER_MIN,
            slot_access: SlotAccess::BeaconScheduled,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.durations.is_empty() || self.durations.contains(&0) {
            return Err(invalid(
                "durations",
                "need at least one positive duration in minutes",
            ));
        }
        if self.concurrent_slots.is_empty()
            || self
                .concurrent_slots
                .iter()
                .any(|m| !(1..=CAP_SLOTS).contains(m))
        {
            return Err(invalid(
                "concurrent_slots",
                "every value must lie in 1..=15",
            ));
        }
        if self.packet_scales.is_empty()
            || self.packet_scales.iter().any(|s| !(0.5..=1.0).contains(s))
        {
            return Err(invalid(
                "packet_scales",
                "every value must lie in [0.5, 1.0]",
            ));
        }
        if self.superframes_per_point == 0 {
            return Err(invalid("superframes_per_point", "must be positive"));
        }
        if !(self.harvest_rate_pj_per_min > 0.0 && self.harvest_rate_pj_per_min.is_finite()) {
            return Err(invalid("harvest_rate_pj_per_min", "must be positive"));
        }
        if let SlotAccess::Contention(b) = self.slot_access {
            b.validate()
                .map_err(|e| invalid("slot_access", e.to_string()))?;
        }
        Ok(())
    }
}

/// Contention-versus-round-robin comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentionSpec {
    pub population: usize,
    pub request_rates: Vec<f64>,
    pub trials_per_rate: u64,
    pub backoff: BackoffConfig,
    pub seed: u64,
}

impl Default for ContentionSpec {
    fn default() -> Self {
        Self {
            population: 100,
            request_rates: (1..=50).map(|i| f64::from(i) / 100.0).collect(),
            trials_per_rate: 10_000,
            backoff: BackoffConfig::default(),
            seed: 0,
        }
    }
}

impl ContentionSpec {
    /// Requesters per slot at rate `p`.
    pub fn contenders(&self, rate: f64) -> usize {
        (rate * self.population as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.population == 0 || self.population > usize::from(u16::MAX) {
            return Err(invalid("population", "must lie in 1..=65535"));
        }
        if self.request_rates.is_empty() {
            return Err(invalid("request_rates", "need at least one rate"));
        }
        for &p in &self.request_rates {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid("request_rates", format!("{p} outside (0, 1]")));
            }
            if self.contenders(p) < 1 {
                return Err(invalid(
                    "request_rates",
                    format!("{p} x {} rounds to zero contenders", self.population),
                ));
            }
        }
        if self.trials_per_rate == 0 {
            return Err(invalid("trials_per_rate", "must be positive"));
        }
        self.backoff
            .validate()
            .map_err(|e| invalid("backoff", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(SweepSpec::default().validate().is_ok());
        assert!(ContentionSpec::default().validate().is_ok());
        assert_eq!(SweepSpec::default().concurrent_slots.len(), 15);
        assert_eq!(ContentionSpec::default().request_rates.len(), 50);
    }

    #[test]
    fn sweep_ranges_checked() {
        let s = SweepSpec {
            packet_scales: vec![0.4],
            ..Default::default()
        };
        assert!(matches!(
            s.validate(),
            Err(ExperimentError::InvalidSpec {
                field: "packet_scales",
                ..
            })
        ));
        let s = SweepSpec {
            concurrent_slots: vec![16],
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn contention_needs_a_contender() {
        let s = ContentionSpec {
            population: 10,
            request_rates: vec![0.01],
            ..Default::default()
        };
        assert!(s.validate().is_err());
        assert_eq!(ContentionSpec::default().contenders(0.05), 5);
    }

    #[test]
    fn json_field_names() {
        let s: SweepSpec =
            serde_json::from_str(r#"{"durations":[12],"packet_scales":[0.5],"seed":9}"#).unwrap();
        assert_eq!(s.durations, vec![12]);
        assert_eq!(s.seed, 9);
        assert_eq!(s.superframes_per_point, 1000);
        assert!(serde_json::from_str::<SweepSpec>(r#"{"bogus":1}"#).is_err());
        let c: ContentionSpec =
            serde_json::from_str(r#"{"population":50,"backoff":{"backoff_exponent":4}}"#).unwrap();
        assert_eq!(c.backoff.window(), 16);
    }
}
