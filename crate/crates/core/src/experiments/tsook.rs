use serde::{Deserialize, Serialize};

use crate::channel::{
    arrivals, overlapping_pairs, propagation_delay, PropagationModel, PulseTrain, ReceivedTrain,
};
use crate::sim::SimTime;

use super::{invalid, ExperimentError, Table};

/// Interleaved TS-OOK transmissions seen by one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsookSpec {
    pub sequences: Vec<String>,
    pub start_offsets_fs: Vec<u64>,
    pub symbol_spacing_fs: u64,
    pub pulse_width_fs: u64,
    pub distance_mm: f64,
}

impl Default for TsookSpec {
    fn default() -> Self {
        Self {
            sequences: vec!["101001".into(), "110001".into(), "100101".into()],
            start_offsets_fs: vec![0, 10_000, 20_000],
            symbol_spacing_fs: 100_000,
            pulse_width_fs: 100,
            distance_mm: 10.0,
        }
    }
}

impl TsookSpec {
    fn trains(&self) -> Result<Vec<ReceivedTrain>, ExperimentError> {
        if self.sequences.len() != self.start_offsets_fs.len() {
            return Err(invalid("start_offsets_fs", "need one offset per sequence"));
        }
        let model = PropagationModel {
            distance_mm: self.distance_mm,
            ..Default::default()
        };
        model
            .validate()
            .map_err(|e| invalid("distance_mm", e.to_string()))?;
        let delay = propagation_delay(&model);
        self.sequences
            .iter()
            .zip(&self.start_offsets_fs)
            .map(|(bits, &start)| {
                let train = PulseTrain::from_bit_str(SimTime::from_femtos(u128::from(start)), bits)
                    .map_err(|e| invalid("sequences", e.to_string()))?
                    .with_timing(
                        SimTime::from_femtos(u128::from(self.symbol_spacing_fs)),
                        SimTime::from_femtos(u128::from(self.pulse_width_fs)),
                    );
                train
                    .validate()
                    .map_err(|e| invalid("symbol_spacing_fs", e.to_string()))?;
                Ok(ReceivedTrain { train, delay })
            })
            .collect()
    }
}

/// Every pulse arrival in time order, flagged when it overlaps a pulse of
/// another train. Returns the table and the number of overlapping pairs.
pub fn tsook_trace(spec: &TsookSpec) -> Result<(Table, usize), ExperimentError> {
    let trains = spec.trains()?;
    let pairs = overlapping_pairs(&trains);
    let mut pulses = arrivals(&trains);
    pulses.sort();
    let mut table = Table::new(["arrival_fs", "train", "symbol_index", "collided"]);
    for p in &pulses {
        let hit = pairs.iter().any(|(a, b)| a == p || b == p);
        table.push(vec![
            p.at.as_femtos() as f64,
            p.train as f64,
            p.symbol_index as f64,
            f64::from(u8::from(hit)),
        ]);
    }
    Ok((table, pairs.len()))
}
