//! Physical channel at two resolutions.
//!
//! The pulse level models TS-OOK: a `1` is a ~100 fs pulse, a `0` is
//! silence, and symbols are spaced `T_s` apart. Interleaved transmissions
//! from several senders are decodable as long as no two pulses from
//! different trains overlap at the receiver. The slot level is the raw
//! truth used by the MAC: nobody, exactly one, or several transmitters in a
//! slot. The medium is lossless and noise-free.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::ShortAddress;
use crate::sim::SimTime;

pub const DEFAULT_SYMBOL_SPACING: SimTime = SimTime::from_picos(100);
pub const DEFAULT_PULSE_WIDTH: SimTime = SimTime::from_femtos(100);
pub const MAX_RANGE_MM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("symbol spacing {spacing} must exceed pulse width {width}")]
    SpacingTooSmall { spacing: SimTime, width: SimTime },
    #[error("pulse width must be positive")]
    ZeroPulseWidth,
    #[error("distance {0} mm outside [0, 10] mm")]
    OutOfRange(f64),
    #[error("propagation speed must be positive, got {0}")]
    InvalidSpeed(f64),
    #[error("bit string may contain only '0' and '1'")]
    InvalidBits,
}

/// One TS-OOK transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrain {
    pub start: SimTime,
    pub symbol_spacing: SimTime,
    pub pulse_width: SimTime,
    pub bits: Vec<bool>,
}

impl PulseTrain {
    /// Train with the default 100 ps spacing and 100 fs pulses.
    pub fn new(start: SimTime, bits: Vec<bool>) -> Self {
        Self {
            start,
            symbol_spacing: DEFAULT_SYMBOL_SPACING,
            pulse_width: DEFAULT_PULSE_WIDTH,
            bits,
        }
    }

    pub fn from_bit_str(start: SimTime, bits: &str) -> Result<Self, ChannelError> {
        let bits = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(ChannelError::InvalidBits),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(start, bits))
    }

    pub fn with_timing(mut self, symbol_spacing: SimTime, pulse_width: SimTime) -> Self {
        self.symbol_spacing = symbol_spacing;
        self.pulse_width = pulse_width;
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.pulse_width == SimTime::ZERO {
            return Err(ChannelError::ZeroPulseWidth);
        }
        if self.symbol_spacing <= self.pulse_width {
            return Err(ChannelError::SpacingTooSmall {
                spacing: self.symbol_spacing,
                width: self.pulse_width,
            });
        }
        Ok(())
    }

    /// Symbol spread ratio `T_s / T_p`.
    pub fn beta(&self) -> f64 {
        self.symbol_spacing.as_femtos() as f64 / self.pulse_width.as_femtos() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    pub distance_mm: f64,
    pub speed_m_per_s: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            distance_mm: MAX_RANGE_MM,
            speed_m_per_s: 3.0e8,
        }
    }
}

impl PropagationModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..=MAX_RANGE_MM).contains(&self.distance_mm) {
            return Err(ChannelError::OutOfRange(self.distance_mm));
        }
        if !(self.speed_m_per_s > 0.0 && self.speed_m_per_s.is_finite()) {
            return Err(ChannelError::InvalidSpeed(self.speed_m_per_s));
        }
        Ok(())
    }
}

/// `distance / speed`, rounded to the nearest femtosecond.
pub fn propagation_delay(model: &PropagationModel) -> SimTime {
    // mm -> m is 1e-3, s -> fs is 1e15
    SimTime::from_femtos((model.distance_mm * 1e12 / model.speed_m_per_s).round() as u128)
}

/// Arrival instant of every pulse (every `1` bit), ascending.
pub fn pulse_arrival_times(train: &PulseTrain, delay: SimTime) -> Vec<SimTime> {
    let first = train.start + delay;
    train
        .bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| {
            let offset = train
                .symbol_spacing
                .checked_mul(i as u128)
                .expect("SimTime overflow");
            first + offset
        })
        .collect()
}

/// A train as seen by one receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedTrain {
    pub train: PulseTrain,
    pub delay: SimTime,
}

/// One pulse at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Arrival {
    pub at: SimTime,
    pub train: usize,
    pub symbol_index: usize,
    pub width: SimTime,
}

pub fn arrivals(received: &[ReceivedTrain]) -> Vec<Arrival> {
    let mut out = Vec::new();
    for (train_id, rt) in received.iter().enumerate() {
        let first = rt.train.start + rt.delay;
        for (i, _) in rt.train.bits.iter().enumerate().filter(|(_, &b)| b) {
            out.push(Arrival {
                at: first
                    + rt.train
                        .symbol_spacing
                        .checked_mul(i as u128)
                        .expect("SimTime overflow"),
                train: train_id,
                symbol_index: i,
                width: rt.train.pulse_width,
            });
        }
    }
    out
}

/// Unordered pairs of pulses from different trains that overlap in time.
///
/// A pulse occupies `[at, at + width)`, so equal-width pulses collide when
/// their arrivals differ by strictly less than the width. Runs a sorted
/// sweep: after sorting by arrival, only the pulses starting inside the
/// current pulse's interval need to be checked.
pub fn overlapping_pairs(received: &[ReceivedTrain]) -> Vec<(Arrival, Arrival)> {
    let mut pulses = arrivals(received);
    pulses.sort();
    let mut pairs = Vec::new();
    for (i, a) in pulses.iter().enumerate() {
        let end = a.at + a.width;
        for b in pulses[i + 1..].iter().take_while(|b| b.at < end) {
            if b.train != a.train {
                pairs.push((*a, *b));
            }
        }
    }
    pairs
}

pub fn detect_collisions(received: &[ReceivedTrain]) -> usize {
    overlapping_pairs(received).len()
}

/// Slot-level channel outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotOutcome {
    Idle,
    Success(ShortAddress),
    Collision(usize),
}

impl SlotOutcome {
    pub fn is_success(self) -> bool {
        matches!(self, SlotOutcome::Success(_))
    }
}

/// What the channel delivers when the listed nodes transmit in one slot.
pub fn slot_transmit<F>(transmissions: &[(ShortAddress, F)]) -> SlotOutcome {
    match transmissions {
        [] => SlotOutcome::Idle,
        [(node, _)] => SlotOutcome::Success(*node),
        many => SlotOutcome::Collision(many.len()),
    }
}
