use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

pub const FS_PER_PS: u128 = 1_000;
pub const FS_PER_NS: u128 = 1_000_000;
pub const FS_PER_SECOND: u128 = 1_000_000_000_000_000;
pub const FS_PER_MINUTE: u128 = 60 * FS_PER_SECOND;

/// Virtual time in integer femtoseconds.
///
/// A ten-minute beacon interval is 6e20 fs, past the range of `u64`, so the
/// clock is 128 bits wide. Arithmetic never wraps: overflow or a negative
/// difference panics.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(u128);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_femtos(fs: u128) -> Self {
        SimTime(fs)
    }

    pub const fn from_picos(ps: u128) -> Self {
        SimTime(ps * FS_PER_PS)
    }

    pub const fn from_secs(s: u128) -> Self {
        SimTime(s * FS_PER_SECOND)
    }

    pub const fn from_minutes(min: u128) -> Self {
        SimTime(min * FS_PER_MINUTE)
    }

    /// Rounds to the nearest femtosecond. Negative or non-finite input is a bug.
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s.is_finite() && s >= 0.0, "invalid duration {s} s");
        SimTime((s * FS_PER_SECOND as f64).round() as u128)
    }

    pub const fn as_femtos(self) -> u128 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / FS_PER_SECOND as f64
    }

    pub fn as_minutes_f64(self) -> f64 {
        self.0 as f64 / FS_PER_MINUTE as f64
    }

    pub fn checked_add(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_add(rhs.0).map(SimTime)
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }

    pub fn checked_mul(self, factor: u128) -> Option<SimTime> {
        self.0.checked_mul(factor).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        self.checked_add(rhs).expect("SimTime overflow")
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        self.checked_sub(rhs).expect("SimTime underflow")
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fs", self.0)
    }
}
