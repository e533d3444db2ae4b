//! Pulse-level energy accounting and the nanocapacitor harvesting model.
//!
//! Energy is carried as integer femtojoules ([`Energy`]); every nominal
//! per-frame cost is an exact multiple of 10 fJ, so frame budgets compare
//! without tolerance. The saturating charge curve is evaluated in `f64`
//! picojoules and rounded to the nearest femtojoule.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{FrameKind, PacketScale};
use crate::sim::{SimTime, FS_PER_MINUTE};

pub const FJ_PER_PJ: u64 = 1_000;

/// 800 pJ ultra-nanocapacitor of a sensor.
pub const SENSOR_CAPACITY: Energy = Energy(800 * FJ_PER_PJ);
/// The coordinator stores twice a sensor's energy.
pub const COORDINATOR_CAPACITY: Energy = Energy(1_600 * FJ_PER_PJ);

/// Harvest rate giving 299.43 pJ per ten minutes.
pub const DEFAULT_HARVEST_RATE_PJ_PER_MIN: f64 = 29.943;

/// Per-cycle charge constant of the saturating curve, fitted so that a
/// 1 Hz source fills 95 % of the store after 2419 s:
/// `alpha = -ln(1 - sqrt(0.95)) / 2419`.
pub const DEFAULT_ALPHA: f64 = 0.001_519_693_405_158_276;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("insufficient energy: need {requested}, have {available}")]
    InsufficientEnergy {
        requested: Energy,
        available: Energy,
    },
    #[error("invalid energy parameter: {0}")]
    InvalidParameter(&'static str),
}

/// An amount of energy in integer femtojoules.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Energy(u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub const fn from_femtojoules(fj: u64) -> Self {
        Energy(fj)
    }

    /// Rounds to the nearest femtojoule.
    pub fn from_picojoules(pj: f64) -> Self {
        assert!(pj.is_finite() && pj >= 0.0, "invalid energy {pj} pJ");
        Energy((pj * FJ_PER_PJ as f64).round() as u64)
    }

    pub const fn femtojoules(self) -> u64 {
        self.0
    }

    pub fn picojoules(self) -> f64 {
        self.0 as f64 / FJ_PER_PJ as f64
    }

    pub fn checked_sub(self, rhs: Energy) -> Option<Energy> {
        self.0.checked_sub(rhs.0).map(Energy)
    }

    pub fn saturating_sub(self, rhs: Energy) -> Energy {
        Energy(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Energy {
    type Output = Energy;

    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0.checked_add(rhs.0).expect("energy overflow"))
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        *self = *self + rhs;
    }
}

impl Sub for Energy {
    type Output = Energy;

    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0.checked_sub(rhs.0).expect("energy underflow"))
    }
}

impl Mul<u64> for Energy {
    type Output = Energy;

    fn mul(self, rhs: u64) -> Energy {
        Energy(self.0.checked_mul(rhs).expect("energy overflow"))
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, Add::add)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} pJ", self.picojoules())
    }
}

/// How reception energy per bit is derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RxMode {
    /// `rx_per_bit_pj` as configured (0.01 pJ/bit by default), matching the
    /// nominal per-frame receiver costs.
    Calibrated,
    /// One tenth of the per-pulse transmit energy per bit.
    TenthOfTxPulse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEnergyParams {
    pub tx_pulse_pj: f64,
    pub rx_per_bit_pj: f64,
    /// Probability that a symbol is a 1 (i.e. a pulse is emitted).
    pub symbol_one_probability: f64,
    pub rx_mode: RxMode,
}

impl Default for PulseEnergyParams {
    fn default() -> Self {
        Self {
            tx_pulse_pj: 1.0,
            rx_per_bit_pj: 0.01,
            symbol_one_probability: 0.5,
            rx_mode: RxMode::Calibrated,
        }
    }
}

impl PulseEnergyParams {
    pub fn with_rx_mode(mut self, rx_mode: RxMode) -> Self {
        self.rx_mode = rx_mode;
        self
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if !(self.tx_pulse_pj > 0.0 && self.tx_pulse_pj.is_finite()) {
            return Err(EnergyError::InvalidParameter(
                "tx pulse energy must be positive",
            ));
        }
        if !(self.rx_per_bit_pj > 0.0 && self.rx_per_bit_pj.is_finite()) {
            return Err(EnergyError::InvalidParameter(
                "rx energy per bit must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.symbol_one_probability) {
            return Err(EnergyError::InvalidParameter(
                "symbol probability must lie in [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn effective_rx_per_bit_pj(&self) -> f64 {
        match self.rx_mode {
            RxMode::Calibrated => self.rx_per_bit_pj,
            RxMode::TenthOfTxPulse => self.tx_pulse_pj / 10.0,
        }
    }
}

/// `scale * bits * w * E_tx_pulse`.
pub fn tx_energy(bits: u32, scale: PacketScale, params: &PulseEnergyParams) -> Energy {
    Energy::from_picojoules(
        scale.get() * f64::from(bits) * params.symbol_one_probability * params.tx_pulse_pj,
    )
}

/// `scale * bits * rx_per_bit`, with the per-bit cost chosen by `rx_mode`.
pub fn rx_energy(bits: u32, scale: PacketScale, params: &PulseEnergyParams) -> Energy {
    Energy::from_picojoules(scale.get() * f64::from(bits) * params.effective_rx_per_bit_pj())
}

pub fn frame_tx_energy(kind: FrameKind, scale: PacketScale, params: &PulseEnergyParams) -> Energy {
    tx_energy(kind.base_bits(), scale, params)
}

pub fn frame_rx_energy(kind: FrameKind, scale: PacketScale, params: &PulseEnergyParams) -> Energy {
    rx_energy(kind.base_bits(), scale, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HarvestConfig {
    /// Constant income, capped at capacity. The rate is applied at whole
    /// femtojoule-per-minute resolution.
    LinearRate { pj_per_minute: f64 },
    /// `E(n) = capacity * (1 - exp(-alpha * n))^2` after `n` vibration cycles.
    SaturatingCurve { cycle_frequency_hz: f64, alpha: f64 },
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig::LinearRate {
            pj_per_minute: DEFAULT_HARVEST_RATE_PJ_PER_MIN,
        }
    }
}

impl HarvestConfig {
    pub fn saturating(cycle_frequency_hz: f64) -> Self {
        HarvestConfig::SaturatingCurve {
            cycle_frequency_hz,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        match *self {
            HarvestConfig::LinearRate { pj_per_minute } => {
                if !(pj_per_minute > 0.0 && pj_per_minute.is_finite()) {
                    return Err(EnergyError::InvalidParameter(
                        "harvest rate must be positive",
                    ));
                }
            }
            HarvestConfig::SaturatingCurve {
                cycle_frequency_hz,
                alpha,
            } => {
                if !(cycle_frequency_hz > 0.0 && cycle_frequency_hz.is_finite()) {
                    return Err(EnergyError::InvalidParameter(
                        "cycle frequency must be positive",
                    ));
                }
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(EnergyError::InvalidParameter("alpha must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// Alpha that reaches `fraction` of capacity after `cycles` cycles.
pub fn calibrate_alpha(fraction: f64, cycles: f64) -> f64 {
    -(1.0 - fraction.sqrt()).ln() / cycles
}

/// Seconds for a store charging from empty to reach `fraction` of capacity.
pub fn charge_time_secs(fraction: f64, cycle_frequency_hz: f64, alpha: f64) -> f64 {
    -(1.0 - fraction.sqrt()).ln() / (alpha * cycle_frequency_hz)
}

/// Saturating curve resumed from `start_pj`: the start level is converted to
/// its equivalent cycle count and charging continues from there.
pub fn saturating_charge_pj(
    start_pj: f64,
    capacity_pj: f64,
    cycle_frequency_hz: f64,
    alpha: f64,
    elapsed_secs: f64,
) -> f64 {
    if start_pj >= capacity_pj {
        return capacity_pj;
    }
    let start_cycles = if start_pj <= 0.0 {
        0.0
    } else {
        -(1.0 - (start_pj / capacity_pj).sqrt()).ln() / alpha
    };
    let n = start_cycles + cycle_frequency_hz * elapsed_secs;
    let fill = -(-alpha * n).exp_m1();
    capacity_pj * fill * fill
}

/// Store level after harvesting for `elapsed`, starting at `start`.
pub fn harvested_energy(
    elapsed: SimTime,
    start: Energy,
    config: &HarvestConfig,
    capacity: Energy,
) -> Energy {
    debug_assert!(start <= capacity);
    if elapsed == SimTime::ZERO {
        return start;
    }
    match *config {
        HarvestConfig::LinearRate { pj_per_minute } => {
            let fj_per_minute = (pj_per_minute * FJ_PER_PJ as f64).round() as u128;
            let gained = fj_per_minute
                .checked_mul(elapsed.as_femtos())
                .map(|x| x / FS_PER_MINUTE)
                .unwrap_or(u128::MAX);
            let level = u128::from(start.0).saturating_add(gained);
            Energy(level.min(u128::from(capacity.0)) as u64)
        }
        HarvestConfig::SaturatingCurve {
            cycle_frequency_hz,
            alpha,
        } => {
            let pj = saturating_charge_pj(
                start.picojoules(),
                capacity.picojoules(),
                cycle_frequency_hz,
                alpha,
                elapsed.as_secs_f64(),
            );
            Energy::from_picojoules(pj).min(capacity)
        }
    }
}

/// A capacitor whose level always lies in `[0, capacity]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyStore {
    capacity: Energy,
    level: Energy,
    harvest: HarvestConfig,
}

impl EnergyStore {
    /// A fully charged store.
    pub fn full(capacity: Energy, harvest: HarvestConfig) -> Self {
        Self {
            capacity,
            level: capacity,
            harvest,
        }
    }

    pub fn empty(capacity: Energy, harvest: HarvestConfig) -> Self {
        Self {
            capacity,
            level: Energy::ZERO,
            harvest,
        }
    }

    /// Level is clamped to capacity.
    pub fn with_level(mut self, level: Energy) -> Self {
        self.level = level.min(self.capacity);
        self
    }

    pub fn sensor(harvest: HarvestConfig) -> Self {
        Self::full(SENSOR_CAPACITY, harvest)
    }

    pub fn coordinator(harvest: HarvestConfig) -> Self {
        Self::full(COORDINATOR_CAPACITY, harvest)
    }

    pub fn capacity(&self) -> Energy {
        self.capacity
    }

    pub fn level(&self) -> Energy {
        self.level
    }

    pub fn harvest_config(&self) -> &HarvestConfig {
        &self.harvest
    }

    pub fn can_afford(&self, amount: Energy) -> bool {
        amount <= self.level
    }

    /// Debits `amount`, or leaves the store untouched if it holds less.
    pub fn consume(&mut self, amount: Energy) -> Result<(), EnergyError> {
        match self.level.checked_sub(amount) {
            Some(rest) => {
                self.level = rest;
                Ok(())
            }
            None => Err(EnergyError::InsufficientEnergy {
                requested: amount,
                available: self.level,
            }),
        }
    }

    pub fn harvest(&mut self, elapsed: SimTime) {
        self.level = harvested_energy(elapsed, self.level, &self.harvest, self.capacity);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pj(x: f64) -> Energy {
        Energy::from_picojoules(x)
    }

    #[test]
    fn nominal_frame_costs() {
        let p = PulseEnergyParams::default();
        let tx: Vec<u64> = FrameKind::ALL
            .iter()
            .map(|&k| frame_tx_energy(k, PacketScale::FULL, &p).femtojoules())
            .collect();
        let rx: Vec<u64> = FrameKind::ALL
            .iter()
            .map(|&k| frame_rx_energy(k, PacketScale::FULL, &p).femtojoules())
            .collect();
        assert_eq!(tx, [192_000, 76_000, 44_000, 80_000]);
        assert_eq!(rx, [3_840, 1_520, 880, 1_600]);
    }

    #[test]
    fn tx_examples() {
        let p = PulseEnergyParams::default();
        assert_eq!(tx_energy(384, PacketScale::FULL, &p), pj(192.0));
        assert_eq!(tx_energy(0, PacketScale::FULL, &p), Energy::ZERO);
        assert_eq!(tx_energy(152, PacketScale::HALF, &p), pj(38.0));
    }

    #[test]
    fn rx_examples() {
        let table = PulseEnergyParams::default();
        let eq2 = table.with_rx_mode(RxMode::TenthOfTxPulse);
        assert_eq!(
            rx_energy(384, PacketScale::FULL, &table).femtojoules(),
            3_840
        );
        assert_eq!(
            rx_energy(384, PacketScale::FULL, &eq2).femtojoules(),
            38_400
        );
        assert_eq!(rx_energy(0, PacketScale::FULL, &table), Energy::ZERO);
        assert_eq!(rx_energy(0, PacketScale::FULL, &eq2), Energy::ZERO);
    }

    #[test]
    fn tx_to_rx_ratios() {
        let calibrated = PulseEnergyParams::default();
        let tenth = calibrated.with_rx_mode(RxMode::TenthOfTxPulse);
        let every_symbol_one = PulseEnergyParams {
            symbol_one_probability: 1.0,
            ..tenth
        };
        for k in [88u32, 152, 160, 384, 1000] {
            let rx = |p| rx_energy(k, PacketScale::FULL, p).femtojoules();
            let tx = |p| tx_energy(k, PacketScale::FULL, p).femtojoules();
            assert_eq!(tx(&calibrated), 50 * rx(&calibrated));
            assert_eq!(tx(&tenth), 5 * rx(&tenth));
            assert_eq!(tx(&every_symbol_one), 10 * rx(&every_symbol_one));
        }
    }

    #[test]
    fn linear_ten_minutes_from_empty() {
        let level = harvested_energy(
            SimTime::from_minutes(10),
            Energy::ZERO,
            &HarvestConfig::default(),
            SENSOR_CAPACITY,
        );
        assert_eq!(level.femtojoules(), 299_430);
    }

    #[test]
    fn linear_caps_at_capacity() {
        let level = harvested_energy(
            SimTime::from_minutes(60),
            pj(700.0),
            &HarvestConfig::default(),
            SENSOR_CAPACITY,
        );
        assert_eq!(level, SENSOR_CAPACITY);
    }

    #[test]
    fn alpha_constant_matches_calibration() {
        assert!((DEFAULT_ALPHA - calibrate_alpha(0.95, 2419.0)).abs() < 1e-18);
    }

    #[test]
    fn one_hertz_curve_hits_95_percent_at_2419_s() {
        let level = saturating_charge_pj(0.0, 800.0, 1.0, DEFAULT_ALPHA, 2419.0);
        assert!((level - 760.0).abs() / 760.0 < 1e-9, "{level}");
        let via_store = harvested_energy(
            SimTime::from_secs(2419),
            Energy::ZERO,
            &HarvestConfig::saturating(1.0),
            SENSOR_CAPACITY,
        );
        assert_eq!(via_store, pj(760.0));
    }

    #[test]
    fn fifty_hertz_95_percent_time() {
        let t = charge_time_secs(0.95, 50.0, DEFAULT_ALPHA);
        assert!((t - 48.38).abs() < 1e-9, "{t}");
        assert!((t - 49.0).abs() / 49.0 < 0.02);
    }

    #[test]
    fn zero_elapsed_is_identity() {
        for cfg in [HarvestConfig::default(), HarvestConfig::saturating(50.0)] {
            for start in [Energy::ZERO, pj(123.456), SENSOR_CAPACITY] {
                assert_eq!(
                    harvested_energy(SimTime::ZERO, start, &cfg, SENSOR_CAPACITY),
                    start
                );
            }
        }
    }

    #[test]
    fn consume_examples() {
        let mut s = EnergyStore::sensor(HarvestConfig::default());
        s.consume(pj(192.0)).unwrap();
        assert_eq!(s.level(), pj(608.0));

        let mut low = EnergyStore::sensor(HarvestConfig::default()).with_level(pj(100.0));
        let before = low.clone();
        assert_eq!(
            low.consume(pj(192.0)),
            Err(EnergyError::InsufficientEnergy {
                requested: pj(192.0),
                available: pj(100.0)
            })
        );
        assert_eq!(low, before);

        low.consume(Energy::ZERO).unwrap();
        assert_eq!(low, before);
    }

    #[test]
    fn parameter_validation() {
        assert!(PulseEnergyParams::default().validate().is_ok());
        let bad = PulseEnergyParams {
            symbol_one_probability: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(HarvestConfig::LinearRate { pj_per_minute: 0.0 }
            .validate()
            .is_err());
        assert!(HarvestConfig::SaturatingCurve {
            cycle_frequency_hz: 1.0,
            alpha: 1.0
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn saturating_curve_is_resume_consistent(
            start in 0.0f64..799.0,
            t1 in 0.0f64..3000.0,
            t2 in 0.0f64..3000.0,
            freq in 0.5f64..60.0,
        ) {
            let split = saturating_charge_pj(
                saturating_charge_pj(start, 800.0, freq, DEFAULT_ALPHA, t1),
                800.0, freq, DEFAULT_ALPHA, t2,
            );
            let whole = saturating_charge_pj(start, 800.0, freq, DEFAULT_ALPHA, t1 + t2);
            prop_assert!((split - whole).abs() <= 1e-9 * whole.max(1e-12), "{} vs {}", split, whole);
        }

        #[test]
        fn saturating_curve_increases_toward_capacity(t in 0.0f64..5000.0, dt in 0.01f64..100.0) {
            let a = saturating_charge_pj(0.0, 800.0, 1.0, DEFAULT_ALPHA, t);
            let b = saturating_charge_pj(0.0, 800.0, 1.0, DEFAULT_ALPHA, t + dt);
            prop_assert!(b > a || b == 800.0 || (800.0 - a) < 1e-9);
            prop_assert!(b <= 800.0);
        }

        #[test]
        fn energy_linear_in_bits_and_scale(k in 0u32..10_000, s in 0.5f64..=1.0) {
            let p = PulseEnergyParams::default();
            let scale = PacketScale::new(s).unwrap();
            let expected_tx = s * f64::from(k) * 0.5;
            let expected_rx = s * f64::from(k) * 0.01;
            prop_assert!((tx_energy(k, scale, &p).picojoules() - expected_tx).abs() <= 0.0005);
            prop_assert!((rx_energy(k, scale, &p).picojoules() - expected_rx).abs() <= 0.0005);
        }

        #[test]
        fn store_level_stays_in_bounds(
            ops in proptest::collection::vec((any::<bool>(), 0u64..1_000_000, 0u64..600), 1..200),
            saturating in any::<bool>(),
        ) {
            let cfg = if saturating { HarvestConfig::saturating(1.0) } else { HarvestConfig::default() };
            let mut store = EnergyStore::empty(SENSOR_CAPACITY, cfg);
            for (is_consume, amount, secs) in ops {
                if is_consume {
                    let before = store.level();
                    match store.consume(Energy::from_femtojoules(amount)) {
                        Ok(()) => prop_assert_eq!(store.level().femtojoules(), before.femtojoules() - amount),
                        Err(_) => prop_assert_eq!(store.level(), before),
                    }
                } else {
                    store.harvest(SimTime::from_secs(u128::from(secs)));
                }
                prop_assert!(store.level() <= store.capacity());
            }
        }
    }
}
