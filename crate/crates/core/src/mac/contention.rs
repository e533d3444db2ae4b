use crate::channel::{slot_transmit, SlotOutcome};
use crate::frames::ShortAddress;
use crate::sim::RandomStream;

use super::{BackoffConfig, CAP_SLOTS};

/// One slotted CSMA/CA competition.
///
/// Contenders draw a backoff in `[0, W)` in ascending address order; the
/// unique minimum transmits alone, a shared minimum collides.
pub fn csma_contend(
    contenders: &[ShortAddress],
    rng: &mut RandomStream,
    backoff: BackoffConfig,
) -> SlotOutcome {
    let mut ordered = contenders.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    let window = backoff.window();
    let draws: Vec<(ShortAddress, u64)> = ordered
        .into_iter()
        .map(|a| (a, rng.uniform_int(window)))
        .collect();
    let Some(min) = draws.iter().map(|&(_, d)| d).min() else {
        return SlotOutcome::Idle;
    };
    let first: Vec<(ShortAddress, u64)> = draws.into_iter().filter(|&(_, d)| d == min).collect();
    slot_transmit(&first)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAllocation {
    pub outcomes: Vec<SlotOutcome>,
    pub carried_over: Vec<ShortAddress>,
}

impl SlotAllocation {
    pub fn successes(&self) -> impl Iterator<Item = ShortAddress> + '_ {
        self.outcomes.iter().filter_map(|o| match o {
            SlotOutcome::Success(a) => Some(*a),
            _ => None,
        })
    }
}

/// Runs the 15 CAP slots: a winner leaves the pool, colliders retry in the
/// next slot, and whoever is left after the last slot carries over.
pub fn allocate_slots(
    requesting: &[ShortAddress],
    backoff: BackoffConfig,
    rng: &mut RandomStream,
) -> SlotAllocation {
    let mut pool = requesting.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let mut outcomes = Vec::with_capacity(CAP_SLOTS);
    for _ in 0..CAP_SLOTS {
        let outcome = csma_contend(&pool, rng, backoff);
        if let SlotOutcome::Success(winner) = outcome {
            pool.retain(|&a| a != winner);
        }
        outcomes.push(outcome);
    }
    SlotAllocation {
        outcomes,
        carried_over: pool,
    }
}

/// Fixed cyclic slot ownership over `population` nodes.
///
/// Slot `s` (1-based) of superframe `k` belongs to node
/// `(k * 15 + s - 1) mod population`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRobinSchedule {
    pub population: usize,
    pub superframe: u64,
}

impl RoundRobinSchedule {
    pub fn new(population: usize) -> Self {
        assert!(population > 0, "round robin needs at least one node");
        Self {
            population,
            superframe: 0,
        }
    }

    pub fn at_superframe(self, superframe: u64) -> Self {
        Self { superframe, ..self }
    }

    pub fn owner(&self, slot_index: usize) -> usize {
        assert!(
            (1..=CAP_SLOTS).contains(&slot_index),
            "slot index {slot_index} outside 1..=15"
        );
        let n = self.population as u128;
        ((u128::from(self.superframe) * CAP_SLOTS as u128 + slot_index as u128 - 1) % n) as usize
    }
}

/// A round-robin slot is usable iff its owner has data.
pub fn rr_slot_usable(
    slot_index: usize,
    schedule: &RoundRobinSchedule,
    mut active: impl FnMut(usize) -> bool,
) -> bool {
    active(schedule.owner(slot_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addrs(n: u16) -> Vec<ShortAddress> {
        (1..=n).map(ShortAddress).collect()
    }

    /// P(unique minimum) by enumerating all `W^n` draw vectors.
    fn enumerate_unique_min(n: u32, w: u64) -> f64 {
        let total = w.pow(n);
        let mut unique = 0u64;
        for code in 0..total {
            let mut c = code;
            let draws: Vec<u64> = (0..n)
                .map(|_| {
                    let d = c % w;
                    c /= w;
                    d
                })
                .collect();
            let min = *draws.iter().min().unwrap();
            if draws.iter().filter(|&&d| d == min).count() == 1 {
                unique += 1;
            }
        }
        unique as f64 / total as f64
    }

    #[test]
    fn enumeration_matches_known_values() {
        assert_eq!(enumerate_unique_min(1, 8), 1.0);
        assert_eq!(enumerate_unique_min(2, 8), 56.0 / 64.0);
        assert_eq!(enumerate_unique_min(3, 8), 105.0 / 128.0);
    }

    #[test]
    fn empty_and_single() {
        let mut rng = RandomStream::new(1, 0);
        let b = BackoffConfig::default();
        assert_eq!(csma_contend(&[], &mut rng, b), SlotOutcome::Idle);
        for _ in 0..100 {
            assert_eq!(
                csma_contend(&[ShortAddress(9)], &mut rng, b),
                SlotOutcome::Success(ShortAddress(9))
            );
        }
    }

    #[test]
    fn success_probability_matches_enumeration() {
        let b = BackoffConfig::default();
        let trials = 100_000;
        for n in 1..=6u16 {
            let mut rng = RandomStream::new(2024, u64::from(n));
            let pool = addrs(n);
            let wins = (0..trials)
                .filter(|_| csma_contend(&pool, &mut rng, b).is_success())
                .count();
            let p = enumerate_unique_min(u32::from(n), 8);
            let se = (p * (1.0 - p) / trials as f64).sqrt().max(1e-9);
            let hat = wins as f64 / trials as f64;
            assert!((hat - p).abs() <= 3.0 * se + 1e-12, "n={n}: {hat} vs {p}");
        }
    }

    #[test]
    fn eighteen_contenders_near_quarter() {
        let b = BackoffConfig::default();
        let mut rng = RandomStream::new(77, 18);
        let pool = addrs(18);
        let trials = 100_000;
        let wins = (0..trials)
            .filter(|_| csma_contend(&pool, &mut rng, b).is_success())
            .count();
        let hat = wins as f64 / trials as f64;
        assert!((hat - 0.25).abs() <= 0.01, "{hat}");
    }

    #[test]
    fn draws_independent_of_input_order() {
        let b = BackoffConfig::default();
        let fwd = addrs(7);
        let mut rev = fwd.clone();
        rev.reverse();
        for seed in 0..50 {
            let a = csma_contend(&fwd, &mut RandomStream::new(seed, 3), b);
            let c = csma_contend(&rev, &mut RandomStream::new(seed, 3), b);
            assert_eq!(a, c);
        }
    }

    #[test]
    fn three_requesters_pinned_seed() {
        // seed 0 gives three distinct-minimum rounds in a row
        let mut rng = RandomStream::new(THREE_CLEAN_SEED, 0);
        let alloc = allocate_slots(&addrs(3), BackoffConfig::default(), &mut rng);
        assert!(alloc.outcomes[..3].iter().all(|o| o.is_success()));
        assert!(alloc.outcomes[3..].iter().all(|&o| o == SlotOutcome::Idle));
        assert!(alloc.carried_over.is_empty());
        let mut winners: Vec<_> = alloc.successes().collect();
        winners.sort();
        assert_eq!(winners, addrs(3));
    }

    const THREE_CLEAN_SEED: u64 = 0;

    #[test]
    fn empty_pool_is_all_idle() {
        let mut rng = RandomStream::new(5, 0);
        let alloc = allocate_slots(&[], BackoffConfig::default(), &mut rng);
        assert_eq!(alloc.outcomes, vec![SlotOutcome::Idle; CAP_SLOTS]);
    }

    #[test]
    fn twenty_requesters_carry_over() {
        for seed in 0..20 {
            let mut rng = RandomStream::new(seed, 0);
            let alloc = allocate_slots(&addrs(20), BackoffConfig::default(), &mut rng);
            let wins = alloc.successes().count();
            assert!(wins <= 15);
            assert_eq!(alloc.carried_over.len(), 20 - wins);
            assert!(alloc.carried_over.len() >= 5);
        }
    }

    #[test]
    fn round_robin_ownership() {
        let s = RoundRobinSchedule::new(100);
        assert_eq!(s.owner(1), 0);
        assert_eq!(s.owner(15), 14);
        assert_eq!(s.at_superframe(1).owner(1), 15);
        assert_eq!(RoundRobinSchedule::new(10).owner(12), 1);
        assert!(rr_slot_usable(3, &s, |n| n == 2));
        assert!(!rr_slot_usable(3, &s, |n| n != 2));
    }

    #[test]
    fn round_robin_rate_tracks_activation() {
        let mut rng = RandomStream::new(11, 0);
        let s = RoundRobinSchedule::new(100);
        let trials = 10_000;
        let mut usable = 0usize;
        for k in 0..trials {
            let sched = s.at_superframe(k);
            for slot in 1..=CAP_SLOTS {
                usable += usize::from(rr_slot_usable(slot, &sched, |_| rng.bernoulli(0.2)));
            }
        }
        let rate = usable as f64 / (trials as f64 * CAP_SLOTS as f64);
        assert!((rate - 0.2).abs() <= 0.02, "{rate}");
    }

    proptest::proptest! {
        #[test]
        fn allocation_bounds(n in 0u16..40, seed in 0u64..1_000) {
            let mut rng = RandomStream::new(seed, 1);
            let alloc = allocate_slots(&addrs(n), BackoffConfig::default(), &mut rng);
            proptest::prop_assert_eq!(alloc.outcomes.len(), CAP_SLOTS);
            let wins: Vec<_> = alloc.successes().collect();
            proptest::prop_assert!(wins.len() <= usize::from(n).min(CAP_SLOTS));
            let mut seen = wins.clone();
            seen.sort();
            seen.dedup();
            proptest::prop_assert_eq!(seen.len(), wins.len());
            proptest::prop_assert_eq!(wins.len() + alloc.carried_over.len(), usize::from(n));
        }
    }
}
