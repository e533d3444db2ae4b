use rayon::prelude::*;

use crate::frames::ShortAddress;
use crate::mac::{csma_contend, rr_slot_usable, RoundRobinSchedule, CAP_SLOTS};
use crate::sim::{derive_stream_seed, RandomStream};

use super::{ContentionSpec, ExperimentError, Table};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionRow {
    pub request_rate: f64,
    pub csma_usable_rate: f64,
    pub rr_usable_rate: f64,
}

const CSMA_STREAM: u64 = 0;
const RR_STREAM: u64 = 1;

fn run_rate(spec: &ContentionSpec, rate_index: usize, rate: f64) -> ContentionRow {
    let point_seed = derive_stream_seed(spec.seed, rate_index as u64);
    let mut csma_rng = RandomStream::new(point_seed, CSMA_STREAM);
    let mut rr_rng = RandomStream::new(point_seed, RR_STREAM);
    let contenders: Vec<ShortAddress> = (1..=spec.contenders(rate) as u16)
        .map(ShortAddress)
        .collect();
    let schedule = RoundRobinSchedule::new(spec.population);

    let mut csma_usable = 0u64;
    let mut rr_usable = 0u64;
    for trial in 0..spec.trials_per_rate {
        for _ in 0..CAP_SLOTS {
            csma_usable +=
                u64::from(csma_contend(&contenders, &mut csma_rng, spec.backoff).is_success());
        }
        let sched = schedule.at_superframe(trial);
        for slot in 1..=CAP_SLOTS {
            rr_usable += u64::from(rr_slot_usable(slot, &sched, |_| rr_rng.bernoulli(rate)));
        }
    }
    let slots = (spec.trials_per_rate * CAP_SLOTS as u64) as f64;
    ContentionRow {
        request_rate: rate,
        csma_usable_rate: csma_usable as f64 / slots,
        rr_usable_rate: rr_usable as f64 / slots,
    }
}

/// Usable-slot rate of slotted CSMA/CA and round robin per request rate.
///
/// In every trial each of the 15 slots is competed for by the
/// `round(p * population)` nodes requesting it; under round robin the slot's
/// owner has data with probability `p`. Both rates are usable slots / 15.
pub fn contention_compare(
    spec: &ContentionSpec,
) -> Result<(Table, Vec<ContentionRow>), ExperimentError> {
    spec.validate()?;
    let rows: Vec<ContentionRow> = spec
        .request_rates
        .par_iter()
        .enumerate()
        .map(|(i, &p)| run_rate(spec, i, p))
        .collect();
    let mut table = Table::new(["request_rate", "csma_usable_rate", "rr_usable_rate"]);
    for r in &rows {
        table.push(vec![r.request_rate, r.csma_usable_rate, r.rr_usable_rate]);
    }
    Ok((table, rows))
}

/// Request rates where `csma - rr` changes sign, linearly interpolated.
pub fn find_crossovers(rows: &[ContentionRow]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        let d0 = w[0].csma_usable_rate - w[0].rr_usable_rate;
        let d1 = w[1].csma_usable_rate - w[1].rr_usable_rate;
        if d0 == 0.0 {
            out.push(w[0].request_rate);
        } else if d0.signum() != d1.signum() && d1 != 0.0 {
            let t = d0 / (d0 - d1);
            out.push(w[0].request_rate + t * (w[1].request_rate - w[0].request_rate));
        }
    }
    if let Some(last) = rows.last() {
        if last.csma_usable_rate == last.rr_usable_rate {
            out.push(last.request_rate);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need two points for a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rates: Vec<f64>, trials: u64) -> ContentionSpec {
        ContentionSpec {
            request_rates: rates,
            trials_per_rate: trials,
            seed: 17,
            ..Default::default()
        }
    }

    /// `(n / W) * sum_{j<W} (j / W)^(n-1)`: one node takes the minimum `k`
    /// and the others all draw above it.
    fn unique_min_closed_form(n: usize, w: usize) -> f64 {
        (0..w)
            .map(|k| n as f64 / w as f64 * ((w - 1 - k) as f64 / w as f64).powi(n as i32 - 1))
            .sum()
    }

    #[test]
    fn single_contender_always_wins() {
        let (_, rows) = contention_compare(&small(vec![0.01], 200)).unwrap();
        assert_eq!(rows[0].csma_usable_rate, 1.0);
    }

    #[test]
    fn rates_track_closed_forms() {
        let (_, rows) = contention_compare(&small(vec![0.05, 0.18, 0.3], 4000)).unwrap();
        for r in rows {
            let n = (r.request_rate * 100.0).round() as usize;
            let p = unique_min_closed_form(n, 8);
            assert!((r.csma_usable_rate - p).abs() < 0.01, "{r:?} vs {p}");
            assert!((r.rr_usable_rate - r.request_rate).abs() < 0.01, "{r:?}");
        }
    }

    #[test]
    fn closed_form_is_right_at_small_n() {
        assert_eq!(unique_min_closed_form(1, 8), 1.0);
        assert!((unique_min_closed_form(2, 8) - 0.875).abs() < 1e-12);
        assert!((unique_min_closed_form(5, 8) - 5845.0 / 8192.0).abs() < 1e-12);
        assert!((unique_min_closed_form(18, 8) - 0.2501).abs() < 1e-4);
    }

    #[test]
    fn crossover_interpolation() {
        let rows = [
            ContentionRow {
                request_rate: 0.1,
                csma_usable_rate: 0.5,
                rr_usable_rate: 0.1,
            },
            ContentionRow {
                request_rate: 0.2,
                csma_usable_rate: 0.2,
                rr_usable_rate: 0.2,
            },
            ContentionRow {
                request_rate: 0.3,
                csma_usable_rate: 0.1,
                rr_usable_rate: 0.3,
            },
        ];
        assert_eq!(find_crossovers(&rows), vec![0.2]);
        let rows = [
            ContentionRow {
                request_rate: 0.1,
                csma_usable_rate: 0.3,
                rr_usable_rate: 0.1,
            },
            ContentionRow {
                request_rate: 0.2,
                csma_usable_rate: 0.1,
                rr_usable_rate: 0.2,
            },
        ];
        let x = find_crossovers(&rows);
        assert_eq!(x.len(), 1);
        assert!((x[0] - (0.1 + 0.2 / 0.3 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn least_squares_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_repeat() {
        let spec = small(vec![0.1, 0.2], 300);
        let (a, _) = contention_compare(&spec).unwrap();
        let (b, _) = contention_compare(&spec).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }
}
