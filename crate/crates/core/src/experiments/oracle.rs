/// Coordinator's worst-case spend per superframe in pJ:
/// `scale * (192 + m * (1.52 + 44))`.
pub fn coordinator_budget_pj(m: usize, scale: f64) -> f64 {
    scale * (192.0 + m as f64 * 45.52)
}

/// Long-run fraction of completed superframes, `min(1, R * D / C)`.
///
/// The coordinator gains `R * D` per interval and spends `C` per completed
/// superframe, so in steady state it completes `R * D / C` of them.
pub fn analytic_success_rate(
    m: usize,
    scale: f64,
    duration_minutes: f64,
    rate_pj_per_min: f64,
) -> f64 {
    (rate_pj_per_min * duration_minutes / coordinator_budget_pj(m, scale)).min(1.0)
}
