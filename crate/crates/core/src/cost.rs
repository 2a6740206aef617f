//! Alpha-beta cost model: closed-form per-algorithm costs, schedule-derived
//! costs, precondition/overlap accounting, and the critical straggler delay.
//!
//! Sending s bytes costs alpha + s * beta. An algorithm's post-barrier time
//! is rounds * alpha + coefficient * s * beta, where the coefficient is the
//! exact rational tracked by the verifier. End-to-end totals are measured
//! from the moment the non-stragglers start: straggler-aware algorithms run
//! their precondition during the delay and pay only the unmasked remainder,
//! while Ring and RHD sit at the barrier for the full delay.

use crate::error::Error;
use crate::model::{Algorithm, Schedule};
use crate::verify::verify_schedule;
use num_rational::Ratio;
use serde::Serialize;

/// Default message startup cost: 3 microseconds.
pub const DEFAULT_ALPHA: f64 = 3e-6;
/// Default per-byte cost: one over 450 GB/s.
pub const DEFAULT_BETA: f64 = 1.0 / 450e9;

/// Per-message latency (seconds) and per-byte transmission cost
/// (seconds/byte) of the interconnect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaBetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for AlphaBetaParams {
    fn default() -> Self {
        AlphaBetaParams {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

/// One end-to-end evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioParams {
    pub n: u32,
    pub buffer_bytes: u64,
    /// Straggler delay in seconds, measured from the non-straggler start.
    pub delay: f64,
    pub params: AlphaBetaParams,
}

/// End-to-end time split into its accounting pieces. The total is measured
/// from the non-straggler start: delay + unmasked precondition + post time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    /// Precondition work (ReduceScatter for StragglAR, a full AllReduce for
    /// Broadcast, zero for Ring/RHD).
    pub precondition_time: f64,
    /// Precondition time not hidden by the straggler delay.
    pub overlap_deficit: f64,
    /// Post-barrier algorithm time.
    pub post_time: f64,
    pub total: f64,
}

/// Exact (round count, bandwidth coefficient) pair behind the analytic
/// formulas. StragglAR, RHD, and Broadcast are defined for powers of 2 only;
/// Ring for any n >= 2.
pub fn analytic_coefficients(algo: Algorithm, n: u32) -> Result<(u64, Ratio<u64>), Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    let pow2 = n.is_power_of_two();
    let log_n = n.trailing_zeros() as u64;
    match algo {
        Algorithm::StragglAr => {
            if !pow2 {
                return Err(Error::UnsupportedSize {
                    algo,
                    n,
                    hint: "closed-form cost covers powers of 2; even sizes need a \
                           generated schedule (schedule_cost)"
                        .to_string(),
                });
            }
            let rounds = n as u64 + log_n - 2;
            Ok((rounds, Ratio::new(rounds, n as u64 - 1)))
        }
        Algorithm::Ring => {
            let rounds = 2 * (n as u64 - 1);
            Ok((rounds, Ratio::new(rounds, n as u64)))
        }
        Algorithm::Rhd => {
            if !pow2 {
                return Err(Error::UnsupportedSize {
                    algo,
                    n,
                    hint: "recursive halving/doubling requires a power-of-2 size".to_string(),
                });
            }
            Ok((2 * log_n, Ratio::new(2 * (n as u64 - 1), n as u64)))
        }
        Algorithm::Broadcast => {
            if !pow2 {
                return Err(Error::UnsupportedSize {
                    algo,
                    n,
                    hint: "the doubling broadcast requires a power-of-2 size".to_string(),
                });
            }
            Ok((log_n, Ratio::new(log_n, 1)))
        }
    }
}

fn cost_of(rounds: u64, beta_coefficient: Ratio<u64>, s: u64, params: AlphaBetaParams) -> f64 {
    let coeff = *beta_coefficient.numer() as f64 / *beta_coefficient.denom() as f64;
    rounds as f64 * params.alpha + coeff * s as f64 * params.beta
}

/// Post-barrier cost from the closed-form round counts and coefficients.
pub fn analytic_cost(
    algo: Algorithm,
    n: u32,
    s: u64,
    params: AlphaBetaParams,
) -> Result<f64, Error> {
    let (rounds, coeff) = analytic_coefficients(algo, n)?;
    Ok(cost_of(rounds, coeff, s, params))
}

/// Post-barrier cost of a concrete schedule: rounds * alpha plus the
/// verifier's exact bandwidth coefficient times s * beta.
pub fn schedule_cost(schedule: &Schedule, s: u64, params: AlphaBetaParams) -> f64 {
    report_cost(&verify_schedule(schedule), s, params)
}

/// As [`schedule_cost`], for callers that already hold the verification
/// report (sweeps price the same schedule at many points).
pub fn report_cost(
    report: &crate::verify::VerificationReport,
    s: u64,
    params: AlphaBetaParams,
) -> f64 {
    cost_of(
        report.rounds_executed as u64,
        report.beta_coefficient,
        s,
        params,
    )
}

/// Ring reduce-scatter among m ranks: (m-1) alpha + ((m-1)/m) s beta; the
/// degenerate single-rank case costs nothing.
pub fn reduce_scatter_time(m: u32, s: u64, params: AlphaBetaParams) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    cost_of(m as u64 - 1, Ratio::new(m as u64 - 1, m as u64), s, params)
}

/// Precondition work an algorithm performs during the straggler delay.
pub fn precondition_time(algo: Algorithm, n: u32, s: u64, params: AlphaBetaParams) -> f64 {
    match algo {
        Algorithm::StragglAr => reduce_scatter_time(n - 1, s, params),
        // A non-straggler AllReduce costs twice the reduce-scatter.
        Algorithm::Broadcast => 2.0 * reduce_scatter_time(n - 1, s, params),
        Algorithm::Ring | Algorithm::Rhd => 0.0,
    }
}

/// End-to-end accounting given an already-known post-barrier time (used for
/// generated schedules whose round count has no closed form).
pub fn end_to_end_with_post(
    algo: Algorithm,
    scenario: &ScenarioParams,
    post_time: f64,
) -> CostBreakdown {
    let precondition = precondition_time(algo, scenario.n, scenario.buffer_bytes, scenario.params);
    let overlap_deficit = (precondition - scenario.delay).max(0.0);
    CostBreakdown {
        precondition_time: precondition,
        overlap_deficit,
        post_time,
        total: scenario.delay + overlap_deficit + post_time,
    }
}

/// End-to-end time from the non-straggler start, using the analytic
/// post-barrier cost.
pub fn end_to_end_time(algo: Algorithm, scenario: &ScenarioParams) -> Result<CostBreakdown, Error> {
    let post = analytic_cost(algo, scenario.n, scenario.buffer_bytes, scenario.params)?;
    Ok(end_to_end_with_post(algo, scenario, post))
}

/// Minimum straggler delay at which StragglAR's end-to-end time beats the
/// baseline: max(T_RS - max(T_B - T_SAR, 0), 0). Exact for Ring and RHD
/// (which pay the full delay); for Broadcast, whose own precondition also
/// overlaps, it is a sufficient threshold, not a crossing point.
pub fn critical_delay(
    n: u32,
    s: u64,
    params: AlphaBetaParams,
    baseline: Algorithm,
) -> Result<f64, Error> {
    if baseline == Algorithm::StragglAr {
        return Err(Error::Structural(
            "critical delay compares StragglAR against ring, rhd, or broadcast".to_string(),
        ));
    }
    let t_rs = reduce_scatter_time(n - 1, s, params);
    let t_sar = analytic_cost(Algorithm::StragglAr, n, s, params)?;
    let t_b = analytic_cost(baseline, n, s, params)?;
    Ok((t_rs - (t_b - t_sar).max(0.0)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{generate_broadcast, generate_ring};
    use crate::model::RankId;
    use crate::stragglar::generate_stragglar;

    const GIB: u64 = 1 << 30;

    fn defaults() -> AlphaBetaParams {
        AlphaBetaParams::default()
    }

    #[test]
    fn stragglar_n256_one_gib_is_about_3_24_ms() {
        let t = analytic_cost(Algorithm::StragglAr, 256, GIB, defaults()).unwrap();
        assert!((t - 3.24e-3).abs() < 0.01e-3, "got {t}");
    }

    #[test]
    fn ring_n256_one_gib_is_about_6_28_ms_for_a_1_94x_ratio() {
        let ring = analytic_cost(Algorithm::Ring, 256, GIB, defaults()).unwrap();
        assert!((ring - 6.28e-3).abs() < 0.01e-3, "got {ring}");
        let sar = analytic_cost(Algorithm::StragglAr, 256, GIB, defaults()).unwrap();
        let ratio = ring / sar;
        assert!((ratio - 1.94).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn zero_bytes_zero_alpha_costs_nothing() {
        let params = AlphaBetaParams {
            alpha: 0.0,
            beta: 1e-9,
        };
        for algo in Algorithm::ALL {
            assert_eq!(analytic_cost(algo, 8, 0, params).unwrap(), 0.0);
        }
    }

    #[test]
    fn schedule_cost_matches_analytic_for_generated_schedules() {
        let params = AlphaBetaParams {
            alpha: 1.7e-6,
            beta: 4.2e-12,
        };
        let s = 123_456_789u64;
        let schedule = generate_stragglar(8).unwrap();
        let from_schedule = schedule_cost(&schedule, s, params);
        let analytic = analytic_cost(Algorithm::StragglAr, 8, s, params).unwrap();
        assert_eq!(from_schedule, analytic);

        let ring = generate_ring(4).unwrap();
        assert_eq!(
            schedule_cost(&ring, s, params),
            analytic_cost(Algorithm::Ring, 4, s, params).unwrap()
        );
    }

    #[test]
    fn zero_round_schedule_costs_nothing() {
        let schedule = Schedule {
            algorithm: Algorithm::Ring,
            n: 4,
            straggler: RankId(3),
            num_chunks: 4,
            rounds: vec![],
        };
        assert_eq!(schedule_cost(&schedule, GIB, defaults()), 0.0);
    }

    #[test]
    fn reduce_scatter_formula() {
        assert_eq!(reduce_scatter_time(1, GIB, defaults()), 0.0);
        // m=7 at 4 GiB with default constants: about 8.20 ms
        let t = reduce_scatter_time(7, 4 * GIB, defaults());
        assert!((t - 8.20e-3).abs() < 0.01e-3, "got {t}");
        // exactly half of ring allreduce's beta term for the same m
        let params = AlphaBetaParams {
            alpha: 0.0,
            beta: DEFAULT_BETA,
        };
        let rs = reduce_scatter_time(7, GIB, params);
        let ring = analytic_cost(Algorithm::Ring, 7, GIB, params).unwrap();
        assert!((ring / rs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn end_to_end_overlap_accounting() {
        let params = defaults();
        let scenario = |delay| ScenarioParams {
            n: 8,
            buffer_bytes: 4 * GIB,
            delay,
            params,
        };
        let t_rs = reduce_scatter_time(7, 4 * GIB, params);
        let t_sar = analytic_cost(Algorithm::StragglAr, 8, 4 * GIB, params).unwrap();

        // full overlap: total = delay + post
        let big_delay = 2.0 * t_rs;
        let b = end_to_end_time(Algorithm::StragglAr, &scenario(big_delay)).unwrap();
        assert!((b.total - (big_delay + t_sar)).abs() < 1e-15);
        assert_eq!(b.overlap_deficit, 0.0);

        // no overlap: total = T_RS + T_SAR
        let z = end_to_end_time(Algorithm::StragglAr, &scenario(0.0)).unwrap();
        assert!((z.total - (t_rs + t_sar)).abs() < 1e-15);
        assert_eq!(z.overlap_deficit, t_rs);

        // baselines pay the full delay
        let r = end_to_end_time(Algorithm::Ring, &scenario(1e-3)).unwrap();
        let t_ring = analytic_cost(Algorithm::Ring, 8, 4 * GIB, params).unwrap();
        assert!((r.total - (1e-3 + t_ring)).abs() < 1e-15);
        assert_eq!(r.precondition_time, 0.0);
    }

    #[test]
    fn critical_delay_is_consistent_with_end_to_end_crossing() {
        let params = defaults();
        let (n, s) = (8u32, 4 * GIB);
        let cd = critical_delay(n, s, params, Algorithm::Ring).unwrap();
        assert!(cd > 0.0);
        let at = |algo, delay| {
            end_to_end_time(
                algo,
                &ScenarioParams {
                    n,
                    buffer_bytes: s,
                    delay,
                    params,
                },
            )
            .unwrap()
            .total
        };
        let sar = at(Algorithm::StragglAr, cd);
        let ring = at(Algorithm::Ring, cd);
        assert!(
            (sar - ring).abs() <= 1e-12 * ring.abs(),
            "at the critical delay both should tie: {sar} vs {ring}"
        );
    }

    #[test]
    fn critical_delay_clamps_to_zero_when_stragglar_always_wins() {
        // At huge buffers Broadcast's log n beta coefficient dwarfs
        // StragglAR's, so T_B - T_SAR exceeds T_RS and the delay clamps.
        let params = defaults();
        let cd = critical_delay(256, GIB, params, Algorithm::Broadcast).unwrap();
        assert_eq!(cd, 0.0);
    }

    #[test]
    fn critical_delay_n8_4gib_sits_inside_zero_to_t_rs() {
        let params = defaults();
        let cd = critical_delay(8, 4 * GIB, params, Algorithm::Ring).unwrap();
        let t_rs = reduce_scatter_time(7, 4 * GIB, params);
        assert!(cd > 0.0);
        assert!(cd < t_rs);
    }

    #[test]
    fn broadcast_end_to_end_uses_allreduce_precondition() {
        let params = defaults();
        let scenario = ScenarioParams {
            n: 8,
            buffer_bytes: GIB,
            delay: 0.0,
            params,
        };
        let b = end_to_end_time(Algorithm::Broadcast, &scenario).unwrap();
        let t_rs = reduce_scatter_time(7, GIB, params);
        assert!((b.precondition_time - 2.0 * t_rs).abs() < 1e-15);
        let schedule = generate_broadcast(8, RankId(7)).unwrap();
        assert_eq!(
            schedule_cost(&schedule, GIB, params),
            analytic_cost(Algorithm::Broadcast, 8, GIB, params).unwrap()
        );
    }

    #[test]
    fn speedup_over_ring_grows_with_cluster_size() {
        // with alpha = 0 the ratio reduces to the beta coefficients
        let params = AlphaBetaParams {
            alpha: 0.0,
            beta: DEFAULT_BETA,
        };
        let mut last = 0.0;
        for k in 2..=8 {
            let n = 1u32 << k;
            let ring = analytic_cost(Algorithm::Ring, n, GIB, params).unwrap();
            let sar = analytic_cost(Algorithm::StragglAr, n, GIB, params).unwrap();
            let speedup = ring / sar;
            assert!(speedup > last, "speedup not increasing at n = {n}");
            last = speedup;
        }
        assert!(last >= 1.9, "n = 256 speedup {last} below 1.9");
    }
}
