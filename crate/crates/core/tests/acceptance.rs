//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured evidence. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use num_rational::Ratio;
use std::time::Instant;
use stragglar_core::baselines::{generate_broadcast, generate_rhd, generate_ring};
use stragglar_core::cost::{
    analytic_coefficients, analytic_cost, critical_delay, end_to_end_time, reduce_scatter_time,
    report_cost, schedule_cost, AlphaBetaParams, ScenarioParams,
};
use stragglar_core::model::{apply_round, ChunkId, RankId, RankSet};
use stragglar_core::nonpow2::generate_stragglar_even;
use stragglar_core::stragglar::{generate_stragglar, generate_stragglar_with_trace};
use stragglar_core::verify::initial_state_for;
use stragglar_core::{verify_schedule, Algorithm, Schedule};

const POW2: [u32; 8] = [2, 4, 8, 16, 32, 64, 128, 256];
const EVEN: [u32; 6] = [6, 10, 12, 20, 24, 48];
const GIB: u64 = 1 << 30;

fn defaults() -> AlphaBetaParams {
    AlphaBetaParams::default()
}

/// Criterion 1: every power-of-2 size completes in exactly n + log2(n) - 2
/// rounds and verifies, with generation comfortably inside the time budget.
#[test]
fn criterion_1_round_count_guarantee_and_validity() {
    let suite_start = Instant::now();
    let mut gen_256 = None;
    for n in POW2 {
        let started = Instant::now();
        let schedule = generate_stragglar(n).unwrap();
        let elapsed = started.elapsed();
        if n == 256 {
            gen_256 = Some(elapsed);
        }
        let expected = n + n.trailing_zeros() - 2;
        assert_eq!(schedule.num_rounds() as u32, expected, "n = {n}");
        let report = verify_schedule(&schedule);
        assert!(report.valid, "n = {n}: {:?}", report.violations);
        // every rank ends fully reduced: that is exactly report.valid, which
        // includes the postcondition over all (rank, chunk) cells
    }
    let total = suite_start.elapsed();
    let gen_256 = gen_256.unwrap();
    assert!(
        gen_256.as_secs_f64() < 5.0,
        "n=256 generation took {gen_256:?}"
    );
    assert!(total.as_secs_f64() < 30.0, "suite took {total:?}");
    println!(
        "criterion 1: PASS - rounds = n + log n - 2 and schedules verify for n in {POW2:?} \
         (n=256 generated in {gen_256:?}, suite {total:?})"
    );
}

/// Criterion 2: the counting invariants hold at every round. Generation
/// asserts them internally; here they are re-derived from the emitted trace
/// and from an independent state replay.
#[test]
fn criterion_2_generation_invariants_every_round() {
    for n in POW2 {
        let (schedule, trace) = generate_stragglar_with_trace(n).unwrap();
        let log_n = n.trailing_zeros();

        // Holder-count and partition invariants from the trace snapshots:
        // |A[c_j]| doubles round over round, P/Q sizes are n/2 and n/2 - 1,
        // and holder sets partition the participating ranks.
        for tr in &trace {
            let r = tr.round;
            if r < log_n {
                continue;
            }
            let mut seen = RankSet::new(n);
            let mut total = 0usize;
            for tc in &tr.active {
                let j = tc.chunk;
                let expected = if r >= n - 1 && j == n - 2 {
                    1u64 << (r + 2 - n)
                } else {
                    1u64 << (r - j - 1)
                };
                assert_eq!(tc.holders.len() as u64, expected, "n={n} r={r} chunk={j}");
                for &h in &tc.holders {
                    assert!(
                        !seen.contains(RankId(h)),
                        "n={n} r={r}: rank {h} in two sets"
                    );
                    seen.insert(RankId(h));
                }
                total += tc.holders.len();
            }
            let participants = if r >= n - 1 { n } else { n - 1 };
            assert_eq!(total as u32, participants, "n={n} r={r}");

            let part = tr.partition.as_ref().expect("phase-2 rounds carry P/Q");
            assert_eq!(part.p.len() as u32, n / 2, "n={n} r={r}: |P|");
            let expected_q = if r >= n - 1 { n / 2 } else { n / 2 - 1 };
            assert_eq!(part.q.len() as u32, expected_q, "n={n} r={r}: |Q|");
            if r <= n - 2 {
                assert!(part.p.contains(&r), "n={n} r={r}: r not in P_r");
            }
        }

        // Propagation deadlines by replaying the schedule: chunk j must be
        // on every non-straggler right after round j + log n, and the final
        // chunk everywhere after the last round (log n - 1 rounds past its
        // reduction in round n - 2, thanks to the straggler joining in).
        let mut state = initial_state_for(&schedule).unwrap();
        let full = RankSet::full(n);
        for (idx, round) in schedule.rounds.iter().enumerate() {
            state = apply_round(&state, round).unwrap();
            let r = idx as u32;
            if r >= log_n && r <= n - 2 + log_n {
                let due = r - log_n;
                if due <= n - 2 {
                    for g in 0..n - 1 {
                        assert_eq!(
                            *state.contributors(RankId(g), ChunkId(due)),
                            full,
                            "n={n}: chunk {due} not on rank {g} after round {r}"
                        );
                    }
                }
            }
        }
        assert!(
            state.is_fully_reduced(),
            "n={n}: final chunk not everywhere"
        );
        assert_eq!(schedule.num_rounds() as u32, n + log_n - 2);
    }
    println!(
        "criterion 2: PASS - holder-count, partition, doubling, and propagation-deadline \
         invariants hold at every round for n in {POW2:?} (asserted during generation and \
         re-derived from trace + replay)"
    );
}

/// Criterion 3: verifier-measured round counts and bandwidth coefficients
/// equal the closed forms, as exact rationals, so schedule_cost and
/// analytic_cost coincide for any buffer size and constants.
#[test]
fn criterion_3_table1_coefficient_equality() {
    let param_sets = [
        defaults(),
        AlphaBetaParams {
            alpha: 7.7e-7,
            beta: 3.1e-12,
        },
        AlphaBetaParams {
            alpha: 0.0,
            beta: 1e-9,
        },
    ];
    let sizes = [1u64, 4096, GIB, 4 * GIB + 12345];

    let mut checked = 0usize;
    let mut check = |schedule: &Schedule, algo: Algorithm, n: u32| {
        let report = verify_schedule(schedule);
        assert!(report.valid, "{algo} n={n}");
        let (rounds, coeff) = analytic_coefficients(algo, n).unwrap();
        assert_eq!(
            report.rounds_executed as u64, rounds,
            "{algo} n={n}: rounds"
        );
        assert_eq!(report.beta_coefficient, coeff, "{algo} n={n}: beta");
        // rounds and coefficient are exactly equal, so the priced cost is
        // identical for any buffer size and constants; spot-check the
        // arithmetic across several anyway
        for params in param_sets {
            for &s in &sizes {
                let lhs = report_cost(&report, s, params);
                let rhs = analytic_cost(algo, n, s, params).unwrap();
                assert_eq!(lhs, rhs, "{algo} n={n} s={s}");
            }
        }
        assert_eq!(
            schedule_cost(schedule, GIB, defaults()),
            analytic_cost(algo, n, GIB, defaults()).unwrap(),
            "{algo} n={n}: schedule_cost"
        );
        checked += 1;
    };

    for n in POW2 {
        check(&generate_stragglar(n).unwrap(), Algorithm::StragglAr, n);
        check(&generate_ring(n).unwrap(), Algorithm::Ring, n);
        check(&generate_rhd(n).unwrap(), Algorithm::Rhd, n);
        check(
            &generate_broadcast(n, RankId(n - 1)).unwrap(),
            Algorithm::Broadcast,
            n,
        );
    }
    // Ring also covers sizes outside the power-of-2 family.
    for n in [3u32, 5, 6, 7, 12, 30, 100] {
        check(&generate_ring(n).unwrap(), Algorithm::Ring, n);
    }
    println!(
        "criterion 3: PASS - schedule_cost matches analytic_cost with exact rational \
         coefficients across {checked} (algorithm, n) pairs"
    );
}

/// Criterion 4: with the default constants, 1 GiB buffers, and fully
/// overlapped preconditions, the speedup over Ring reaches 1.94 +/- 0.02 at
/// n = 256 and increases strictly with the cluster size.
#[test]
fn criterion_4_scaling_speedup_over_ring() {
    let params = defaults();
    let mut last = f64::NEG_INFINITY;
    let mut at_256 = 0.0;
    for n in [4u32, 8, 16, 32, 64, 128, 256] {
        // Fully overlapped preconditions: both algorithms start at the
        // straggler's arrival, so the comparison is post-barrier time.
        let ring = analytic_cost(Algorithm::Ring, n, GIB, params).unwrap();
        let sar = analytic_cost(Algorithm::StragglAr, n, GIB, params).unwrap();
        let speedup = ring / sar;
        assert!(
            speedup > last,
            "speedup not strictly increasing at n = {n}: {speedup} <= {last}"
        );
        last = speedup;
        if n == 256 {
            at_256 = speedup;
        }
    }
    assert!(
        (at_256 - 1.94).abs() <= 0.02,
        "speedup at n = 256 is {at_256}, outside 1.94 +/- 0.02"
    );
    println!(
        "criterion 4: PASS - full-overlap speedup over Ring reaches {at_256:.4} at n = 256 \
         and increases strictly over powers of 2 in [4, 256]"
    );
}

/// Criterion 5: even non-power-of-2 schedules verify and strictly beat
/// Ring's bandwidth coefficient; measured rounds are reported against the
/// ~n + 2 log n - 2 expectation without failing on it.
#[test]
fn criterion_5_even_sizes_verify_and_beat_ring() {
    let mut lines = Vec::new();
    for n in EVEN {
        let schedule = generate_stragglar_even(n).unwrap();
        let report = verify_schedule(&schedule);
        assert!(report.valid, "n = {n}: {:?}", report.violations);
        let ring_beta = Ratio::new(2 * (n as u64 - 1), n as u64);
        assert!(
            report.beta_coefficient < ring_beta,
            "n = {n}: beta {} does not beat Ring's {ring_beta}",
            report.beta_coefficient
        );
        let rounds = schedule.num_rounds();
        let expectation = n as f64 + 2.0 * (n as f64).log2() - 2.0;
        lines.push(format!(
            "n={n}: {rounds} rounds (expectation ~{expectation:.1})"
        ));
    }
    println!(
        "criterion 5: PASS - even sizes verify and beat Ring's bandwidth coefficient; {}",
        lines.join("; ")
    );
}

/// Exhaustive matching oracle, independent of the blossom solver.
fn brute_force_max_weight(edges: &[(u32, u32, u8)]) -> u64 {
    fn go(edges: &[(u32, u32, u8)], used: u64) -> u64 {
        match edges.split_first() {
            None => 0,
            Some((&(u, v, w), rest)) => {
                let skip = go(rest, used);
                if used & (1 << u) == 0 && used & (1 << v) == 0 {
                    skip.max(w as u64 + go(rest, used | (1 << u) | (1 << v)))
                } else {
                    skip
                }
            }
        }
    }
    go(edges, 0)
}

/// Criterion 6: the blossom solver's total weight equals the brute-force
/// optimum on 500+ random graphs of up to 10 vertices with weights in {1,2}.
#[test]
fn criterion_6_matching_equals_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240917);
    let mut cases = 0;
    while cases < 500 {
        let n = rng.gen_range(2..=10u32);
        let density = rng.gen_range(0.2..0.9);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    edges.push((u, v, rng.gen_range(1..=2u8)));
                }
            }
        }
        let mut graph = stragglar_core::matching::NeedGraph::new((0..n).map(RankId));
        for &(u, v, w) in &edges {
            graph.add_edge(RankId(u), RankId(v), w);
        }
        let solution = stragglar_core::matching::max_weight_matching(&graph);
        assert_eq!(
            solution.total_weight,
            brute_force_max_weight(&edges),
            "edges: {edges:?}"
        );
        cases += 1;
    }
    println!(
        "criterion 6: PASS - blossom total weight equals brute force on {cases} random graphs"
    );
}

/// Criterion 7: wherever StragglAR and a baseline genuinely cross as the
/// delay grows, the crossing found by bisection matches the closed-form
/// critical delay to 1e-9 relative. The closed form is also confirmed
/// non-negative and bounded by T_RS everywhere.
#[test]
fn criterion_7_critical_delay_matches_bisection() {
    let params = defaults();
    let grid_n = [4u32, 8, 16, 32, 64, 128, 256];
    let grid_s = [1u64 << 20, 1 << 26, GIB, 4 * GIB];
    let baselines = [Algorithm::Ring, Algorithm::Rhd, Algorithm::Broadcast];

    let total_at = |algo: Algorithm, n: u32, s: u64, delay: f64| {
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

    let mut matched = 0usize;
    let mut matched_ring_rhd = 0usize;
    for n in grid_n {
        for s in grid_s {
            let t_rs = reduce_scatter_time(n - 1, s, params);
            for baseline in baselines {
                let cd = critical_delay(n, s, params, baseline).unwrap();
                assert!(
                    cd >= 0.0 && cd <= t_rs,
                    "cd out of [0, T_RS] at n={n} s={s}"
                );

                // A genuine crossing needs StragglAR behind at zero delay and
                // ahead once the delay is large.
                let gap =
                    |d: f64| total_at(Algorithm::StragglAr, n, s, d) - total_at(baseline, n, s, d);
                let hi = 4.0 * (t_rs + total_at(baseline, n, s, 0.0));
                if !(gap(0.0) > 0.0 && gap(hi) < 0.0) {
                    continue;
                }
                let (mut lo, mut hi) = (0.0f64, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let found = 0.5 * (lo + hi);
                if cd > 0.0 {
                    assert!(
                        (found - cd).abs() <= 1e-9 * cd,
                        "n={n} s={s} {baseline}: bisection {found} vs closed form {cd}"
                    );
                    matched += 1;
                    if baseline != Algorithm::Broadcast {
                        matched_ring_rhd += 1;
                    }
                }
            }
        }
    }
    assert!(
        matched_ring_rhd >= 8,
        "expected plenty of Ring/RHD crossings on the grid, found {matched_ring_rhd}"
    );
    println!(
        "criterion 7: PASS - {matched} positive critical delays matched bisection within \
         1e-9 relative across a {}x{} scenario grid",
        grid_n.len(),
        grid_s.len()
    );
}

/// Criterion 8: the hardware-measured numbers (22% speedup on 8 A100s, the
/// 7.15 ms / 4.11 ms critical delays, the profiling CDFs) are out of reach
/// without the hardware; criteria 1-7 substitute. This checks the one
/// qualitative anchor the model can reproduce: at 8 ranks and 4 GiB the
/// modeled critical delay against Ring is strictly below the modeled
/// ReduceScatter time (measured on hardware as "almost 2x less").
#[test]
fn criterion_8_desk_scale_qualitative_anchor() {
    let params = defaults();
    let s = 4 * GIB;
    let cd = critical_delay(8, s, params, Algorithm::Ring).unwrap();
    let t_rs = reduce_scatter_time(7, s, params);
    assert!(
        cd > 0.0,
        "critical delay should be positive at 8 ranks / 4 GiB"
    );
    assert!(cd < t_rs, "critical delay {cd} not below T_RS {t_rs}");
    println!(
        "criterion 8: PASS - modeled 8-rank/4 GiB critical delay {:.3} ms is strictly below \
         the modeled ReduceScatter time {:.3} ms (ratio {:.2}); hardware-only measurements \
         are covered by criteria 1-7 instead",
        cd * 1e3,
        t_rs * 1e3,
        t_rs / cd
    );
}
