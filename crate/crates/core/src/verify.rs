//! Symbolic schedule verifier.
//!
//! Replays a schedule round by round against the algorithm-appropriate
//! initial state, collecting violations instead of aborting, and reports the
//! exact bandwidth coefficient: the sum over rounds of the maximum number of
//! chunks crossing any single port, divided by the chunk count.

use crate::error::Error;
use crate::model::{
    initial_state_broadcast, initial_state_stragglar, initial_state_uniform, Algorithm, ChunkId,
    ClusterState, RankId, RankSet, Round, Schedule, TransferKind,
};
use num_rational::Ratio;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

/// One detected problem: the round it occurred in and what went wrong.
/// Postcondition failures are attributed to the round index one past the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub round: usize,
    pub description: String,
}

/// Outcome of replaying a schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub valid: bool,
    pub rounds_executed: usize,
    pub violations: Vec<Violation>,
    /// Total sequential bytes divided by buffer size, as an exact rational:
    /// sum over rounds of (max chunks on one port) / num_chunks.
    pub beta_coefficient: Ratio<u64>,
}

impl VerificationReport {
    pub fn beta_f64(&self) -> f64 {
        *self.beta_coefficient.numer() as f64 / *self.beta_coefficient.denom() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

impl Serialize for VerificationReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Rational {
            numer: u64,
            denom: u64,
        }
        let mut s = serializer.serialize_struct("VerificationReport", 4)?;
        s.serialize_field("valid", &self.valid)?;
        s.serialize_field("rounds_executed", &self.rounds_executed)?;
        s.serialize_field("violations", &self.violations)?;
        s.serialize_field(
            "beta_coefficient",
            &Rational {
                numer: *self.beta_coefficient.numer(),
                denom: *self.beta_coefficient.denom(),
            },
        )?;
        s.end()
    }
}

fn structural_report(description: String) -> VerificationReport {
    VerificationReport {
        valid: false,
        rounds_executed: 0,
        violations: vec![Violation {
            round: 0,
            description,
        }],
        beta_coefficient: Ratio::new(0, 1),
    }
}

/// The state a schedule is expected to start from.
pub fn initial_state_for(schedule: &Schedule) -> Result<ClusterState, Error> {
    match schedule.algorithm {
        Algorithm::StragglAr => initial_state_stragglar(schedule.n, schedule.straggler),
        Algorithm::Ring | Algorithm::Rhd => initial_state_uniform(schedule.n, schedule.num_chunks),
        Algorithm::Broadcast => initial_state_broadcast(schedule.n),
    }
}

/// Replay `schedule` from its algorithm's documented initial state.
///
/// Semantic violations (port conflicts, double counts, replace regressions,
/// phantom sends) are recorded and the offending matching or transfer is
/// skipped, so a single bad round still yields a complete report. The
/// schedule is valid iff no violations occurred and the final state is fully
/// reduced everywhere.
pub fn verify_schedule(schedule: &Schedule) -> VerificationReport {
    if schedule.n < 2 {
        return structural_report(format!("schedule: n = {} is below 2", schedule.n));
    }
    let expected_chunks = schedule.algorithm.num_chunks(schedule.n);
    if schedule.num_chunks != expected_chunks {
        return structural_report(format!(
            "schedule: {} with n = {} must use {} chunks, not {}",
            schedule.algorithm, schedule.n, expected_chunks, schedule.num_chunks
        ));
    }
    let mut state = match initial_state_for(schedule) {
        Ok(s) => s,
        Err(e) => return structural_report(format!("schedule: {e}")),
    };

    let mut violations = Vec::new();
    let mut beta = Ratio::new(0u64, 1u64);
    for (round_idx, round) in schedule.rounds.iter().enumerate() {
        let (next, round_load) = apply_round_collect(&state, round, round_idx, &mut violations);
        beta += Ratio::new(round_load, schedule.num_chunks as u64);
        state = next;
    }

    let full = RankSet::full(schedule.n);
    for chunk in 0..schedule.num_chunks {
        let missing: Vec<u32> = (0..schedule.n)
            .filter(|&r| *state.contributors(RankId(r), ChunkId(chunk)) != full)
            .collect();
        if !missing.is_empty() {
            violations.push(Violation {
                round: schedule.rounds.len(),
                description: format!(
                    "postcondition: chunk {chunk} is not fully reduced at ranks {missing:?}"
                ),
            });
        }
    }

    VerificationReport {
        valid: violations.is_empty(),
        rounds_executed: schedule.rounds.len(),
        violations,
        beta_coefficient: beta,
    }
}

/// Apply one round, recording violations instead of failing. Offending
/// matchings (structure or port conflicts) and transfers (semantics) are
/// skipped; everything else still executes. Returns the next state and the
/// round's maximum single-port load in chunks.
fn apply_round_collect(
    state: &ClusterState,
    round: &Round,
    round_idx: usize,
    violations: &mut Vec<Violation>,
) -> (ClusterState, u64) {
    let n = state.n() as usize;
    let mut send_load = vec![0u64; n];
    let mut recv_load = vec![0u64; n];
    let mut sending = RankSet::new(state.n());
    let mut receiving = RankSet::new(state.n());
    let mut next = state.clone();

    'matchings: for m in &round.matchings {
        if let Err(e) = crate::model::matching_structure(state, m) {
            violations.push(Violation {
                round: round_idx,
                description: e.to_string(),
            });
            continue;
        }
        // Single-port, per direction: one send and one receive per rank.
        for t in &m.transfers {
            for (rank, ports) in [(t.src, &sending), (t.dst, &receiving)] {
                if ports.contains(rank) {
                    violations.push(Violation {
                        round: round_idx,
                        description: Error::PortViolation { rank }.to_string(),
                    });
                    continue 'matchings;
                }
            }
        }
        for t in &m.transfers {
            sending.insert(t.src);
            receiving.insert(t.dst);
        }

        for t in &m.transfers {
            send_load[t.src.index()] += t.chunks.len() as u64;
            recv_load[t.dst.index()] += t.chunks.len() as u64;
            for &chunk in &t.chunks {
                let src_set = state.contributors(t.src, chunk);
                if src_set.is_empty() {
                    violations.push(Violation {
                        round: round_idx,
                        description: Error::PhantomSend { src: t.src, chunk }.to_string(),
                    });
                    continue;
                }
                let dst_set = state.contributors(t.dst, chunk);
                match t.kind {
                    TransferKind::Reduce => {
                        if !src_set.is_disjoint(dst_set) {
                            violations.push(Violation {
                                round: round_idx,
                                description: Error::DoubleCount {
                                    src: t.src,
                                    dst: t.dst,
                                    chunk,
                                }
                                .to_string(),
                            });
                            continue;
                        }
                        let mut merged = dst_set.clone();
                        merged.union_with(src_set);
                        next.set_contributors(t.dst, chunk, merged);
                    }
                    TransferKind::Replace => {
                        if !src_set.is_superset(dst_set) {
                            violations.push(Violation {
                                round: round_idx,
                                description: Error::Regression {
                                    src: t.src,
                                    dst: t.dst,
                                    chunk,
                                }
                                .to_string(),
                            });
                            continue;
                        }
                        next.set_contributors(t.dst, chunk, src_set.clone());
                    }
                }
            }
        }
    }

    let max_load = send_load
        .iter()
        .chain(recv_load.iter())
        .copied()
        .max()
        .unwrap_or(0);
    (next, max_load)
}
