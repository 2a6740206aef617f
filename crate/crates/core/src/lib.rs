//! Schedule synthesis, correctness verification, and alpha-beta cost
//! modeling for AllReduce collectives with a persistent straggler.
//!
//! The crate has three layers:
//!
//! * [`model`] / [`verify`]: a schedule data model and a symbolic executor
//!   that proves a schedule implements AllReduce — contributor sets stand in
//!   for numeric buffers, so double counting and lost contributions are
//!   detectable without tensor arithmetic.
//! * Generators: [`stragglar`] (closed-form, power-of-2 sizes, with the
//!   counting invariants asserted every round), [`nonpow2`] (matching-based,
//!   even sizes, built on the exact blossom solver in [`matching`]), and
//!   [`baselines`] (Ring, recursive halving/doubling, Broadcast).
//! * [`cost`]: the alpha-beta model — closed-form costs, schedule-derived
//!   costs, straggler-delay overlap accounting, and critical delays.

pub mod baselines;
pub mod cost;
pub mod error;
pub mod matching;
pub mod model;
pub mod nonpow2;
pub mod stragglar;
pub mod verify;

pub use error::Error;
pub use model::{
    apply_round, initial_state_broadcast, initial_state_stragglar, initial_state_uniform,
    Algorithm, ChunkId, ClusterState, Matching, RankId, RankSet, Round, Schedule, Transfer,
    TransferKind,
};
pub use verify::{verify_schedule, VerificationReport, Violation};

/// Generate a schedule for any supported (algorithm, n) pair, routing
/// StragglAR to the closed-form generator for powers of 2 and to the
/// matching-based generator for other even sizes.
pub fn generate_schedule(algo: Algorithm, n: u32) -> Result<Schedule, Error> {
    match algo {
        Algorithm::StragglAr => {
            if n >= 2 && !n.is_power_of_two() && n.is_multiple_of(2) {
                nonpow2::generate_stragglar_even(n)
            } else {
                stragglar::generate_stragglar(n)
            }
        }
        Algorithm::Ring => baselines::generate_ring(n),
        Algorithm::Rhd => baselines::generate_rhd(n),
        Algorithm::Broadcast => {
            if n < 2 {
                return Err(Error::InvalidSize { n });
            }
            baselines::generate_broadcast(n, RankId(n - 1))
        }
    }
}
