//! Schedule generation for even, non-power-of-2 cluster sizes.
//!
//! The power-of-2 doubling structure breaks down here (ranks can hold several
//! active chunks at once), so each round is solved as a maximum-weight
//! matching instead: connect two ranks with weight 2 when each holds a fully
//! reduced chunk the other lacks, weight 1 when the need is one-directional,
//! and let the blossom solver pick the round's pairs. The straggler pairing
//! on chunk `c_r` in round r is kept (it is what fully reduces chunks), and
//! matched pairs exchange the oldest fully reduced chunk the partner lacks.
//! Once the straggler is complete it joins the graph but only offers the
//! final chunk.
//!
//! No round bound is proven for these sizes; generation runs to the
//! postcondition with a 4n-round safety stop, and in practice lands near
//! n + 2 log n - 2 rounds.

use crate::error::Error;
use crate::matching::{max_weight_matching, NeedGraph};
use crate::model::{Algorithm, ChunkId, Matching, RankId, Round, Schedule, Transfer, TransferKind};

/// Bitset over chunk indices.
#[derive(Clone)]
struct ChunkSet {
    words: Vec<u64>,
}

impl ChunkSet {
    fn new(num_chunks: u32) -> Self {
        ChunkSet {
            words: vec![0; (num_chunks as usize).div_ceil(64)],
        }
    }

    fn insert(&mut self, chunk: u32) {
        self.words[chunk as usize / 64] |= 1 << (chunk % 64);
    }

    fn contains(&self, chunk: u32) -> bool {
        self.words[chunk as usize / 64] & (1 << (chunk % 64)) != 0
    }

    fn count(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Lowest chunk index present in `other` but missing here.
    fn oldest_missing_from(&self, other: &ChunkSet) -> Option<u32> {
        for (i, (mine, theirs)) in self.words.iter().zip(other.words.iter()).enumerate() {
            let diff = theirs & !mine;
            if diff != 0 {
                return Some((i * 64) as u32 + diff.trailing_zeros());
            }
        }
        None
    }
}

struct EvenGenerator {
    n: u32,
    num_chunks: u32,
    /// Per rank, the chunks it holds fully reduced (straggler included).
    full: Vec<ChunkSet>,
}

impl EvenGenerator {
    fn sigma(&self) -> u32 {
        self.n - 1
    }

    fn final_chunk(&self) -> u32 {
        self.num_chunks - 1
    }

    fn done(&self) -> bool {
        self.full.iter().all(|f| f.count() == self.num_chunks)
    }

    /// Oldest fully reduced chunk `src` can usefully send to `dst`, honoring
    /// the straggler's final-chunk-only restriction.
    fn offer(&self, src: u32, dst: u32) -> Option<ChunkId> {
        if src == self.sigma() {
            let fc = self.final_chunk();
            return (self.full[src as usize].contains(fc) && !self.full[dst as usize].contains(fc))
                .then_some(ChunkId(fc));
        }
        self.full[dst as usize]
            .oldest_missing_from(&self.full[src as usize])
            .map(ChunkId)
    }

    fn build_round(&self, r: u32) -> Round {
        let sigma = self.sigma();
        let mut matchings = Vec::new();
        let participants: Vec<u32> = if r < self.n - 1 {
            matchings.push(Matching::exchange(
                RankId(r),
                RankId(sigma),
                ChunkId(r),
                ChunkId(r),
                TransferKind::Reduce,
            ));
            (0..self.n - 1).filter(|&g| g != r).collect()
        } else {
            (0..self.n).collect()
        };

        let mut graph = NeedGraph::new(participants.iter().map(|&g| RankId(g)));
        for (i, &a) in participants.iter().enumerate() {
            for &b in &participants[i + 1..] {
                let weight = self.offer(a, b).is_some() as u8 + self.offer(b, a).is_some() as u8;
                if weight > 0 {
                    graph.add_edge(RankId(a), RankId(b), weight);
                }
            }
        }
        let solution = max_weight_matching(&graph);
        for (u, v) in solution.edges {
            let mut transfers = Vec::new();
            if let Some(chunk) = self.offer(u.0, v.0) {
                transfers.push(Transfer::new(u, v, vec![chunk], TransferKind::Replace));
            }
            if let Some(chunk) = self.offer(v.0, u.0) {
                transfers.push(Transfer::new(v, u, vec![chunk], TransferKind::Replace));
            }
            assert!(
                !transfers.is_empty(),
                "matched pair with nothing to exchange"
            );
            matchings.push(Matching {
                pair: [u, v],
                transfers,
            });
        }
        Round { matchings }
    }

    fn apply_round(&mut self, r: u32, round: &Round) {
        if r < self.n - 1 {
            let sigma = self.sigma() as usize;
            self.full[r as usize].insert(r);
            self.full[sigma].insert(r);
        }
        for m in &round.matchings {
            for t in &m.transfers {
                if t.kind == TransferKind::Replace {
                    for &chunk in &t.chunks {
                        self.full[t.dst.index()].insert(chunk.0);
                    }
                }
            }
        }
    }
}

/// Generate a schedule for an even, non-power-of-2 cluster of size `n` with
/// the straggler at rank n-1.
pub fn generate_stragglar_even(n: u32) -> Result<Schedule, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    if n.is_power_of_two() {
        return Err(Error::UnsupportedSize {
            algo: Algorithm::StragglAr,
            n,
            hint: "powers of 2 are handled by the closed-form generator".to_string(),
        });
    }
    if !n.is_multiple_of(2) {
        return Err(Error::UnsupportedSize {
            algo: Algorithm::StragglAr,
            n,
            hint: "odd sizes are not supported".to_string(),
        });
    }

    let num_chunks = n - 1;
    let mut gen = EvenGenerator {
        n,
        num_chunks,
        full: vec![ChunkSet::new(num_chunks); n as usize],
    };
    let bound = 4 * n;
    let mut rounds = Vec::new();
    let mut r = 0u32;
    while !gen.done() {
        if r >= bound {
            return Err(Error::Stalled { n, bound });
        }
        let round = gen.build_round(r);
        gen.apply_round(r, &round);
        rounds.push(round);
        r += 1;
    }

    Ok(Schedule {
        algorithm: Algorithm::StragglAr,
        n,
        straggler: RankId(n - 1),
        num_chunks,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::verify_schedule;
    use num_rational::Ratio;

    #[test]
    fn n6_verifies_and_beats_ring_bandwidth() {
        let schedule = generate_stragglar_even(6).unwrap();
        let report = verify_schedule(&schedule);
        assert!(report.valid, "violations: {:?}", report.violations);
        // beta = rounds / (n-1) must undercut Ring's 2(n-1)/n
        assert!(
            report.beta_coefficient < Ratio::new(2 * 5, 6),
            "beta {} does not beat Ring",
            report.beta_coefficient
        );
        println!(
            "n=6: {} rounds (expected around n + 2 log n - 2 = {:.1})",
            schedule.num_rounds(),
            6.0 + 2.0 * 6.0f64.log2() - 2.0
        );
    }

    #[test]
    fn n10_round3_pairs_rank3_with_straggler() {
        let schedule = generate_stragglar_even(10).unwrap();
        assert!(verify_schedule(&schedule).valid);
        let round3 = &schedule.rounds[3];
        let found = round3.matchings.iter().any(|m| {
            m.pair == [RankId(3), RankId(9)]
                && m.transfers
                    .iter()
                    .all(|t| t.chunks == vec![ChunkId(3)] && t.kind == TransferKind::Reduce)
        });
        assert!(found, "round 3 must exchange c_3 with the straggler");
    }

    #[test]
    fn n12_stays_well_under_ring_round_count() {
        let schedule = generate_stragglar_even(12).unwrap();
        assert!(verify_schedule(&schedule).valid);
        let rounds = schedule.num_rounds();
        assert!(rounds < 2 * 11, "{rounds} rounds reaches Ring's 2(n-1)");
        println!("n=12: {rounds} rounds (practice expectation ~18)");
    }

    #[test]
    fn straggler_only_sends_final_chunk_after_completion() {
        let schedule = generate_stragglar_even(10).unwrap();
        let sigma = RankId(9);
        for (i, round) in schedule.rounds.iter().enumerate() {
            for m in &round.matchings {
                for t in &m.transfers {
                    if t.src == sigma && t.kind == TransferKind::Replace {
                        assert!(i >= 9, "straggler propagated before completing");
                        assert_eq!(t.chunks, vec![ChunkId(8)]);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_pow2_odd_and_tiny() {
        assert!(matches!(
            generate_stragglar_even(8),
            Err(Error::UnsupportedSize { .. })
        ));
        assert!(matches!(
            generate_stragglar_even(7),
            Err(Error::UnsupportedSize { .. })
        ));
        assert!(matches!(
            generate_stragglar_even(1),
            Err(Error::InvalidSize { .. })
        ));
    }
}
