//! Schedule generator for straggler-aware AllReduce on power-of-2 cluster
//! sizes.
//!
//! The precondition is a ReduceScatter among the n-1 non-stragglers, ideally
//! overlapped with the straggler's delay. From there the generator emits
//! n + log2(n) - 2 rounds:
//!
//! * In round r < n-1, rank r exchanges chunk `c_r` with the straggler,
//!   fully reducing it on both sides.
//! * Phase 1 (rounds 1..log n) hands every rank one fully reduced chunk:
//!   rank r-1 sends `c_{r-1}` to rank r-1+log n, and every other holder of a
//!   fully reduced chunk sends it to a chunk-free rank above 2(log n - 1).
//! * Phase 2 (rounds >= log n) doubles every active chunk each round via a
//!   partition of the ranks into holders of the oldest active chunk (P) and
//!   everyone else (Q). Ranks about to pair with the straggler (the critical
//!   window) are matched first, under the constraint that they may only
//!   receive chunks old enough to expire before their straggler round.
//! * Once the straggler holds everything (after round n-2) it joins Q and
//!   pushes the final chunk, which therefore needs only log n - 1 extra
//!   rounds.
//!
//! The counting invariants that make this work are asserted on every round
//! during generation; they are cheap next to the O(n^2) schedule itself.

use crate::error::Error;
use crate::model::{Algorithm, ChunkId, Matching, RankId, Round, Schedule, TransferKind};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Ordered map from each active chunk (fully reduced but not yet held by all
/// ranks) to the set of ranks currently holding it. The straggler is included
/// only once it has a complete buffer and starts pushing the final chunk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveChunkMap {
    entries: BTreeMap<ChunkId, BTreeSet<RankId>>,
}

impl ActiveChunkMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn oldest(&self) -> Option<ChunkId> {
        self.entries.keys().next().copied()
    }

    pub fn holders(&self, chunk: ChunkId) -> Option<&BTreeSet<RankId>> {
        self.entries.get(&chunk)
    }

    pub fn contains_holder(&self, chunk: ChunkId, rank: RankId) -> bool {
        self.entries
            .get(&chunk)
            .is_some_and(|holders| holders.contains(&rank))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChunkId, &BTreeSet<RankId>)> {
        self.entries.iter().map(|(c, h)| (*c, h))
    }

    fn insert_new(&mut self, chunk: ChunkId, holders: BTreeSet<RankId>) {
        let prev = self.entries.insert(chunk, holders);
        assert!(prev.is_none(), "chunk {chunk} activated twice");
    }

    fn add_holder(&mut self, chunk: ChunkId, rank: RankId) {
        let holders = self
            .entries
            .get_mut(&chunk)
            .unwrap_or_else(|| panic!("receiver of inactive chunk {chunk}"));
        let inserted = holders.insert(rank);
        assert!(
            inserted,
            "rank {rank} received chunk {chunk} it already holds"
        );
    }

    fn remove(&mut self, chunk: ChunkId) -> BTreeSet<RankId> {
        self.entries
            .remove(&chunk)
            .unwrap_or_else(|| panic!("expiring chunk {chunk} is not active"))
    }

    /// The unique active chunk `rank` holds, if any.
    pub fn active_chunk_of(&self, rank: RankId) -> Option<ChunkId> {
        let mut found = None;
        for (chunk, holders) in &self.entries {
            if holders.contains(&rank) {
                assert!(
                    found.is_none(),
                    "rank {rank} holds two active chunks ({} and {chunk})",
                    found.unwrap()
                );
                found = Some(*chunk);
            }
        }
        found
    }
}

/// The round-r split of ranks into holders of the oldest active chunk (due
/// to finish propagating this round) and holders of everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPartition {
    pub round: u32,
    pub p: BTreeSet<RankId>,
    pub q: BTreeSet<RankId>,
}

/// Ranks `[r+1, r+log n]` (clamped to real non-straggler ranks): the ones
/// that will pair with the straggler within the next log n rounds and may
/// only receive chunks that expire before their turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticalWindow {
    first: u32,
    last: u32, // inclusive; first > last means empty
}

impl CriticalWindow {
    pub fn for_round(r: u32, n: u32, log_n: u32) -> Self {
        CriticalWindow {
            first: r + 1,
            last: (r + log_n).min(n.saturating_sub(2)),
        }
    }

    pub fn contains(&self, rank: RankId) -> bool {
        self.first <= rank.0 && rank.0 <= self.last
    }

    pub fn iter(&self) -> impl Iterator<Item = RankId> {
        (self.first..=self.last).map(RankId)
    }
}

/// Per-round generation trace for invariant auditing: the active chunk map
/// as seen at the start of the round, plus the P/Q partition for doubling
/// rounds.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRound {
    pub round: u32,
    pub active: Vec<TraceChunk>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<TracePartition>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceChunk {
    pub chunk: u32,
    pub holders: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TracePartition {
    pub p: Vec<u32>,
    pub q: Vec<u32>,
}

/// Round-by-round generator state. Most callers want [`generate_stragglar`];
/// this type is public so the per-phase matching rules can be exercised and
/// audited directly.
#[derive(Debug, Clone)]
pub struct StragglarGenerator {
    n: u32,
    log_n: u32,
    round: u32,
    active: ActiveChunkMap,
    trace: Vec<TraceRound>,
}

impl StragglarGenerator {
    pub fn new(n: u32) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::InvalidSize { n });
        }
        if !n.is_power_of_two() {
            let hint = if n.is_multiple_of(2) {
                "this generator covers powers of 2; even sizes are handled by \
                 the matching-based even-size generator"
            } else {
                "supported sizes are powers of 2 and even values of n; odd \
                 sizes are not supported"
            };
            return Err(Error::UnsupportedSize {
                algo: Algorithm::StragglAr,
                n,
                hint: hint.to_string(),
            });
        }
        Ok(StragglarGenerator {
            n,
            log_n: n.trailing_zeros(),
            round: 0,
            active: ActiveChunkMap::new(),
            trace: Vec::new(),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    fn sigma(&self) -> RankId {
        RankId(self.n - 1)
    }

    fn final_chunk(&self) -> ChunkId {
        ChunkId(self.n - 2)
    }

    pub fn total_rounds(&self) -> u32 {
        self.n + self.log_n - 2
    }

    pub fn current_round(&self) -> u32 {
        self.round
    }

    pub fn is_done(&self) -> bool {
        self.round >= self.total_rounds()
    }

    pub fn active_chunks(&self) -> &ActiveChunkMap {
        &self.active
    }

    pub fn trace(&self) -> &[TraceRound] {
        &self.trace
    }

    /// Matchings for the current round r in 1..log n: the straggler pairing,
    /// the mandated send r-1 -> r-1+log n of chunk c_{r-1}, and one send per
    /// remaining fully-reduced-chunk holder to the lowest-index chunk-free
    /// rank above 2(log n - 1).
    pub fn phase1_matchings(&self) -> Vec<Matching> {
        let r = self.round;
        assert!(
            0 < r && r < self.log_n,
            "phase 1 covers rounds 1..log n, not round {r}"
        );
        let sigma = self.sigma();
        let mut matchings = vec![Matching::exchange(
            RankId(r),
            sigma,
            ChunkId(r),
            ChunkId(r),
            TransferKind::Reduce,
        )];
        let mut busy: BTreeSet<RankId> = [RankId(r), sigma].into();

        let mandated_src = RankId(r - 1);
        let mandated_dst = RankId(r - 1 + self.log_n);
        matchings.push(Matching::send(
            mandated_src,
            mandated_dst,
            ChunkId(r - 1),
            TransferKind::Replace,
        ));
        busy.insert(mandated_src);
        busy.insert(mandated_dst);

        // Chunk-free ranks above the 2(log n - 1) threshold, lowest first.
        let threshold = 2 * (self.log_n - 1);
        let mut pool: Vec<RankId> = (threshold + 1..self.n - 1)
            .map(RankId)
            .filter(|g| !busy.contains(g) && self.active.active_chunk_of(*g).is_none())
            .collect();
        pool.reverse(); // pop() yields lowest index first

        for (chunk, holders) in self.active.iter() {
            for &holder in holders {
                if busy.contains(&holder) {
                    continue;
                }
                let receiver = pool.pop().unwrap_or_else(|| {
                    panic!(
                        "round {r}: no chunk-free receiver above rank {threshold} \
                         for holder {holder} of chunk {chunk}"
                    )
                });
                matchings.push(Matching::send(
                    holder,
                    receiver,
                    chunk,
                    TransferKind::Replace,
                ));
                busy.insert(holder);
                busy.insert(receiver);
            }
        }
        matchings
    }

    /// Matchings for the current round r >= log n: the straggler pairing
    /// while r < n-1, critical-window ranks matched first to the oldest
    /// admissible chunk held outside the window, then the remaining P and Q
    /// ranks zipped in ascending order, every pair exchanging their active
    /// chunks.
    pub fn phase2_matchings(&self) -> Vec<Matching> {
        let r = self.round;
        assert!(
            r >= self.log_n,
            "phase 2 starts at round log n, not round {r}"
        );
        self.assert_phase2_invariant();

        let sigma = self.sigma();
        let due = self.due_chunk();
        let mut matchings = Vec::new();
        let mut available: BTreeSet<RankId> = (0..self.n - 1).map(RankId).collect();
        if r < self.n - 1 {
            matchings.push(Matching::exchange(
                RankId(r),
                sigma,
                ChunkId(r),
                ChunkId(r),
                TransferKind::Reduce,
            ));
            available.remove(&RankId(r));
        } else {
            available.insert(sigma);
        }

        let window = CriticalWindow::for_round(r, self.n, self.log_n);
        for g in window.iter() {
            assert!(
                available.remove(&g),
                "round {r}: critical-window rank {g} is not available"
            );
            let g_active = self
                .active
                .active_chunk_of(g)
                .unwrap_or_else(|| panic!("round {r}: window rank {g} holds no active chunk"));
            let deadline = ChunkId(g.0 - self.log_n);
            let partner = self
                .active
                .iter()
                .take_while(|(chunk, _)| *chunk <= deadline)
                .filter(|(chunk, _)| *chunk != g_active)
                .find_map(|(chunk, holders)| {
                    holders
                        .iter()
                        .find(|h| available.contains(h) && !window.contains(**h))
                        .map(|h| (chunk, *h))
                });
            let (chunk, h) = partner.unwrap_or_else(|| {
                panic!(
                    "round {r}: no partner outside the critical window holds an \
                     admissible chunk for rank {g}"
                )
            });
            available.remove(&h);
            matchings.push(Matching::exchange(
                g,
                h,
                g_active,
                chunk,
                TransferKind::Replace,
            ));
        }

        let p_rem: Vec<RankId> = self
            .active
            .holders(due)
            .map(|holders| {
                holders
                    .iter()
                    .filter(|h| available.contains(h))
                    .copied()
                    .collect()
            })
            .unwrap_or_default();
        let q_rem: Vec<RankId> = available
            .iter()
            .filter(|rank| !p_rem.contains(rank))
            .copied()
            .collect();
        assert_eq!(
            p_rem.len(),
            q_rem.len(),
            "round {r}: leftover P and Q ranks do not pair up"
        );
        for (&u, &v) in p_rem.iter().zip(q_rem.iter()) {
            if v == sigma {
                // The straggler needs nothing; it only pushes the final chunk.
                matchings.push(Matching::send(
                    sigma,
                    u,
                    self.final_chunk(),
                    TransferKind::Replace,
                ));
            } else {
                let v_active = self
                    .active
                    .active_chunk_of(v)
                    .unwrap_or_else(|| panic!("round {r}: rank {v} holds no active chunk"));
                matchings.push(Matching::exchange(
                    u,
                    v,
                    due,
                    v_active,
                    TransferKind::Replace,
                ));
            }
        }
        matchings
    }

    fn due_chunk(&self) -> ChunkId {
        ChunkId(self.round - self.log_n)
    }

    /// The P/Q partition the current (phase 2) round works with.
    pub fn partition(&self) -> RoundPartition {
        let due = self.due_chunk();
        let p = self.active.holders(due).cloned().unwrap_or_default();
        let q = self
            .active
            .iter()
            .filter(|(chunk, _)| *chunk != due)
            .flat_map(|(_, holders)| holders.iter().copied())
            .collect();
        RoundPartition {
            round: self.round,
            p,
            q,
        }
    }

    /// The doubling-round invariant, checked immediately before every
    /// phase-2 round:
    /// exactly the right chunks are active, holder counts follow the powers
    /// of two, holder sets partition the participating ranks, and for
    /// r <= n-2 rank r holds the due chunk.
    fn assert_phase2_invariant(&self) {
        let r = self.round;
        let n = self.n;
        let log_n = self.log_n;
        let oldest = r - log_n;
        let newest = (r.saturating_sub(1)).min(n - 2);
        let expected_chunks: Vec<ChunkId> = (oldest..=newest).map(ChunkId).collect();
        let actual_chunks: Vec<ChunkId> = self.active.iter().map(|(c, _)| c).collect();
        assert_eq!(
            actual_chunks, expected_chunks,
            "round {r}: active chunks should be c_{oldest}..c_{newest}"
        );

        let mut union: BTreeSet<RankId> = BTreeSet::new();
        let mut total = 0usize;
        for (chunk, holders) in self.active.iter() {
            let j = chunk.0;
            let expected = if r >= n - 1 && j == n - 2 {
                // Once complete, the straggler counts as a holder, so the
                // final chunk starts its doubling from two ranks.
                1u64 << (r + 2 - n)
            } else {
                1u64 << (r - j - 1)
            };
            assert_eq!(
                holders.len() as u64,
                expected,
                "round {r}: |A[c_{j}]| should be {expected}"
            );
            total += holders.len();
            union.extend(holders.iter().copied());
        }
        assert_eq!(
            union.len(),
            total,
            "round {r}: active chunk holder sets are not pairwise disjoint"
        );
        let participants = if r >= n - 1 { n } else { n - 1 };
        assert_eq!(
            union.len() as u32,
            participants,
            "round {r}: every participating rank should hold exactly one active chunk"
        );

        let part = self.partition();
        assert_eq!(part.p.len() as u32, n / 2, "round {r}: |P_r| should be n/2");
        let expected_q = if r >= n - 1 { n / 2 } else { n / 2 - 1 };
        assert_eq!(
            part.q.len() as u32,
            expected_q,
            "round {r}: |Q_r| should be {expected_q}"
        );
        if r <= n - 2 {
            assert!(
                part.p.contains(&RankId(r)),
                "round {r}: rank {r} should hold the due chunk c_{}",
                r - log_n
            );
        }
    }

    fn record_trace(&mut self, partition: Option<RoundPartition>) {
        let active = self
            .active
            .iter()
            .map(|(chunk, holders)| TraceChunk {
                chunk: chunk.0,
                holders: holders.iter().map(|r| r.0).collect(),
            })
            .collect();
        self.trace.push(TraceRound {
            round: self.round,
            active,
            partition: partition.map(|p| TracePartition {
                p: p.p.iter().map(|r| r.0).collect(),
                q: p.q.iter().map(|r| r.0).collect(),
            }),
        });
    }

    /// Emit the next round and advance the active chunk bookkeeping.
    pub fn next_round(&mut self) -> Option<Round> {
        if self.is_done() {
            return None;
        }
        let r = self.round;
        let (matchings, partition) = if r == 0 {
            (
                vec![Matching::exchange(
                    RankId(0),
                    self.sigma(),
                    ChunkId(0),
                    ChunkId(0),
                    TransferKind::Reduce,
                )],
                None,
            )
        } else if r < self.log_n {
            (self.phase1_matchings(), None)
        } else {
            (self.phase2_matchings(), Some(self.partition()))
        };
        self.record_trace(partition);
        self.apply_bookkeeping(&matchings);
        self.round += 1;
        Some(Round { matchings })
    }

    fn apply_bookkeeping(&mut self, matchings: &[Matching]) {
        let r = self.round;
        let n = self.n;
        let sizes_before: BTreeMap<ChunkId, usize> = self
            .active
            .iter()
            .map(|(chunk, holders)| (chunk, holders.len()))
            .collect();

        // Every replace-receiver becomes a holder of that active chunk.
        for m in matchings {
            for t in &m.transfers {
                if t.kind != TransferKind::Replace {
                    continue;
                }
                for &chunk in &t.chunks {
                    self.active.add_holder(chunk, t.dst);
                }
            }
        }

        let expired = if r >= self.log_n {
            let chunk = ChunkId(r - self.log_n);
            let holders = self.active.remove(chunk);
            assert_eq!(
                holders.len() as u32,
                n - 1,
                "round {r}: chunk {chunk} expired before reaching all non-stragglers"
            );
            Some(chunk)
        } else {
            None
        };

        // Every surviving active chunk must have doubled; this is what
        // bounds each chunk's propagation to log n rounds.
        for (chunk, before) in &sizes_before {
            if Some(*chunk) == expired {
                continue;
            }
            let after = self.active.holders(*chunk).map_or(0, |h| h.len());
            assert_eq!(
                after,
                before * 2,
                "round {r}: active chunk {chunk} did not double"
            );
        }

        if r < n - 1 {
            let mut holders: BTreeSet<RankId> = [RankId(r)].into();
            if r == n - 2 {
                // From here on the straggler is complete and counts as a
                // holder of the final chunk.
                holders.insert(self.sigma());
            }
            self.active.insert_new(ChunkId(r), holders);
        }

        if self.round + 1 == self.total_rounds() {
            // After the last round only the final chunk remains, held by all.
            let survivors: Vec<ChunkId> = self.active.iter().map(|(c, _)| c).collect();
            assert_eq!(
                survivors,
                vec![self.final_chunk()],
                "generation ended with unexpected active chunks"
            );
            let holders = self.active.holders(self.final_chunk()).unwrap();
            assert_eq!(
                holders.len() as u32,
                n,
                "final chunk is not held by all {n} ranks"
            );
        }
    }
}

/// Generate a complete schedule for a power-of-2 cluster of size `n` with
/// the straggler at rank n-1.
pub fn generate_stragglar(n: u32) -> Result<Schedule, Error> {
    generate_stragglar_with_trace(n).map(|(schedule, _)| schedule)
}

/// As [`generate_stragglar`], also returning the per-round invariant trace.
pub fn generate_stragglar_with_trace(n: u32) -> Result<(Schedule, Vec<TraceRound>), Error> {
    let mut generator = StragglarGenerator::new(n)?;
    let mut rounds = Vec::with_capacity(generator.total_rounds() as usize);
    while let Some(round) = generator.next_round() {
        rounds.push(round);
    }
    assert_eq!(rounds.len() as u32, n + n.trailing_zeros() - 2);
    let schedule = Schedule {
        algorithm: Algorithm::StragglAr,
        n,
        straggler: RankId(n - 1),
        num_chunks: n - 1,
        rounds,
    };
    Ok((schedule, generator.trace))
}
