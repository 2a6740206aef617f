//! Verifier-compatible schedules for the baseline AllReduce algorithms:
//! Ring, recursive halving/doubling, and the straggler-aware Broadcast.

use crate::error::Error;
use crate::model::{Algorithm, ChunkId, Matching, RankId, Round, Schedule, Transfer, TransferKind};
use std::collections::BTreeMap;

/// Ring AllReduce over n chunks: n-1 reduce-scatter rounds (rank i sends
/// chunk (i - r) mod n to rank i+1, accumulating), then n-1 allgather rounds
/// propagating the finished chunks around the same ring.
pub fn generate_ring(n: u32) -> Result<Schedule, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    let mut rounds = Vec::with_capacity(2 * (n as usize - 1));
    for r in 0..n - 1 {
        rounds.push(ring_round(n, |i| (i + n - r) % n, TransferKind::Reduce));
    }
    for k in 0..n - 1 {
        rounds.push(ring_round(
            n,
            |i| (i + 1 + n - k) % n,
            TransferKind::Replace,
        ));
    }
    Ok(Schedule {
        algorithm: Algorithm::Ring,
        n,
        straggler: RankId(n - 1),
        num_chunks: n,
        rounds,
    })
}

fn ring_round(n: u32, chunk_for: impl Fn(u32) -> u32, kind: TransferKind) -> Round {
    // Group the cycle's transfers by unordered pair so the n = 2 ring (where
    // both directions share one link) forms a single bidirectional matching.
    let mut by_pair: BTreeMap<[RankId; 2], Vec<Transfer>> = BTreeMap::new();
    for i in 0..n {
        let dst = (i + 1) % n;
        let t = Transfer::new(RankId(i), RankId(dst), vec![ChunkId(chunk_for(i))], kind);
        let pair = [RankId(i.min(dst)), RankId(i.max(dst))];
        by_pair.entry(pair).or_default().push(t);
    }
    Round {
        matchings: by_pair
            .into_iter()
            .map(|(pair, transfers)| Matching { pair, transfers })
            .collect(),
    }
}

/// Recursive halving/doubling (butterfly) over n chunks: log n halving
/// rounds pair ranks differing in bit k and exchange half the live buffer
/// (reduce-scatter), then the mirror-image doubling rounds gather everything
/// back up with the bits in reverse order.
pub fn generate_rhd(n: u32) -> Result<Schedule, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    if !n.is_power_of_two() {
        return Err(Error::UnsupportedSize {
            algo: Algorithm::Rhd,
            n,
            hint: "recursive halving/doubling requires a power-of-2 size".to_string(),
        });
    }
    let log_n = n.trailing_zeros();
    let mut rounds = Vec::with_capacity(2 * log_n as usize);
    for k in 0..log_n {
        // Halving round k: live chunks agree with the sender on bits 0..k;
        // the sender hands over the half on its partner's side of bit k,
        // i.e. chunks congruent to the partner mod 2^(k+1).
        rounds.push(butterfly_round(
            n,
            k,
            TransferKind::Reduce,
            |sender, j, bit| j % (bit << 1) == (sender ^ bit) % (bit << 1),
        ));
    }
    for m in 0..log_n {
        // Doubling round m mirrors halving round log n - 1 - m: the sender
        // forwards everything it has assembled so far, chunks congruent to
        // itself mod 2^(k+1).
        let k = log_n - 1 - m;
        rounds.push(butterfly_round(
            n,
            k,
            TransferKind::Replace,
            |sender, j, bit| j % (bit << 1) == sender % (bit << 1),
        ));
    }
    Ok(Schedule {
        algorithm: Algorithm::Rhd,
        n,
        straggler: RankId(n - 1),
        num_chunks: n,
        rounds,
    })
}

fn butterfly_round(
    n: u32,
    k: u32,
    kind: TransferKind,
    sends: impl Fn(u32, u32, u32) -> bool,
) -> Round {
    let bit = 1u32 << k;
    let mut matchings = Vec::with_capacity(n as usize / 2);
    for i in 0..n {
        if i & bit != 0 {
            continue;
        }
        let p = i | bit;
        let i_sends: Vec<ChunkId> = (0..n).filter(|&j| sends(i, j, bit)).map(ChunkId).collect();
        let p_sends: Vec<ChunkId> = (0..n).filter(|&j| sends(p, j, bit)).map(ChunkId).collect();
        matchings.push(Matching {
            pair: [RankId(i), RankId(p)],
            transfers: vec![
                Transfer::new(RankId(i), RankId(p), i_sends, kind),
                Transfer::new(RankId(p), RankId(i), p_sends, kind),
            ],
        });
    }
    Round { matchings }
}

/// Straggler-aware Broadcast baseline: the non-stragglers are assumed to
/// have finished a full AllReduce among themselves during the delay, so the
/// whole buffer moves as one chunk. Round 0 exchanges it with the straggler
/// (fully reducing it on both sides); each later round doubles the holder
/// set, holders sending to the lowest-index non-holders in index order.
pub fn generate_broadcast(n: u32, straggler: RankId) -> Result<Schedule, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    if !n.is_power_of_two() {
        return Err(Error::UnsupportedSize {
            algo: Algorithm::Broadcast,
            n,
            hint: "the doubling broadcast requires a power-of-2 size".to_string(),
        });
    }
    if straggler.0 != n - 1 {
        return Err(Error::InvalidStraggler {
            got: straggler,
            expected: RankId(n - 1),
        });
    }
    let log_n = n.trailing_zeros();
    let chunk = ChunkId(0);
    let mut rounds = vec![Round {
        matchings: vec![Matching::exchange(
            RankId(0),
            straggler,
            chunk,
            chunk,
            TransferKind::Reduce,
        )],
    }];
    let mut holders = vec![RankId(0), straggler];
    for _ in 1..log_n {
        holders.sort_unstable();
        let receivers: Vec<RankId> = (0..n)
            .map(RankId)
            .filter(|r| !holders.contains(r))
            .take(holders.len())
            .collect();
        let matchings = holders
            .iter()
            .zip(receivers.iter())
            .map(|(&h, &g)| Matching::send(h, g, chunk, TransferKind::Replace))
            .collect();
        rounds.push(Round { matchings });
        holders.extend(receivers);
    }
    Ok(Schedule {
        algorithm: Algorithm::Broadcast,
        n,
        straggler,
        num_chunks: 1,
        rounds,
    })
}
