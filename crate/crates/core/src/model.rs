//! Schedule data model and the symbolic cluster state it executes against.
//!
//! A [`Schedule`] is an ordered list of rounds; each round is a set of
//! matchings between rank pairs, and each matching carries one or two
//! directed [`Transfer`]s. Instead of numeric buffers, the executor tracks a
//! *contributor set* per (rank, chunk) cell: the set of ranks whose data has
//! been accumulated into that cell. Sum reduction is modeled as disjoint
//! union, so double counting and lost contributions are detectable without
//! any tensor arithmetic.

use crate::error::Error;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A participant in the collective, indexed `0..n`.
///
/// The persistent straggler is rank `n-1` by convention; an external
/// straggler is swapped with rank `n-1` offline before the schedule runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankId(pub u32);

/// A buffer chunk, indexed `0..num_chunks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(pub u32);

impl RankId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ChunkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a receiver incorporates an incoming chunk.
///
/// `Reduce` accumulates: the receiver's contributor set becomes the union of
/// both sides, and the sets must be disjoint beforehand (a sum must not count
/// any rank twice). `Replace` overwrites: the sender's set must be a superset
/// of the receiver's, so information is never lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Reduce,
    Replace,
}

/// A directed transfer of one or more chunks between the two ranks of a
/// matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub src: RankId,
    pub dst: RankId,
    pub chunks: Vec<ChunkId>,
    pub kind: TransferKind,
}

impl Transfer {
    pub fn new(src: RankId, dst: RankId, chunks: Vec<ChunkId>, kind: TransferKind) -> Self {
        Transfer {
            src,
            dst,
            chunks,
            kind,
        }
    }
}

/// A pair of ranks communicating in one round, with at most one transfer per
/// direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub pair: [RankId; 2],
    pub transfers: Vec<Transfer>,
}

impl Matching {
    /// Bidirectional exchange of a single chunk in each direction.
    pub fn exchange(
        a: RankId,
        b: RankId,
        a_sends: ChunkId,
        b_sends: ChunkId,
        kind: TransferKind,
    ) -> Self {
        Matching {
            pair: [a.min(b), a.max(b)],
            transfers: vec![
                Transfer::new(a, b, vec![a_sends], kind),
                Transfer::new(b, a, vec![b_sends], kind),
            ],
        }
    }

    /// One-way send of a single chunk.
    pub fn send(src: RankId, dst: RankId, chunk: ChunkId, kind: TransferKind) -> Self {
        Matching {
            pair: [src.min(dst), src.max(dst)],
            transfers: vec![Transfer::new(src, dst, vec![chunk], kind)],
        }
    }
}

/// One discrete schedule step; all matchings in a round execute concurrently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Round {
    pub matchings: Vec<Matching>,
}

/// The AllReduce algorithms this crate can synthesize and verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[serde(rename = "stragglar")]
    StragglAr,
    Ring,
    Rhd,
    Broadcast,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::StragglAr,
        Algorithm::Ring,
        Algorithm::Rhd,
        Algorithm::Broadcast,
    ];

    /// Chunk count convention: StragglAR splits the buffer into n-1 chunks,
    /// Ring and RHD into n, and Broadcast moves the whole buffer as one.
    pub fn num_chunks(self, n: u32) -> u32 {
        match self {
            Algorithm::StragglAr => n - 1,
            Algorithm::Ring | Algorithm::Rhd => n,
            Algorithm::Broadcast => 1,
        }
    }

    pub fn supports(self, n: u32) -> bool {
        match self {
            Algorithm::StragglAr => n >= 2 && (n.is_power_of_two() || n.is_multiple_of(2)),
            Algorithm::Ring => n >= 2,
            Algorithm::Rhd | Algorithm::Broadcast => n >= 2 && n.is_power_of_two(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Algorithm::StragglAr => "stragglar",
            Algorithm::Ring => "ring",
            Algorithm::Rhd => "rhd",
            Algorithm::Broadcast => "broadcast",
        };
        f.write_str(name)
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stragglar" => Ok(Algorithm::StragglAr),
            "ring" => Ok(Algorithm::Ring),
            "rhd" => Ok(Algorithm::Rhd),
            "broadcast" => Ok(Algorithm::Broadcast),
            other => Err(format!(
                "unknown algorithm '{other}' (expected stragglar, ring, rhd, or broadcast)"
            )),
        }
    }
}

/// A complete communication schedule.
///
/// Serialized field order is canonical: algorithm, n, straggler, num_chunks,
/// rounds. Ranks and chunks are zero-indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub algorithm: Algorithm,
    pub n: u32,
    pub straggler: RankId,
    pub num_chunks: u32,
    pub rounds: Vec<Round>,
}

impl Schedule {
    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// A set of ranks, stored as a bitset. Equality is semantic: trailing zero
/// words are ignored.
#[derive(Clone)]
pub struct RankSet {
    words: Vec<u64>,
}

impl PartialEq for RankSet {
    fn eq(&self, other: &Self) -> bool {
        let n = self.words.len().max(other.words.len());
        (0..n).all(|i| {
            self.words.get(i).copied().unwrap_or(0) == other.words.get(i).copied().unwrap_or(0)
        })
    }
}

impl Eq for RankSet {}

impl std::hash::Hash for RankSet {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let trimmed = self
            .words
            .iter()
            .rposition(|w| *w != 0)
            .map_or(&[] as &[u64], |i| &self.words[..=i]);
        trimmed.hash(state);
    }
}

impl RankSet {
    pub fn new(capacity: u32) -> Self {
        RankSet {
            words: vec![0; (capacity as usize).div_ceil(64)],
        }
    }

    pub fn singleton(capacity: u32, rank: RankId) -> Self {
        let mut s = RankSet::new(capacity);
        s.insert(rank);
        s
    }

    /// All ranks in `[0, end)`.
    pub fn up_to(capacity: u32, end: u32) -> Self {
        let mut s = RankSet::new(capacity);
        for r in 0..end {
            s.insert(RankId(r));
        }
        s
    }

    pub fn full(n: u32) -> Self {
        RankSet::up_to(n, n)
    }

    pub fn insert(&mut self, rank: RankId) {
        let i = rank.index();
        if i / 64 >= self.words.len() {
            self.words.resize(i / 64 + 1, 0);
        }
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, rank: RankId) -> bool {
        let i = rank.index();
        i / 64 < self.words.len() && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn is_disjoint(&self, other: &RankSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    pub fn is_superset(&self, other: &RankSet) -> bool {
        let n = self.words.len().max(other.words.len());
        (0..n).all(|i| {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            a & b == b
        })
    }

    pub fn union_with(&mut self, other: &RankSet) {
        if other.words.len() > self.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = RankId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, w)| {
            (0..64)
                .filter(move |b| w & (1 << b) != 0)
                .map(move |b| RankId((wi * 64 + b) as u32))
        })
    }
}

impl fmt::Debug for RankSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|r| r.0)).finish()
    }
}

impl FromIterator<RankId> for RankSet {
    fn from_iter<I: IntoIterator<Item = RankId>>(iter: I) -> Self {
        let mut s = RankSet { words: Vec::new() };
        for r in iter {
            s.insert(r);
        }
        s
    }
}

/// Symbolic model of partial reduction: one contributor set per
/// (rank, chunk) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterState {
    n: u32,
    num_chunks: u32,
    cells: Vec<RankSet>,
}

impl ClusterState {
    /// A state with every contributor set empty. Mostly useful for building
    /// custom states in tests.
    pub fn empty(n: u32, num_chunks: u32) -> Self {
        ClusterState {
            n,
            num_chunks,
            cells: vec![RankSet::new(n); n as usize * num_chunks as usize],
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_chunks(&self) -> u32 {
        self.num_chunks
    }

    fn cell(&self, rank: RankId, chunk: ChunkId) -> usize {
        debug_assert!(rank.0 < self.n && chunk.0 < self.num_chunks);
        rank.index() * self.num_chunks as usize + chunk.index()
    }

    pub fn contributors(&self, rank: RankId, chunk: ChunkId) -> &RankSet {
        &self.cells[self.cell(rank, chunk)]
    }

    pub fn set_contributors(&mut self, rank: RankId, chunk: ChunkId, set: RankSet) {
        let i = self.cell(rank, chunk);
        self.cells[i] = set;
    }

    /// True when every rank holds every chunk with the full contributor set
    /// `{0..n-1}` — the AllReduce postcondition.
    pub fn is_fully_reduced(&self) -> bool {
        let full = RankSet::full(self.n);
        self.cells.iter().all(|c| *c == full)
    }
}

/// The StragglAR precondition: the n-1 non-stragglers have completed a
/// ReduceScatter among themselves, so rank `g` holds chunk `c_g` with
/// contributors `{0..n-2}`; every other cell holds only its own rank's data.
pub fn initial_state_stragglar(n: u32, straggler: RankId) -> Result<ClusterState, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    if straggler.0 != n - 1 {
        return Err(Error::InvalidStraggler {
            got: straggler,
            expected: RankId(n - 1),
        });
    }
    let num_chunks = n - 1;
    let mut state = ClusterState::empty(n, num_chunks);
    for rank in 0..n {
        for chunk in 0..num_chunks {
            state.set_contributors(
                RankId(rank),
                ChunkId(chunk),
                RankSet::singleton(n, RankId(rank)),
            );
        }
    }
    for g in 0..n - 1 {
        state.set_contributors(RankId(g), ChunkId(g), RankSet::up_to(n, n - 1));
    }
    Ok(state)
}

/// Unreduced start state: every cell holds exactly its own rank's data.
/// Ring and RHD schedules execute from here.
pub fn initial_state_uniform(n: u32, num_chunks: u32) -> Result<ClusterState, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    let mut state = ClusterState::empty(n, num_chunks);
    for rank in 0..n {
        for chunk in 0..num_chunks {
            state.set_contributors(
                RankId(rank),
                ChunkId(chunk),
                RankSet::singleton(n, RankId(rank)),
            );
        }
    }
    Ok(state)
}

/// The Broadcast baseline precondition: the non-stragglers have completed a
/// full AllReduce among themselves over the single whole-buffer chunk, and
/// the straggler still holds only its own data.
pub fn initial_state_broadcast(n: u32) -> Result<ClusterState, Error> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    let mut state = ClusterState::empty(n, 1);
    for g in 0..n - 1 {
        state.set_contributors(RankId(g), ChunkId(0), RankSet::up_to(n, n - 1));
    }
    state.set_contributors(
        RankId(n - 1),
        ChunkId(0),
        RankSet::singleton(n, RankId(n - 1)),
    );
    Ok(state)
}

/// Structural validity of a single matching against a state's dimensions.
pub(crate) fn matching_structure(state: &ClusterState, m: &Matching) -> Result<(), Error> {
    let [a, b] = m.pair;
    if a == b {
        return Err(Error::Structural(format!(
            "matching pairs rank {a} with itself"
        )));
    }
    for r in [a, b] {
        if r.0 >= state.n() {
            return Err(Error::Structural(format!(
                "rank {r} out of range for n = {}",
                state.n()
            )));
        }
    }
    if m.transfers.is_empty() || m.transfers.len() > 2 {
        return Err(Error::Structural(format!(
            "matching ({a},{b}) must carry 1 or 2 transfers, has {}",
            m.transfers.len()
        )));
    }
    if m.transfers.len() == 2 && m.transfers[0].src == m.transfers[1].src {
        return Err(Error::Structural(format!(
            "matching ({a},{b}) has two transfers in the same direction"
        )));
    }
    for t in &m.transfers {
        if t.src == t.dst {
            return Err(Error::Structural(format!(
                "transfer from rank {} to itself",
                t.src
            )));
        }
        if !((t.src == a && t.dst == b) || (t.src == b && t.dst == a)) {
            return Err(Error::Structural(format!(
                "transfer {} -> {} does not connect matched pair ({a},{b})",
                t.src, t.dst
            )));
        }
        if t.chunks.is_empty() {
            return Err(Error::Structural(format!(
                "transfer {} -> {} carries no chunks",
                t.src, t.dst
            )));
        }
        let mut sorted = t.chunks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != t.chunks.len() {
            return Err(Error::Structural(format!(
                "transfer {} -> {} lists a chunk twice",
                t.src, t.dst
            )));
        }
        for c in &t.chunks {
            if c.0 >= state.num_chunks() {
                return Err(Error::Structural(format!(
                    "chunk {c} out of range for num_chunks = {}",
                    state.num_chunks()
                )));
            }
        }
    }
    Ok(())
}

fn check_round_structure(state: &ClusterState, round: &Round) -> Result<(), Error> {
    // Single-port, full-duplex links: per round each rank may send to at
    // most one peer and receive from at most one peer. Ring rounds are
    // cyclic, so a rank legitimately appears in two matchings as long as
    // the directions differ.
    let mut sending = RankSet::new(state.n());
    let mut receiving = RankSet::new(state.n());
    for m in &round.matchings {
        matching_structure(state, m)?;
        for t in &m.transfers {
            if sending.contains(t.src) {
                return Err(Error::PortViolation { rank: t.src });
            }
            if receiving.contains(t.dst) {
                return Err(Error::PortViolation { rank: t.dst });
            }
            sending.insert(t.src);
            receiving.insert(t.dst);
        }
    }
    Ok(())
}

/// Apply one round to the state. All transfers read the pre-round state and
/// write a fresh copy, matching the concurrent execution of a round.
///
/// Fails on the first violation: a rank in two matchings, a `Reduce` whose
/// contributor sets overlap, a `Replace` that would lose contributions, or a
/// send of data the source never held.
pub fn apply_round(state: &ClusterState, round: &Round) -> Result<ClusterState, Error> {
    check_round_structure(state, round)?;
    let mut next = state.clone();
    for m in &round.matchings {
        for t in &m.transfers {
            for &chunk in &t.chunks {
                let src_set = state.contributors(t.src, chunk);
                if src_set.is_empty() {
                    return Err(Error::PhantomSend { src: t.src, chunk });
                }
                let dst_set = state.contributors(t.dst, chunk);
                match t.kind {
                    TransferKind::Reduce => {
                        if !src_set.is_disjoint(dst_set) {
                            return Err(Error::DoubleCount {
                                src: t.src,
                                dst: t.dst,
                                chunk,
                            });
                        }
                        let mut merged = dst_set.clone();
                        merged.union_with(src_set);
                        next.set_contributors(t.dst, chunk, merged);
                    }
                    TransferKind::Replace => {
                        if !src_set.is_superset(dst_set) {
                            return Err(Error::Regression {
                                src: t.src,
                                dst: t.dst,
                                chunk,
                            });
                        }
                        next.set_contributors(t.dst, chunk, src_set.clone());
                    }
                }
            }
        }
    }
    Ok(next)
}
