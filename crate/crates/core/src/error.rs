use crate::model::{Algorithm, ChunkId, RankId};
use thiserror::Error;

/// Errors produced by schedule generation, state transitions, and cost queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cluster size {n} is invalid: at least 2 ranks are required")]
    InvalidSize { n: u32 },

    #[error("{algo} does not support n = {n}: {hint}")]
    UnsupportedSize {
        algo: Algorithm,
        n: u32,
        hint: String,
    },

    #[error("straggler must be rank n-1 = {expected}, got rank {got}")]
    InvalidStraggler { got: RankId, expected: RankId },

    #[error("port violation: rank {rank} appears in more than one matching")]
    PortViolation { rank: RankId },

    #[error(
        "double count: reduce of chunk {chunk} from rank {src} into rank {dst} \
         merges overlapping contributor sets"
    )]
    DoubleCount {
        src: RankId,
        dst: RankId,
        chunk: ChunkId,
    },

    #[error(
        "regression: replace of chunk {chunk} from rank {src} would shrink \
         rank {dst}'s contributor set"
    )]
    Regression {
        src: RankId,
        dst: RankId,
        chunk: ChunkId,
    },

    #[error("phantom send: rank {src} holds no data for chunk {chunk}")]
    PhantomSend { src: RankId, chunk: ChunkId },

    #[error("malformed schedule: {0}")]
    Structural(String),

    #[error("generation stalled for n = {n}: exceeded safety bound of {bound} rounds")]
    Stalled { n: u32, bound: u32 },
}
