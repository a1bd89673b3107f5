//! Random linear fountain over GF(2): encoding, the packet algebra used
//! by the network-coded relay scheme, and incremental decoding.

mod bits;
mod decoder;
mod packet;

pub use bits::BitVector;
pub use decoder::DecoderState;
pub use packet::{
    degree_pmf, encode, network_code, strip_known, superpose, CodedPacket, Encoder, Header, SourceBlock,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("degree {d} outside [0, {k}] (K must be positive)")]
    DegreeOutOfRange { k: usize, d: usize },
    #[error("a source block needs at least one packet")]
    EmptyBlock,
    #[error("bit length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("block index mismatch: expected {expected}, got {actual}")]
    BlockMismatch { expected: u64, actual: u64 },
    #[error("packet is not a pure current-block packet")]
    NotPureCurrent,
    #[error("packet is not a pure next-block packet")]
    NotPureNext,
    #[error("packet is not network coded")]
    NotNetworkCoded,
}
