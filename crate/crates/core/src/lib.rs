//! Fountain-coded transmission over a two-relay cooperative network.
//!
//! Three schemes are covered: direct source-to-destination fountain
//! coding, naive two-phase relaying, and network-coded relaying where the
//! source mixes the next block into its phase-two packets. Each is
//! available as a closed-form transmission-count distribution
//! ([`analysis`]) and as a packet-level Monte Carlo simulation ([`sim`]),
//! over ideal erasure links or Rayleigh-fading links ([`wireless`]).

pub mod analysis;
pub mod experiment;
pub mod gf2;
pub mod sim;
pub mod stats;
pub mod wireless;
