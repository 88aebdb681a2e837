//! Comparison discovery protocols sharing the simulator's topology,
//! workload, and traffic accounting: a centralized registry, controlled
//! flooding, a group-cache protocol, and a Chord-style DHT.

mod centralized;
mod chord;
mod flooding;
mod gsd;

pub use centralized::CentralizedEngine;
pub use chord::ChordEngine;
pub use flooding::FloodingEngine;
pub use gsd::GsdEngine;

/// Typed baseline selection with its protocol-specific knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineKind {
    Centralized,
    Flooding { hop_limit: u32 },
    GsdLike { cache_hops: u32, rtb_bytes: u64 },
    ChordLike { ring_bits: u32 },
}

/// Baseline tunables as carried in the run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    /// Flood rings per query; 0 selects auto-calibration.
    pub flood_hop_limit: u32,
    /// Advertisement propagation radius of the group-cache protocol.
    pub gsd_cache_hops: u32,
    /// Ontology depth of the group code advertised with each capability.
    pub gsd_group_depth: usize,
    /// Identifier space of the DHT ring (2^bits positions).
    pub chord_ring_bits: u32,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            flood_hop_limit: 0,
            gsd_cache_hops: 5,
            gsd_group_depth: 2,
            chord_ring_bits: 16,
        }
    }
}
