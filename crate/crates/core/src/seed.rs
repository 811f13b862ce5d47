//! Derivation of independent RNG streams from one base seed.

/// Seed of sub-stream `index`: `base ⊕ index`. Results depend only on
/// `(base, index)`, never on scheduling order.
#[inline]
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base ^ index
}
