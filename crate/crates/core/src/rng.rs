//! Deterministic random streams.
//!
//! Every sampler owns its streams; independent streams come from one seed by
//! selecting different ChaCha stream ids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// Stream used for hyperparameter proposals and accept/reject uniforms.
pub const PROPOSAL_STREAM: u64 = 0;
/// Stream used for latent-field noise.
pub const FIELD_STREAM: u64 = 1;
/// Stream used for stochastic trace probes.
pub const PROBE_STREAM: u64 = 2;

pub fn stream(seed: u64, id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
