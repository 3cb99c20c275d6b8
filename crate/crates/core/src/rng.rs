use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one unit of parallel work (a chain, a tree, a
/// predictive draw). Streams of the same seed never overlap, so results do not
/// depend on how work is scheduled across threads.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
