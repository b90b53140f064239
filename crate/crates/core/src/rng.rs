//! Counter-based random streams.
//!
//! Every band element has a fixed position in a ChaCha8 keystream, so the
//! matrix does not depend on the order (or thread) in which it is generated.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for realization `realization` at grid point `point` of a run keyed by
/// `master`: `mix64(mix64(master ^ mix64(point)) ^ realization)`.
pub fn derive_seed(master: u64, point: u64, realization: u64) -> u64 {
    mix64(mix64(master ^ mix64(point)) ^ realization)
}

/// Uniform on (0, 1], from the top 53 bits.
#[inline]
fn open_unit(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, c: u64) -> f64 {
    let u1 = open_unit(a);
    let u2 = (c >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// `len` standard normals from stream `stream_id`; element `i` consumes
/// keystream words `[4i, 4i + 4)`.
pub fn normals(seed: u64, stream_id: u64, len: usize) -> Vec<f64> {
    let mut rng = stream(seed, stream_id);
    (0..len)
        .map(|_| {
            let a = rng.next_u64();
            let c = rng.next_u64();
            box_muller(a, c)
        })
        .collect()
}

/// Element `index` of [`normals`] without generating its predecessors.
pub fn normal_at(seed: u64, stream_id: u64, index: usize) -> f64 {
    let mut rng = stream(seed, stream_id);
    rng.set_word_pos(4 * index as u128);
    let a = rng.next_u64();
    let c = rng.next_u64();
    box_muller(a, c)
}

/// General-purpose generator for Monte Carlo work, one independent stream per
/// `(seed, stream_id)`.
pub fn sampler(seed: u64, stream_id: u64) -> ChaCha8Rng {
    stream(mix64(seed), stream_id)
}
