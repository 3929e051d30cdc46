//! Seeding protocol and random draws shared by the simulators.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of trial `trial_index` under `base_seed`.
pub fn trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    base_seed ^ trial_index.wrapping_mul(GOLDEN_GAMMA)
}

/// Independent sub-streams of one trial. Every random draw a trial makes
/// comes from one of these, all keyed by the trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 0,
    Schedule = 1,
    Noise = 2,
    Symbols = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Circularly-symmetric complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_zero_keeps_base_seed() {
        assert_eq!(trial_seed(42, 0), 42);
        assert_eq!(trial_seed(0, 1), GOLDEN_GAMMA);
        assert_ne!(trial_seed(7, 1), trial_seed(7, 2));
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, Stream::Channel).random();
        let b: u64 = stream_rng(1, Stream::Noise).random();
        let c: u64 = stream_rng(1, Stream::Channel).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn complex_normal_variance() {
        let mut rng = stream_rng(3, Stream::Noise);
        let n = 200_000;
        let mean_power: f64 = (0..n)
            .map(|_| complex_normal(&mut rng, 2.0).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean_power - 2.0).abs() < 0.03, "{mean_power}");
    }
}
