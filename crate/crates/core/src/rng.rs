//! Seeded noise for synthetic fixtures.
//!
//! The stream is ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`) and
//! normals come from the Box-Muller transform applied to consecutive 53-bit
//! uniforms, so fixtures can be regenerated outside Rust:
//!
//! ```text
//! u = ((next_u64() >> 11) + 0.5) / 2^53            in (0, 1)
//! g1 = sqrt(-2 ln u1) cos(2 pi u2)
//! g2 = sqrt(-2 ln u1) sin(2 pi u2)                 used on the next call
//! ```

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct NoiseSource {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn gaussian(&mut self) -> f64 {
        if let Some(g) = self.spare.take() {
            return g;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        self.spare = Some(r * (2.0 * PI * u2).sin());
        r * (2.0 * PI * u2).cos()
    }

    /// `x (1 + level g)` with `g` standard normal.
    pub fn multiplicative(&mut self, x: f64, level: f64) -> f64 {
        if level == 0.0 {
            return x;
        }
        x * (1.0 + level * self.gaussian())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_stream() {
        let mut a = NoiseSource::new(42);
        let mut b = NoiseSource::new(42);
        for _ in 0..100 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
        let mut c = NoiseSource::new(43);
        assert_ne!(NoiseSource::new(42).gaussian(), c.gaussian());
    }

    #[test]
    fn moments() {
        let mut r = NoiseSource::new(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_level_is_identity() {
        let mut r = NoiseSource::new(3);
        assert_eq!(r.multiplicative(2.5, 0.0), 2.5);
    }
}
