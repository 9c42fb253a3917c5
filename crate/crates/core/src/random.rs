//! Seeded random smooth fields for property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::TriMesh;
use crate::field::{ScalarField, VectorField};

/// Deterministic generator of smooth test fields.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    amplitude: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

impl Mode {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (self.kx * x + self.ky * y + self.phase).cos()
    }
}

impl FieldSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn modes(&mut self, count: usize) -> Vec<Mode> {
        (0..count)
            .map(|_| Mode {
                amplitude: self.rng.gen_range(-1.0..1.0),
                kx: self.rng.gen_range(-12.0..12.0),
                ky: self.rng.gen_range(-12.0..12.0),
                phase: self.rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect()
    }

    /// Sum of five random plane waves with wavenumbers up to 12.
    pub fn smooth_scalar(&mut self, mesh: &TriMesh) -> ScalarField {
        let modes = self.modes(5);
        ScalarField::sample(mesh, |x, y| modes.iter().map(|m| m.eval(x, y)).sum())
    }

    /// Smooth field scaled by a random factor in `[1e-3, 1e3]` (log-uniform).
    pub fn scaled_scalar(&mut self, mesh: &TriMesh) -> ScalarField {
        let scale = 10f64.powf(self.rng.gen_range(-3.0..3.0));
        self.smooth_scalar(mesh).scale(scale)
    }

    /// Smooth vector field sampled at element centroids.
    pub fn smooth_vector(&mut self, mesh: &TriMesh) -> VectorField {
        let a = self.modes(5);
        let b = self.modes(5);
        VectorField::sample_centroids(mesh, |x, y| {
            [
                a.iter().map(|m| m.eval(x, y)).sum(),
                b.iter().map(|m| m.eval(x, y)).sum(),
            ]
        })
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}
