//! Spatially correlated Gaussian shadowing field.
//!
//! The field is a sum of random cosines whose wave vectors follow a 3D
//! multivariate Cauchy law. Its characteristic function is
//! `exp(-|d| / decorr_dist)`, so across seeds the field has unit variance
//! and exactly the exponential (Gudmundson) correlation; with a few hundred
//! terms the marginal is close to Gaussian. Any point can be evaluated
//! without a grid.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::scene::Position3;

#[derive(Debug, Clone)]
pub struct ShadowField {
    waves: Vec<[f64; 3]>,
    phases: Vec<f64>,
    amplitude: f64,
}

impl ShadowField {
    pub fn new(seed: u64, decorr_dist: f64, n_terms: usize) -> Self {
        let n_terms = n_terms.max(1);
        let mut rng = rng::stream_rng(seed, rng::SHADOW, 0);
        let mut waves = Vec::with_capacity(n_terms);
        let mut phases = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let g: f64 = StandardNormal.sample(&mut rng);
            let scale = 1.0 / (decorr_dist * g.abs().max(1e-300));
            let k = [0; 3].map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            });
            waves.push(k);
            phases.push(rng.random_range(0.0..std::f64::consts::TAU));
        }
        Self { waves, phases, amplitude: (2.0 / n_terms as f64).sqrt() }
    }

    /// Unit-variance field value at `p`.
    pub fn sample(&self, p: &Position3) -> f64 {
        let mut acc = 0.0;
        for (k, phi) in self.waves.iter().zip(&self.phases) {
            acc += (k[0] * p.x + k[1] * p.y + k[2] * p.z + phi).cos();
        }
        self.amplitude * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_at_decorrelation_distance() {
        let l = 50.0;
        let a = Position3::new(10.0, 20.0, 30.0);
        let b = Position3::new(10.0 + l * 0.6, 20.0 + l * 0.8, 30.0);
        let n = 10_000;
        let (mut saa, mut sbb, mut sab, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..n {
            let f = ShadowField::new(seed, l, 256);
            let (x, y) = (f.sample(&a), f.sample(&b));
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
        }
        let nf = n as f64;
        let (ma, mb) = (sa / nf, sb / nf);
        let rho = (sab / nf - ma * mb) / ((saa / nf - ma * ma) * (sbb / nf - mb * mb)).sqrt();
        let target = (-1f64).exp();
        // four standard errors of a correlation estimate
        let tol = 4.0 * (1.0 - target * target) / nf.sqrt();
        assert!((rho - target).abs() < tol, "rho {rho}");
        assert!((saa / nf - 1.0).abs() < 0.06, "variance {}", saa / nf);
    }

    #[test]
    fn same_seed_same_field() {
        let p = Position3::new(1.0, 2.0, 3.0);
        assert_eq!(ShadowField::new(3, 50.0, 64).sample(&p), ShadowField::new(3, 50.0, 64).sample(&p));
    }
}
