//! Seeded sampling of Haar-random spin-1 states and phase-space perturbations.
//!
//! Every generator is a ChaCha8 stream selected by `(seed, stream)`, so any
//! work item of a sweep can be reproduced in isolation. Normal variates use
//! `rand_distr::StandardNormal` (ziggurat on the generator's 64-bit output).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::spin::{Mat3, PhasePoint, SpinorState};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> SimRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Same seed, different stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self { seed: self.seed, stream }
    }
}

/// SplitMix64 finalizer, used to derive stream ids from work-item indices.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for a `(domain, a, b)` work item.
pub fn stream_id(domain: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(domain) ^ a) ^ b)
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re = normal(rng);
    let im = normal(rng);
    Complex64::new(re, im)
}

/// Haar-random pure state: three i.i.d. complex Gaussians, normalized.
pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R) -> SpinorState {
    loop {
        let amps = [complex_normal(rng), complex_normal(rng), complex_normal(rng)];
        if let Some(s) = SpinorState::new(amps) {
            return s;
        }
    }
}

/// Uniform random unit vector in `R⁴`.
pub fn random_direction4<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| normal(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.map(|x| x / n);
        }
    }
}

/// Moves `center` by the metric displacement `delta` (components along
/// `ρ₀, m, θ₊/π, θ₋/π`), without clamping.
pub fn displace(center: &PhasePoint, delta: [f64; 4]) -> PhasePoint {
    PhasePoint::from_plus_minus(
        center.rho0 + delta[0],
        center.m + delta[1],
        center.theta_plus() + PI * delta[2],
        center.theta_minus() + PI * delta[3],
    )
}

/// Gaussian perturbation with standard deviation `spread/2` per metric
/// coordinate, clamped into the population triangle.
pub fn perturb<R: Rng + ?Sized>(center: &SpinorState, spread: f64, rng: &mut R) -> SpinorState {
    let sigma = 0.5 * spread;
    let delta: [f64; 4] = std::array::from_fn(|_| sigma * normal(rng));
    displace(&center.to_phase(), delta).clamped().to_spinor()
}

/// Haar-random 3×3 unitary (QR of a complex Ginibre matrix with the phase of
/// R's diagonal absorbed).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let mut cols: [[Complex64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| complex_normal(rng)));
    for j in 0..3 {
        for k in 0..j {
            let proj: Complex64 = (0..3).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..3 {
                let ck = cols[k][i];
                cols[j][i] -= proj * ck;
            }
        }
        let n = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in cols[j].iter_mut() {
            *z /= n;
        }
    }
    let mut u = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            u[i][j] = *z;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::phase_distance;
    use crate::params::presets;
    use crate::spin::{mat_adjoint, mat_mul};

    #[test]
    fn same_seed_same_states() {
        let mut a = RngSeed::new(42, 7).rng();
        let mut b = RngSeed::new(42, 7).rng();
        for _ in 0..1000 {
            assert_eq!(sample_haar(&mut a), sample_haar(&mut b));
        }
        let mut c = RngSeed::new(42, 8).rng();
        assert_ne!(sample_haar(&mut RngSeed::new(42, 7).rng()), sample_haar(&mut c));
    }

    #[test]
    fn samples_are_normalized() {
        let mut r = RngSeed::new(1, 2).rng();
        for _ in 0..1000 {
            assert!((sample_haar(&mut r).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn perturbation_mean_distance_tracks_spread() {
        let center = presets::x_c().to_spinor();
        let d = 5e-3;
        let mut r = RngSeed::new(9, 0).rng();
        let n = 10_000;
        let mean = (0..n).map(|_| phase_distance(&center, &perturb(&center, d, &mut r))).sum::<f64>() / n as f64;
        assert!((0.8 * d..=1.2 * d).contains(&mean), "mean distance {mean}");
    }

    #[test]
    fn vanishing_spread_returns_center() {
        let center = presets::x_r().to_spinor();
        let mut r = RngSeed::new(3, 0).rng();
        let p = perturb(&center, 1e-300, &mut r);
        assert!(1.0 - center.fidelity(&p) < 1e-12);
        assert!(phase_distance(&center, &p) < 1e-12);
    }

    #[test]
    fn clamping_keeps_boundary_centers_physical() {
        let mut r = RngSeed::new(4, 0).rng();
        let center = SpinorState::polar();
        for _ in 0..1000 {
            let p = perturb(&center, 0.05, &mut r).to_phase();
            assert!(p.rho0 <= 1.0 && p.m.abs() <= 1.0 - p.rho0 + 1e-15, "{p:?}");
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut r = RngSeed::new(11, 0).rng();
        let u = random_unitary(&mut r);
        let p = mat_mul(&mat_adjoint(&u), &u);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - Complex64::new(want, 0.0)).norm() < 1e-13);
            }
        }
    }
}
