//! Spin-1 states and their gauge-invariant phase-space coordinates.
//!
//! Amplitudes are ordered `(ζ₁, ζ₀, ζ₋₁)`. The physical state space is CP²,
//! coordinatized by `(ρ₀, m, θ_s, θ_m)` with `m = ρ₁ − ρ₋₁`,
//! `θ_s = θ₁ + θ₋₁ − 2θ₀` and `θ_m = θ₁ − θ₋₁`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Populations below this are treated as empty and their phases as undefined.
pub const DEGENERATE_POPULATION: f64 = 1e-12;

/// Wraps an angle into `[-π, π)`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// A normalized spin-1 spinor `ζ = (ζ₁, ζ₀, ζ₋₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinorState(pub [Complex64; 3]);

impl SpinorState {
    /// Builds a state from raw amplitudes, normalizing them.
    ///
    /// Returns `None` for a zero or non-finite vector.
    pub fn new(amps: [Complex64; 3]) -> Option<Self> {
        let n = norm_sqr(&amps).sqrt();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        Some(Self(amps.map(|z| z / n)))
    }

    /// Wraps amplitudes that are already normalized.
    pub fn from_normalized(amps: [Complex64; 3]) -> Self {
        Self(amps)
    }

    /// The polar state `(0, 1, 0)`.
    pub fn polar() -> Self {
        Self([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
    }

    #[inline]
    pub fn amps(&self) -> &[Complex64; 3] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.0).sqrt()
    }

    /// Populations `(ρ₁, ρ₀, ρ₋₁)`.
    #[inline]
    pub fn populations(&self) -> [f64; 3] {
        self.0.map(|z| z.norm_sqr())
    }

    #[inline]
    pub fn rho0(&self) -> f64 {
        self.0[1].norm_sqr()
    }

    /// Longitudinal magnetization `m = ρ₁ − ρ₋₁ = f_z`.
    #[inline]
    pub fn magnetization(&self) -> f64 {
        self.0[0].norm_sqr() - self.0[2].norm_sqr()
    }

    /// Spin vector `f = ζ†Fζ`.
    #[inline]
    pub fn spin_vector(&self) -> [f64; 3] {
        let [a, b, c] = self.0;
        // f₊ = f_x + i f_y = √2 (ζ₁* ζ₀ + ζ₀* ζ₋₁)
        let fp = (a.conj() * b + b.conj() * c) * std::f64::consts::SQRT_2;
        [fp.re, fp.im, a.norm_sqr() - c.norm_sqr()]
    }

    /// `ζ†F_z²ζ = ρ₁ + ρ₋₁`.
    #[inline]
    pub fn fz2_expectation(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[2].norm_sqr()
    }

    /// Multiplies by a global phase `e^{iχ}`.
    pub fn with_global_phase(&self, chi: f64) -> Self {
        let p = Complex64::from_polar(1.0, chi);
        Self(self.0.map(|z| z * p))
    }

    /// `|⟨a|b⟩|²`, the gauge-invariant overlap.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// True when some population is below [`DEGENERATE_POPULATION`].
    pub fn is_degenerate(&self) -> bool {
        self.populations().iter().any(|&r| r < DEGENERATE_POPULATION)
    }

    /// Phase-space coordinates.
    ///
    /// Angles involving an (almost) empty component are set to 0; use
    /// [`SpinorState::try_to_phase`] to get an error instead.
    pub fn to_phase(&self) -> PhasePoint {
        let [r1, r0, rm] = self.populations();
        let ph = |z: Complex64| z.arg();
        let (t1, t0, tm) = (ph(self.0[0]), ph(self.0[1]), ph(self.0[2]));
        let plus = if r1 < DEGENERATE_POPULATION || r0 < DEGENERATE_POPULATION {
            0.0
        } else {
            wrap_angle(t1 - t0)
        };
        let minus = if rm < DEGENERATE_POPULATION || r0 < DEGENERATE_POPULATION {
            0.0
        } else {
            wrap_angle(tm - t0)
        };
        PhasePoint::from_plus_minus(r0, r1 - rm, plus, minus)
    }

    pub fn try_to_phase(&self) -> Result<PhasePoint, Error> {
        let pops = self.populations();
        if let Some(i) = pops.iter().position(|&r| r < DEGENERATE_POPULATION) {
            return Err(Error::DegeneratePhase { component: 1 - i as i32, population: pops[i] });
        }
        Ok(self.to_phase())
    }

    /// Applies a 3×3 matrix.
    pub fn apply(&self, m: &Mat3) -> Self {
        Self(mat_vec(m, &self.0))
    }

    /// Rescales to unit norm, returning the norm before rescaling.
    #[inline]
    pub fn renormalize(&mut self) -> f64 {
        let n = norm_sqr(&self.0).sqrt();
        let inv = 1.0 / n;
        for z in self.0.iter_mut() {
            *z *= inv;
        }
        n
    }
}

#[inline]
pub(crate) fn norm_sqr(v: &[Complex64; 3]) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

/// Gauge-invariant phase-space point `(ρ₀, m, θ_s, θ_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub rho0: f64,
    pub m: f64,
    pub theta_s: f64,
    pub theta_m: f64,
}

impl PhasePoint {
    pub fn new(rho0: f64, m: f64, theta_s: f64, theta_m: f64) -> Self {
        Self { rho0, m, theta_s, theta_m }
    }

    /// Builds a point from `θ₊ = θ₁ − θ₀` and `θ₋ = θ₋₁ − θ₀`.
    pub fn from_plus_minus(rho0: f64, m: f64, theta_plus: f64, theta_minus: f64) -> Self {
        Self { rho0, m, theta_s: theta_plus + theta_minus, theta_m: theta_plus - theta_minus }
    }

    #[inline]
    pub fn theta_plus(&self) -> f64 {
        0.5 * (self.theta_s + self.theta_m)
    }

    #[inline]
    pub fn theta_minus(&self) -> f64 {
        0.5 * (self.theta_s - self.theta_m)
    }

    pub fn rho_plus(&self) -> f64 {
        0.5 * (1.0 - self.rho0 + self.m)
    }

    pub fn rho_minus(&self) -> f64 {
        0.5 * (1.0 - self.rho0 - self.m)
    }

    /// Inside the closed population triangle `ρ₀ ∈ [0,1]`, `|m| ≤ 1 − ρ₀`.
    pub fn is_physical(&self) -> bool {
        self.rho0.is_finite()
            && self.m.is_finite()
            && (0.0..=1.0).contains(&self.rho0)
            && self.m.abs() <= 1.0 - self.rho0
            && self.theta_s.is_finite()
            && self.theta_m.is_finite()
    }

    /// Projects `(ρ₀, m)` into the population triangle.
    pub fn clamped(&self) -> Self {
        let rho0 = self.rho0.clamp(0.0, 1.0);
        let lim = 1.0 - rho0;
        Self { rho0, m: self.m.clamp(-lim, lim), ..*self }
    }

    /// Metric coordinates `(ρ₀, m, θ₊/π, θ₋/π)` with angles wrapped to `[-1, 1)`.
    pub fn metric_coords(&self) -> [f64; 4] {
        [
            self.rho0,
            self.m,
            wrap_angle(self.theta_plus()) / PI,
            wrap_angle(self.theta_minus()) / PI,
        ]
    }

    /// Spinor with the gauge fixed by `θ₀ = 0`.
    pub fn to_spinor(&self) -> SpinorState {
        let c = self.clamped();
        let r1 = c.rho_plus().max(0.0);
        let rm = c.rho_minus().max(0.0);
        SpinorState([
            Complex64::from_polar(r1.sqrt(), c.theta_plus()),
            Complex64::new(c.rho0.sqrt(), 0.0),
            Complex64::from_polar(rm.sqrt(), c.theta_minus()),
        ])
    }
}

pub type Mat3 = [[Complex64; 3]; 3];

#[inline]
pub fn mat_vec(m: &Mat3, v: &[Complex64; 3]) -> [Complex64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_adjoint(a: &Mat3) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn mat_scale_add(acc: &mut Mat3, s: f64, m: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            acc[i][j] += m[i][j] * s;
        }
    }
}

pub fn mat_zero() -> Mat3 {
    [[Complex64::new(0.0, 0.0); 3]; 3]
}

pub fn mat_identity() -> Mat3 {
    let mut m = mat_zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Spin-1 matrices in the `(1, 0, −1)` basis.
pub mod ops {
    use super::*;

    const Z: Complex64 = Complex64::new(0.0, 0.0);
    const S: Complex64 = Complex64::new(FRAC_1_SQRT_2, 0.0);
    const IS: Complex64 = Complex64::new(0.0, FRAC_1_SQRT_2);

    pub fn fx() -> Mat3 {
        [[Z, S, Z], [S, Z, S], [Z, S, Z]]
    }

    pub fn fy() -> Mat3 {
        [[Z, -IS, Z], [IS, Z, -IS], [Z, IS, Z]]
    }

    pub fn fz() -> Mat3 {
        let one = Complex64::new(1.0, 0.0);
        [[one, Z, Z], [Z, Z, Z], [Z, Z, -one]]
    }

    pub fn fz2() -> Mat3 {
        let one = Complex64::new(1.0, 0.0);
        [[one, Z, Z], [Z, Z, Z], [Z, Z, one]]
    }

    /// `n·F` for a real 3-vector `n`.
    pub fn along(n: [f64; 3]) -> Mat3 {
        let mut m = mat_zero();
        mat_scale_add(&mut m, n[0], &fx());
        mat_scale_add(&mut m, n[1], &fy());
        mat_scale_add(&mut m, n[2], &fz());
        m
    }

    /// `exp(−iφ n·F)` for a unit vector `n`, using `(n·F)³ = n·F` for spin 1.
    pub fn rotation(n: [f64; 3], phi: f64) -> Mat3 {
        let g = along(n);
        let g2 = mat_mul(&g, &g);
        let mut out = mat_identity();
        let (s, c) = phi.sin_cos();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += g[i][j] * Complex64::new(0.0, -s) + g2[i][j] * (c - 1.0);
            }
        }
        out
    }
}
