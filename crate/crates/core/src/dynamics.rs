//! Mean-field equations of motion in the spinor representation and the
//! fixed-step RK4 propagator used by every diagnostic.
//!
//! `∂ζ/∂t = −i M(ζ, t) ζ` with the effective field
//! `M = Ω F_x + (q/ħ) F_z² + (ε_s/ħ) f·F + D sin(ω_m t) d̂·F` in rad/s.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Hamiltonian, SystemParams};
use crate::spin::{mat_scale_add, ops, Mat3, PhasePoint, SpinorState};

/// Largest tolerated pre-renormalization norm error per step.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

/// Default step of 10 µs.
pub const DEFAULT_DT: f64 = 1e-5;

/// Static energy `H₀/ε_s` from the spinor.
pub fn energy_static(state: &SpinorState, params: &SystemParams) -> f64 {
    let f = state.spin_vector();
    let f2 = f[0] * f[0] + f[1] * f[1] + f[2] * f[2];
    let e = params.rabi_rate() * f[0] + params.q_rate() * state.fz2_expectation() + 0.5 * params.eps_rate() * f2;
    e / params.eps_rate()
}

/// Static energy `H₀/ε_s` from phase-space coordinates.
pub fn energy_phase(p: &PhasePoint, params: &SystemParams) -> f64 {
    let eps = params.eps_rate();
    let rabi = params.rabi_rate() / eps;
    let q = params.q_rate() / eps;
    let (r0, m) = (p.rho0, p.m);
    let a = (1.0 - r0 + m).max(0.0).sqrt();
    let b = (1.0 - r0 - m).max(0.0).sqrt();
    let root = ((1.0 - r0) * (1.0 - r0) - m * m).max(0.0).sqrt();
    rabi * r0.sqrt() * (a * p.theta_plus().cos() + b * p.theta_minus().cos())
        + q * (1.0 - r0)
        + r0 * (1.0 - r0)
        + r0 * root * p.theta_s.cos()
        + 0.5 * m * m
}

/// Effective field `∂H/∂ζ†/ħ` as a Hermitian matrix in rad/s.
pub fn effective_field(state: &SpinorState, ham: &Hamiltonian, t: f64) -> Mat3 {
    let b = field_vector(state, ham, t);
    let mut m = ops::along(b);
    mat_scale_add(&mut m, ham.q, &ops::fz2());
    m
}

/// Linear-plus-nonlinear field `b` with `M = b·F + q F_z²`.
#[inline(always)]
fn field_vector(state: &SpinorState, ham: &Hamiltonian, t: f64) -> [f64; 3] {
    let f = state.spin_vector();
    let mut b = [ham.rabi + ham.eps * f[0], ham.eps * f[1], ham.eps * f[2]];
    if ham.is_driven() {
        let d = ham.drive_at(t);
        for (bk, dk) in b.iter_mut().zip(ham.dir) {
            *bk += d * dk;
        }
    }
    b
}

/// A spinor as six reals `(Re ζ₁, Im ζ₁, Re ζ₀, Im ζ₀, Re ζ₋₁, Im ζ₋₁)`.
pub(crate) type Lane = [f64; 6];

#[inline(always)]
pub(crate) fn to_lane(s: &SpinorState) -> Lane {
    let [a, b, c] = s.0;
    [a.re, a.im, b.re, b.im, c.re, c.im]
}

#[inline(always)]
pub(crate) fn from_lane(z: &Lane) -> SpinorState {
    SpinorState([
        Complex64::new(z[0], z[1]),
        Complex64::new(z[2], z[3]),
        Complex64::new(z[4], z[5]),
    ])
}

/// Scalar type the RK4 kernel is written over: `f64` for one state, [`Quad`]
/// for four states at once. Both evaluate the same expression tree, so
/// results are bit-identical.
pub(crate) trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn splat(v: f64) -> Self;
}

impl Real for f64 {
    #[inline(always)]
    fn splat(v: f64) -> Self {
        v
    }
}

/// Four lanes evaluated elementwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Quad(pub [f64; 4]);

macro_rules! quad_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Quad {
            type Output = Quad;
            #[inline(always)]
            fn $f(self, o: Quad) -> Quad {
                Quad([self.0[0] $op o.0[0], self.0[1] $op o.0[1], self.0[2] $op o.0[2], self.0[3] $op o.0[3]])
            }
        }
    };
}
quad_op!(Add, add, +);
quad_op!(Sub, sub, -);
quad_op!(Mul, mul, *);

impl Neg for Quad {
    type Output = Quad;
    #[inline(always)]
    fn neg(self) -> Quad {
        Quad(self.0.map(|v| -v))
    }
}

impl Real for Quad {
    #[inline(always)]
    fn splat(v: f64) -> Self {
        Quad([v; 4])
    }
}

/// `−i M ζ` in real arithmetic; `drive` is `D sin(ω_m t) d̂` (ignored unless
/// `DRIVEN`).
#[inline(always)]
fn lane_rhs<T: Real, const DRIVEN: bool>(z: &[T; 6], ham: &Hamiltonian, drive: &[f64; 3]) -> [T; 6] {
    let [ar, ai, br, bi, cr, ci] = *z;
    let s2 = T::splat(std::f64::consts::SQRT_2);
    let eps = T::splat(ham.eps);
    let fx = s2 * (ar * br + ai * bi + br * cr + bi * ci);
    let fy = s2 * (ar * bi - ai * br + br * ci - bi * cr);
    let fz = (ar * ar + ai * ai) - (cr * cr + ci * ci);
    let mut bx = T::splat(ham.rabi) + eps * fx;
    let mut by = eps * fy;
    let mut bz = eps * fz;
    if DRIVEN {
        bx = bx + T::splat(drive[0]);
        by = by + T::splat(drive[1]);
        bz = bz + T::splat(drive[2]);
    }
    let r = T::splat(FRAC_1_SQRT_2);
    let ux = bx * r;
    let uy = by * r;
    let q = T::splat(ham.q);
    let qp = q + bz;
    let qm = q - bz;
    // w = Mζ
    let w0r = ux * br + uy * bi + qp * ar;
    let w0i = ux * bi - uy * br + qp * ai;
    let w1r = ux * ar - uy * ai + ux * cr + uy * ci;
    let w1i = ux * ai + uy * ar + ux * ci - uy * cr;
    let w2r = ux * br - uy * bi + qm * cr;
    let w2i = ux * bi + uy * br + qm * ci;
    [w0i, -w0r, w1i, -w1r, w2i, -w2r]
}

#[inline(always)]
fn lane_axpy<T: Real>(y: &[T; 6], a: f64, x: &[T; 6]) -> [T; 6] {
    let a = T::splat(a);
    std::array::from_fn(|i| y[i] + a * x[i])
}

/// Unnormalized RK4 update.
#[inline(always)]
fn lane_rk4<T: Real, const DRIVEN: bool>(z: &[T; 6], ham: &Hamiltonian, drives: &[[f64; 3]; 3], dt: f64) -> [T; 6] {
    let h = 0.5 * dt;
    let k1 = lane_rhs::<T, DRIVEN>(z, ham, &drives[0]);
    let k2 = lane_rhs::<T, DRIVEN>(&lane_axpy(z, h, &k1), ham, &drives[1]);
    let k3 = lane_rhs::<T, DRIVEN>(&lane_axpy(z, h, &k2), ham, &drives[1]);
    let k4 = lane_rhs::<T, DRIVEN>(&lane_axpy(z, dt, &k3), ham, &drives[2]);
    let w = T::splat(dt / 6.0);
    let two = T::splat(2.0);
    std::array::from_fn(|i| z[i] + w * (k1[i] + two * (k2[i] + k3[i]) + k4[i]))
}

/// Drive vectors at `t`, `t + dt/2` and `t + dt`.
#[inline(always)]
pub(crate) fn stage_drives(ham: &Hamiltonian, t: f64, dt: f64) -> [[f64; 3]; 3] {
    if !ham.is_driven() {
        return [[0.0; 3]; 3];
    }
    let h = 0.5 * dt;
    [t, t + h, t + dt].map(|tt| {
        let d = ham.drive_at(tt);
        ham.dir.map(|c| d * c)
    })
}

/// One RK4 step followed by renormalization. Returns `|‖ζ‖ − 1|` before
/// renormalization.
#[inline(always)]
pub(crate) fn lane_step<const DRIVEN: bool>(z: &mut Lane, ham: &Hamiltonian, drives: &[[f64; 3]; 3], dt: f64) -> f64 {
    let v = lane_rk4::<f64, DRIVEN>(z, ham, drives, dt);
    let n2 = ((v[0] * v[0] + v[1] * v[1]) + (v[2] * v[2] + v[3] * v[3])) + (v[4] * v[4] + v[5] * v[5]);
    let n = n2.sqrt();
    let inv = 1.0 / n;
    for i in 0..6 {
        z[i] = v[i] * inv;
    }
    (n - 1.0).abs()
}

/// Four-lane version of [`lane_step`]; returns the largest norm error (NaN if
/// any lane produced NaN).
#[inline(always)]
fn quad_step<const DRIVEN: bool>(z: &mut [Quad; 6], ham: &Hamiltonian, drives: &[[f64; 3]; 3], dt: f64) -> f64 {
    let v = lane_rk4::<Quad, DRIVEN>(z, ham, drives, dt);
    let n2 = ((v[0] * v[0] + v[1] * v[1]) + (v[2] * v[2] + v[3] * v[3])) + (v[4] * v[4] + v[5] * v[5]);
    let n = Quad(n2.0.map(f64::sqrt));
    let inv = Quad(n.0.map(|x| 1.0 / x));
    for i in 0..6 {
        z[i] = v[i] * inv;
    }
    let mut worst = 0.0f64;
    for x in n.0 {
        let e = (x - 1.0).abs();
        if e > worst || e.is_nan() {
            worst = e;
        }
    }
    worst
}

#[inline(always)]
fn lane_step_dyn(z: &mut Lane, ham: &Hamiltonian, t: f64, dt: f64) -> f64 {
    let drives = stage_drives(ham, t, dt);
    if ham.is_driven() {
        lane_step::<true>(z, ham, &drives, dt)
    } else {
        lane_step::<false>(z, ham, &drives, dt)
    }
}

/// Result of a single step: the renormalized state and `|‖ζ‖ − 1|` before
/// renormalization.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub state: SpinorState,
    pub norm_error: f64,
}

/// Advances `state` by `dt` (which may be negative for backward integration).
pub fn step(state: &SpinorState, ham: &Hamiltonian, t: f64, dt: f64) -> Result<StepOutcome> {
    let mut z = to_lane(state);
    let norm_error = lane_step_dyn(&mut z, ham, t, dt);
    if !(norm_error <= MAX_NORM_DRIFT) {
        return Err(Error::NormDrift { norm: 1.0 + norm_error, t: t + dt });
    }
    Ok(StepOutcome { state: from_lane(&z), norm_error })
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    /// Step size in seconds.
    pub dt: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { dt: DEFAULT_DT }
    }
}

impl Integrator {
    pub fn new(dt: f64) -> Result<Self> {
        let i = Self { dt };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::InvalidConfig(format!("dt must be in (0, 1e-3] s, got {}", self.dt)));
        }
        Ok(())
    }

    /// Number of steps spanning `interval`, which must be an integer
    /// multiple of `dt`.
    pub fn steps_for(&self, interval: f64) -> Result<u64> {
        let n = (interval / self.dt).round();
        if !(1.0..1e15).contains(&n) || ((n * self.dt - interval).abs() > 1e-9 * interval.abs().max(self.dt)) {
            return Err(Error::InvalidConfig(format!(
                "interval {interval} s is not a positive integer multiple of dt = {} s",
                self.dt
            )));
        }
        Ok(n as u64)
    }
}

/// Steps a single state along a time grid `t_k = t0 + k·dt`.
///
/// Times are computed from the step counter, so long runs do not accumulate
/// rounding in `t`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub ham: Hamiltonian,
    pub dt: f64,
    pub t0: f64,
    pub state: SpinorState,
    pub steps: u64,
    /// Largest pre-renormalization norm error seen so far.
    pub max_norm_error: f64,
}

impl Propagator {
    pub fn new(ham: Hamiltonian, integ: Integrator, t0: f64, state: SpinorState) -> Self {
        Self { ham, dt: integ.dt, t0, state, steps: 0, max_norm_error: 0.0 }
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt
    }

    /// Advances `n` steps.
    pub fn advance(&mut self, n: u64) -> Result<()> {
        let mut z = to_lane(&self.state);
        let mut result = Ok(());
        for _ in 0..n {
            let t = self.time();
            let err = lane_step_dyn(&mut z, &self.ham, t, self.dt);
            if !(err <= MAX_NORM_DRIFT) {
                result = Err(Error::NormDrift { norm: 1.0 + err, t: t + self.dt });
                break;
            }
            if err > self.max_norm_error {
                self.max_norm_error = err;
            }
            self.steps += 1;
        }
        self.state = from_lane(&z);
        result
    }
}

/// Many states stepped in lockstep under one Hamiltonian.
///
/// Members are stored four to a chunk. Each member follows exactly the
/// arithmetic of [`step`], so a batch reproduces [`Propagator`] bit for bit;
/// the drive is evaluated once per step for the whole batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub ham: Hamiltonian,
    pub dt: f64,
    pub t0: f64,
    pub steps: u64,
    len: usize,
    chunks: Vec<[Quad; 6]>,
    pub max_norm_error: f64,
}

impl Batch {
    pub fn new(ham: Hamiltonian, integ: Integrator, t0: f64, states: &[SpinorState]) -> Self {
        let len = states.len();
        let mut chunks = vec![[Quad([0.0; 4]); 6]; len.div_ceil(4)];
        // padding lanes carry a valid state so they never trip the norm check
        let pad = states.last().copied().unwrap_or_else(SpinorState::polar);
        for (c, chunk) in chunks.iter_mut().enumerate() {
            for l in 0..4 {
                let s = states.get(4 * c + l).unwrap_or(&pad);
                let z = to_lane(s);
                for k in 0..6 {
                    chunk[k].0[l] = z[k];
                }
            }
        }
        Self { ham, dt: integ.dt, t0, steps: 0, len, chunks, max_norm_error: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt
    }

    pub fn state(&self, i: usize) -> SpinorState {
        assert!(i < self.len, "member {i} out of range");
        let c = &self.chunks[i / 4];
        let l = i % 4;
        from_lane(&std::array::from_fn(|k| c[k].0[l]))
    }

    pub fn set_state(&mut self, i: usize, s: &SpinorState) {
        assert!(i < self.len, "member {i} out of range");
        let z = to_lane(s);
        let c = &mut self.chunks[i / 4];
        for k in 0..6 {
            c[k].0[i % 4] = z[k];
        }
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = SpinorState> + '_ {
        (0..self.len).map(|i| self.state(i))
    }

    /// Advances every member `n` steps. On norm drift the offending member is
    /// reported and the batch is left at the failing step.
    pub fn advance(&mut self, n: u64) -> Result<()> {
        if self.ham.is_driven() {
            self.advance_impl::<true>(n)
        } else {
            self.advance_impl::<false>(n)
        }
    }

    fn advance_impl<const DRIVEN: bool>(&mut self, n: u64) -> Result<()> {
        let (ham, dt) = (self.ham, self.dt);
        for _ in 0..n {
            let t = self.time();
            let drives = stage_drives(&ham, t, dt);
            let mut worst = 0.0f64;
            let mut bad_chunk = 0;
            for (c, z) in self.chunks.iter_mut().enumerate() {
                let e = quad_step::<DRIVEN>(z, &ham, &drives, dt);
                if e > worst || e.is_nan() {
                    if !(worst > MAX_NORM_DRIFT || worst.is_nan()) {
                        bad_chunk = c;
                    }
                    worst = e;
                }
            }
            if !(worst <= MAX_NORM_DRIFT) {
                let member = (4 * bad_chunk).min(self.len.saturating_sub(1));
                return Err(Error::Member {
                    member,
                    source: Box::new(Error::NormDrift { norm: 1.0 + worst, t: t + dt }),
                });
            }
            if worst > self.max_norm_error {
                self.max_norm_error = worst;
            }
            self.steps += 1;
        }
        Ok(())
    }
}

/// Uniformly sampled states of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub sample_every: f64,
    pub states: Vec<SpinorState>,
    /// Largest per-step norm error before renormalization.
    pub max_norm_error: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time of sample `k`, computed as `t0 + k·T_s`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.sample_every
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn phase_points(&self) -> Vec<PhasePoint> {
        self.states.iter().map(SpinorState::to_phase).collect()
    }

    pub fn magnetization(&self) -> Vec<f64> {
        self.states.iter().map(SpinorState::magnetization).collect()
    }

    pub fn energies(&self, params: &SystemParams) -> Vec<f64> {
        self.states.iter().map(|s| energy_static(s, params)).collect()
    }
}

/// Upper limit on the number of stored samples in one [`Trajectory`].
pub const MAX_TRAJECTORY_SAMPLES: usize = 50_000_000;

/// Integrates from `t0` to `t1`, keeping a sample every `sample_every`
/// seconds (including both end points when the span divides evenly).
pub fn evolve(
    state: SpinorState,
    ham: &Hamiltonian,
    integ: Integrator,
    t0: f64,
    t1: f64,
    sample_every: f64,
) -> Result<Trajectory> {
    integ.validate()?;
    if !(t1 > t0) {
        return Err(Error::InvalidConfig(format!("evolve needs t1 > t0 (got {t0}..{t1})")));
    }
    let per_sample = integ.steps_for(sample_every)?;
    let samples = ((t1 - t0) / sample_every + 1e-9).floor();
    if !(samples <= MAX_TRAJECTORY_SAMPLES as f64) {
        return Err(Error::InvalidConfig(format!(
            "{samples:e} samples requested; at most {MAX_TRAJECTORY_SAMPLES} fit in one trajectory"
        )));
    }
    let samples = samples as usize;
    let mut prop = Propagator::new(*ham, integ, t0, state);
    let mut states = Vec::with_capacity(samples + 1);
    states.push(state);
    for _ in 0..samples {
        prop.advance(per_sample)?;
        states.push(prop.state);
    }
    Ok(Trajectory { t0, sample_every, states, max_norm_error: prop.max_norm_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{sample_haar, RngSeed};
    use crate::params::{presets, DriveSpec};
    use crate::spin::{mat_vec, ops};

    fn dot(a: &[Complex64; 3], b: &[Complex64; 3]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn polar_state_has_zero_energy() {
        assert_eq!(energy_static(&SpinorState::polar(), &SystemParams::default()), 0.0);
    }

    #[test]
    fn reference_energies() {
        let p = SystemParams::default();
        let ec = energy_phase(&presets::x_c(), &p);
        let er = energy_phase(&presets::x_r(), &p);
        assert!((ec - 1.00).abs() < 0.01, "E(xC) = {ec}");
        assert!((er - 0.66).abs() < 0.01 && er < 0.8, "E(xR) = {er}");
        assert!((energy_static(&presets::x_c().to_spinor(), &p) - ec).abs() < 1e-12);
    }

    #[test]
    fn spinor_and_phase_energies_agree_on_haar_samples() {
        let p = SystemParams { q_over_h: 31.0, eps_s_over_h: 52.0, omega_rabi: 17.0 };
        let mut rng = RngSeed::new(5, 0).rng();
        for _ in 0..200 {
            let s = sample_haar(&mut rng);
            let e1 = energy_static(&s, &p);
            let e2 = energy_phase(&s.to_phase(), &p);
            assert!((e1 - e2).abs() < 1e-10, "{e1} vs {e2}");
        }
    }

    #[test]
    fn field_is_hermitian_and_time_independent_without_drive() {
        let ham = Hamiltonian::undriven(&SystemParams::default());
        let s = presets::x_r().to_spinor();
        let a = effective_field(&s, &ham, 0.0);
        let b = effective_field(&s, &ham, 0.123);
        assert_eq!(a, b);
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - a[j][i].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn polar_field_without_rabi_is_pure_quadratic_zeeman() {
        let p = SystemParams { omega_rabi: 0.0, ..Default::default() };
        let ham = Hamiltonian::new(&p, &DriveSpec::z(3.0, 60.0));
        let m = effective_field(&SpinorState::polar(), &ham, 0.0);
        let want = ops::fz2();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - want[i][j] * p.q_rate()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn field_expectation_identity() {
        // ζ†Mζ = (H₀ + (ε_s/2)|f|²)/ħ without drive
        let p = SystemParams::default();
        let ham = Hamiltonian::undriven(&p);
        let mut rng = RngSeed::new(77, 3).rng();
        for _ in 0..100 {
            let s = sample_haar(&mut rng);
            let m = effective_field(&s, &ham, 0.0);
            let lhs = dot(&s.0, &mat_vec(&m, &s.0));
            let f = s.spin_vector();
            let f2 = f.iter().map(|x| x * x).sum::<f64>();
            let rhs = energy_static(&s, &p) * p.eps_rate() + 0.5 * p.eps_rate() * f2;
            assert!((lhs.re - rhs).abs() < 1e-12 * rhs.abs().max(1.0) * 1e3, "{} vs {rhs}", lhs.re);
            assert!(lhs.im.abs() < 1e-10);
        }
    }

    #[test]
    fn direct_rhs_matches_matrix_product() {
        let p = SystemParams::default();
        let ham = Hamiltonian::new(&p, &DriveSpec::along(1.3, 47.0, "0.3,-0.5,0.8".parse().unwrap()));
        let mut rng = RngSeed::new(1, 1).rng();
        for k in 0..20 {
            let s = sample_haar(&mut rng);
            let t = 0.0137 * k as f64;
            let m = effective_field(&s, &ham, t);
            let mz = mat_vec(&m, &s.0);
            let drive = stage_drives(&ham, t, 0.0)[0];
            let r = from_lane(&lane_rhs::<f64, true>(&to_lane(&s), &ham, &drive)).0;
            for i in 0..3 {
                let want = mz[i] * Complex64::new(0.0, -1.0);
                assert!((r[i] - want).norm() < 1e-9, "{:?} vs {want:?}", r[i]);
            }
        }
    }

    #[test]
    fn linear_diagonal_evolution_matches_closed_form() {
        let p = SystemParams { q_over_h: 45.0, eps_s_over_h: 1e-300, omega_rabi: 0.0 };
        let mut ham = Hamiltonian::undriven(&p);
        ham.eps = 0.0;
        let s0 = SpinorState::new([
            Complex64::new(0.4, 0.1),
            Complex64::new(0.5, -0.3),
            Complex64::new(-0.2, 0.6),
        ])
        .unwrap();
        let traj = evolve(s0, &ham, Integrator::default(), 0.0, 0.5, 0.1).unwrap();
        for (k, s) in traj.states.iter().enumerate() {
            let t = traj.time(k);
            let ph = Complex64::from_polar(1.0, -ham.q * t);
            let want = [s0.0[0] * ph, s0.0[1], s0.0[2] * ph];
            for i in 0..3 {
                assert!((s.0[i] - want[i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn magnetization_conserved_without_transverse_field() {
        let p = SystemParams { omega_rabi: 0.0, ..Default::default() };
        let ham = Hamiltonian::new(&p, &DriveSpec::z(2.2, 60.0));
        let s0 = presets::x_r().to_spinor();
        let traj = evolve(s0, &ham, Integrator::default(), 0.0, 2.0, 0.01).unwrap();
        let m0 = s0.magnetization();
        for m in traj.magnetization() {
            assert!((m - m0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_grid_is_exact() {
        let ham = Hamiltonian::undriven(&SystemParams::default());
        let traj = evolve(presets::x_c().to_spinor(), &ham, Integrator::default(), 0.0, 0.05, 1e-3).unwrap();
        assert_eq!(traj.len(), 51);
        assert_eq!(traj.time(37), 37.0 * 1e-3);
    }

    #[test]
    fn rejects_misaligned_sampling() {
        let ham = Hamiltonian::undriven(&SystemParams::default());
        let r = evolve(SpinorState::polar(), &ham, Integrator::default(), 0.0, 1.0, 1.5e-5);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn oversized_step_reports_norm_drift() {
        let ham = Hamiltonian::new(&SystemParams::default(), &DriveSpec::z(50.0, 60.0));
        let r = step(&presets::x_c().to_spinor(), &ham, 0.3, 2e-3);
        assert!(matches!(r, Err(Error::NormDrift { .. })));
    }

    #[test]
    fn zero_amplitude_drive_is_bit_identical_to_undriven() {
        let p = SystemParams::default();
        let a = Hamiltonian::undriven(&p);
        let b = Hamiltonian::new(&p, &DriveSpec::along(0.0, 113.0, crate::params::Direction::Y));
        let s0 = presets::x_c().to_spinor();
        let ta = evolve(s0, &a, Integrator::default(), 0.0, 0.3, 1e-3).unwrap();
        let tb = evolve(s0, &b, Integrator::default(), 0.0, 0.3, 1e-3).unwrap();
        assert_eq!(ta, tb);
    }
}
