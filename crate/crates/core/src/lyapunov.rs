//! Largest Lyapunov exponent by two-trajectory (Benettin) rescaling in the
//! phase-space metric
//! `d = √[(Δρ₀)² + (Δm)² + (Δθ₊/π)² + (Δθ₋/π)²]`.
//!
//! The engine runs any number of initial conditions in one [`Batch`]: lane
//! `2i` is the primary trajectory of initial condition `i`, lane `2i + 1` its
//! companion. A batch of one gives exactly the single-trajectory result.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Batch, Integrator};
use crate::error::{Error, Result};
use crate::haar::{displace, random_direction4, RngSeed, SimRng};
use crate::params::{DriveSpec, Hamiltonian, SystemParams};
use crate::spin::{wrap_angle, SpinorState};

/// How many fresh directions are tried when a rescaled companion falls
/// outside the population triangle.
pub const MAX_COMPANION_RETRIES: u32 = 10;

/// Upper limit on rescaling iterations per run.
pub const MAX_ITERATIONS: usize = 10_000_000;

/// Metric displacement `b − a` as `(Δρ₀, Δm, Δθ₊/π, Δθ₋/π)`, angles taken
/// along the shortest arc.
pub fn metric_delta(a: &SpinorState, b: &SpinorState) -> [f64; 4] {
    let pa = a.to_phase();
    let pb = b.to_phase();
    [
        pb.rho0 - pa.rho0,
        pb.m - pa.m,
        wrap_angle(pb.theta_plus() - pa.theta_plus()) / PI,
        wrap_angle(pb.theta_minus() - pa.theta_minus()) / PI,
    ]
}

/// Phase-space distance between two states (gauge invariant).
pub fn phase_distance(a: &SpinorState, b: &SpinorState) -> f64 {
    metric_delta(a, b).iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LleConfig {
    /// Initial and reset separation `d₀`.
    pub d0: f64,
    /// Reset interval `T_r` in seconds.
    pub reset_interval: f64,
    pub iterations: usize,
}

impl Default for LleConfig {
    fn default() -> Self {
        Self { d0: 1e-6, reset_interval: 0.05, iterations: 2000 }
    }
}

impl LleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0 && self.d0 < 0.1) {
            return Err(Error::InvalidConfig(format!("d0 must be in (0, 0.1), got {}", self.d0)));
        }
        if !(self.reset_interval > 0.0) || !self.reset_interval.is_finite() {
            return Err(Error::InvalidConfig(format!("reset interval must be positive, got {}", self.reset_interval)));
        }
        if !(1..=MAX_ITERATIONS).contains(&self.iterations) {
            return Err(Error::InvalidConfig(format!(
                "iterations must lie in [1, {MAX_ITERATIONS}], got {}",
                self.iterations
            )));
        }
        Ok(())
    }

    /// Total integration time `N_iter·T_r`.
    pub fn duration(&self) -> f64 {
        self.iterations as f64 * self.reset_interval
    }
}

/// Exponents in units of `1/τ_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LleResult {
    pub lambda: f64,
    pub stderr: f64,
    pub iterates: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Companion resets that needed a fresh direction.
    pub retries: u32,
}

impl LleResult {
    fn from_iterates(iterates: Vec<f64>, retries: u32) -> Self {
        let n = iterates.len();
        let mut cumulative = Vec::with_capacity(n);
        let mut sum = 0.0;
        for (i, v) in iterates.iter().enumerate() {
            sum += v;
            cumulative.push(sum / (i + 1) as f64);
        }
        let lambda = sum / n as f64;
        let stderr = if n > 1 {
            let var = iterates.iter().map(|v| (v - lambda) * (v - lambda)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        if let Some(last) = cumulative.last_mut() {
            *last = lambda;
        }
        Self { lambda, stderr, iterates, cumulative, retries }
    }
}

/// Places a companion at distance `d0` from `primary` along `direction`
/// (a unit metric vector), retrying with random directions when the result
/// would be unphysical.
fn place_companion(
    primary: &SpinorState,
    direction: [f64; 4],
    d0: f64,
    rng: &mut SimRng,
    retries: &mut u32,
) -> Result<SpinorState> {
    let center = primary.to_phase();
    let mut dir = direction;
    for attempt in 0..=MAX_COMPANION_RETRIES {
        let cand = displace(&center, dir.map(|x| x * d0));
        if cand.is_physical() {
            return Ok(cand.to_spinor());
        }
        if attempt == MAX_COMPANION_RETRIES {
            break;
        }
        *retries += 1;
        dir = random_direction4(rng);
    }
    Err(Error::DegenerateCompanion { retries: MAX_COMPANION_RETRIES })
}

/// Receives primary-trajectory samples: `(initial-condition index, sample
/// index k ≥ 1, state at t₀ + k·T_s)`.
pub trait SampleObserver {
    fn observe(&mut self, ic: usize, k: usize, state: &SpinorState);
}

impl<F: FnMut(usize, usize, &SpinorState)> SampleObserver for F {
    fn observe(&mut self, ic: usize, k: usize, state: &SpinorState) {
        self(ic, k, state)
    }
}

/// Benettin estimates for many initial conditions stepped together.
///
/// `seeds[i]` drives the displacement directions of initial condition `i`.
/// When `sample_every` is given, each primary trajectory is reported to
/// `observer` at that cadence (it must divide `T_r`). Failures are per
/// initial condition.
#[allow(clippy::too_many_arguments)]
pub fn benettin_batch(
    initials: &[SpinorState],
    seeds: &[RngSeed],
    ham: &Hamiltonian,
    tau_s: f64,
    integ: Integrator,
    cfg: &LleConfig,
    sample_every: Option<f64>,
    observer: &mut dyn SampleObserver,
) -> Result<Vec<Result<LleResult>>> {
    cfg.validate()?;
    integ.validate()?;
    assert_eq!(initials.len(), seeds.len(), "one seed per initial condition");
    let reset_steps = integ.steps_for(cfg.reset_interval)?;
    let (chunk_steps, chunks_per_reset) = match sample_every {
        Some(ts) => {
            let s = integ.steps_for(ts)?;
            if reset_steps % s != 0 {
                return Err(Error::InvalidConfig(format!(
                    "sampling period {ts} s must divide the reset interval {} s",
                    cfg.reset_interval
                )));
            }
            (s, reset_steps / s)
        }
        None => (reset_steps, 1),
    };

    let n = initials.len();
    let mut rngs: Vec<SimRng> = seeds.iter().map(RngSeed::rng).collect();
    let mut retries = vec![0u32; n];
    let mut failed: Vec<Option<Error>> = (0..n).map(|_| None).collect();
    let mut lanes = Vec::with_capacity(2 * n);
    for i in 0..n {
        let dir = random_direction4(&mut rngs[i]);
        let companion = match place_companion(&initials[i], dir, cfg.d0, &mut rngs[i], &mut retries[i]) {
            Ok(c) => c,
            Err(e) => {
                failed[i] = Some(e);
                initials[i]
            }
        };
        lanes.push(initials[i]);
        lanes.push(companion);
    }
    let mut batch = Batch::new(*ham, integ, 0.0, &lanes);
    let mut iterates = vec![Vec::with_capacity(cfg.iterations); n];
    let to_tau = tau_s / cfg.reset_interval;
    let mut k = 0usize;

    for _ in 0..cfg.iterations {
        for _ in 0..chunks_per_reset {
            if let Err(e) = batch.advance(chunk_steps) {
                // an integrator failure poisons every member still running
                return Ok((0..n)
                    .map(|i| match failed[i].take() {
                        Some(f) => Err(f),
                        None => Err(Error::Member { member: i, source: Box::new(clone_numeric(&e)) }),
                    })
                    .collect());
            }
            k += 1;
            if sample_every.is_some() {
                for i in 0..n {
                    if failed[i].is_none() {
                        observer.observe(i, k, &batch.state(2 * i));
                    }
                }
            }
        }
        for i in 0..n {
            if failed[i].is_some() {
                continue;
            }
            let p = batch.state(2 * i);
            let c = batch.state(2 * i + 1);
            let delta = metric_delta(&p, &c);
            let d = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
            iterates[i].push((d / cfg.d0).ln() * to_tau);
            let dir = if d > 0.0 && d.is_finite() { delta.map(|x| x / d) } else { random_direction4(&mut rngs[i]) };
            match place_companion(&p, dir, cfg.d0, &mut rngs[i], &mut retries[i]) {
                Ok(c) => batch.set_state(2 * i + 1, &c),
                Err(e) => failed[i] = Some(e),
            }
        }
    }

    Ok(iterates
        .into_iter()
        .enumerate()
        .map(|(i, it)| match failed[i].take() {
            Some(e) => Err(e),
            None => Ok(LleResult::from_iterates(it, retries[i])),
        })
        .collect())
}

fn clone_numeric(e: &Error) -> Error {
    match e {
        Error::Member { source, .. } => clone_numeric(source),
        Error::NormDrift { norm, t } => Error::NormDrift { norm: *norm, t: *t },
        other => Error::Parse(other.to_string()),
    }
}

struct NoSamples;

impl SampleObserver for NoSamples {
    fn observe(&mut self, _: usize, _: usize, _: &SpinorState) {}
}

/// Largest Lyapunov exponent of a single initial condition; `seed` drives
/// the displacement directions.
pub fn benettin_lle(
    initial: &SpinorState,
    params: &SystemParams,
    drive: &DriveSpec,
    integ: Integrator,
    cfg: &LleConfig,
    seed: RngSeed,
) -> Result<LleResult> {
    params.validate()?;
    drive.validate()?;
    let ham = Hamiltonian::new(params, drive);
    benettin_with(initial, &ham, params.tau_s(), integ, cfg, seed)
}

/// As [`benettin_lle`] for an explicit Hamiltonian; exponents are reported
/// in units of `1/tau_s`.
pub fn benettin_with(
    initial: &SpinorState,
    ham: &Hamiltonian,
    tau_s: f64,
    integ: Integrator,
    cfg: &LleConfig,
    seed: RngSeed,
) -> Result<LleResult> {
    let mut out = benettin_batch(&[*initial], &[seed], ham, tau_s, integ, cfg, None, &mut NoSamples)?;
    out.pop().expect("one result per initial condition")
}

/// LLE together with the primary trajectory's magnetization sampled every
/// `sample_every` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LleTrace {
    pub sample_every: f64,
    pub magnetization: Vec<f64>,
    pub result: LleResult,
}

pub fn lle_trace(
    initial: &SpinorState,
    params: &SystemParams,
    drive: &DriveSpec,
    integ: Integrator,
    cfg: &LleConfig,
    seed: RngSeed,
    sample_every: f64,
) -> Result<LleTrace> {
    params.validate()?;
    drive.validate()?;
    let ham = Hamiltonian::new(params, drive);
    let mut magnetization = Vec::with_capacity((cfg.duration() / sample_every).round() as usize + 1);
    magnetization.push(initial.magnetization());
    let mut obs = |_: usize, _: usize, s: &SpinorState| magnetization.push(s.magnetization());
    let mut out =
        benettin_batch(&[*initial], &[seed], &ham, params.tau_s(), integ, cfg, Some(sample_every), &mut obs)?;
    let result = out.pop().expect("one result")?;
    Ok(LleTrace { sample_every, magnetization, result })
}

/// Regular-like episodes in an iterate series: maximal runs of at least
/// `min_len` iterations covered by `window`-long stretches whose mean
/// exponent has magnitude below `threshold`. Returns `(start, end)` ranges.
pub fn quiet_intervals(iterates: &[f64], window: usize, threshold: f64, min_len: usize) -> Vec<(usize, usize)> {
    if window == 0 || iterates.len() < window {
        return Vec::new();
    }
    let mut quiet = vec![false; iterates.len()];
    let mut sum: f64 = iterates[..window].iter().sum();
    for end in window..=iterates.len() {
        if end > window {
            sum += iterates[end - 1] - iterates[end - 1 - window];
        }
        if (sum / window as f64).abs() < threshold {
            quiet[end - window..end].iter_mut().for_each(|q| *q = true);
        }
    }
    let mut out = Vec::new();
    let mut start = None;
    for (i, &q) in quiet.iter().chain(std::iter::once(&false)).enumerate() {
        match (q, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_len {
                    out.push((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}
