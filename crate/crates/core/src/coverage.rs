//! Coarse-grained phase-space occupation entropy and the coverage fraction
//! `V = exp(−(S_haar − S))`.
//!
//! Samples are binned on a rectangular grid over `ρ₀ ∈ [0,1]`, `m ∈ [−1,1]`,
//! `θ₊, θ₋ ∈ [−π,π)`. Entropies are in nats.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::haar::{sample_haar, RngSeed};
use crate::spin::SpinorState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSpec {
    pub bins_per_axis: usize,
    /// Sampling period `T_s` in seconds, stored in nanoseconds so the spec
    /// can key the reference cache.
    pub sample_period_ns: u64,
    pub samples: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bins_per_axis: 8, sample_period_ns: 1_000_000, samples: 100_000 }
    }
}

impl HistogramSpec {
    pub fn with_samples(samples: usize) -> Self {
        Self { samples, ..Self::default() }
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period_ns as f64 * 1e-9
    }

    /// Total number of cells, reachable or not.
    pub fn n_bins(&self) -> usize {
        self.bins_per_axis.pow(4)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=64).contains(&self.bins_per_axis) {
            return Err(Error::InvalidConfig(format!("bins per axis must be in 1..=64, got {}", self.bins_per_axis)));
        }
        if self.samples == 0 || self.sample_period_ns == 0 {
            return Err(Error::InvalidConfig("histogram needs a positive sample count and period".into()));
        }
        Ok(())
    }

    fn axis_bin(&self, x: f64, lo: f64, hi: f64) -> usize {
        let b = self.bins_per_axis;
        let f = ((x - lo) / (hi - lo) * b as f64).floor();
        if f.is_nan() || f < 0.0 {
            0
        } else {
            (f as usize).min(b - 1)
        }
    }

    /// Flat cell index of a state; degenerate angles fall in the `θ = 0`
    /// column.
    pub fn cell(&self, state: &SpinorState) -> usize {
        let p = state.to_phase();
        let b = self.bins_per_axis;
        let i0 = self.axis_bin(p.rho0, 0.0, 1.0);
        let i1 = self.axis_bin(p.m, -1.0, 1.0);
        let i2 = self.axis_bin(crate::spin::wrap_angle(p.theta_plus()), -PI, PI);
        let i3 = self.axis_bin(crate::spin::wrap_angle(p.theta_minus()), -PI, PI);
        ((i0 * b + i1) * b + i2) * b + i3
    }
}

/// Occupation counts over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    spec: HistogramSpec,
    counts: Vec<u32>,
    total: u64,
    degenerate: u64,
}

impl Histogram {
    pub fn new(spec: HistogramSpec) -> Self {
        Self { spec, counts: vec![0; spec.n_bins()], total: 0, degenerate: 0 }
    }

    pub fn add(&mut self, state: &SpinorState) {
        self.counts[self.spec.cell(state)] += 1;
        self.total += 1;
        if state.is_degenerate() {
            self.degenerate += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Samples whose angles were undefined and binned at zero.
    pub fn degenerate(&self) -> u64 {
        self.degenerate
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `−Σ p_i ln p_i` with `p_i = n_i/N`.
    pub fn entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let ln_n = n.ln();
        // Σ n_i ln n_i, accumulated in cell order
        let s: f64 = self.counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 * (c as f64).ln()).sum();
        let h = ln_n - s / n;
        h.max(0.0)
    }
}

/// Entropy of the first `N_s` samples after the initial one (or of all
/// `N_s` samples when the trajectory holds exactly that many).
pub fn trajectory_entropy(traj: &Trajectory, spec: &HistogramSpec) -> Result<f64> {
    spec.validate()?;
    let period = spec.sample_period();
    if (traj.sample_every - period).abs() > 1e-9 * period {
        return Err(Error::InvalidConfig(format!(
            "trajectory sampled every {} s, histogram expects {} s",
            traj.sample_every, period
        )));
    }
    let skip = match traj.len() {
        n if n > spec.samples => 1,
        n if n == spec.samples => 0,
        n => return Err(Error::InsufficientSamples { needed: spec.samples, available: n }),
    };
    let mut h = Histogram::new(*spec);
    for s in &traj.states[skip..skip + spec.samples] {
        h.add(s);
    }
    Ok(h.entropy())
}

type HaarCache = Mutex<HashMap<(usize, usize, RngSeed), f64>>;

fn haar_cache() -> &'static HaarCache {
    static CACHE: OnceLock<HaarCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Entropy of `N_s` Haar-random states under the same binning, cached per
/// (bins, samples, seed).
pub fn haar_entropy(spec: &HistogramSpec, seed: RngSeed) -> f64 {
    let key = (spec.bins_per_axis, spec.samples, seed);
    if let Some(&s) = haar_cache().lock().expect("cache lock").get(&key) {
        return s;
    }
    let mut rng = seed.rng();
    let mut h = Histogram::new(*spec);
    for _ in 0..spec.samples {
        h.add(&sample_haar(&mut rng));
    }
    let s = h.entropy();
    haar_cache().lock().expect("cache lock").insert(key, s);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub s: f64,
    pub s_haar: f64,
    pub delta_s: f64,
    pub v: f64,
}

impl CoverageResult {
    pub fn from_entropies(s: f64, s_haar: f64) -> Self {
        let delta_s = s_haar - s;
        Self { s, s_haar, delta_s, v: (-delta_s).exp() }
    }
}

/// Coverage of a trajectory against the Haar reference drawn with `haar_seed`.
pub fn coverage(traj: &Trajectory, spec: &HistogramSpec, haar_seed: RngSeed) -> Result<CoverageResult> {
    let s = trajectory_entropy(traj, spec)?;
    Ok(CoverageResult::from_entropies(s, haar_entropy(spec, haar_seed)))
}
