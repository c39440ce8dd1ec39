//! Ensembles of nearby states and their convergence to Haar-random
//! statistics, measured by the trace distance between two-copy second
//! moments.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Batch, Integrator};
use crate::eigen::{hermitian_eigenvalues, CMatrix};
use crate::error::{Error, Result};
use crate::haar::{perturb, RngSeed};
use crate::params::{DriveSpec, Hamiltonian, SystemParams};
use crate::spin::SpinorState;

/// Members evolved and accumulated together; fixed so that results do not
/// depend on the number of worker threads.
pub const MEMBER_CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub members: Vec<SpinorState>,
    pub center: SpinorState,
    pub d_i: f64,
    pub seed: RngSeed,
}

/// `n` Gaussian perturbations of `center` with spread `d_i`.
pub fn make_ensemble(center: &SpinorState, n: usize, d_i: f64, seed: RngSeed) -> Result<Ensemble> {
    if !(2..=MAX_ENSEMBLE).contains(&n) {
        return Err(Error::InvalidConfig(format!("an ensemble needs 2 to {MAX_ENSEMBLE} members, got {n}")));
    }
    if !(d_i >= 0.0) || !d_i.is_finite() {
        return Err(Error::InvalidConfig(format!("ensemble spread must be finite and >= 0, got {d_i}")));
    }
    let mut rng = seed.rng();
    let members = (0..n).map(|_| perturb(center, d_i, &mut rng)).collect();
    Ok(Ensemble { members, center: *center, d_i, seed })
}

/// Two-copy second moment `E[(ζζ†)⊗(ζζ†)]` as a 9×9 matrix indexed by
/// `3i + j ↔ ζ_i ζ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment(pub CMatrix);

impl SecondMoment {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// Running sum of `vv†` with `v = ζ⊗ζ`.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    sum: [Complex64; 81],
    count: usize,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self { sum: [Complex64::new(0.0, 0.0); 81], count: 0 }
    }
}

impl MomentAccumulator {
    #[inline]
    pub fn add(&mut self, s: &SpinorState) {
        let z = s.amps();
        let v: [Complex64; 9] = std::array::from_fn(|k| z[k / 3] * z[k % 3]);
        for a in 0..9 {
            let va = v[a];
            for b in a..9 {
                self.sum[a * 9 + b] += va * v[b].conj();
            }
        }
        self.count += 1;
    }

    /// Adds another partial sum (combination order matters for bit-identity).
    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.sum.iter_mut().zip(other.sum.iter()) {
            *a += b;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> SecondMoment {
        let n = self.count.max(1) as f64;
        SecondMoment(CMatrix::from_fn(9, |a, b| {
            if a <= b {
                self.sum[a * 9 + b] / n
            } else {
                self.sum[b * 9 + a].conj() / n
            }
        }))
    }
}

pub fn second_moment(states: &[SpinorState]) -> SecondMoment {
    let mut acc = MomentAccumulator::default();
    for s in states {
        acc.add(s);
    }
    acc.finish()
}

/// `(𝟙 + SWAP)/12`, the projector onto the symmetric two-copy subspace over
/// its dimension.
pub fn haar_second_moment() -> SecondMoment {
    SecondMoment(CMatrix::from_fn(9, |a, b| {
        let (i, j) = (a / 3, a % 3);
        let (k, l) = (b / 3, b % 3);
        let id = if a == b { 1.0 } else { 0.0 };
        let swap = if i == l && j == k { 1.0 } else { 0.0 };
        Complex64::new((id + swap) / 12.0, 0.0)
    }))
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &SecondMoment, b: &SecondMoment) -> Result<f64> {
    let ev = hermitian_eigenvalues(&a.0.sub(&b.0))?;
    Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    pub n_ens: usize,
    pub d_i: f64,
    /// Final time in units of `τ_s`.
    pub t_final_tau: f64,
    /// Sampling cadence in units of `τ_s`.
    pub sample_every_tau: f64,
    /// End the run at the first sample with `Δ² ≤ floor`. `R` then refers
    /// to that sample.
    #[serde(default)]
    pub stop_at_floor: bool,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self { n_ens: 1024, d_i: 5e-3, t_final_tau: 90.0, sample_every_tau: 0.1, stop_at_floor: false }
    }
}

/// Largest ensemble accepted (members are held in memory together).
pub const MAX_ENSEMBLE: usize = 1 << 24;

/// Largest number of `Δ²` samples in one run.
pub const MAX_SAMPLES: usize = 10_000_000;

impl RandomizationConfig {
    pub fn sample_count(&self) -> f64 {
        (self.t_final_tau / self.sample_every_tau + 1e-9).floor()
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_ENSEMBLE).contains(&self.n_ens) {
            return Err(Error::InvalidConfig(format!(
                "n_ens must lie in [2, {MAX_ENSEMBLE}], got {}",
                self.n_ens
            )));
        }
        if !(self.d_i >= 0.0 && self.d_i.is_finite()) {
            return Err(Error::InvalidConfig(format!("d_i must be finite and >= 0, got {}", self.d_i)));
        }
        if !(self.t_final_tau > 0.0) || !(self.sample_every_tau > 0.0) {
            return Err(Error::InvalidConfig("randomization needs positive t_f and cadence".into()));
        }
        if !(self.sample_count() <= MAX_SAMPLES as f64) {
            return Err(Error::InvalidConfig(format!(
                "t_f / cadence gives {:e} samples; at most {MAX_SAMPLES} are allowed",
                self.sample_count()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationResult {
    /// Sample times in seconds.
    pub times: Vec<f64>,
    pub delta2: Vec<f64>,
    /// Finite-size floor `1/√N_ens`.
    pub floor: f64,
    /// `floor / Δ²(t_f)`.
    pub r: f64,
    /// First sampled time with `Δ² ≤ floor`; `None` means never (infinite).
    pub tau_r: Option<f64>,
    pub t_f: f64,
    pub tau_s: f64,
}

impl RandomizationResult {
    fn from_series(times: Vec<f64>, delta2: Vec<f64>, n_ens: usize, tau_s: f64) -> Self {
        let floor = 1.0 / (n_ens as f64).sqrt();
        let t_f = *times.last().expect("at least the initial sample");
        let r = floor / delta2.last().expect("at least the initial sample");
        let tau_r = times.iter().zip(&delta2).find(|(_, d)| **d <= floor).map(|(t, _)| *t);
        Self { times, delta2, floor, r, tau_r, t_f, tau_s }
    }

    pub fn tau_r_over_tau_s(&self) -> Option<f64> {
        self.tau_r.map(|t| t / self.tau_s)
    }
}

/// Evolves every member of `ens` under the same Hamiltonian and records
/// `Δ²(t)` against the Haar moment. Samples fall on the integrator step
/// nearest to each multiple of the cadence.
pub fn randomization_run(
    ens: &Ensemble,
    params: &SystemParams,
    drive: &DriveSpec,
    integ: Integrator,
    cfg: &RandomizationConfig,
) -> Result<RandomizationResult> {
    params.validate()?;
    drive.validate()?;
    integ.validate()?;
    cfg.validate()?;
    let tau_s = params.tau_s();
    let ham = Hamiltonian::new(params, drive);
    let n_samples = cfg.sample_count() as usize;
    let sample_steps: Vec<u64> =
        (0..=n_samples).map(|k| (k as f64 * cfg.sample_every_tau * tau_s / integ.dt).round() as u64).collect();

    let floor = 1.0 / (ens.members.len() as f64).sqrt();
    let haar = haar_second_moment();
    let mut batches: Vec<Batch> = ens.members.chunks(MEMBER_CHUNK).map(|c| Batch::new(ham, integ, 0.0, c)).collect();
    let mut delta2 = Vec::with_capacity(sample_steps.len());
    let mut done = 0u64;
    for &target in &sample_steps {
        let partials: Vec<Result<MomentAccumulator>> = batches
            .par_iter_mut()
            .enumerate()
            .map(|(c, batch)| {
                batch.advance(target - done).map_err(|e| offset_member(e, c * MEMBER_CHUNK))?;
                let mut acc = MomentAccumulator::default();
                for s in batch.states() {
                    acc.add(&s);
                }
                Ok(acc)
            })
            .collect();
        done = target;
        // merged in chunk order so the sum does not depend on scheduling
        let mut total = MomentAccumulator::default();
        for p in partials {
            total.merge(&p?);
        }
        let d2 = trace_distance(&total.finish(), &haar)?;
        delta2.push(d2);
        if cfg.stop_at_floor && d2 <= floor {
            break;
        }
    }
    let sample_steps = &sample_steps[..delta2.len()];
    let times = sample_steps.iter().map(|&s| s as f64 * integ.dt).collect();
    Ok(RandomizationResult::from_series(times, delta2, ens.members.len(), tau_s))
}

fn offset_member(e: Error, offset: usize) -> Error {
    match e {
        Error::Member { member, source } => Error::Member { member: member + offset, source },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{random_unitary, sample_haar};
    use crate::spin::mat_vec;

    #[test]
    fn haar_moment_spectrum() {
        let h = haar_second_moment();
        assert!((h.trace() - 1.0).abs() < 1e-15);
        let ev = hermitian_eigenvalues(h.matrix()).unwrap();
        for (i, v) in ev.iter().enumerate() {
            let want = if i < 3 { 0.0 } else { 1.0 / 6.0 };
            assert!((v - want).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn pure_state_is_five_sixths_from_haar() {
        let mut rng = RngSeed::new(8, 0).rng();
        for _ in 0..10 {
            let s = sample_haar(&mut rng);
            let d = trace_distance(&second_moment(&[s, s]), &haar_second_moment()).unwrap();
            assert!((d - 5.0 / 6.0).abs() < 1e-10, "{d}");
        }
    }

    #[test]
    fn moment_is_hermitian_unit_trace_and_swap_symmetric() {
        let mut rng = RngSeed::new(9, 0).rng();
        let states: Vec<_> = (0..50).map(|_| sample_haar(&mut rng)).collect();
        let m = second_moment(&states);
        assert!(m.matrix().hermiticity_error() < 1e-12);
        assert!((m.trace() - 1.0).abs() < 1e-10);
        let swap = |a: usize| 3 * (a % 3) + a / 3;
        for a in 0..9 {
            for b in 0..9 {
                assert!((m.0[(a, b)] - m.0[(swap(a), swap(b))]).norm() < 1e-15);
            }
        }
        assert!(hermitian_eigenvalues(m.matrix()).unwrap()[0] > -1e-10);
    }

    #[test]
    fn global_unitary_leaves_distance_unchanged() {
        let mut rng = RngSeed::new(10, 0).rng();
        let ens = make_ensemble(&sample_haar(&mut rng), 300, 0.3, RngSeed::new(10, 1)).unwrap();
        let u = random_unitary(&mut rng);
        let rotated: Vec<_> = ens.members.iter().map(|s| SpinorState::from_normalized(mat_vec(&u, &s.0))).collect();
        let h = haar_second_moment();
        let a = trace_distance(&second_moment(&ens.members), &h).unwrap();
        let b = trace_distance(&second_moment(&rotated), &h).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn ensemble_needs_two_members() {
        assert!(make_ensemble(&SpinorState::polar(), 1, 0.01, RngSeed::new(0, 0)).is_err());
    }

    #[test]
    fn tau_r_is_first_sample_at_floor() {
        let r = RandomizationResult::from_series(vec![0.0, 1.0, 2.0, 3.0], vec![0.8, 0.3, 0.2, 0.25], 25, 1.0);
        assert_eq!(r.floor, 0.2);
        assert_eq!(r.tau_r, Some(2.0));
        assert!((r.r - 0.8).abs() < 1e-15);
        let never = RandomizationResult::from_series(vec![0.0, 1.0], vec![0.8, 0.5], 25, 1.0);
        assert_eq!(never.tau_r, None);
    }
}
