//! Self-check suite run by `spinchaos validate`: conservation, reversibility,
//! agreement between independent integrators and frames, Haar statistics
//! and the eigensolver.

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dynamics::{energy_static, evolve, step, Integrator};
use crate::eigen::{hermitian_eigen, CMatrix};
use crate::ensemble::{haar_second_moment, second_moment, trace_distance};
use crate::error::Result;
use crate::haar::{normal, sample_haar, RngSeed, SimRng};
use crate::lyapunov::phase_distance;
use crate::params::{presets, Direction, DriveSpec, Hamiltonian, SystemParams};
use crate::phase_eom::{boundary_margin, evolve_phase};
use crate::rotating::{FieldForm, RotatingFrame, DEFAULT_HARMONICS};
use crate::spin::SpinorState;

/// Step used by the frame-equivalence check.
pub const FRAME_CHECK_DT: f64 = 2.5e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured figure of merit.
    pub value: f64,
    /// Pass threshold for `value`, in the check's own sense.
    pub limit: f64,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value < limit, value, limit, detail, seconds: 0.0 }
    }
}

fn timed(f: impl FnOnce() -> Result<Check>) -> Result<Check> {
    let start = Instant::now();
    let mut c = f()?;
    c.seconds = start.elapsed().as_secs_f64();
    Ok(c)
}

/// Undriven `x_R` and `x_C` over `duration` seconds: the largest
/// `|ΔE|/ε_s` and largest per-step norm error.
pub fn energy_conservation(params: &SystemParams, duration: f64) -> Result<(f64, f64)> {
    let ham = Hamiltonian::undriven(params);
    let mut de: f64 = 0.0;
    let mut dn: f64 = 0.0;
    for p in [presets::x_r(), presets::x_c()] {
        let s = p.to_spinor();
        let e0 = energy_static(&s, params);
        let traj = evolve(s, &ham, Integrator::default(), 0.0, duration, 1.0f64.min(duration))?;
        for e in traj.energies(params) {
            de = de.max((e - e0).abs());
        }
        dn = dn.max(traj.max_norm_error);
    }
    Ok((de, dn))
}

/// Forward then backward undriven integration over `duration` from the
/// regular point `x_R`, returning the phase-space distance from the start.
/// A chaotic start cannot be used: rounding errors grow by `e^{λt}`.
pub fn reversibility(params: &SystemParams, duration: f64) -> Result<f64> {
    let ham = Hamiltonian::undriven(params);
    let dt = Integrator::default().dt;
    let n = (duration / dt).round() as u64;
    let start = presets::x_r().to_spinor();
    let mut s = start;
    for k in 0..n {
        s = step(&s, &ham, k as f64 * dt, dt)?.state;
    }
    for k in (0..n).rev() {
        s = step(&s, &ham, (k + 1) as f64 * dt, -dt)?.state;
    }
    Ok(phase_distance(&start, &s))
}

/// Largest distance between spinor and coordinate integration over one
/// `τ_s` for `count` random interior states.
pub fn representation_equivalence(params: &SystemParams, count: usize, seed: u64) -> Result<f64> {
    let ham = Hamiltonian::undriven(params);
    let integ = Integrator::default();
    let n = (params.tau_s() / integ.dt).round() as u64;
    let t_end = n as f64 * integ.dt;
    let mut rng = RngSeed::new(seed, 0x5e9).rng();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let s = sample_haar(&mut rng);
        let p = s.to_phase();
        if boundary_margin(&p) < 0.05 {
            continue;
        }
        let via_phase = evolve_phase(p, &ham, 0.0, integ.dt, n)?;
        let traj = evolve(s, &ham, integ, 0.0, t_end, t_end)?;
        worst = worst.max(phase_distance(traj.states.last().expect("end sample"), &via_phase.to_spinor()));
        done += 1;
    }
    Ok(worst)
}

/// Largest `(ρ₀, m)` deviation between lab-frame integration and
/// rotating-frame integration mapped back to the lab, over `n_tau` `τ_s`
/// at modulation index `d_tilde`. Both paths use `dt = FRAME_CHECK_DT`: at
/// the default step the lab integrator's own error is near `10⁻⁵` for a
/// drive this strong.
pub fn frame_equivalence(params: &SystemParams, direction: Direction, d_tilde: f64, n_tau: f64) -> Result<f64> {
    let freq = 60.0;
    let drive = DriveSpec::along(d_tilde * freq / params.eps_s_over_h, freq, direction);
    let integ = Integrator::new(FRAME_CHECK_DT)?;
    let ham = Hamiltonian::new(params, &drive);
    let rf = RotatingFrame::new(params, &drive, DEFAULT_HARMONICS)?;
    let sample_steps = 100u64;
    let n = ((n_tau * params.tau_s() / integ.dt) as u64 / sample_steps) * sample_steps;
    let span = n as f64 * integ.dt;
    let every = sample_steps as f64 * integ.dt;
    let mut worst: f64 = 0.0;
    for start in [presets::x_r().to_spinor(), presets::x_c().to_spinor()] {
        let lab = evolve(start, &ham, integ, 0.0, span, every)?;
        let mut forms = vec![FieldForm::Closed];
        if direction == Direction::Z {
            forms.push(FieldForm::Series);
        }
        for form in forms {
            let framed = rf.evolve_lab_via_frame(&start, integ.dt, n, sample_steps, form)?;
            for (a, b) in lab.states.iter().zip(&framed) {
                worst = worst.max((a.rho0() - b.rho0()).abs()).max((a.magnetization() - b.magnetization()).abs());
            }
        }
    }
    Ok(worst)
}

/// Index of the triangle cell holding `(x, y)` (with `x + y ≤ 1`) when the
/// simplex is cut into `k²` congruent triangles.
fn simplex_cell(x: f64, y: f64, k: usize) -> usize {
    let (u, v) = (x * k as f64, y * k as f64);
    let i = (u.floor() as usize).min(k - 1);
    let j = (v.floor() as usize).min(k - 1 - i);
    let upper = (u - i as f64) + (v - j as f64) >= 1.0 && i + j + 1 < k;
    // row j holds 2(k − j) − 1 cells
    let row_start: usize = (0..j).map(|r| 2 * (k - r) - 1).sum();
    row_start + 2 * i + usize::from(upper)
}

/// Chi-square p-value for uniformity of Haar populations over the simplex.
pub fn simplex_uniformity(samples: usize, seed: u64) -> f64 {
    let k = 10;
    let mut counts = vec![0u64; k * k];
    let mut rng = RngSeed::new(seed, 0x51).rng();
    for _ in 0..samples {
        let p = sample_haar(&mut rng).populations();
        counts[simplex_cell(p[0], p[2], k)] += 1;
    }
    let expected = samples as f64 / (k * k) as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((k * k - 1) as f64).expect("positive dof").cdf(chi2)
}

/// Largest entry of `|E[ζζ†] − 𝟙/3|`.
pub fn first_moment_error(samples: usize, seed: u64) -> f64 {
    let mut rng = RngSeed::new(seed, 0x52).rng();
    let mut acc = [[Complex64::new(0.0, 0.0); 3]; 3];
    for _ in 0..samples {
        let z = *sample_haar(&mut rng).amps();
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += z[i] * z[j].conj();
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (i, row) in acc.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            let want = if i == j { 1.0 / 3.0 } else { 0.0 };
            worst = worst.max((a / samples as f64 - want).norm());
        }
    }
    worst
}

/// `Δ²` between the empirical second moment of `n` Haar states and the
/// exact one.
pub fn haar_moment_distance(n: usize, seed: u64) -> Result<f64> {
    let mut rng = RngSeed::new(seed, 0x53 + n as u64).rng();
    let states: Vec<SpinorState> = (0..n).map(|_| sample_haar(&mut rng)).collect();
    trace_distance(&second_moment(&states), &haar_second_moment())
}

/// Random `n × n` unitary from a product of Householder reflections.
fn householder_unitary(n: usize, rng: &mut SimRng) -> CMatrix {
    let mut u = CMatrix::identity(n);
    for _ in 0..n {
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(normal(rng), normal(rng))).collect();
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let h = CMatrix::from_fn(n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - v[i] * v[j].conj() * (2.0 / vv)
        });
        u = u.matmul(&h);
    }
    u
}

/// Worst eigenvalue error and reconstruction residual for `trials` random
/// Hermitian matrices with planted spectra (one with a degenerate pair).
pub fn eigensolver_planted(trials: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = RngSeed::new(seed, 0x54).rng();
    let n = 9;
    let (mut ev_err, mut rec_err): (f64, f64) = (0.0, 0.0);
    for t in 0..trials {
        let mut spectrum: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        if t == 0 {
            spectrum[1] = spectrum[0];
        }
        let q = householder_unitary(n, &mut rng);
        let d = CMatrix::from_fn(n, |i, j| Complex64::new(if i == j { spectrum[i] } else { 0.0 }, 0.0));
        let a = q.matmul(&d).matmul(&q.adjoint());
        let eig = hermitian_eigen(&a)?;
        spectrum.sort_by(f64::total_cmp);
        for (x, y) in eig.values.iter().zip(&spectrum) {
            ev_err = ev_err.max((x - y).abs());
        }
        let dv = CMatrix::from_fn(n, |i, j| Complex64::new(if i == j { eig.values[i] } else { 0.0 }, 0.0));
        let back = eig.vectors.matmul(&dv).matmul(&eig.vectors.adjoint());
        rec_err = rec_err.max(back.sub(&a).frobenius());
    }
    Ok((ev_err, rec_err))
}

/// The full suite. `quick` shortens the conservation run from 100 s to 10 s.
pub fn run_suite(quick: bool) -> Result<Vec<Check>> {
    let params = SystemParams::default();
    let mut out = Vec::new();
    let duration = if quick { 10.0 } else { 100.0 };

    let mut norm_check = None;
    out.push(timed(|| {
        let (de, dn) = energy_conservation(&params, duration)?;
        norm_check = Some(Check::below("norm drift per step", dn, 1e-10, format!("{duration} s undriven")));
        Ok(Check::below("energy conservation |dE|/eps", de, 1e-8, format!("xR and xC, {duration} s undriven")))
    })?);
    out.push(norm_check.expect("set above"));
    out.push(timed(|| Ok(Check::below("reversibility", reversibility(&params, 1.0)?, 1e-8, "xR, 1 s forward and back".into())))?);
    out.push(timed(|| {
        Ok(Check::below(
            "spinor vs coordinate EOM",
            representation_equivalence(&params, 10, 11)?,
            1e-6,
            "10 interior states over 1 tau_s".into(),
        ))
    })?);
    for dir in [Direction::X, Direction::Y, Direction::Z] {
        out.push(timed(|| {
            Ok(Check::below(
                &format!("lab vs rotating frame ({dir})"),
                frame_equivalence(&params, dir, 3.0, 5.0)?,
                1e-6,
                "D~ = 3 over 5 tau_s, (rho0, m), dt = 2.5 us".into(),
            ))
        })?);
    }
    out.push(timed(|| {
        let p = simplex_uniformity(100_000, 12);
        Ok(Check { name: "Haar simplex uniformity p-value".into(), passed: p > 1e-3, value: p, limit: 1e-3, detail: "chi-square, 100 cells, 1e5 samples".into(), seconds: 0.0 })
    })?);
    out.push(timed(|| {
        Ok(Check::below("Haar first moment", first_moment_error(100_000, 13), 0.01, "max |E[zz*] - 1/3|".into()))
    })?);
    for n in [256, 1024, 4096] {
        out.push(timed(|| {
            let d = haar_moment_distance(n, 14)?;
            let ratio = d * (n as f64).sqrt();
            Ok(Check {
                name: format!("Haar second moment N={n}"),
                passed: (1.0 / 3.0..=3.0).contains(&ratio),
                value: ratio,
                limit: 3.0,
                detail: format!("delta2 = {d:.4e}, delta2*sqrt(N) must lie in [1/3, 3]"),
                seconds: 0.0,
            })
        })?);
    }
    out.push(timed(|| {
        let mut rng = RngSeed::new(15, 0).rng();
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let s = sample_haar(&mut rng);
            worst = worst.max((trace_distance(&second_moment(&[s]), &haar_second_moment())? - 5.0 / 6.0).abs());
        }
        Ok(Check::below("pure state vs Haar = 5/6", worst, 1e-10, "10 random pure states".into()))
    })?);
    out.push(timed(|| {
        let (ev, rec) = eigensolver_planted(20, 16)?;
        Ok(Check::below("eigensolver planted spectra", ev.max(rec), 1e-10, format!("eigenvalue error {ev:.2e}, reconstruction {rec:.2e}")))
    })?);
    Ok(out)
}
