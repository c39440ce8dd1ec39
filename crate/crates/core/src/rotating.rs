//! Frame co-rotating with the drive.
//!
//! With `G = d̂·F` and `U(t) = exp[−i D̃ cos(ω_m t) G]`, the state
//! `ζ_I = U ζ` obeys `i∂ζ_I/∂t = M_I ζ_I` where the drive is removed and the
//! static linear terms are rotated: `M_I = U(ΩF_x + qF_z²)U† + ε_s f_I·F`.
//! For a z drive this is `Ω(cos a F_x + sin a F_y) + qF_z² + ε_s f_I·F` with
//! `a = D̃ cos(ω_m t)`, whose trig factors expand in Bessel harmonics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_sequence, j1_zeros, MAX_ORDER};
use crate::error::{Error, Result};
use crate::params::{DriveSpec, Hamiltonian, SystemParams};
use crate::spin::{mat_adjoint, mat_mul, mat_scale_add, mat_vec, ops, Mat3, SpinorState};

pub const DEFAULT_HARMONICS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatingFrameSpec {
    pub d_tilde: f64,
    /// Number of terms kept in each harmonic sum.
    pub n_harmonics: usize,
}

impl RotatingFrameSpec {
    pub fn new(d_tilde: f64) -> Self {
        Self { d_tilde, n_harmonics: DEFAULT_HARMONICS }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_tilde >= 0.0) {
            return Err(Error::InvalidConfig(format!("D~ must be >= 0, got {}", self.d_tilde)));
        }
        if self.n_harmonics == 0 || 2 * self.n_harmonics > MAX_ORDER {
            return Err(Error::InvalidConfig(format!("harmonic cutoff must be in 1..=50, got {}", self.n_harmonics)));
        }
        Ok(())
    }
}

/// `Ω J₀(D̃)` in the units of `omega_rabi`.
pub fn effective_rabi(omega_rabi: f64, spec: &RotatingFrameSpec) -> Result<f64> {
    Ok(omega_rabi * crate::bessel::bessel_j(0, spec.d_tilde)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub index: usize,
    pub j1_root: f64,
    pub hbar_d_over_eps: f64,
}

/// Drive amplitudes where `J₁(D̃)` vanishes, for modulation frequency
/// `freq_hz`.
pub fn predict_dips(params: &SystemParams, freq_hz: f64, count: usize) -> Result<Vec<Dip>> {
    params.validate()?;
    let scale = freq_hz / params.eps_s_over_h;
    Ok(j1_zeros(count)?
        .into_iter()
        .enumerate()
        .map(|(i, j)| Dip { index: i + 1, j1_root: j, hbar_d_over_eps: j * scale })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldForm {
    /// Exact trigonometric factors.
    Closed,
    /// Truncated Bessel series (z drive only).
    Series,
}

/// Rotating-frame description of a lab Hamiltonian.
#[derive(Debug, Clone)]
pub struct RotatingFrame {
    pub ham: Hamiltonian,
    pub spec: RotatingFrameSpec,
    jn: Vec<f64>,
}

impl RotatingFrame {
    pub fn new(params: &SystemParams, drive: &DriveSpec, n_harmonics: usize) -> Result<Self> {
        params.validate()?;
        drive.validate()?;
        let spec = RotatingFrameSpec { d_tilde: drive.d_tilde(params), n_harmonics };
        spec.validate()?;
        let jn = bessel_sequence(MAX_ORDER, spec.d_tilde)?;
        Ok(Self { ham: Hamiltonian::new(params, drive), spec, jn })
    }

    fn is_z(&self) -> bool {
        self.ham.dir == [0.0, 0.0, 1.0]
    }

    #[inline]
    fn angle(&self, t: f64) -> f64 {
        self.spec.d_tilde * (self.ham.drive_freq * t).cos()
    }

    /// `U(t)`, mapping lab states into the frame.
    pub fn frame_unitary(&self, t: f64) -> Mat3 {
        ops::rotation(self.ham.dir, self.angle(t))
    }

    /// `J₀ + 2Σ_{n=1}^{N_h} (−1)ⁿ J_{2n} cos(2nω t)`.
    pub fn cos_series(&self, t: f64) -> f64 {
        let wt = self.ham.drive_freq * t;
        let mut s = self.jn[0];
        for n in 1..=self.spec.n_harmonics {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            s += 2.0 * sign * self.jn[2 * n] * (2.0 * n as f64 * wt).cos();
        }
        s
    }

    /// `−2Σ_{n=1}^{N_h} (−1)ⁿ J_{2n−1} cos((2n−1)ω t)`.
    pub fn sin_series(&self, t: f64) -> f64 {
        let wt = self.ham.drive_freq * t;
        let mut s = 0.0;
        for n in 1..=self.spec.n_harmonics {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            s -= 2.0 * sign * self.jn[2 * n - 1] * ((2 * n - 1) as f64 * wt).cos();
        }
        s
    }

    /// `2Ω Σ_{k>2N_h} |J_k(D̃)|`, bounding the series error of the field.
    pub fn truncation_bound(&self) -> f64 {
        2.0 * self.ham.rabi * self.jn[2 * self.spec.n_harmonics + 1..].iter().map(|j| j.abs()).sum::<f64>()
    }

    fn linear_part(&self, t: f64, form: FieldForm) -> Result<Mat3> {
        if !self.is_z() {
            if form == FieldForm::Series {
                return Err(Error::InvalidConfig("the harmonic series is defined for z drives only".into()));
            }
            let u = self.frame_unitary(t);
            let mut m = ops::fx();
            for row in m.iter_mut() {
                for z in row.iter_mut() {
                    *z *= self.ham.rabi;
                }
            }
            mat_scale_add(&mut m, self.ham.q, &ops::fz2());
            return Ok(mat_mul(&mat_mul(&u, &m), &mat_adjoint(&u)));
        }
        let (c, s) = match form {
            FieldForm::Closed => {
                let a = self.angle(t);
                (a.cos(), a.sin())
            }
            FieldForm::Series => (self.cos_series(t), self.sin_series(t)),
        };
        let mut m = ops::along([self.ham.rabi * c, self.ham.rabi * s, 0.0]);
        mat_scale_add(&mut m, self.ham.q, &ops::fz2());
        Ok(m)
    }

    /// Effective field `M_I` acting on a rotating-frame state.
    pub fn field(&self, state: &SpinorState, t: f64, form: FieldForm) -> Result<Mat3> {
        let mut m = self.linear_part(t, form)?;
        let f = state.spin_vector();
        mat_scale_add(&mut m, self.ham.eps, &ops::along(f));
        Ok(m)
    }

    /// Difference between the series and closed fields at `t`, failing when
    /// it exceeds the truncation bound.
    pub fn check_truncation(&self, t: f64) -> Result<f64> {
        let a = self.linear_part(t, FieldForm::Closed)?;
        let b = self.linear_part(t, FieldForm::Series)?;
        let dev = a
            .iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let bound = self.truncation_bound();
        // rounding of the summed harmonics sets a floor under the bound
        if dev > bound + 1e-13 * self.ham.rabi.max(1.0) {
            return Err(Error::TruncationExceeded { deviation: dev, bound });
        }
        Ok(dev)
    }

    /// Lab state → frame state at time `t`.
    pub fn to_frame(&self, lab: &SpinorState, t: f64) -> SpinorState {
        SpinorState::from_normalized(mat_vec(&self.frame_unitary(t), &lab.0))
    }

    pub fn to_lab(&self, frame: &SpinorState, t: f64) -> SpinorState {
        SpinorState::from_normalized(mat_vec(&mat_adjoint(&self.frame_unitary(t)), &frame.0))
    }

    /// Integrates in the frame with RK4 and returns lab-frame states every
    /// `sample_steps` steps (starting with the initial state).
    pub fn evolve_lab_via_frame(
        &self,
        initial_lab: &SpinorState,
        dt: f64,
        n_steps: u64,
        sample_steps: u64,
        form: FieldForm,
    ) -> Result<Vec<SpinorState>> {
        let mut z = self.to_frame(initial_lab, 0.0);
        let mut out = vec![*initial_lab];
        for k in 0..n_steps {
            let t = k as f64 * dt;
            z = rk4(|s, tt| self.field(s, tt, form), &z, t, dt)?;
            z.renormalize();
            if (k + 1) % sample_steps == 0 {
                out.push(self.to_lab(&z, t + dt));
            }
        }
        Ok(out)
    }
}

fn rk4(field: impl Fn(&SpinorState, f64) -> Result<Mat3>, z: &SpinorState, t: f64, dt: f64) -> Result<SpinorState> {
    let mi = Complex64::new(0.0, -1.0);
    let deriv = |s: &SpinorState, tt: f64| -> Result<[Complex64; 3]> {
        Ok(mat_vec(&field(s, tt)?, &s.0).map(|x| x * mi))
    };
    let shift = |k: &[Complex64; 3], h: f64| SpinorState::from_normalized(std::array::from_fn(|i| z.0[i] + k[i] * h));
    let k1 = deriv(z, t)?;
    let k2 = deriv(&shift(&k1, 0.5 * dt), t + 0.5 * dt)?;
    let k3 = deriv(&shift(&k2, 0.5 * dt), t + 0.5 * dt)?;
    let k4 = deriv(&shift(&k3, dt), t + dt)?;
    Ok(SpinorState::from_normalized(std::array::from_fn(|i| {
        z.0[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0)
    })))
}
