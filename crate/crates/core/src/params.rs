//! Physical parameters as they appear in configuration files (Hz and
//! dimensionless drive strength) and their angular-frequency form used by the
//! integrator.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::PhasePoint;

/// Static energies of the spin Hamiltonian, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Quadratic Zeeman shift `q/h`.
    pub q_over_h: f64,
    /// Spin interaction energy `ε_s/h`.
    pub eps_s_over_h: f64,
    /// Rabi frequency `Ω/2π`.
    pub omega_rabi: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { q_over_h: 45.0, eps_s_over_h: 45.0, omega_rabi: 22.5 }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_over_h.is_finite() && self.eps_s_over_h.is_finite() && self.omega_rabi.is_finite()) {
            return Err(Error::InvalidConfig("system parameters must be finite".into()));
        }
        if self.eps_s_over_h <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eps_s_over_h must be positive, got {}",
                self.eps_s_over_h
            )));
        }
        Ok(())
    }

    /// Spin interaction time `τ_s = h/ε_s` in seconds.
    pub fn tau_s(&self) -> f64 {
        1.0 / self.eps_s_over_h
    }

    /// `q/ħ` in rad/s.
    pub fn q_rate(&self) -> f64 {
        TAU * self.q_over_h
    }

    /// `ε_s/ħ` in rad/s.
    pub fn eps_rate(&self) -> f64 {
        TAU * self.eps_s_over_h
    }

    /// `Ω` in rad/s.
    pub fn rabi_rate(&self) -> f64 {
        TAU * self.omega_rabi
    }
}

/// Unit vector in spin space along which the drive couples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Direction([f64; 3]);

impl Direction {
    pub const X: Direction = Direction([1.0, 0.0, 0.0]);
    pub const Y: Direction = Direction([0.0, 1.0, 0.0]);
    pub const Z: Direction = Direction([0.0, 0.0, 1.0]);

    /// Normalizes `v`; fails for a zero or non-finite vector.
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidConfig(format!("drive direction {v:?} cannot be normalized")));
        }
        // leave unit vectors untouched so serialized directions read back bit-identically
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Direction(v));
        }
        Ok(Direction(v.map(|x| x / n)))
    }

    pub fn vector(&self) -> [f64; 3] {
        self.0
    }

    /// Name of a canonical axis, if this is one.
    pub fn axis_name(&self) -> Option<&'static str> {
        match self.0 {
            [1.0, 0.0, 0.0] => Some("x"),
            [0.0, 1.0, 0.0] => Some("y"),
            [0.0, 0.0, 1.0] => Some("z"),
            _ => None,
        }
    }
}

impl TryFrom<[f64; 3]> for Direction {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for [f64; 3] {
    fn from(d: Direction) -> Self {
        d.0
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.axis_name() {
            Some(a) => f.write_str(a),
            None => write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2]),
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    /// Accepts `x`, `y`, `z` or three comma-separated components.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(Direction::X),
            "y" | "Y" => Ok(Direction::Y),
            "z" | "Z" => Ok(Direction::Z),
            other => {
                let parts: Vec<f64> = other
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Parse(format!("bad drive direction '{s}': use x, y, z or ux,uy,uz")))?;
                let v: [f64; 3] = parts
                    .try_into()
                    .map_err(|_| Error::Parse(format!("drive direction '{s}' needs exactly three components")))?;
                Direction::new(v)
            }
        }
    }
}

/// Sinusoidal drive `ħD sin(ω_m t) d̂·f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSpec {
    /// `ħD/ε_s`.
    pub amplitude_hbar_d_over_eps: f64,
    /// `ω_m/2π` in Hz.
    pub freq_hz: f64,
    pub direction: Direction,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self { amplitude_hbar_d_over_eps: 0.0, freq_hz: 60.0, direction: Direction::Z }
    }
}

impl DriveSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn z(amplitude: f64, freq_hz: f64) -> Self {
        Self { amplitude_hbar_d_over_eps: amplitude, freq_hz, direction: Direction::Z }
    }

    pub fn along(amplitude: f64, freq_hz: f64, direction: Direction) -> Self {
        Self { amplitude_hbar_d_over_eps: amplitude, freq_hz, direction }
    }

    pub fn is_off(&self) -> bool {
        self.amplitude_hbar_d_over_eps == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.amplitude_hbar_d_over_eps;
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidConfig(format!("drive amplitude must be finite and >= 0, got {a}")));
        }
        if !self.freq_hz.is_finite() || (self.freq_hz <= 0.0 && a > 0.0) {
            return Err(Error::InvalidConfig(format!("drive frequency must be positive, got {}", self.freq_hz)));
        }
        Ok(())
    }

    /// Drive amplitude `D` in rad/s.
    pub fn amplitude_rate(&self, params: &SystemParams) -> f64 {
        self.amplitude_hbar_d_over_eps * params.eps_rate()
    }

    /// `ω_m` in rad/s.
    pub fn angular_freq(&self) -> f64 {
        TAU * self.freq_hz
    }

    /// Modulation index `D̃ = D/ω_m`.
    pub fn d_tilde(&self, params: &SystemParams) -> f64 {
        self.amplitude_hbar_d_over_eps * params.eps_s_over_h / self.freq_hz
    }
}

/// All rates of the Hamiltonian in rad/s, ready for the integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub q: f64,
    pub eps: f64,
    pub rabi: f64,
    /// `D` (0 when undriven).
    pub drive: f64,
    pub drive_freq: f64,
    pub dir: [f64; 3],
}

impl Hamiltonian {
    pub fn new(params: &SystemParams, drive: &DriveSpec) -> Self {
        Self {
            q: params.q_rate(),
            eps: params.eps_rate(),
            rabi: params.rabi_rate(),
            drive: drive.amplitude_rate(params),
            drive_freq: drive.angular_freq(),
            dir: drive.direction.vector(),
        }
    }

    pub fn undriven(params: &SystemParams) -> Self {
        Self::new(params, &DriveSpec::none())
    }

    #[inline]
    pub fn is_driven(&self) -> bool {
        self.drive != 0.0
    }

    /// Instantaneous drive strength `D sin(ω_m t)` in rad/s.
    #[inline]
    pub fn drive_at(&self, t: f64) -> f64 {
        self.drive * (self.drive_freq * t).sin()
    }
}

/// Named initial conditions.
pub mod presets {
    use super::*;

    /// Regular reference point `x_R = (0.51, 0.25, 0.85π, 0.14π)`.
    pub fn x_r() -> PhasePoint {
        PhasePoint::new(0.51, 0.25, 0.85 * PI, 0.14 * PI)
    }

    /// Chaotic reference point `x_C = (0.70, 0.28, 0, 0)`.
    pub fn x_c() -> PhasePoint {
        PhasePoint::new(0.70, 0.28, 0.0, 0.0)
    }

    pub fn by_name(name: &str) -> Option<crate::spin::SpinorState> {
        match name {
            "xR" | "xr" | "x_R" => Some(x_r().to_spinor()),
            "xC" | "xc" | "x_C" => Some(x_c().to_spinor()),
            "polar" => Some(crate::spin::SpinorState::polar()),
            _ => None,
        }
    }
}
