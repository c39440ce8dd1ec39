//! Equations of motion in the `(ρ₀, m, θ_s, θ_m)` coordinates.
//!
//! The coordinates are singular on the boundary of the population triangle,
//! so this path is only used to cross-check the spinor integrator.

use crate::error::{Error, Result};
use crate::params::Hamiltonian;
use crate::spin::PhasePoint;

/// Required distance from the coordinate boundary.
pub const INTERIOR_MARGIN: f64 = 1e-6;

/// Distance of a point from the singular boundary (negative when outside).
pub fn boundary_margin(p: &PhasePoint) -> f64 {
    p.rho0.min(1.0 - p.rho0).min(1.0 - p.rho0 - p.m.abs())
}

fn check_interior(p: &PhasePoint) -> Result<()> {
    let margin = boundary_margin(p);
    if !(margin > INTERIOR_MARGIN) {
        return Err(Error::BoundaryProximity { margin });
    }
    Ok(())
}

struct Terms {
    s0: f64,
    a: f64,
    b: f64,
    root: f64,
    cp: f64,
    sp: f64,
    cm: f64,
    sm: f64,
    cs: f64,
    ss: f64,
}

impl Terms {
    fn new(p: &PhasePoint) -> Self {
        let (sp, cp) = p.theta_plus().sin_cos();
        let (sm, cm) = p.theta_minus().sin_cos();
        let (ss, cs) = p.theta_s.sin_cos();
        let u = 1.0 - p.rho0;
        Self {
            s0: p.rho0.sqrt(),
            a: (u + p.m).sqrt(),
            b: (u - p.m).sqrt(),
            root: (u * u - p.m * p.m).sqrt(),
            cp,
            sp,
            cm,
            sm,
            cs,
            ss,
        }
    }
}

/// Coefficients of `f_x, f_y, f_z` in `H/ħ` at time `t`.
fn linear_coeffs(ham: &Hamiltonian, t: f64) -> [f64; 3] {
    let d = if ham.is_driven() { ham.drive_at(t) } else { 0.0 };
    [ham.rabi + d * ham.dir[0], d * ham.dir[1], d * ham.dir[2]]
}

/// `H/ħ` in rad/s, including the drive.
pub fn phase_hamiltonian(p: &PhasePoint, ham: &Hamiltonian, t: f64) -> f64 {
    let w = Terms::new(p);
    let [cx, cy, cz] = linear_coeffs(ham, t);
    let fx = w.s0 * (w.a * w.cp + w.b * w.cm);
    let fy = w.s0 * (-w.a * w.sp + w.b * w.sm);
    cx * fx
        + cy * fy
        + cz * p.m
        + ham.q * (1.0 - p.rho0)
        + ham.eps * (p.rho0 * (1.0 - p.rho0) + p.rho0 * w.root * w.cs + 0.5 * p.m * p.m)
}

/// Analytic gradient `(∂H/∂ρ₀, ∂H/∂m, ∂H/∂θ_s, ∂H/∂θ_m)/ħ`.
pub fn phase_gradient(p: &PhasePoint, ham: &Hamiltonian, t: f64) -> Result<[f64; 4]> {
    check_interior(p)?;
    let w = Terms::new(p);
    let [cx, cy, cz] = linear_coeffs(ham, t);
    let (s0, a, b) = (w.s0, w.a, w.b);

    let fx_r = (a * w.cp + b * w.cm) / (2.0 * s0) - s0 * (w.cp / (2.0 * a) + w.cm / (2.0 * b));
    let fx_m = s0 * (w.cp / (2.0 * a) - w.cm / (2.0 * b));
    let fx_p = -s0 * a * w.sp;
    let fx_n = -s0 * b * w.sm;

    let fy_r = (-a * w.sp + b * w.sm) / (2.0 * s0) + s0 * (w.sp / (2.0 * a) - w.sm / (2.0 * b));
    let fy_m = -s0 * (w.sp / (2.0 * a) + w.sm / (2.0 * b));
    let fy_p = -s0 * a * w.cp;
    let fy_n = s0 * b * w.cm;

    let u = 1.0 - p.rho0;
    let root_r = -u / w.root;
    let root_m = -p.m / w.root;

    let h_r = cx * fx_r + cy * fy_r - ham.q + ham.eps * ((1.0 - 2.0 * p.rho0) + w.root * w.cs + p.rho0 * w.cs * root_r);
    let h_m = cx * fx_m + cy * fy_m + cz + ham.eps * (p.rho0 * w.cs * root_m + p.m);
    // θ± = (θ_s ± θ_m)/2
    let h_p = cx * fx_p + cy * fy_p;
    let h_n = cx * fx_n + cy * fy_n;
    let h_s = 0.5 * (h_p + h_n) - ham.eps * p.rho0 * w.root * w.ss;
    let h_tm = 0.5 * (h_p - h_n);
    Ok([h_r, h_m, h_s, h_tm])
}

/// Time derivatives `(ρ̇₀, ṁ, θ̇_s, θ̇_m)`.
pub fn phase_eom_rhs(p: &PhasePoint, ham: &Hamiltonian, t: f64) -> Result<[f64; 4]> {
    let [h_r, h_m, h_s, h_tm] = phase_gradient(p, ham, t)?;
    Ok([-2.0 * h_s, 2.0 * h_tm, 2.0 * h_r, -2.0 * h_m])
}

fn shifted(p: &PhasePoint, k: &[f64; 4], h: f64) -> PhasePoint {
    PhasePoint::new(p.rho0 + h * k[0], p.m + h * k[1], p.theta_s + h * k[2], p.theta_m + h * k[3])
}

/// Integrates the coordinate equations with classical RK4 for `n_steps`
/// steps of `dt` starting at `t0`.
pub fn evolve_phase(start: PhasePoint, ham: &Hamiltonian, t0: f64, dt: f64, n_steps: u64) -> Result<PhasePoint> {
    let mut p = start;
    for i in 0..n_steps {
        let t = t0 + i as f64 * dt;
        let h = 0.5 * dt;
        let k1 = phase_eom_rhs(&p, ham, t)?;
        let k2 = phase_eom_rhs(&shifted(&p, &k1, h), ham, t + h)?;
        let k3 = phase_eom_rhs(&shifted(&p, &k2, h), ham, t + h)?;
        let k4 = phase_eom_rhs(&shifted(&p, &k3, dt), ham, t + dt)?;
        let inc: [f64; 4] = std::array::from_fn(|j| (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]) / 6.0);
        p = shifted(&p, &inc, dt);
    }
    Ok(p)
}
