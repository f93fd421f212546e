//! Closed-form edge spectra and velocities of the zigzag and armchair edges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SQRT3;

/// Inputs shared by the edge formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeFormulaInput {
    pub qx: f64,
    pub j: f64,
    pub h_z: f64,
    pub h_b: f64,
    /// (κ_x, κ_y, κ_z)
    pub kappa: [f64; 3],
}

impl EdgeFormulaInput {
    pub fn delta(&self) -> f64 {
        bulk_gap(self.kappa)
    }
}

/// `2√3 |κx + κy + κz|`.
pub fn bulk_gap(kappa: [f64; 3]) -> f64 {
    2.0 * SQRT3 * kappa.iter().sum::<f64>().abs()
}

/// Split pair `±2 h_z √(1 − 4cos²(qx/2))` on the two-mode interval `[2π/3, 4π/3]`.
pub fn zigzag_two_mode_energy(qx: f64, h_z: f64) -> Result<(f64, f64)> {
    let q = qx.rem_euclid(2.0 * PI);
    let tol = 1e-12;
    if q < 2.0 * PI / 3.0 - tol || q > 4.0 * PI / 3.0 + tol {
        return Err(Error::Domain(format!(
            "qx = {qx} is outside the two-mode interval [2π/3, 4π/3]"
        )));
    }
    let e = 2.0 * h_z.abs() * (1.0 - 4.0 * (q / 2.0).cos().powi(2)).max(0.0).sqrt();
    Ok((e, -e))
}

fn check_single_mode_window(qx: f64, kappa: [f64; 3], j: f64) -> Result<()> {
    let node = 2.0 * PI / 3.0;
    let window = 3.0 * bulk_gap(kappa) / j.abs();
    if qx.abs() >= node - window {
        return Err(Error::Domain(format!(
            "qx = {qx:.4} lies within 3Δ/J = {window:.4} of the node at 2π/3 (or beyond it); exclude this window"
        )));
    }
    Ok(())
}

/// Single-mode zigzag branch under a uniform boundary field, for anisotropic κ:
/// `−(h²/J²)(κz sin q + ½(κx+κy) tan(q/2)) / (cos²(q/2) − 1/4 + h²/4J²)`.
pub fn zigzag_single_mode_energy(qx: f64, h_z: f64, kappa: [f64; 3], j: f64) -> Result<f64> {
    check_single_mode_window(qx, kappa, j)?;
    let num = kappa[2] * qx.sin() + 0.5 * (kappa[0] + kappa[1]) * (qx / 2.0).tan();
    let den = (qx / 2.0).cos().powi(2) - 0.25 + h_z * h_z / (4.0 * j * j);
    Ok(-(h_z * h_z / (j * j)) * num / den)
}

/// Isotropic form `−(h²κ/J²)(sin q + tan(q/2)) / (cos²(q/2) − 1/4 + h²/4J²)`.
pub fn zigzag_single_mode_energy_isotropic(qx: f64, h_z: f64, kappa: f64, j: f64) -> Result<f64> {
    check_single_mode_window(qx, [kappa; 3], j)?;
    let num = qx.sin() + (qx / 2.0).tan();
    let den = (qx / 2.0).cos().powi(2) - 0.25 + h_z * h_z / (4.0 * j * j);
    Ok(-(h_z * h_z * kappa / (j * j)) * num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformFieldVelocity {
    /// `−h²κ/(2J²)`
    pub closed_form: f64,
    /// dε/dq of the single-mode branch at q = 0.
    pub branch_slope: f64,
}

pub fn zigzag_vgr_uniform_field(h_z: f64, kappa: [f64; 3], j: f64) -> UniformFieldVelocity {
    let iso = kappa.iter().sum::<f64>() / 3.0;
    let h2 = h_z * h_z / (j * j);
    UniformFieldVelocity {
        closed_form: -h2 * iso / 2.0,
        branch_slope: -h2 * (kappa[2] + 0.25 * (kappa[0] + kappa[1])) / (0.75 + h2 / 4.0),
    }
}

/// Zero-boundary-field zigzag branch `−4(κx+κy+κz) sin qx` (`−12κ sin qx` isotropic).
pub fn zigzag_zero_field_energy(qx: f64, kappa: [f64; 3]) -> f64 {
    -4.0 * kappa.iter().sum::<f64>() * qx.sin()
}

/// dε/dqx of [`zigzag_zero_field_energy`].
pub fn zigzag_zero_field_slope(qx: f64, kappa: [f64; 3]) -> f64 {
    -4.0 * kappa.iter().sum::<f64>() * qx.cos()
}

/// Speed of the zero-boundary-field zigzag mode, `4|κx+κy+κz|`.
pub fn zigzag_zero_field_speed(kappa: [f64; 3]) -> f64 {
    4.0 * kappa.iter().sum::<f64>().abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmchairProfile {
    /// Amplitudes on the two sublattices (even, odd) at depth y.
    pub c: [f64; 2],
    /// Amplitude on the free b_x and b_y modes of the outermost row.
    pub b: [f64; 2],
}

/// Armchair zero mode at depth `y` (rows at y = 1/2, 1, 3/2, ...).
pub fn armchair_mode_profile(y: f64, delta: f64, j: f64, h_b: f64) -> ArmchairProfile {
    let env = (-delta.abs() * y / (SQRT3 * j)).exp();
    if h_b == 0.0 {
        let s = (4.0 * PI * y / 3.0).sin() * env;
        ArmchairProfile {
            c: [s, -s],
            b: [0.0; 2],
        }
    } else {
        let s = -(2.0 * h_b / (SQRT3 * j)) * ((4.0 * PI * y - 2.0 * PI) / 3.0).sin() * env;
        ArmchairProfile {
            c: [s, -s],
            b: [1.0, 1.0],
        }
    }
}

/// `−√3 J · 2h_b² / (2h_b² + √3|Δ|J)`.
pub fn armchair_vgr(h_b: f64, delta: f64, j: f64) -> f64 {
    let h2 = 2.0 * h_b * h_b;
    if h2 == 0.0 {
        return 0.0;
    }
    -SQRT3 * j * h2 / (h2 + SQRT3 * delta.abs() * j)
}

/// Decay length `√3 J / |Δ|` of the armchair zero mode.
pub fn armchair_decay_length(delta: f64, j: f64) -> f64 {
    SQRT3 * j / delta.abs()
}
