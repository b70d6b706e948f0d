//! Quantum differential and total cross sections from the on-shell
//! T-matrix, with the optical-theorem closure as the normalization anchor.
//!
//! Absorbing the on-shell delta of `4 pi delta(u^2 - v^2) |T|^2` under the
//! rescaled momentum measure leaves, per unit standard solid angle,
//! `sigma_shell = shell_factor(d, |v|) |T|^2`; the optical theorem then
//! reads exactly `Im T(v, v) = -sigma_tot / 2`.

use super::shell::ShellContext;
use super::tmatrix::EtaLadder;
use crate::conventions::shell_factor;
use crate::potential::PotentialSpec;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Differential cross section per unit solid angle at fixed speed.
pub fn diff_cross_section(
    spec: &PotentialSpec,
    dim: usize,
    speed: f64,
    cos_theta: f64,
    ladder: &EtaLadder,
    k_max: usize,
) -> Result<f64> {
    ShellContext::new(spec, dim, speed, ladder, k_max)?.diff_at(cos_theta)
}

/// Total cross section: solid-angle quadrature of the differential cross
/// section, with an n-vs-2n refinement check at 1e-4 relative.
pub fn total_cross_section(
    spec: &PotentialSpec,
    dim: usize,
    speed: f64,
    ladder: &EtaLadder,
    k_max: usize,
) -> Result<f64> {
    ShellContext::new(spec, dim, speed, ladder, k_max)?.total()
}

/// Optical-theorem closure diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct OpticalResidual {
    pub value: f64,
    /// True when sigma_tot sat below the numeric floor and the residual is
    /// reported in absolute terms.
    pub absolute: bool,
    pub sigma_tot: f64,
    pub im_forward: f64,
}

/// `|2 Im T(v,v) + sigma_tot| / sigma_tot` (absolute if sigma_tot ~ 0).
pub fn optical_theorem_residual(
    spec: &PotentialSpec,
    dim: usize,
    speed: f64,
    ladder: &EtaLadder,
    k_max: usize,
) -> Result<OpticalResidual> {
    let ctx = ShellContext::new(spec, dim, speed, ladder, k_max)?;
    let sigma = ctx.total()?;
    let fwd = ctx.t_at(1.0)?;
    let defect = 2.0 * fwd.value.im + sigma;
    if sigma < 1e-12 {
        return Ok(OpticalResidual {
            value: defect.abs(),
            absolute: true,
            sigma_tot: sigma,
            im_forward: fwd.value.im,
        });
    }
    Ok(OpticalResidual {
        value: defect.abs() / sigma,
        absolute: false,
        sigma_tot: sigma,
        im_forward: fwd.value.im,
    })
}

/// Differential and total cross sections tabulated over speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossSectionTable {
    pub dim: usize,
    pub speeds: Vec<f64>,
    /// cos(theta) in 3D, theta in 2D; ascending.
    pub angles: Vec<f64>,
    /// sigma_shell per unit solid angle, row-major (speed, angle).
    pub differential: Vec<f64>,
    pub total: Vec<f64>,
    /// Relative quadrature error bound recorded for `total`.
    pub quadrature_error: Vec<f64>,
}

impl CrossSectionTable {
    /// Assemble from a T-matrix table: shell factor times |T|^2, totals by
    /// trapezoid-free Gauss reintegration over the table's angle grid.
    pub fn from_tmatrix(tm: &super::TMatrixTable) -> Result<Self> {
        let na = tm.angles.len();
        if na < 4 {
            return Err(Error::invalid("angle grid too small"));
        }
        let mut differential = vec![0.0; tm.energies.len() * na];
        let mut total = Vec::with_capacity(tm.energies.len());
        let mut quadrature_error = Vec::with_capacity(tm.energies.len());
        let speeds: Vec<f64> = tm.energies.iter().map(|&e| (2.0 * e).sqrt()).collect();
        for (ie, &speed) in speeds.iter().enumerate() {
            let sf = shell_factor(tm.dim, speed);
            for ia in 0..na {
                differential[ie * na + ia] = sf * tm.value_at(ie, ia).norm_sqr();
            }
            // integrate the differential over the sphere using the grid
            let row = &differential[ie * na..(ie + 1) * na];
            let (tot, err) = integrate_angles(tm.dim, &tm.angles, row);
            total.push(tot);
            quadrature_error.push(err);
        }
        Ok(CrossSectionTable {
            dim: tm.dim,
            speeds,
            angles: tm.angles.clone(),
            differential,
            total,
            quadrature_error,
        })
    }

    pub fn diff_at(&self, is: usize, ia: usize) -> f64 {
        self.differential[is * self.angles.len() + ia]
    }

    /// Index of the tabulated speed matching `v`, within tolerance.
    pub fn speed_index(&self, v: f64) -> Result<usize> {
        self.speeds
            .iter()
            .position(|&s| (s - v).abs() <= 1e-9 * v.max(1.0))
            .ok_or_else(|| Error::invalid(format!("speed {v} not tabulated")))
    }
}

/// Trapezoidal integration of a tabulated angular density over the sphere:
/// 3D over cos(theta) in [-1,1] times 2 pi, 2D over theta in [0, pi] times
/// 2.  Returns (value, crude error estimate from grid halving).
fn integrate_angles(dim: usize, angles: &[f64], row: &[f64]) -> (f64, f64) {
    let trapz = |xs: &[f64], ys: &[f64]| -> f64 {
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    };
    let full = trapz(angles, row);
    // halved grid for the error estimate
    let xs2: Vec<f64> = angles.iter().step_by(2).copied().collect();
    let ys2: Vec<f64> = row.iter().step_by(2).copied().collect();
    let half = trapz(&xs2, &ys2);
    let err = (full - half).abs() / 3.0;
    let factor = match dim {
        3 => 2.0 * std::f64::consts::PI,
        2 => 2.0,
        _ => panic!(),
    };
    (full * factor, err * factor / full.abs().max(1e-300))
}
