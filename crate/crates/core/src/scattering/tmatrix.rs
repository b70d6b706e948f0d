//! On-shell T-matrix extraction: evaluate the regularized Born kernel at
//! `alpha = v^2/2`, `|u| = |v|` for a decreasing eta ladder and extrapolate
//! linearly to `eta -> 0+`.

use super::shell::ShellContext;
use crate::geom::VecD;
use crate::potential::PotentialSpec;
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Decreasing eta sequence with linear extrapolation on the last points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaLadder(pub Vec<f64>);

impl Default for EtaLadder {
    fn default() -> Self {
        // Two extra rungs beyond the coarse ladder keep the linear
        // extrapolation error well inside the optical-theorem closure
        // tolerance.
        EtaLadder(vec![0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625])
    }
}

impl EtaLadder {
    pub fn validate(&self) -> Result<()> {
        if self.0.len() < 3 {
            return Err(Error::invalid("eta ladder needs at least 3 rungs"));
        }
        if !self.0.windows(2).all(|w| w[1] < w[0])
            || self.0.iter().any(|&e| !(e > 0.0 && e <= 1.0))
        {
            return Err(Error::invalid("eta ladder must decrease within (0, 1]"));
        }
        Ok(())
    }

    pub fn smallest(&self) -> f64 {
        *self.0.last().unwrap()
    }
}

/// Extrapolated on-shell value with its ladder residual.
#[derive(Debug, Clone, Copy)]
pub struct TMatrixPoint {
    pub value: C64,
    /// Change of the linear extrapolation when the fit window moves one
    /// rung: an a-posteriori error estimate.
    pub residual: f64,
    pub terms_kept: usize,
}

fn linear_extrapolate(e1: f64, v1: C64, e2: f64, v2: C64) -> C64 {
    v2 + (v2 - v1) * (e2 / (e1 - e2))
}

/// Extrapolate an eta ladder of kernel values to `eta -> 0+`.
/// A growing last step of the moving-window extrapolations is reported as
/// an error suggesting a finer ladder.
pub fn extrapolate_ladder(etas: &[f64], values: &[C64]) -> Result<(C64, f64)> {
    let n = etas.len();
    let ex: Vec<C64> = (1..n)
        .map(|i| linear_extrapolate(etas[i - 1], values[i - 1], etas[i], values[i]))
        .collect();
    let steps: Vec<f64> = ex.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    if steps.len() >= 2 {
        let last = steps[steps.len() - 1];
        let prev = steps[steps.len() - 2];
        if last > prev * 1.5 && last > 1e-12 {
            return Err(Error::EtaExtrapolation { residuals: steps });
        }
    }
    let residual = steps.last().copied().unwrap_or(f64::INFINITY);
    Ok((*ex.last().unwrap(), residual))
}

/// On-shell T-matrix at a given speed and scattering angle.
pub fn t_matrix_on_shell(
    spec: &PotentialSpec,
    dim: usize,
    speed: f64,
    cos_theta: f64,
    ladder: &EtaLadder,
    k_max: usize,
) -> Result<TMatrixPoint> {
    ShellContext::new(spec, dim, speed, ladder, k_max)?.t_at(cos_theta)
}

pub fn axis_vector(dim: usize, mag: f64) -> VecD {
    match dim {
        3 => VecD::new(3, [0.0, 0.0, mag]),
        2 => VecD::new(2, [mag, 0.0, 0.0]),
        _ => panic!("d = 2 or 3"),
    }
}

pub fn tilted_vector(dim: usize, mag: f64, cos_theta: f64) -> VecD {
    let st = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    match dim {
        3 => VecD::new(3, [mag * st, 0.0, mag * cos_theta]),
        2 => VecD::new(2, [mag * cos_theta, mag * st, 0.0]),
        _ => panic!("d = 2 or 3"),
    }
}

/// Table of on-shell scattering amplitudes over (energy, angle).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TMatrixTable {
    pub dim: usize,
    /// E = v^2/2, ascending.
    pub energies: Vec<f64>,
    /// cos(theta) grid in 3D; theta in [0, pi] in 2D.  Ascending.
    pub angles: Vec<f64>,
    /// Row-major (energy, angle).
    pub values: Vec<C64>,
    pub eta_ladder: Vec<f64>,
    /// Extrapolation residual per (energy, angle).
    pub residuals: Vec<f64>,
}

impl TMatrixTable {
    pub fn value_at(&self, ie: usize, ia: usize) -> C64 {
        self.values[ie * self.angles.len() + ia]
    }
}

/// Build the on-shell table for a list of speeds and an angle grid; one
/// Born engine per energy shared across the eta ladder and all angles.
pub fn build_tables(
    spec: &PotentialSpec,
    dim: usize,
    speeds: &[f64],
    angles: &[f64],
    ladder: &EtaLadder,
    k_max: usize,
) -> Result<TMatrixTable> {
    ladder.validate()?;
    let mut values = vec![C64::new(0.0, 0.0); speeds.len() * angles.len()];
    let mut residuals = vec![0.0f64; speeds.len() * angles.len()];
    for (ie, &speed) in speeds.iter().enumerate() {
        let ctx = ShellContext::new(spec, dim, speed, ladder, k_max)?;
        for (ia, &ang) in angles.iter().enumerate() {
            let cos_theta = match dim {
                3 => ang,
                2 => ang.cos(),
                _ => unreachable!(),
            };
            let point = ctx.t_at(cos_theta)?;
            values[ie * angles.len() + ia] = point.value;
            residuals[ie * angles.len() + ia] = point.residual;
        }
    }
    Ok(TMatrixTable {
        dim,
        energies: speeds.iter().map(|&v| v * v / 2.0).collect(),
        angles: angles.to_vec(),
        values,
        eta_ladder: ladder.0.clone(),
        residuals,
    })
}
