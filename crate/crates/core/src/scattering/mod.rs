//! Obstacle scattering: the Born-series operator with resolvent
//! regularization, on-shell T-matrix extraction by eta extrapolation, and
//! quantum differential/total cross sections validated through the optical
//! theorem and an independent partial-wave oracle.

mod born;
mod cross_section;
mod phase_shift;
mod shell;
mod tmatrix;

pub use born::{apply_born_operator, born_series, BornEngine, BornOptions, BornSeries};
pub use cross_section::{
    diff_cross_section, optical_theorem_residual, total_cross_section, CrossSectionTable,
    OpticalResidual,
};
pub use shell::ShellContext;
pub use phase_shift::{
    born_phase_shift, phase_shift_oracle, pw_t_matrix, PhaseShifts,
};
pub use tmatrix::{
    axis_vector, build_tables, extrapolate_ladder, t_matrix_on_shell, tilted_vector, EtaLadder,
    TMatrixPoint, TMatrixTable,
};

use serde::{Deserialize, Serialize};

/// An off-shell evaluation point of the regularized Born kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffShellPoint {
    pub alpha: f64,
    pub eta: f64,
    pub p: crate::geom::VecD,
    pub r: crate::geom::VecD,
}

impl OffShellPoint {
    pub fn new(alpha: f64, eta: f64, p: crate::geom::VecD, r: crate::geom::VecD) -> crate::Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(crate::Error::invalid("eta must lie in (0, 1]"));
        }
        Ok(OffShellPoint { alpha, eta, p, r })
    }
}
