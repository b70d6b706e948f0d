//! Fourier and measure conventions, fixed once for the whole crate.
//!
//! Momentum-space scattering objects (the transformed potential, the Born
//! kernel `B`, the T-matrix) use a rescaled Lebesgue measure
//! `dx = d*x / (2 pi)^{d/2}`, so the Fourier transform and its inverse are
//!
//! ```text
//!   f^(p) = (2 pi)^{-d/2} Int d*x f(x) e^{-i p x}
//!   f(x)  = (2 pi)^{-d/2} Int d*p f^(p) e^{+i p x}
//! ```
//!
//! which is the ordinary unitary transform.  Units are hbar = 1, mass = 1,
//! so kinetic energy is `p^2 / 2`.
//!
//! Phase-space densities, wave-function norms and all grid quadratures use
//! the plain Lebesgue measure; every `(2 pi)` power is concentrated in the
//! constants below.
//!
//! Derived constants, written out once so that every consumer agrees:
//!
//! * Restricting `4 pi delta(u^2 - v^2) |T|^2` to the energy shell under the
//!   rescaled momentum measure leaves a differential cross section *per unit
//!   standard solid angle* of `c_d(|v|) |T|^2` with `c_3 = |v| (2 pi)^{-1/2}`
//!   and `c_2 = 1`.  With these factors the optical theorem reads exactly
//!   `Im T(v,v) = -sigma_tot / 2` in both dimensions, and the Boltzmann jump
//!   rate is `rho_0 * sigma_tot`.
//! * The partial-wave scattering amplitude `f(theta)` of standard potential
//!   theory relates to the T-matrix above by `T(u,v) = -f(theta)/sqrt(2 pi)`
//!   in 3D.  The constant is frozen by matching the first Born term against
//!   the transformed potential; `scattering::phase_shift` re-derives it that
//!   way as a cross-check.

use std::f64::consts::PI;

/// `(2 pi)^{-d/2}`, the rescaled-measure factor per momentum integration.
pub fn measure_factor(dim: usize) -> f64 {
    (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// Shell-measure factor `c_d(|v|)`: differential cross section per unit
/// solid angle is `shell_factor(d, v) * |T|^2`.
pub fn shell_factor(dim: usize, speed: f64) -> f64 {
    match dim {
        3 => speed / (2.0 * PI).sqrt(),
        2 => 1.0,
        _ => panic!("cross sections are defined for d = 2 or 3"),
    }
}

/// Conversion from the 3D partial-wave amplitude to the T-matrix:
/// `T = PW_AMPLITUDE_TO_T_3D * f(theta)`.
pub const PW_AMPLITUDE_TO_T_3D: f64 = -0.398_942_280_401_432_7; // -1/sqrt(2 pi)

/// Surface area of the unit sphere `S^{d-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension"),
    }
}
