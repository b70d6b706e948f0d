//! Independent partial-wave oracle: solves the radial stationary equation
//! per angular momentum, matches to free solutions at the potential edge,
//! and reconstructs the on-shell amplitude.
//!
//! The reconstructed amplitude is converted to the crate's T-matrix
//! normalization by the frozen constants `-1/sqrt(2 pi)` (3D) and `-1/pi`
//! (2D); both are pinned by matching the first Born term against the
//! transformed potential (see tests).

use crate::ode::integrate_adaptive;
use crate::potential::PotentialSpec;
use crate::quad::Rule1D;
use crate::specfun::{cylinder_bessel_jy, legendre_p, riccati_bessel};
use crate::{Error, Result, C64};

/// Phase shifts for l = 0..=l_max at fixed wavenumber.
#[derive(Debug, Clone)]
pub struct PhaseShifts {
    pub dim: usize,
    pub k: f64,
    pub deltas: Vec<f64>,
}

/// Solve the radial problems and return phase shifts.  Requires the
/// potential tail to be negligible at the matching radius and the last
/// retained shift to be below 1e-8.
pub fn phase_shift_oracle(
    spec: &PotentialSpec,
    dim: usize,
    energy: f64,
    l_max: usize,
) -> Result<PhaseShifts> {
    if energy <= 0.0 {
        return Err(Error::invalid("energy must be positive"));
    }
    let k = (2.0 * energy).sqrt();
    let r_match = spec.cutoff_radius().max(4.0 / k);
    let tail = 2.0 * spec.eval_position(r_match).abs();
    if tail > 1e-9 * k * k {
        return Err(Error::invalid(format!(
            "potential tail {tail:.3e} not negligible at matching radius {r_match:.2}"
        )));
    }
    let mut deltas = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        deltas.push(single_phase_shift(spec, dim, k, l, r_match)?);
    }
    if deltas.last().unwrap().abs() >= 1e-8 {
        return Err(Error::invalid(format!(
            "l_max too small: |delta_{l_max}| = {:.2e} >= 1e-8",
            deltas.last().unwrap().abs()
        )));
    }
    Ok(PhaseShifts { dim, k, deltas })
}

fn single_phase_shift(
    spec: &PotentialSpec,
    dim: usize,
    k: f64,
    l: usize,
    r_match: f64,
) -> Result<f64> {
    // u'' = [centrifugal + 2V - k^2] u, integrated as a first-order system
    // with periodic rescaling (only the logarithmic derivative matters).
    let lf = l as f64;
    let centrifugal = move |r: f64| -> f64 {
        match dim {
            3 => lf * (lf + 1.0) / (r * r),
            2 => (lf * lf - 0.25) / (r * r),
            _ => panic!("d = 2 or 3"),
        }
    };
    let rhs = |r: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = (centrifugal(r) + 2.0 * spec.eval_position(r) - k * k) * y[0];
    };
    let r0 = (1e-4 * spec.range).min(1e-3 / k.max(1.0)).max(1e-8);
    // Regular behavior at the origin: r^{l+1} in 3D, r^{l+1/2} in 2D.
    let power = match dim {
        3 => lf + 1.0,
        2 => lf + 0.5,
        _ => unreachable!(),
    };
    let mut y = [1.0, power / r0];
    // Integrate in segments, renormalizing to avoid overflow for large l.
    let segments = 24usize;
    for seg in 0..segments {
        let a = r0 + (r_match - r0) * seg as f64 / segments as f64;
        let b = r0 + (r_match - r0) * (seg + 1) as f64 / segments as f64;
        integrate_adaptive(&rhs, a, b, &mut y, 1e-11, 1e-300);
        let scale = y[0].abs().max(y[1].abs());
        if scale > 1e100 {
            y[0] /= scale;
            y[1] /= scale;
        }
    }
    if y[0] == 0.0 {
        return Err(Error::Numerical("node at matching radius".into()));
    }
    let gamma = y[1] / y[0];
    let x = k * r_match;
    match dim {
        3 => {
            let (s, c, ds, dc) = riccati_bessel(l, x);
            let num = k * ds[l] - gamma * s[l];
            let den = gamma * c[l] - k * dc[l];
            Ok(num.atan2(den).rem_euclid(std::f64::consts::PI).min_branch())
        }
        2 => {
            // Free solutions F = sqrt(r) J_l(kr), G = -sqrt(r) Y_l(kr).
            let (j, yv, dj, dy) = cylinder_bessel_jy(l, x);
            let sr = r_match.sqrt();
            let f = sr * j[l];
            let fp = j[l] / (2.0 * sr) + sr * k * dj[l];
            let g = -sr * yv[l];
            let gp = -(yv[l] / (2.0 * sr) + sr * k * dy[l]);
            let num = fp - gamma * f;
            let den = gamma * g - gp;
            Ok(num.atan2(den).rem_euclid(std::f64::consts::PI).min_branch())
        }
        _ => unreachable!(),
    }
}

trait MinBranch {
    /// Map an angle in [0, pi) to the symmetric branch (-pi/2, pi/2].
    fn min_branch(self) -> f64;
}

impl MinBranch for f64 {
    fn min_branch(self) -> f64 {
        if self > std::f64::consts::FRAC_PI_2 {
            self - std::f64::consts::PI
        } else {
            self
        }
    }
}

/// First Born approximation of the phase shift:
/// 3D `-(2/k) Int V S_l(kr)^2 dr`, 2D `-pi Int V J_l(kr)^2 r dr`.
pub fn born_phase_shift(spec: &PotentialSpec, dim: usize, energy: f64, l: usize) -> f64 {
    let k = (2.0 * energy).sqrt();
    let r_max = spec.cutoff_radius();
    let rule = Rule1D::composite(8, &breaks(r_max, (r_max * k * 3.0) as usize + 64));
    match dim {
        3 => {
            let integral: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&r, &w)| {
                    let (s, _, _, _) = riccati_bessel(l, k * r);
                    w * spec.eval_position(r) * s[l] * s[l]
                })
                .sum();
            -(2.0 / k) * integral
        }
        2 => {
            let integral: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&r, &w)| {
                    let (j, _, _, _) = cylinder_bessel_jy(l, k * r);
                    w * spec.eval_position(r) * j[l] * j[l] * r
                })
                .sum();
            -std::f64::consts::PI * integral
        }
        _ => panic!("d = 2 or 3"),
    }
}

fn breaks(r_max: f64, n: usize) -> Vec<f64> {
    let n = n.clamp(16, 4000);
    (0..=n).map(|i| r_max * i as f64 / n as f64).collect()
}

/// On-shell T-matrix reconstructed from phase shifts, at the crate's
/// normalization.  `cos_theta` is the angle between incoming and outgoing
/// momenta.
pub fn pw_t_matrix(shifts: &PhaseShifts, cos_theta: f64) -> C64 {
    let k = shifts.k;
    match shifts.dim {
        3 => {
            // f(theta) = (1/k) sum (2l+1) e^{i delta} sin(delta) P_l;
            // T = -f / sqrt(2 pi).
            let mut f = C64::new(0.0, 0.0);
            for (l, &d) in shifts.deltas.iter().enumerate() {
                let amp = (2.0 * l as f64 + 1.0) * d.sin();
                f += C64::from_polar(amp, d) * legendre_p(l, cos_theta);
            }
            f *= 1.0 / k;
            f * crate::conventions::PW_AMPLITUDE_TO_T_3D
        }
        2 => {
            // T = -(1/pi) sum eps_l e^{i delta} sin(delta) cos(l theta).
            let theta = cos_theta.clamp(-1.0, 1.0).acos();
            let mut t = C64::new(0.0, 0.0);
            for (l, &d) in shifts.deltas.iter().enumerate() {
                let eps = if l == 0 { 1.0 } else { 2.0 };
                t += C64::from_polar(eps * d.sin(), d) * (l as f64 * theta).cos();
            }
            t * (-1.0 / std::f64::consts::PI)
        }
        _ => panic!("d = 2 or 3"),
    }
}

impl PhaseShifts {
    /// Total cross section in the crate normalization:
    /// 3D `(2 / (k sqrt(2 pi))) sum (2l+1) sin^2`, 2D
    /// `(2/pi) sum eps_l sin^2`.
    pub fn total_cross_section(&self) -> f64 {
        match self.dim {
            3 => {
                let s: f64 = self
                    .deltas
                    .iter()
                    .enumerate()
                    .map(|(l, &d)| (2.0 * l as f64 + 1.0) * d.sin().powi(2))
                    .sum();
                2.0 / (self.k * (2.0 * std::f64::consts::PI).sqrt()) * s
            }
            2 => {
                let s: f64 = self
                    .deltas
                    .iter()
                    .enumerate()
                    .map(|(l, &d)| {
                        let eps = if l == 0 { 1.0 } else { 2.0 };
                        eps * d.sin().powi(2)
                    })
                    .sum();
                2.0 / std::f64::consts::PI * s
            }
            _ => panic!(),
        }
    }
}
