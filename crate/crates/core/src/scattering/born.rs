//! The Born-series machinery: a shell-refined radial-angular quadrature
//! grid, the iterated collision kernel
//! `B(a, p, r) = sum_k V^ (R V^)^k` with resolvent denominators
//! `a - q^2/2 + i eta`, and the operator form with shifted denominator
//! `a - (q+u)^2/2 + i eta` applied to arbitrary momentum functions.

use crate::conventions::measure_factor;
use crate::geom::VecD;
use crate::potential::{PotentialSpec, PreparedPotential};
use crate::quad::{gauss_legendre, graded_breaks, Rule1D};
use crate::{Error, Result, C64};
use rayon::prelude::*;

/// Tunable resolution of the Born quadrature.
#[derive(Debug, Clone, Copy)]
pub struct BornOptions {
    pub n_angle: usize,
    pub n_azimuth: usize,
    pub radial_points_per_panel: usize,
    /// Smooth panel width in units of 1/range.
    pub smooth_panel_factor: f64,
}

impl Default for BornOptions {
    fn default() -> Self {
        BornOptions {
            n_angle: 24,
            n_azimuth: 16,
            radial_points_per_panel: 6,
            smooth_panel_factor: 0.5,
        }
    }
}

/// Iteration engine at fixed spectral parameter `alpha`, reusable across
/// the eta ladder (the radial grid is refined for the smallest eta).
///
/// Functions live on an azimuthally symmetric `(s, theta)` grid about a
/// polar axis; the collision step
/// `(A f)(q') = Int dq V^(q'-q) f(q) / (alpha - q^2/2 + i eta)`
/// is a dense matrix-vector product with the azimuth preintegrated.
pub struct BornEngine {
    pub dim: usize,
    pub alpha: f64,
    /// |q| per node.
    s: Vec<f64>,
    /// Angle coordinate per node: cos(theta) in 3D, theta in 2D.
    ang: Vec<f64>,
    /// Quadrature weight per node, including the rescaled-measure factor
    /// and the radial/angular Jacobians.
    weight: Vec<f64>,
    /// Azimuth-integrated potential kernel, row-major (out, in), without
    /// the in-node weight or resolvent.
    kernel: Vec<f64>,
    pot: PreparedPotential,
    opts: BornOptions,
}

impl BornEngine {
    /// Build the grid and kernel for spectral parameter `alpha`, resolving
    /// resolvent structure down to `eta_min`, with support out to momenta
    /// `s_max`.
    pub fn new(
        spec: &PotentialSpec,
        dim: usize,
        alpha: f64,
        eta_min: f64,
        s_max: f64,
        opts: BornOptions,
    ) -> Result<Self> {
        if !(eta_min > 0.0 && eta_min <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        if !(dim == 2 || dim == 3) {
            return Err(Error::invalid("Born engine supports d = 2 or 3"));
        }
        let pot = spec.prepare(dim, 2.5 * s_max + 1.0);
        let shell = if alpha > 0.0 {
            let s_star = (2.0 * alpha).sqrt();
            (s_star < s_max).then_some(s_star)
        } else {
            None
        };
        let w_min = eta_min / (2.0 * shell.unwrap_or(1.0).max(0.5));
        // Smooth panels scale with the potential width in momentum space.
        let w_smooth = (opts.smooth_panel_factor / spec.range).clamp(0.05, s_max / 8.0);
        let breaks = graded_breaks(s_max, shell, w_min, w_smooth);
        let radial = Rule1D::composite(opts.radial_points_per_panel, &breaks);

        let (ang_nodes, ang_weights): (Vec<f64>, Vec<f64>) = match dim {
            3 => gauss_legendre(opts.n_angle), // cos(theta) on [-1, 1]
            2 => {
                let r = Rule1D::gauss(opts.n_angle, 0.0, std::f64::consts::PI);
                (r.nodes, r.weights)
            }
            _ => unreachable!(),
        };

        let mut s = Vec::new();
        let mut ang = Vec::new();
        let mut weight = Vec::new();
        let mf = measure_factor(dim);
        for (&sr, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for (&a, &wa) in ang_nodes.iter().zip(&ang_weights) {
                s.push(sr);
                ang.push(a);
                let jac = match dim {
                    // d*q = s^2 ds dcos dphi; phi folded into the kernel
                    3 => sr * sr,
                    // d*q = s ds dtheta; theta in [0, pi] doubled in kernel
                    2 => sr,
                    _ => unreachable!(),
                };
                weight.push(mf * wr * wa * jac);
            }
        }

        let n = s.len();
        let mut kernel = vec![0.0f64; n * n];
        let (phi_nodes, phi_weights): (Vec<f64>, Vec<f64>) = {
            let r = Rule1D::gauss(opts.n_azimuth, 0.0, std::f64::consts::PI);
            (r.nodes, r.weights)
        };
        kernel
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, row)| {
                let sj = s[j];
                let aj = ang[j];
                for (i, out) in row.iter_mut().enumerate() {
                    let si = s[i];
                    let ai = ang[i];
                    *out = azimuth_avg_vhat(&pot, dim, sj, aj, si, ai, &phi_nodes, &phi_weights);
                }
            });

        Ok(BornEngine {
            dim,
            alpha,
            s,
            ang,
            weight,
            kernel,
            pot,
            opts,
        })
    }

    pub fn node_count(&self) -> usize {
        self.s.len()
    }

    /// Transformed potential at radial momentum q.
    pub fn vhat(&self, q: f64) -> f64 {
        self.pot.vhat(q)
    }

    pub fn amplitude(&self) -> f64 {
        self.pot.spec.amplitude
    }

    /// Resolvent at the engine's alpha for a given eta, per node.
    fn resolvent(&self, eta: f64) -> Vec<C64> {
        self.s
            .iter()
            .map(|&s| (C64::new(self.alpha - s * s / 2.0, eta)).inv())
            .collect()
    }

    /// Samples of `V^(q - r)` on the grid for `r` along the polar axis.
    pub fn initial_vector(&self, r_mag: f64) -> Vec<C64> {
        self.s
            .iter()
            .zip(&self.ang)
            .map(|(&s, &a)| {
                let cos_t = match self.dim {
                    3 => a,
                    2 => a.cos(),
                    _ => unreachable!(),
                };
                let dist_sq = (s * s + r_mag * r_mag - 2.0 * s * r_mag * cos_t).max(0.0);
                C64::new(self.pot.vhat(dist_sq.sqrt()), 0.0)
            })
            .collect()
    }

    /// One collision step `(A f)(node) = sum_i K[node,i] w_i R_i f_i`.
    pub fn apply(&self, eta: f64, f: &[C64]) -> Vec<C64> {
        let n = self.s.len();
        let res = self.resolvent(eta);
        let weighted: Vec<C64> = (0..n).map(|i| f[i] * res[i] * self.weight[i]).collect();
        self.kernel
            .par_chunks(n)
            .map(|row| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &w) in row.iter().zip(&weighted) {
                    acc += w * k;
                }
                acc
            })
            .collect()
    }

    /// Evaluate one collision step at an arbitrary target `(s_t, angle to
    /// axis)` instead of a grid node.
    pub fn eval_at(&self, eta: f64, s_target: f64, cos_to_axis: f64, f: &[C64]) -> C64 {
        let res = self.resolvent(eta);
        let (phi_nodes, phi_weights): (Vec<f64>, Vec<f64>) = {
            let r = Rule1D::gauss(self.opts.n_azimuth, 0.0, std::f64::consts::PI);
            (r.nodes, r.weights)
        };
        let a_t = match self.dim {
            3 => cos_to_axis,
            2 => cos_to_axis.clamp(-1.0, 1.0).acos(),
            _ => unreachable!(),
        };
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.s.len() {
            let k = azimuth_avg_vhat(
                &self.pot,
                self.dim,
                s_target,
                a_t,
                self.s[i],
                self.ang[i],
                &phi_nodes,
                &phi_weights,
            );
            acc += f[i] * res[i] * self.weight[i] * k;
        }
        acc
    }
}

/// Azimuth-averaged kernel between grid directions: in 3D the integral of
/// `V^(|q_j - q_i|)` over the relative azimuth (angles are cos(theta)); in
/// 2D the sum over the two reflection images (angles are theta in [0, pi],
/// representing even functions).
#[allow(clippy::too_many_arguments)]
fn azimuth_avg_vhat(
    pot: &PreparedPotential,
    dim: usize,
    s1: f64,
    a1: f64,
    s2: f64,
    a2: f64,
    phi_nodes: &[f64],
    phi_weights: &[f64],
) -> f64 {
    match dim {
        3 => {
            let (c1, c2) = (a1, a2);
            let s1t = (1.0 - c1 * c1).max(0.0).sqrt();
            let s2t = (1.0 - c2 * c2).max(0.0).sqrt();
            let base = s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * c1 * c2;
            let cross = 2.0 * s1 * s2 * s1t * s2t;
            let mut acc = 0.0;
            for (&phi, &w) in phi_nodes.iter().zip(phi_weights) {
                let d2 = (base - cross * phi.cos()).max(0.0);
                acc += w * pot.vhat(d2.sqrt());
            }
            2.0 * acc // the two azimuth half-ranges
        }
        2 => {
            let d2a = (s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * (a1 - a2).cos()).max(0.0);
            let d2b = (s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * (a1 + a2).cos()).max(0.0);
            pot.vhat(d2a.sqrt()) + pot.vhat(d2b.sqrt())
        }
        _ => unreachable!(),
    }
}

/// Result of summing the Born series.
#[derive(Debug, Clone)]
pub struct BornSeries {
    pub value: C64,
    pub terms_kept: usize,
    pub last_term_magnitude: f64,
}

/// Regularized Born kernel `B_eta(alpha, p, r)` summed to `k_max` iterated
/// collisions, stopping early once the last term falls below `tol` relative
/// to the running sum.  Three consecutive growing terms abort with a
/// divergence error naming the amplitude.
pub fn born_series(
    spec: &PotentialSpec,
    dim: usize,
    alpha: f64,
    eta: f64,
    p: &VecD,
    r: &VecD,
    k_max: usize,
    tol: f64,
) -> Result<BornSeries> {
    let s_max = suggest_s_max(spec, alpha, p.norm().max(r.norm()));
    let engine = BornEngine::new(spec, dim, alpha, eta, s_max, BornOptions::default())?;
    born_series_with_engine(&engine, eta, p, r, k_max, tol)
}

/// Same series evaluated on a prebuilt engine (axis = direction of `r`).
pub fn born_series_with_engine(
    engine: &BornEngine,
    eta: f64,
    p: &VecD,
    r: &VecD,
    k_max: usize,
    tol: f64,
) -> Result<BornSeries> {
    let r_mag = r.norm();
    let p_mag = p.norm();
    let cos_pr = if r_mag > 0.0 && p_mag > 0.0 {
        (p.dot(r) / (p_mag * r_mag)).clamp(-1.0, 1.0)
    } else {
        1.0
    };
    let mut sum = C64::new(engine.pot.vhat(p.sub(r).norm()), 0.0);
    let mut last_mag = sum.norm();
    let mut terms = 1usize;
    let mut f = engine.initial_vector(r_mag);
    let mut ratios: [f64; 3] = [0.0; 3];
    let mut prev_mag = last_mag;
    for k in 1..=k_max {
        let term = engine.eval_at(eta, p_mag, cos_pr, &f);
        sum += term;
        last_mag = term.norm();
        terms = k + 1;
        let ratio = if prev_mag > 0.0 { last_mag / prev_mag } else { 0.0 };
        ratios.rotate_left(1);
        ratios[2] = ratio;
        if k >= 3 && ratios.iter().all(|&r| r > 1.0) {
            return Err(Error::BornDivergence {
                lambda0: engine.pot.spec.amplitude,
                ratios,
            });
        }
        if last_mag < tol * sum.norm().max(1e-300) {
            break;
        }
        prev_mag = last_mag;
        if k < k_max {
            f = engine.apply(eta, &f);
        }
    }
    Ok(BornSeries {
        value: sum,
        terms_kept: terms,
        last_term_magnitude: last_mag,
    })
}

pub(crate) fn suggest_s_max(spec: &PotentialSpec, alpha: f64, external: f64) -> f64 {
    let vhat_reach = match spec.profile {
        crate::potential::Profile::Gaussian => 9.0 / spec.range,
        _ => 25.0 / spec.range,
    };
    let shell = if alpha > 0.0 { (2.0 * alpha).sqrt() } else { 0.0 };
    external.max(shell) + vhat_reach
}

/// The operator of E-type `B_eta(alpha, u)`:
/// `p -> Int dq V^(p - q) f(q) / (alpha - (q + u)^2/2 + i eta)`
/// for an arbitrary momentum function, evaluated at the requested output
/// points by quadrature over the shifted variable `w = q + u` (so the
/// near-singular shell `|q + u|^2 = 2 alpha` is a radial coordinate
/// surface).  The result carries a one-refinement convergence check.
pub fn apply_born_operator(
    spec: &PotentialSpec,
    dim: usize,
    alpha: f64,
    eta: f64,
    u: &VecD,
    f: &(dyn Fn(&VecD) -> C64 + Sync),
    out_points: &[VecD],
    opts: BornOptions,
) -> Result<Vec<C64>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta must lie in (0, 1]"));
    }
    let coarse = born_operator_once(spec, dim, alpha, eta, u, f, out_points, &opts)?;
    let mut fine_opts = opts;
    fine_opts.n_angle = (opts.n_angle * 3) / 2;
    fine_opts.n_azimuth = (opts.n_azimuth * 3) / 2;
    fine_opts.radial_points_per_panel = opts.radial_points_per_panel + 2;
    let fine = born_operator_once(spec, dim, alpha, eta, u, f, out_points, &fine_opts)?;
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for (a, b) in coarse.iter().zip(&fine) {
        residual = residual.max((a - b).norm());
        scale = scale.max(b.norm());
    }
    let tol = 1e-6 * scale.max(1e-300);
    if residual > tol {
        return Err(Error::QuadratureNotConverged { residual, tol });
    }
    Ok(fine)
}

#[allow(clippy::too_many_arguments)]
fn born_operator_once(
    spec: &PotentialSpec,
    dim: usize,
    alpha: f64,
    eta: f64,
    u: &VecD,
    f: &(dyn Fn(&VecD) -> C64 + Sync),
    out_points: &[VecD],
    opts: &BornOptions,
) -> Result<Vec<C64>> {
    let u_mag = u.norm();
    let out_reach = out_points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let s_max = suggest_s_max(spec, alpha, u_mag + out_reach) + u_mag;
    let pot = spec.prepare(dim, 2.5 * s_max + 1.0);
    let shell = if alpha > 0.0 {
        let s_star = (2.0 * alpha).sqrt();
        (s_star < s_max).then_some(s_star)
    } else {
        None
    };
    let w_min = eta / (2.0 * shell.unwrap_or(1.0).max(0.5));
    let w_smooth = (opts.smooth_panel_factor / spec.range).clamp(0.05, s_max / 8.0);
    let breaks = graded_breaks(s_max, shell, w_min, w_smooth);
    let radial = Rule1D::composite(opts.radial_points_per_panel, &breaks);
    let (ct_nodes, ct_weights) = gauss_legendre(opts.n_angle);
    let phi_rule = Rule1D::gauss(opts.n_azimuth, 0.0, 2.0 * std::f64::consts::PI);
    let mf = measure_factor(dim);

    // Full (non-symmetric) quadrature over w: 3D spherical or 2D polar.
    let mut nodes: Vec<(VecD, f64)> = Vec::new();
    match dim {
        3 => {
            for (&s, &ws) in radial.nodes.iter().zip(&radial.weights) {
                for (&ct, &wt) in ct_nodes.iter().zip(&ct_weights) {
                    let st = (1.0 - ct * ct).max(0.0).sqrt();
                    for (&phi, &wp) in phi_rule.nodes.iter().zip(&phi_rule.weights) {
                        let w = VecD::new(3, [s * st * phi.cos(), s * st * phi.sin(), s * ct]);
                        nodes.push((w, mf * ws * wt * wp * s * s));
                    }
                }
            }
        }
        2 => {
            for (&s, &ws) in radial.nodes.iter().zip(&radial.weights) {
                for (&phi, &wp) in phi_rule.nodes.iter().zip(&phi_rule.weights) {
                    let w = VecD::new(2, [s * phi.cos(), s * phi.sin(), 0.0]);
                    nodes.push((w, mf * ws * wp * s));
                }
            }
        }
        _ => return Err(Error::invalid("d = 2 or 3")),
    }

    // Precompute f(w - u) / (alpha - w^2/2 + i eta) per node.
    let weighted: Vec<C64> = nodes
        .par_iter()
        .map(|(w, wt)| {
            let q = w.sub(u);
            let res = C64::new(alpha - w.norm_sq() / 2.0, eta).inv();
            f(&q) * res * *wt
        })
        .collect();

    Ok(out_points
        .par_iter()
        .map(|p| {
            let mut acc = C64::new(0.0, 0.0);
            for ((w, _), fw) in nodes.iter().zip(&weighted) {
                // V^(p - q) with q = w - u
                let dist = p.sub(&w.sub(u)).norm();
                acc += fw * pot.vhat(dist);
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;

    fn gauss_spec() -> PotentialSpec {
        PotentialSpec::gaussian(0.12, 1.0)
    }

    #[test]
    fn born_series_k0_is_vhat() {
        let spec = gauss_spec();
        let p = VecD::new(3, [0.7, 0.1, -0.3]);
        let r = VecD::new(3, [-0.2, 0.4, 0.9]);
        let out = born_series(&spec, 3, 0.8, 0.1, &p, &r, 0, 1e-12).unwrap();
        let expect = spec.eval_momentum(3, p.sub(&r).norm());
        assert!((out.value.re - expect).abs() < 1e-9);
        assert!(out.value.im.abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let spec = PotentialSpec::gaussian(0.0, 1.0);
        let p = VecD::new(3, [0.7, 0.0, 0.0]);
        let r = VecD::new(3, [0.0, 0.0, 0.9]);
        let out = born_series(&spec, 3, 0.5, 0.2, &p, &r, 4, 1e-12).unwrap();
        assert_eq!(out.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn second_order_remainder_scales_quadratically() {
        // |B - V^| shrinks ~4x when the amplitude is halved.
        let p = VecD::new(3, [0.9, 0.0, 0.0]);
        let r = VecD::new(3, [0.0, 0.0, 0.9]);
        let dev = |lam: f64| -> f64 {
            let spec = PotentialSpec::gaussian(lam, 1.0);
            let out = born_series(&spec, 3, 0.405, 0.1, &p, &r, 8, 1e-10).unwrap();
            let first = spec.eval_momentum(3, p.sub(&r).norm());
            (out.value - C64::new(first, 0.0)).norm()
        };
        let d1 = dev(0.2);
        let d2 = dev(0.1);
        let ratio = d1 / d2;
        assert!(
            (ratio - 4.0).abs() < 0.4,
            "second-order remainder ratio {ratio}"
        );
    }

    #[test]
    fn geometric_decay_of_terms() {
        let spec = gauss_spec();
        let p = VecD::new(3, [1.0, 0.0, 0.0]);
        let r = VecD::new(3, [0.0, 0.0, 1.0]);
        let engine = BornEngine::new(
            &spec,
            3,
            0.5,
            0.05,
            suggest_s_max(&spec, 0.5, 1.0),
            BornOptions::default(),
        )
        .unwrap();
        // Collect explicit term magnitudes.
        let mut f = engine.initial_vector(1.0);
        let mut mags = vec![engine.pot.vhat(p.sub(&r).norm()).abs()];
        for _ in 0..5 {
            mags.push(engine.eval_at(0.05, 1.0, 0.0, &f).norm());
            f = engine.apply(0.05, &f);
        }
        for w in mags.windows(2) {
            assert!(w[1] / w[0] < 0.5, "term ratio {} not small", w[1] / w[0]);
        }
    }

    #[test]
    fn divergence_detected_at_huge_amplitude() {
        let spec = PotentialSpec::gaussian(80.0, 1.0);
        let p = VecD::new(3, [1.0, 0.0, 0.0]);
        let r = VecD::new(3, [0.0, 0.0, 1.0]);
        let res = born_series(&spec, 3, 0.5, 0.05, &p, &r, 12, 1e-12);
        match res {
            Err(Error::BornDivergence { lambda0, .. }) => assert_eq!(lambda0, 80.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn operator_matches_brute_force_at_safe_alpha() {
        // alpha << 0: resolvent never near-singular; compare against a
        // naive tensor-grid quadrature.
        let spec = gauss_spec();
        let alpha = -1.5;
        let eta = 0.3;
        let u = VecD::new(3, [0.4, 0.0, 0.2]);
        let f = |q: &VecD| -> C64 {
            C64::new((-0.7 * q.norm_sq()).exp(), 0.3 * (-0.5 * q.norm_sq()).exp())
        };
        let targets = vec![
            VecD::new(3, [0.5, 0.0, 0.0]),
            VecD::new(3, [0.0, -0.8, 0.3]),
        ];
        let got = apply_born_operator(
            &spec,
            3,
            alpha,
            eta,
            &u,
            &f,
            &targets,
            BornOptions::default(),
        )
        .unwrap();
        // Brute force: uniform tensor grid over q in [-6, 6]^3.
        let n = 60;
        let h = 12.0 / n as f64;
        let mf = measure_factor(3);
        for (t, g) in targets.iter().zip(&got) {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let q = VecD::new(
                            3,
                            [
                                -6.0 + (i as f64 + 0.5) * h,
                                -6.0 + (j as f64 + 0.5) * h,
                                -6.0 + (k as f64 + 0.5) * h,
                            ],
                        );
                        let den = C64::new(alpha - q.add(&u).norm_sq() / 2.0, eta);
                        acc += spec.eval_momentum(3, t.sub(&q).norm()) * f(&q) / den;
                    }
                }
            }
            acc *= mf * h * h * h;
            assert!(
                (acc - g).norm() < 1e-6 * g.norm(),
                "operator {g} vs brute force {acc}"
            );
        }
    }

    #[test]
    fn series_reciprocity_in_p_r() {
        // B(alpha, p, r) = B(alpha, r, p) for a radial potential.
        let spec = gauss_spec();
        let p = VecD::new(3, [0.8, 0.3, 0.0]);
        let r = VecD::new(3, [-0.1, 0.0, 0.85]);
        let a = born_series(&spec, 3, 0.6, 0.08, &p, &r, 8, 1e-11).unwrap();
        let b = born_series(&spec, 3, 0.6, 0.08, &r, &p, 8, 1e-11).unwrap();
        assert!(
            (a.value - b.value).norm() <= 1e-10 * a.value.norm(),
            "{} vs {}",
            a.value,
            b.value
        );
    }
}
