//! Phase-space analysis: Wigner transforms, Husimi densities at prescribed
//! smoothing scales, macroscopic rescaling and weak tests against smooth
//! test functions.
//!
//! All densities are normalized with respect to plain Lebesgue measure
//! `d*X d*V`; the coherent-state `(2 pi)^{-d}` lives inside the Husimi
//! values.  The Wigner transform is evaluated on the half-spacing velocity
//! lattice `v = m pi / L` with the wrap-around correlation window dropped,
//! so both marginal identities hold to round-off for packets supported away
//! from the box boundary.

use crate::geom::VecD;
use crate::schrodinger::{BoxSpec, FftEngine, WaveField};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

/// A uniform axis `start + step * i`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl AxisGrid {
    pub fn node(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    pub fn len_span(&self) -> f64 {
        self.step * self.n as f64
    }
}

/// Smoothing/scaling metadata carried by a phase-space density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMeta {
    pub epsilon: f64,
    pub mu: f64,
    pub ell1: f64,
    pub ell2: f64,
    pub macroscopic: bool,
}

/// Nonnegative density over (X, V) on a product grid, row-major with the
/// X axes slowest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseSpaceDensity {
    pub dim: usize,
    pub x_axes: Vec<AxisGrid>,
    pub v_axes: Vec<AxisGrid>,
    pub values: Vec<f64>,
    pub scale: ScaleMeta,
}

impl PhaseSpaceDensity {
    pub fn cell_volume(&self) -> f64 {
        let dx: f64 = self.x_axes.iter().map(|a| a.step).product();
        let dv: f64 = self.v_axes.iter().map(|a| a.step).product();
        dx * dv
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn x_len(&self) -> usize {
        self.x_axes.iter().map(|a| a.n).product()
    }

    fn v_len(&self) -> usize {
        self.v_axes.iter().map(|a| a.n).product()
    }

    fn x_node(&self, mut flat: usize) -> VecD {
        let mut c = [0.0; 3];
        for ax in (0..self.dim).rev() {
            let n = self.x_axes[ax].n;
            c[ax] = self.x_axes[ax].node(flat % n);
            flat /= n;
        }
        VecD::new(self.dim, c)
    }

    fn v_node(&self, mut flat: usize) -> VecD {
        let mut c = [0.0; 3];
        for ax in (0..self.dim).rev() {
            let n = self.v_axes[ax].n;
            c[ax] = self.v_axes[ax].node(flat % n);
            flat /= n;
        }
        VecD::new(self.dim, c)
    }

    /// Marginal over V (integrating V out), returned over the X grid.
    pub fn x_marginal(&self) -> Vec<f64> {
        let xv: f64 = self.v_axes.iter().map(|a| a.step).product();
        let nv = self.v_len();
        (0..self.x_len())
            .map(|ix| {
                (0..nv).map(|iv| self.values[ix * nv + iv]).sum::<f64>() * xv
            })
            .collect()
    }

    /// Marginal over X, returned over the V grid.
    pub fn v_marginal(&self) -> Vec<f64> {
        let xx: f64 = self.x_axes.iter().map(|a| a.step).product();
        let nv = self.v_len();
        let mut out = vec![0.0; nv];
        for ix in 0..self.x_len() {
            for (iv, o) in out.iter_mut().enumerate() {
                *o += self.values[ix * nv + iv];
            }
        }
        for o in &mut out {
            *o *= xx;
        }
        out
    }
}

/// Wigner transform of a grid wave function, on the natural half-spacing
/// velocity lattice `v_m = m pi / L`, `m` in `[-N/2, N/2)` per axis.
/// The correlation window excludes the wrap-around separation, so the
/// output is exact for fields supported away from the box edge.
pub fn wigner_transform(psi: &WaveField, engine: &FftEngine) -> Result<PhaseSpaceDensity> {
    let b = psi.box_spec.clone();
    let d = b.dimension;
    let n = b.grid_points_per_side;
    let total = b.total_points();
    if total * total > 1usize << 26 {
        return Err(Error::Grid(
            "full Wigner transform is limited to small grids".into(),
        ));
    }
    let pos = psi.to_position(engine);
    let pref = (2.0 * b.spacing() / (2.0 * std::f64::consts::PI)).powi(d as i32);

    // For each x (flat index), build the separation correlation in k and
    // transform over k.
    let mut values = vec![0.0f64; total * total];
    let mut corr = vec![C64::new(0.0, 0.0); total];
    let half = (n / 2) as i64;
    let mut max_im: f64 = 0.0;
    for ix in 0..total {
        let mut xi = [0i64; 3];
        let mut rem = ix;
        for ax in (0..d).rev() {
            xi[ax] = (rem % n) as i64;
            rem /= n;
        }
        for kflat in 0..total {
            let mut rem = kflat;
            let mut ks = [0i64; 3];
            for ax in (0..d).rev() {
                let kk = (rem % n) as i64;
                rem /= n;
                ks[ax] = if kk < (n as i64 + 1) / 2 { kk } else { kk - n as i64 };
            }
            // Separations beyond a quarter box pair the packet with its
            // periodic image (a ghost at the antipode); the correlation of
            // a field supported in half the box vanishes there, so cutting
            // the window is exact for admissible fields.
            if ks[..d].iter().any(|&k| k.abs() > half / 2) {
                corr[kflat] = C64::new(0.0, 0.0);
                continue;
            }
            let mut plus = 0usize;
            let mut minus = 0usize;
            for ax in 0..d {
                let a = (xi[ax] + ks[ax]).rem_euclid(n as i64) as usize;
                let bb = (xi[ax] - ks[ax]).rem_euclid(n as i64) as usize;
                plus = plus * n + a;
                minus = minus * n + bb;
            }
            corr[kflat] = pos.amplitudes[plus].conj() * pos.amplitudes[minus];
        }
        // Inverse DFT over k gives the e^{+2 pi i k m / N} phases.
        engine.transform_all_axes(&mut corr, n, d, false);
        for (mflat, c) in corr.iter().enumerate() {
            let mut rem = mflat;
            let mut signed_idx = [0usize; 3];
            for ax in (0..d).rev() {
                let m = rem % n;
                rem /= n;
                let signed = if m < (n + 1) / 2 {
                    m as i64
                } else {
                    m as i64 - n as i64
                };
                signed_idx[ax] = (signed + half) as usize; // -N/2 maps to 0
            }
            let mut out_idx = 0usize;
            for ax in 0..d {
                out_idx = out_idx * n + signed_idx[ax];
            }
            max_im = max_im.max(c.im.abs());
            values[ix * total + out_idx] = c.re * pref;
        }
    }
    if max_im * pref > 1e-10 {
        return Err(Error::Numerical(format!(
            "Wigner imaginary residue {:.3e} above 1e-10",
            max_im * pref
        )));
    }

    let dx = b.spacing();
    let dv = std::f64::consts::PI / b.side;
    let x_axes = vec![
        AxisGrid {
            start: 0.0,
            step: dx,
            n,
        };
        d
    ];
    let v_axes = vec![
        AxisGrid {
            start: -(half as f64) * dv,
            step: dv,
            n,
        };
        d
    ];
    Ok(PhaseSpaceDensity {
        dim: d,
        x_axes,
        v_axes,
        values,
        scale: ScaleMeta {
            epsilon: 1.0,
            mu: 0.0,
            ell1: 0.0,
            ell2: 0.0,
            macroscopic: false,
        },
    })
}

/// Husimi density at smoothing scales `(ell1, ell2)`, evaluated on the
/// requested velocity nodes and on the position lattice subsampled by
/// `x_stride`.  `ell1 ell2 >= 1` (at the coherent scale the extra spatial
/// smoothing vanishes).
pub fn husimi(
    psi: &WaveField,
    ell1: f64,
    ell2: f64,
    v_axes: &[AxisGrid],
    x_stride: usize,
    engine: &FftEngine,
) -> Result<PhaseSpaceDensity> {
    let b = psi.box_spec.clone();
    let d = b.dimension;
    let n = b.grid_points_per_side;
    let total = b.total_points();
    if v_axes.len() != d {
        return Err(Error::invalid("v_axes dimension mismatch"));
    }
    let dx = b.spacing();
    if ell1 < 2.0 * dx {
        return Err(Error::Grid(format!(
            "spatial smoothing {ell1:.3} below twice the grid spacing {dx:.3}"
        )));
    }
    if ell2 < 2.0 * b.momentum_spacing() {
        return Err(Error::Grid(
            "velocity smoothing below twice the momentum spacing".into(),
        ));
    }
    if ell1 * ell2 < 1.0 - 1e-9 {
        return Err(Error::invalid(
            "(ell1, ell2) below the coherent-state scale ell1*ell2 = 1",
        ));
    }
    if n % x_stride != 0 {
        return Err(Error::invalid("x_stride must divide the grid"));
    }
    let ell_coh = 1.0 / ell2;
    let ell_sm_sq = (ell1 * ell1 - ell_coh * ell_coh).max(0.0);

    let pos = psi.to_position(engine);

    // Transfer functions of the two spatial convolutions.
    let window_hat = gaussian_kernel_hat(&b, ell_coh, engine, true);
    let smooth_hat = if ell_sm_sq > 0.0 {
        Some(gaussian_kernel_hat(&b, ell_sm_sq.sqrt(), engine, false))
    } else {
        None
    };

    let n_out_x = n / x_stride;
    let nv_total: usize = v_axes.iter().map(|a| a.n).product();
    let nx_total = n_out_x.pow(d as u32);
    let mut values = vec![0.0f64; nx_total * nv_total];

    let husimi_pref = (2.0 * std::f64::consts::PI).powi(-(d as i32));
    let conv_scale = dx.powi(d as i32) / total as f64;

    let mut u = vec![C64::new(0.0, 0.0); total];
    let mut c_field = vec![C64::new(0.0, 0.0); total];
    for vflat in 0..nv_total {
        // velocity node
        let mut rem = vflat;
        let mut vc = [0.0; 3];
        for ax in (0..d).rev() {
            let na = v_axes[ax].n;
            vc[ax] = v_axes[ax].node(rem % na);
            rem /= na;
        }
        // u = psi * e^{-i x v}
        for (flat, (dst, src)) in u.iter_mut().zip(&pos.amplitudes).enumerate() {
            let x = b.position_of_flat(flat);
            let mut phase = 0.0;
            for ax in 0..d {
                phase -= x.c[ax] * vc[ax];
            }
            *dst = src * C64::from_polar(1.0, phase);
        }
        engine.transform_all_axes(&mut u, n, d, true);
        for (a, k) in u.iter_mut().zip(&window_hat) {
            *a *= k;
        }
        engine.transform_all_axes(&mut u, n, d, false);
        // Coherent density, then optional extra smoothing.
        for (cf, a) in c_field.iter_mut().zip(&u) {
            let t = a * conv_scale;
            *cf = C64::new(t.norm_sqr() * husimi_pref, 0.0);
        }
        if let Some(sm) = &smooth_hat {
            engine.transform_all_axes(&mut c_field, n, d, true);
            for (a, k) in c_field.iter_mut().zip(sm) {
                *a *= k * conv_scale;
            }
            engine.transform_all_axes(&mut c_field, n, d, false);
        }
        // Slice onto the coarse x grid.
        for ox in 0..nx_total {
            let mut rem = ox;
            let mut flat = 0usize;
            let mut idx = [0usize; 3];
            for ax in (0..d).rev() {
                idx[ax] = (rem % n_out_x) * x_stride;
                rem /= n_out_x;
            }
            for ax in 0..d {
                flat = flat * n + idx[ax];
            }
            values[ox * nv_total + vflat] = c_field[flat].re;
        }
    }

    let x_axes = vec![
        AxisGrid {
            start: 0.0,
            step: dx * x_stride as f64,
            n: n_out_x,
        };
        d
    ];
    Ok(PhaseSpaceDensity {
        dim: d,
        x_axes,
        v_axes: v_axes.to_vec(),
        values,
        scale: ScaleMeta {
            epsilon: 1.0,
            mu: 0.0,
            ell1,
            ell2,
            macroscopic: false,
        },
    })
}

/// Unnormalized DFT of a periodized Gaussian kernel.  `window = true`
/// builds the coherent window `(pi l^2)^{-d/4} e^{-z^2/(2 l^2)}` (an
/// amplitude window), `false` the mass-one smoothing kernel
/// `G^{l/sqrt(2)}(z)`, i.e. variance `l^2/2`.
fn gaussian_kernel_hat(b: &BoxSpec, ell: f64, engine: &FftEngine, window: bool) -> Vec<C64> {
    let d = b.dimension;
    let n = b.grid_points_per_side;
    let total = b.total_points();
    let mut k = vec![C64::new(0.0, 0.0); total];
    let var = if window { ell * ell } else { ell * ell / 2.0 };
    let norm = if window {
        (std::f64::consts::PI * ell * ell).powf(-(d as f64) / 4.0)
    } else {
        (2.0 * std::f64::consts::PI * var).powf(-(d as f64) / 2.0)
    };
    for (flat, v) in k.iter_mut().enumerate() {
        // minimum-image distance from the origin
        let mut rem = flat;
        let mut r2 = 0.0;
        for _ in 0..d {
            let i = (rem % n) as f64;
            rem /= n;
            let mut z = i * b.spacing();
            z -= (z / b.side).round() * b.side;
            r2 += z * z;
        }
        *v = C64::new(norm * (-r2 / (2.0 * var)).exp(), 0.0);
    }
    engine.transform_all_axes(&mut k, n, d, true);
    k
}

/// Macroscopic rescaling `H^{(eps,mu)}(X, V) = eps^{-d} H(X/eps, V)`:
/// relabel X axes by eps and scale values by the Jacobian.
pub fn rescale_macroscopic(
    h: &PhaseSpaceDensity,
    epsilon: f64,
    mu: f64,
) -> Result<PhaseSpaceDensity> {
    let ell1_expect = epsilon.powf(mu - 1.0);
    let ell2_expect = epsilon.powf(mu);
    if h.scale.macroscopic {
        return Err(Error::invalid("density is already macroscopic"));
    }
    let ok = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-30);
    if !(ok(h.scale.ell1, ell1_expect) && ok(h.scale.ell2, ell2_expect)) {
        return Err(Error::invalid(format!(
            "scale metadata mismatch: (ell1, ell2) = ({:.6}, {:.6}), expected ({:.6}, {:.6})",
            h.scale.ell1, h.scale.ell2, ell1_expect, ell2_expect
        )));
    }
    let d = h.dim;
    let jac = epsilon.powi(-(d as i32));
    let x_axes: Vec<AxisGrid> = h
        .x_axes
        .iter()
        .map(|a| AxisGrid {
            start: a.start * epsilon,
            step: a.step * epsilon,
            n: a.n,
        })
        .collect();
    Ok(PhaseSpaceDensity {
        dim: d,
        x_axes,
        v_axes: h.v_axes.clone(),
        values: h.values.iter().map(|&v| v * jac).collect(),
        scale: ScaleMeta {
            epsilon,
            mu,
            macroscopic: true,
            ..h.scale
        },
    })
}

/// Smooth test functions J(X, V) with recorded bounds, closed under the
/// Gaussian smoothings used by the Husimi construction and under Gaussian
/// position averages (used by the deterministic Boltzmann series).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// J = 1
    Unit,
    /// `exp(-|X-xc|^2/(2 sx^2)) * exp(-|V-vc|^2/(2 sv^2))`
    GaussGauss { xc: VecD, sx: f64, vc: VecD, sv: f64 },
    /// `cos(k.X + phase) * exp(-|V-vc|^2/(2 sv^2))`
    CosGauss {
        k: VecD,
        phase: f64,
        vc: VecD,
        sv: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, x: &VecD, v: &VecD) -> f64 {
        match self {
            TestFunction::Unit => 1.0,
            TestFunction::GaussGauss { xc, sx, vc, sv } => {
                let dx = x.sub(xc).norm_sq();
                let dv = v.sub(vc).norm_sq();
                (-dx / (2.0 * sx * sx)).exp() * (-dv / (2.0 * sv * sv)).exp()
            }
            TestFunction::CosGauss { k, phase, vc, sv } => {
                let dv = v.sub(vc).norm_sq();
                (k.dot(x) + phase).cos() * (-dv / (2.0 * sv * sv)).exp()
            }
        }
    }

    /// sup |J|.
    pub fn sup_bound(&self) -> f64 {
        1.0
    }

    /// Bound on |grad J| (recorded constant used for budget accounting).
    pub fn grad_bound(&self) -> f64 {
        match self {
            TestFunction::Unit => 0.0,
            TestFunction::GaussGauss { sx, sv, .. } => {
                (1.0 / (sx * std::f64::consts::E.sqrt())).max(1.0 / (sv * std::f64::consts::E.sqrt()))
            }
            TestFunction::CosGauss { k, sv, .. } => {
                k.norm().max(1.0 / (sv * std::f64::consts::E.sqrt()))
            }
        }
    }

    /// Closed-form average of the X-part over `X ~ N(mean, var * I)`,
    /// evaluated with the X argument shifted by `shift`, times the V part:
    /// `E_X[ J(X + shift, v) ]`.
    pub fn gaussian_x_average(&self, mean: &VecD, var: f64, shift: &VecD, v: &VecD) -> f64 {
        match self {
            TestFunction::Unit => 1.0,
            TestFunction::GaussGauss { xc, sx, vc, sv } => {
                let d = xc.dim as f64;
                let s2 = sx * sx + var;
                let m = mean.add(shift).sub(xc).norm_sq();
                let amp = (sx * sx / s2).powf(d / 2.0);
                let dv = v.sub(vc).norm_sq();
                amp * (-m / (2.0 * s2)).exp() * (-dv / (2.0 * sv * sv)).exp()
            }
            TestFunction::CosGauss { k, phase, vc, sv } => {
                let damp = (-var * k.norm_sq() / 2.0).exp();
                let arg = k.dot(&mean.add(shift)) + phase;
                let dv = v.sub(vc).norm_sq();
                damp * arg.cos() * (-dv / (2.0 * sv * sv)).exp()
            }
        }
    }
}

/// Grid quadrature of `J * density`.
pub fn weak_test(density: &PhaseSpaceDensity, j: &TestFunction) -> f64 {
    let nv = density.v_len();
    let mut acc = 0.0;
    for ix in 0..density.x_len() {
        let x = density.x_node(ix);
        for iv in 0..nv {
            let v = density.v_node(iv);
            acc += density.values[ix * nv + iv] * j.eval(&x, &v);
        }
    }
    acc * density.cell_volume()
}

/// `<J, H^{(eps,mu)}_psi>` evaluated exactly through the momentum lattice,
/// without forming the density: the Husimi smoothings transfer onto J in
/// closed form and the X-part is expanded in box Fourier modes, each mode
/// reducing to a shifted lattice correlation of the momentum wave function.
///
/// Agrees with `weak_test(rescale_macroscopic(husimi(..)))` up to the
/// (exponentially small) velocity-window truncation of the latter.
pub fn smoothed_weak_test(
    psi: &WaveField,
    epsilon: f64,
    mu: f64,
    j: &TestFunction,
    engine: &FftEngine,
) -> Result<f64> {
    let b = psi.box_spec.clone();
    let d = b.dimension;
    let ell1 = epsilon.powf(mu - 1.0);
    let ell2 = epsilon.powf(mu);
    let mom = psi.to_momentum(engine);

    // Build the list of (k_lattice, complex coefficient) for the smoothed,
    // microscopically rescaled X part, and the smoothed V window.
    let dp = b.momentum_spacing();
    let n = b.grid_points_per_side;
    let modes: Vec<(Vec<i64>, C64)> = match j {
        TestFunction::Unit => vec![(vec![0; d], C64::new(1.0, 0.0))],
        TestFunction::CosGauss { k, phase, .. } => {
            // cos(kM . X + phase) -> modes at +/- eps kM, snapped to the even
            // lattice; the smoothing damps by exp(-ell1^2 |k_mic|^2 / 4).
            let mut km = vec![0i64; d];
            for ax in 0..d {
                let target = k.c[ax] * epsilon / dp;
                km[ax] = 2 * (target / 2.0).round() as i64;
            }
            let k_mic_sq: f64 = km.iter().map(|&m| (m as f64 * dp).powi(2)).sum();
            let damp = (-ell1 * ell1 * k_mic_sq / 4.0).exp();
            let half = C64::from_polar(0.5 * damp, *phase);
            let neg: Vec<i64> = km.iter().map(|&m| -m).collect();
            vec![(km, half), (neg, half.conj())]
        }
        TestFunction::GaussGauss { xc, sx, .. } => {
            // Gaussian X part: width in microscopic x after smoothing.
            let s_mic_sq = (sx * sx) / (epsilon * epsilon) + ell1 * ell1 / 2.0;
            let s_mic = s_mic_sq.sqrt();
            let center_mic: Vec<f64> = (0..d).map(|ax| xc.c[ax] / epsilon).collect();
            // Smoothing a unit-peak Gaussian widens it and scales the peak:
            // amplitude (s0^2 / s_mic^2)^{d/2} at the new width s_mic.
            // Fourier coefficients over the box: f_hat(k) =
            // amp (1/L^d) (2 pi s^2)^{d/2} exp(-s^2 k^2/2) e^{-i k . c};
            // the even-lattice series carries 2^d to compensate for the
            // halved mode count (it is the L/2-periodization of f).
            let s0_sq = (sx * sx) / (epsilon * epsilon);
            let amp0 = (s0_sq / s_mic_sq).powf(d as f64 / 2.0)
                * 2.0f64.powi(d as i32)
                * (2.0 * std::f64::consts::PI * s_mic_sq).powf(d as f64 / 2.0)
                / b.side.powi(d as i32);
            let k_max = (4.2 / (s_mic * dp)).ceil() as i64;
            let k_cap = (n as i64) / 2 - 1;
            let k_max = k_max.min(k_cap);
            let mut modes = Vec::new();
            let mut idx = vec![-k_max; d];
            'modes: loop {
                // even-lattice modes only (k/2 must be on the lattice)
                let km: Vec<i64> = idx.iter().map(|&i| 2 * i).collect();
                let k_sq: f64 = km.iter().map(|&m| (m as f64 * dp).powi(2)).sum();
                let mag = amp0 * (-s_mic_sq * k_sq / 2.0).exp();
                if mag > 1e-14 * amp0 {
                    let mut phase = 0.0;
                    for ax in 0..d {
                        phase -= km[ax] as f64 * dp * center_mic[ax];
                    }
                    modes.push((km.clone(), C64::from_polar(mag, phase)));
                }
                let mut ax = d;
                loop {
                    if ax == 0 {
                        break 'modes;
                    }
                    ax -= 1;
                    idx[ax] += 1;
                    if idx[ax] <= k_max {
                        break;
                    }
                    idx[ax] = -k_max;
                }
            }
            // Restricting to the even lattice replaces f by
            // f(x) + f(x - L/2): the ghost copy sits half a box away from
            // the packet (no-wrap precondition), so the error is
            // exponentially small.  See the equivalence test.
            modes
        }
    };

    // Smoothed V window.
    let (vc, sv_sq, v_amp) = match j {
        TestFunction::Unit => (VecD::zero(d), f64::INFINITY, 1.0),
        TestFunction::GaussGauss { vc, sv, .. } | TestFunction::CosGauss { vc, sv, .. } => {
            let s2 = sv * sv + ell2 * ell2 / 2.0;
            let amp = (sv * sv / s2).powf(d as f64 / 2.0);
            (*vc, s2, amp)
        }
    };

    let dpd = dp.powi(d as i32);
    let mut acc = C64::new(0.0, 0.0);
    for (km, coeff) in &modes {
        // term = sum_p conj(psihat(p + k/2)) psihat(p - k/2) g(p) dp^d
        let mut term = C64::new(0.0, 0.0);
        for flat in 0..b.total_points() {
            // p bin per axis
            let mut rem = flat;
            let mut idxs = [0usize; 3];
            for ax in (0..d).rev() {
                idxs[ax] = rem % n;
                rem /= n;
            }
            // g(p)
            let g = if sv_sq.is_infinite() {
                1.0
            } else {
                let mut dv2 = 0.0;
                for ax in 0..d {
                    let p = b.momentum_of_bin(idxs[ax]);
                    let dpv = p - vc.c[ax];
                    dv2 += dpv * dpv;
                }
                v_amp * (-dv2 / (2.0 * sv_sq)).exp()
            };
            if g == 0.0 {
                continue;
            }
            let mut plus = 0usize;
            let mut minus = 0usize;
            let nn = n as i64;
            for ax in 0..d {
                let h = km[ax] / 2;
                let ip = (idxs[ax] as i64 + h).rem_euclid(nn) as usize;
                let im = (idxs[ax] as i64 - h).rem_euclid(nn) as usize;
                plus = plus * n + ip;
                minus = minus * n + im;
            }
            term += mom.amplitudes[plus].conj() * mom.amplitudes[minus] * g;
        }
        acc += coeff * term * dpd;
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schrodinger::{init_wavepacket, BoxSpec, Envelope};
    use approx::assert_relative_eq;

    fn engine() -> FftEngine {
        FftEngine::new()
    }

    fn packet_1d(n: usize, side: f64, eps: f64, u0: f64) -> WaveField {
        let b = BoxSpec::new(side, n, 1).unwrap();
        init_wavepacket(
            &b,
            Envelope::Gaussian { width: 1.0 },
            eps,
            &VecD::new(1, [u0, 0.0, 0.0]),
        )
        .unwrap()
        .field
    }

    #[test]
    fn wigner_marginals_1d() {
        let eng = engine();
        let psi = packet_1d(256, 40.0, 0.5, 0.9);
        let w = wigner_transform(&psi, &eng).unwrap();
        // v marginal -> |psi(x)|^2
        let xm = w.x_marginal();
        for (i, m) in xm.iter().enumerate() {
            let expect = psi.amplitudes[i].norm_sqr();
            assert!((m - expect).abs() < 1e-8, "x {i}: {m} vs {expect}");
        }
        // x marginal -> |psihat(v)|^2 at momentum-lattice nodes (even m).
        let mom = psi.to_momentum(&eng);
        let vm = w.v_marginal();
        let n = 256usize;
        let mut checked = 0;
        for mi in 0..n {
            let v = w.v_axes[0].node(mi);
            // even nodes coincide with the momentum lattice
            let ratio = v / mom.box_spec.momentum_spacing();
            if (ratio - ratio.round()).abs() > 1e-9 {
                continue;
            }
            let bin = crate::schrodinger::nearest_momentum_bin(
                &mom.box_spec,
                &VecD::new(1, [v, 0.0, 0.0]),
            );
            let expect = mom.amplitudes[bin].norm_sqr();
            assert!(
                (vm[mi] - expect).abs() < 1e-8,
                "v {v}: {} vs {expect}",
                vm[mi]
            );
            checked += 1;
        }
        assert!(checked > 100);
        // mass
        assert_relative_eq!(w.mass(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn wigner_gaussian_closed_form() {
        // Free Gaussian packet: W(x,v) = (1/pi) exp(-(x-c)^2/w^2 - w^2 v^2)
        // for a width-w envelope at u0 = 0 (standard-measure normalization).
        let eng = engine();
        let psi = packet_1d(256, 40.0, 1.0, 0.0);
        let w = wigner_transform(&psi, &eng).unwrap();
        let nv = w.v_axes[0].n;
        let mut max_err = 0.0f64;
        for ix in 0..w.x_axes[0].n {
            let x = w.x_axes[0].node(ix) - 20.0;
            for iv in 0..nv {
                let v = w.v_axes[0].node(iv);
                let expect =
                    (1.0 / std::f64::consts::PI) * (-x * x - v * v).exp();
                let got = w.values[ix * nv + iv];
                max_err = max_err.max((got - expect).abs());
            }
        }
        assert!(max_err < 1e-8, "max Wigner error {max_err}");
    }

    #[test]
    fn wigner_shift_covariance_in_v() {
        // Modulating by e^{i u0 x} translates W in v by u0 exactly
        // (u0 on the half lattice).
        let eng = engine();
        let psi0 = packet_1d(128, 32.0, 0.5, 0.0);
        let dv = std::f64::consts::PI / 32.0;
        let shift_bins = 24usize;
        let u0 = shift_bins as f64 * dv;
        let psi1 = packet_1d(128, 32.0, 0.5, u0);
        let w0 = wigner_transform(&psi0, &eng).unwrap();
        let w1 = wigner_transform(&psi1, &eng).unwrap();
        let n = 128usize;
        let mut max_err = 0.0f64;
        for ix in 0..n {
            for iv in 0..n - shift_bins {
                let a = w1.values[ix * n + iv + shift_bins];
                let b = w0.values[ix * n + iv];
                max_err = max_err.max((a - b).abs());
            }
        }
        assert!(max_err < 1e-9, "shift covariance defect {max_err}");
    }

    #[test]
    fn husimi_coherent_scale_positive_mass_one() {
        let eng = engine();
        let psi = packet_1d(256, 40.0, 0.5, 1.1);
        let v_axes = vec![AxisGrid {
            start: 1.1 - 6.0,
            step: 0.05,
            n: 241,
        }];
        // coherent scale: ell1 = ell, ell2 = 1/ell
        let ell = 2.0;
        let h = husimi(&psi, ell, 1.0 / ell, &v_axes, 1, &eng).unwrap();
        assert!(h.min_value() >= -1e-12, "min {}", h.min_value());
        assert_relative_eq!(h.mass(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn husimi_gaussian_closed_form_at_coherent_scale() {
        // For psi = width-w Gaussian at rest and window ell:
        // H(x,v) = (2 pi)^{-1} * 2 w ell/(w^2+ell^2)
        //          * exp(-(x-c)^2/(w^2+ell^2) - v^2 w^2 ell^2/(w^2+ell^2)).
        let eng = engine();
        let psi = packet_1d(256, 40.0, 1.0, 0.0);
        let wdt = 1.0;
        let ell = 1.7;
        let v_axes = vec![AxisGrid {
            start: -3.0,
            step: 0.1,
            n: 61,
        }];
        let h = husimi(&psi, ell, 1.0 / ell, &v_axes, 1, &eng).unwrap();
        let s2 = wdt * wdt + ell * ell;
        let amp = 2.0 * wdt * ell / s2 / (2.0 * std::f64::consts::PI);
        let mut max_err = 0.0f64;
        for ix in 0..h.x_axes[0].n {
            let x = h.x_axes[0].node(ix) - 20.0;
            for iv in 0..61 {
                let v = h.v_axes[0].node(iv);
                let expect = amp * (-x * x / s2 - v * v * wdt * wdt * ell * ell / s2).exp();
                let got = h.values[ix * 61 + iv];
                max_err = max_err.max((got - expect).abs());
            }
        }
        assert!(max_err < 1e-9, "husimi closed-form error {max_err}");
    }

    #[test]
    fn husimi_matches_wigner_convolution() {
        // Independent route: convolve the full Wigner transform with the
        // two Gaussians by direct quadrature at a few probe points.
        let eng = engine();
        let psi = packet_1d(128, 32.0, 0.5, 0.8);
        let ell1 = 2.5;
        let ell2 = 0.6; // ell1*ell2 = 1.5 > 1: composite scale
        let v_axes = vec![AxisGrid {
            start: 0.2,
            step: 0.3,
            n: 5,
        }];
        let h = husimi(&psi, ell1, ell2, &v_axes, 1, &eng).unwrap();
        let w = wigner_transform(&psi, &eng).unwrap();
        let nx = 128usize;
        let g = |z: f64, delta: f64| {
            (2.0 * std::f64::consts::PI * delta * delta).sqrt().recip()
                * (-z * z / (2.0 * delta * delta)).exp()
        };
        for &(ix, iv) in &[(64usize, 2usize), (70, 1), (58, 3)] {
            let x0 = h.x_axes[0].node(ix);
            let v0 = h.v_axes[0].node(iv);
            let mut conv = 0.0;
            for jx in 0..nx {
                let mut zx = w.x_axes[0].node(jx) - x0;
                zx -= (zx / 32.0).round() * 32.0;
                let gx = g(zx, ell1 / 2.0f64.sqrt());
                if gx < 1e-14 {
                    continue;
                }
                for jv in 0..nx {
                    let zv = w.v_axes[0].node(jv) - v0;
                    let gv = g(zv, ell2 / 2.0f64.sqrt());
                    if gv < 1e-14 {
                        continue;
                    }
                    conv += w.values[jx * nx + jv] * gx * gv;
                }
            }
            conv *= w.cell_volume();
            let got = h.values[ix * 5 + iv];
            assert!(
                (got - conv).abs() < 1e-6,
                "husimi vs wigner-convolution at ({ix},{iv}): {got} vs {conv}"
            );
        }
    }

    #[test]
    fn husimi_oversmoothing_flattens_v_marginal() {
        let eng = engine();
        let psi = packet_1d(256, 40.0, 0.5, 1.0);
        let v_axes = vec![AxisGrid {
            start: -4.0,
            step: 0.05,
            n: 201,
        }];
        let mut prev_max = f64::INFINITY;
        for &ell2 in &[0.5, 1.0, 2.0] {
            let ell1 = 8.0; // fixed wide spatial smoothing, ell1*ell2 >= 1
            let h = husimi(&psi, ell1, ell2, &v_axes, 1, &eng).unwrap();
            let vm = h.v_marginal();
            let max = vm.iter().cloned().fold(0.0, f64::max);
            assert!(max <= prev_max * (1.0 + 1e-9), "max not decreasing");
            prev_max = max;
        }
    }

    #[test]
    fn rescale_preserves_mass_and_checks_meta() {
        let eng = engine();
        let eps = 0.5f64;
        let mu = 0.25f64;
        let psi = packet_1d(256, 40.0, eps, 1.0);
        let ell1 = eps.powf(mu - 1.0);
        let ell2 = eps.powf(mu);
        let v_axes = vec![AxisGrid {
            start: 1.0 - 5.0,
            step: 0.05,
            n: 201,
        }];
        let h = husimi(&psi, ell1, ell2, &v_axes, 1, &eng).unwrap();
        let hm = rescale_macroscopic(&h, eps, mu).unwrap();
        assert!((hm.mass() - h.mass()).abs() < 1e-12);
        // eps = 1 is the identity relabeling
        let h1 = husimi(&psi, 1.0, 1.0, &v_axes, 1, &eng).unwrap();
        let r1 = rescale_macroscopic(&h1, 1.0, 0.789).unwrap();
        assert_eq!(r1.x_axes[0].step, h1.x_axes[0].step);
        // mismatched metadata is rejected
        assert!(rescale_macroscopic(&h, eps, mu + 0.1).is_err());
    }

    #[test]
    fn weak_test_unit_is_mass_and_separable_products() {
        let eng = engine();
        let psi = packet_1d(256, 40.0, 0.5, 1.0);
        let v_axes = vec![AxisGrid {
            start: 1.0 - 6.0,
            step: 0.05,
            n: 241,
        }];
        let h = husimi(&psi, 2.0, 0.5, &v_axes, 1, &eng).unwrap();
        assert_relative_eq!(weak_test(&h, &TestFunction::Unit), 1.0, epsilon = 1e-6);
        // Separable J on a product density: product of 1D quadratures.
        let j = TestFunction::GaussGauss {
            xc: VecD::new(1, [20.0, 0.0, 0.0]),
            sx: 5.0,
            vc: VecD::new(1, [1.0, 0.0, 0.0]),
            sv: 0.8,
        };
        let full = weak_test(&h, &j);
        // 1D marginal quadratures (the Husimi of a Gaussian packet is a
        // product density).
        let xm = h.x_marginal();
        let vm = h.v_marginal();
        let jx: f64 = xm
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let x = h.x_axes[0].node(i) - 20.0;
                m * (-x * x / 50.0).exp()
            })
            .sum::<f64>()
            * h.x_axes[0].step;
        let jv: f64 = vm
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let v = h.v_axes[0].node(i) - 1.0;
                m * (-v * v / 1.28).exp()
            })
            .sum::<f64>()
            * h.v_axes[0].step;
        assert_relative_eq!(full, jx * jv, max_relative = 1e-6);
    }

    #[test]
    fn smoothed_weak_test_matches_density_route() {
        let eng = engine();
        let eps = 0.5f64;
        let mu = 0.25f64;
        let psi = packet_1d(512, 60.0, eps, 1.0);
        let ell1 = eps.powf(mu - 1.0);
        let ell2 = eps.powf(mu);
        let v_axes = vec![AxisGrid {
            start: 1.0 - 7.0,
            step: 0.04,
            n: 351,
        }];
        let h = husimi(&psi, ell1, ell2, &v_axes, 1, &eng).unwrap();
        let hm = rescale_macroscopic(&h, eps, mu).unwrap();
        let js = vec![
            TestFunction::Unit,
            TestFunction::GaussGauss {
                xc: VecD::new(1, [eps * 30.0, 0.0, 0.0]),
                sx: 2.0,
                vc: VecD::new(1, [1.0, 0.0, 0.0]),
                sv: 0.7,
            },
            TestFunction::CosGauss {
                k: VecD::new(1, [0.8, 0.0, 0.0]),
                phase: 0.4,
                vc: VecD::new(1, [0.9, 0.0, 0.0]),
                sv: 0.9,
            },
        ];
        for j in &js {
            let via_density = weak_test(&hm, j);
            let direct = smoothed_weak_test(&psi, eps, mu, j, &eng).unwrap();
            // CosGauss snaps k to the even lattice; evaluate the density
            // route with the same snapped mode for comparability.
            let j_eff = match j {
                TestFunction::CosGauss { k, phase, vc, sv } => {
                    let dp = psi.box_spec.momentum_spacing();
                    let snapped = 2.0 * (k.c[0] * eps / dp / 2.0).round() * dp / eps;
                    TestFunction::CosGauss {
                        k: VecD::new(1, [snapped, 0.0, 0.0]),
                        phase: *phase,
                        vc: *vc,
                        sv: *sv,
                    }
                }
                other => other.clone(),
            };
            let via_density = if matches!(j, TestFunction::CosGauss { .. }) {
                weak_test(&hm, &j_eff)
            } else {
                via_density
            };
            assert!(
                (via_density - direct).abs() < 2e-5,
                "{j:?}: density route {via_density} vs lattice route {direct}"
            );
        }
    }

    #[test]
    fn smoothing_scales_below_grid_rejected() {
        let eng = engine();
        let psi = packet_1d(64, 16.0, 0.5, 0.0);
        let v_axes = vec![AxisGrid {
            start: -2.0,
            step: 0.1,
            n: 41,
        }];
        // ell1 below 2 dx
        assert!(husimi(&psi, 0.3, 4.0, &v_axes, 1, &eng).is_err());
        // below coherent scale
        assert!(husimi(&psi, 2.0, 0.2, &v_axes, 1, &eng).is_err());
    }
}
