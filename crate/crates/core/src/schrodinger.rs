//! Spectral Schrodinger evolution on a periodic box: grid wave fields,
//! wavepacket initialization, summed obstacle potentials, and a Strang
//! split-step integrator with exact kinetic phases.

use crate::conventions::measure_factor;
use crate::geom::VecD;
use crate::potential::{ObstacleConfig, PotentialSpec};
use crate::{Error, Result, C64};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Periodic simulation box with a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub side: f64,
    pub grid_points_per_side: usize,
    pub dimension: usize,
}

impl BoxSpec {
    pub fn new(side: f64, n: usize, dimension: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::invalid("grid points per side must be a power of two"));
        }
        if !(1..=3).contains(&dimension) {
            return Err(Error::invalid("dimension must be 1, 2 or 3"));
        }
        if side <= 0.0 {
            return Err(Error::invalid("box side must be positive"));
        }
        Ok(BoxSpec {
            side,
            grid_points_per_side: n,
            dimension,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.grid_points_per_side as f64
    }

    pub fn momentum_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.side
    }

    pub fn nyquist_momentum(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    pub fn total_points(&self) -> usize {
        self.grid_points_per_side.pow(self.dimension as u32)
    }

    /// Signed momentum of FFT bin k along one axis.
    pub fn momentum_of_bin(&self, k: usize) -> f64 {
        let n = self.grid_points_per_side;
        let k = k as i64;
        let k_signed = if k < (n as i64 + 1) / 2 { k } else { k - n as i64 };
        k_signed as f64 * self.momentum_spacing()
    }

    pub fn position_of_flat(&self, flat: usize) -> VecD {
        let n = self.grid_points_per_side;
        let dx = self.spacing();
        let mut c = [0.0; 3];
        let mut rem = flat;
        for ax in (0..self.dimension).rev() {
            c[ax] = (rem % n) as f64 * dx;
            rem /= n;
        }
        VecD::new(self.dimension, c)
    }

    pub fn momentum_of_flat(&self, flat: usize) -> VecD {
        let n = self.grid_points_per_side;
        let mut c = [0.0; 3];
        let mut rem = flat;
        for ax in (0..self.dimension).rev() {
            c[ax] = self.momentum_of_bin(rem % n);
            rem /= n;
        }
        VecD::new(self.dimension, c)
    }

    /// Kinetic energy |p|^2/2 of a flat momentum index.
    pub fn kinetic_of_flat(&self, flat: usize) -> f64 {
        let n = self.grid_points_per_side;
        let mut rem = flat;
        let mut e = 0.0;
        for _ in 0..self.dimension {
            let p = self.momentum_of_bin(rem % n);
            rem /= n;
            e += p * p;
        }
        e / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Position,
    Momentum,
}

/// A complex wave function sampled on the box grid.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub box_spec: BoxSpec,
    pub representation: Representation,
    pub amplitudes: Vec<C64>,
}

/// Cached FFT plans shared across fields of equal size.
pub struct FftEngine {
    planner: Mutex<FftPlanner<f64>>,
    plans: Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>,
}

impl Default for FftEngine {
    fn default() -> Self {
        FftEngine {
            planner: Mutex::new(FftPlanner::new()),
            plans: Mutex::new(HashMap::new()),
        }
    }
}

impl FftEngine {
    pub fn new() -> Self {
        Self::default()
    }

    fn plan(&self, n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
        let mut plans = self.plans.lock().unwrap();
        plans
            .entry((n, forward))
            .or_insert_with(|| {
                let mut planner = self.planner.lock().unwrap();
                if forward {
                    planner.plan_fft_forward(n)
                } else {
                    planner.plan_fft_inverse(n)
                }
            })
            .clone()
    }

    /// Unnormalized in-place DFT along every axis of a row-major hypercube.
    pub fn transform_all_axes(&self, data: &mut [C64], n: usize, dim: usize, forward: bool) {
        let plan = self.plan(n, forward);
        let total = data.len();
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let lines = total / n;
            if stride == 1 {
                data.par_chunks_mut(n).for_each(|line| plan.process(line));
            } else {
                let line_starts: Vec<usize> = (0..lines)
                    .map(|l| {
                        let block = l / stride;
                        let offset = l % stride;
                        block * stride * n + offset
                    })
                    .collect();
                let data_ptr = SendPtr(data.as_mut_ptr());
                line_starts.par_iter().for_each_init(
                    || vec![C64::new(0.0, 0.0); n],
                    |scratch, &start| {
                        let ptr = data_ptr;
                        unsafe {
                            for (j, s) in scratch.iter_mut().enumerate() {
                                *s = *ptr.0.add(start + j * stride);
                            }
                        }
                        plan.process(scratch);
                        unsafe {
                            for (j, s) in scratch.iter().enumerate() {
                                *ptr.0.add(start + j * stride) = *s;
                            }
                        }
                    },
                );
            }
        }
    }
}

// Lines along an axis are disjoint, so sharing the raw pointer across the
// parallel gather/scatter is sound.
#[derive(Clone, Copy)]
struct SendPtr(*mut C64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl WaveField {
    pub fn zeros(box_spec: BoxSpec, representation: Representation) -> Self {
        let n = box_spec.total_points();
        WaveField {
            box_spec,
            representation,
            amplitudes: vec![C64::new(0.0, 0.0); n],
        }
    }

    fn grid_weight(&self) -> f64 {
        let w = match self.representation {
            Representation::Position => self.box_spec.spacing(),
            Representation::Momentum => self.box_spec.momentum_spacing(),
        };
        w.powi(self.box_spec.dimension as i32)
    }

    /// Grid-measure L2 norm in the current representation.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        (s * self.grid_weight()).sqrt()
    }

    /// Inner product `<self, other>` with grid measure.
    pub fn inner(&self, other: &WaveField) -> C64 {
        assert_eq!(self.representation, other.representation);
        let s: C64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid_weight()
    }

    pub fn to_momentum(&self, engine: &FftEngine) -> WaveField {
        match self.representation {
            Representation::Momentum => self.clone(),
            Representation::Position => {
                let b = &self.box_spec;
                let d = b.dimension;
                let mut data = self.amplitudes.clone();
                engine.transform_all_axes(&mut data, b.grid_points_per_side, d, true);
                let scale = (measure_factor(1) * b.spacing()).powi(d as i32);
                data.iter_mut().for_each(|v| *v *= scale);
                WaveField {
                    box_spec: b.clone(),
                    representation: Representation::Momentum,
                    amplitudes: data,
                }
            }
        }
    }

    pub fn to_position(&self, engine: &FftEngine) -> WaveField {
        match self.representation {
            Representation::Position => self.clone(),
            Representation::Momentum => {
                let b = &self.box_spec;
                let d = b.dimension;
                let mut data = self.amplitudes.clone();
                engine.transform_all_axes(&mut data, b.grid_points_per_side, d, false);
                let scale = (measure_factor(1) * b.momentum_spacing()).powi(d as i32);
                data.iter_mut().for_each(|v| *v *= scale);
                WaveField {
                    box_spec: b.clone(),
                    representation: Representation::Position,
                    amplitudes: data,
                }
            }
        }
    }
}

/// Smooth macroscopic envelope h, L2-normalized w.r.t. plain Lebesgue measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// `h(y) = (pi w^2)^{-d/4} exp(-y^2 / (2 w^2))`
    Gaussian { width: f64 },
}

impl Envelope {
    pub fn eval(&self, dim: usize, y: &VecD) -> f64 {
        match self {
            Envelope::Gaussian { width } => {
                let w2 = width * width;
                (std::f64::consts::PI * w2).powf(-(dim as f64) / 4.0)
                    * (-y.norm_sq() / (2.0 * w2)).exp()
            }
        }
    }

    pub fn width(&self) -> f64 {
        match self {
            Envelope::Gaussian { width } => *width,
        }
    }
}

/// Result of initializing a wavepacket.
pub struct InitializedPacket {
    pub field: WaveField,
    pub renormalization: f64,
}

/// Sample `eps^{d/2} h(eps (x - center)) exp(i u0 x)` on the grid, centered
/// in the box, and renormalize to unit grid norm.
pub fn init_wavepacket(
    box_spec: &BoxSpec,
    envelope: Envelope,
    epsilon: f64,
    u0: &VecD,
) -> Result<InitializedPacket> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon must lie in (0, 1]"));
    }
    let d = box_spec.dimension;
    if u0.dim != d {
        return Err(Error::invalid("u0 dimension mismatch"));
    }
    let env_width = envelope.width() / epsilon;
    if env_width > box_spec.side / 4.0 {
        return Err(Error::invalid(format!(
            "envelope width {env_width:.2} exceeds L/4 = {:.2}; the packet would clip",
            box_spec.side / 4.0
        )));
    }
    if u0.norm() > 2.0 / 3.0 * box_spec.nyquist_momentum() {
        return Err(Error::invalid(
            "initial momentum above 2/3 of the grid Nyquist momentum",
        ));
    }
    let n = box_spec.grid_points_per_side;
    let center = box_spec.side / 2.0;
    let dx = box_spec.spacing();
    let mut field = WaveField::zeros(box_spec.clone(), Representation::Position);
    for (flat, amp) in field.amplitudes.iter_mut().enumerate() {
        let mut rem = flat;
        let mut y = [0.0; 3];
        let mut phase = 0.0;
        for ax in (0..d).rev() {
            let x = (rem % n) as f64 * dx;
            rem /= n;
            y[ax] = epsilon * (x - center);
            phase += u0.c[ax] * x;
        }
        let h = envelope.eval(d, &VecD::new(d, y));
        let mag = epsilon.powf(d as f64 / 2.0) * h;
        *amp = C64::from_polar(mag, phase);
    }
    let norm = field.norm();
    if norm == 0.0 {
        return Err(Error::Numerical("wavepacket sampled to zero".into()));
    }
    let renormalization = 1.0 / norm;
    field.amplitudes.iter_mut().for_each(|a| *a *= renormalization);
    Ok(InitializedPacket {
        field,
        renormalization,
    })
}

/// Periodic sum of translated single-obstacle potentials on the grid.
/// Short-range profiles use minimum-image patches; the image tail beyond the
/// profile cutoff is below 1e-12 of the amplitude by construction.
pub fn build_potential_field(
    box_spec: &BoxSpec,
    obstacles: &ObstacleConfig,
    spec: &PotentialSpec,
) -> Result<Vec<f64>> {
    if (obstacles.box_side - box_spec.side).abs() > 1e-9 * box_spec.side {
        return Err(Error::invalid("obstacle box does not match the grid box"));
    }
    if obstacles.dim != box_spec.dimension {
        return Err(Error::invalid("obstacle dimension mismatch"));
    }
    let r_cut = spec.cutoff_radius();
    if r_cut > box_spec.side / 2.0 {
        return Err(Error::invalid(format!(
            "potential cutoff radius {r_cut:.2} exceeds half the box side"
        )));
    }
    let d = box_spec.dimension;
    let n = box_spec.grid_points_per_side as i64;
    let dx = box_spec.spacing();
    let mut field = vec![0.0f64; box_spec.total_points()];
    let reach = (r_cut / dx).ceil() as i64;
    let r_cut_sq = r_cut * r_cut;

    for c in &obstacles.centers {
        let base: Vec<i64> = (0..d).map(|ax| (c.c[ax] / dx).round() as i64).collect();
        let mut offs = vec![-reach; d];
        'patch: loop {
            let mut dist_sq = 0.0;
            let mut flat: usize = 0;
            for ax in 0..d {
                let gi = base[ax] + offs[ax];
                let x = gi as f64 * dx;
                let mut dxw = x - c.c[ax];
                dxw -= (dxw / box_spec.side).round() * box_spec.side;
                dist_sq += dxw * dxw;
                let wrapped = gi.rem_euclid(n) as usize;
                flat = flat * n as usize + wrapped;
            }
            if dist_sq <= r_cut_sq {
                field[flat] += spec.eval_position(dist_sq.sqrt());
            }
            let mut ax = d;
            loop {
                if ax == 0 {
                    break 'patch;
                }
                ax -= 1;
                offs[ax] += 1;
                if offs[ax] <= reach {
                    break;
                }
                offs[ax] = -reach;
            }
        }
    }
    Ok(field)
}

/// Strang split-step evolution `exp(-iV dt/2) exp(+i Delta dt/2) exp(-iV dt/2)`
/// per step, kinetic factor exact in momentum space.  `dt` may be negative.
pub fn evolve_split_step(
    psi: &WaveField,
    potential_field: &[f64],
    dt: f64,
    steps: usize,
    engine: &FftEngine,
) -> Result<WaveField> {
    let b = psi.box_spec.clone();
    if potential_field.len() != b.total_points() {
        return Err(Error::invalid("potential field size mismatch"));
    }
    let mut field = psi.to_position(engine);
    if steps == 0 {
        return Ok(field);
    }
    let d = b.dimension;
    let n = b.grid_points_per_side;

    let half_v: Vec<C64> = potential_field
        .par_iter()
        .map(|&v| C64::from_polar(1.0, -v * dt / 2.0))
        .collect();
    let full_v: Vec<C64> = potential_field
        .par_iter()
        .map(|&v| C64::from_polar(1.0, -v * dt))
        .collect();
    // Kinetic phase table, including the inverse-FFT 1/N^d normalization.
    let inv_total = 1.0 / b.total_points() as f64;
    let kinetic: Vec<C64> = (0..b.total_points())
        .into_par_iter()
        .map(|flat| C64::from_polar(inv_total, -b.kinetic_of_flat(flat) * dt))
        .collect();

    let apply = |data: &mut [C64], table: &[C64]| {
        data.par_iter_mut()
            .zip(table.par_iter())
            .for_each(|(a, t)| *a *= t);
    };

    // Potential half-steps fused between consecutive steps.
    apply(&mut field.amplitudes, &half_v);
    for step in 0..steps {
        engine.transform_all_axes(&mut field.amplitudes, n, d, true);
        apply(&mut field.amplitudes, &kinetic);
        engine.transform_all_axes(&mut field.amplitudes, n, d, false);
        if step + 1 < steps {
            apply(&mut field.amplitudes, &full_v);
        } else {
            apply(&mut field.amplitudes, &half_v);
        }
        if step % 64 == 63 || step + 1 == steps {
            let probe = field.amplitudes[0].re + field.amplitudes[field.amplitudes.len() / 2].re;
            if !probe.is_finite() {
                return Err(Error::EvolutionNan { step });
            }
        }
    }
    Ok(field)
}

/// Grid norm, kinetic energy `<p^2/2>` and potential energy `<V>`.
pub fn norm_and_energy(
    psi: &WaveField,
    potential_field: &[f64],
    engine: &FftEngine,
) -> Result<(f64, f64, f64)> {
    let b = &psi.box_spec;
    if potential_field.len() != b.total_points() {
        return Err(Error::invalid("potential field size mismatch"));
    }
    let pos = psi.to_position(engine);
    let mom = psi.to_momentum(engine);
    let norm = pos.norm();
    let dxd = b.spacing().powi(b.dimension as i32);
    let dpd = b.momentum_spacing().powi(b.dimension as i32);
    let potential: f64 = pos
        .amplitudes
        .iter()
        .zip(potential_field)
        .map(|(a, &v)| a.norm_sqr() * v)
        .sum::<f64>()
        * dxd;
    let kinetic: f64 = mom
        .amplitudes
        .iter()
        .enumerate()
        .map(|(flat, a)| a.norm_sqr() * b.kinetic_of_flat(flat))
        .sum::<f64>()
        * dpd;
    Ok((norm, kinetic, potential))
}

/// Flat index of the momentum-grid bin nearest to a target momentum.
pub fn nearest_momentum_bin(b: &BoxSpec, target: &VecD) -> usize {
    let n = b.grid_points_per_side as i64;
    let dp = b.momentum_spacing();
    let mut flat: i64 = 0;
    for ax in 0..b.dimension {
        let k = (target.c[ax] / dp).round() as i64;
        flat = flat * n + k.rem_euclid(n);
    }
    flat as usize
}
