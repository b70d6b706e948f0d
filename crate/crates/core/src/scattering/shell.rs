//! Shared on-shell evaluation context: one Born engine per (potential,
//! speed), reused across the eta ladder and the whole angle grid.

use super::born::{suggest_s_max, BornEngine, BornOptions};
use super::tmatrix::{extrapolate_ladder, EtaLadder, TMatrixPoint};
use crate::potential::PotentialSpec;
use crate::quad::gauss_legendre;
use crate::{Error, Result, C64};

/// On-shell context at fixed speed.
pub struct ShellContext {
    pub dim: usize,
    pub speed: f64,
    engine: BornEngine,
    ladder: EtaLadder,
    k_max: usize,
    /// Per eta rung: the iterated collision chain vectors f^(k), k >= 0,
    /// starting from V^(. - r) with r on the axis, |r| = speed.
    chains: Vec<Vec<Vec<C64>>>,
    lambda0: f64,
}

impl ShellContext {
    pub fn new(
        spec: &PotentialSpec,
        dim: usize,
        speed: f64,
        ladder: &EtaLadder,
        k_max: usize,
    ) -> Result<Self> {
        if speed <= 0.0 {
            return Err(Error::invalid("speed must be positive"));
        }
        ladder.validate()?;
        let alpha = speed * speed / 2.0;
        let engine = BornEngine::new(
            spec,
            dim,
            alpha,
            ladder.smallest(),
            suggest_s_max(spec, alpha, speed),
            BornOptions::default(),
        )?;
        // Precompute the chains; they are target-independent.
        let mut chains = Vec::with_capacity(ladder.0.len());
        for &eta in &ladder.0 {
            let mut chain = vec![engine.initial_vector(speed)];
            for _ in 1..k_max.max(1) {
                let next = engine.apply(eta, chain.last().unwrap());
                chain.push(next);
            }
            chains.push(chain);
        }
        Ok(ShellContext {
            dim,
            speed,
            engine,
            ladder: ladder.clone(),
            k_max,
            chains,
            lambda0: spec.amplitude,
        })
    }

    /// Regularized kernel at one ladder rung, summed over the chain, with
    /// divergence detection.
    fn b_eta_at(&self, rung: usize, cos_theta: f64) -> Result<C64> {
        let eta = self.ladder.0[rung];
        // zeroth term: V^(u - r) with |u| = |r| = speed
        let q = (2.0 * self.speed * self.speed * (1.0 - cos_theta)).max(0.0).sqrt();
        let mut sum = C64::new(self.engine.vhat(q), 0.0);
        let mut prev = sum.norm().max(1e-300);
        let mut growth = 0usize;
        let mut ratios = [0.0f64; 3];
        for f in &self.chains[rung] {
            let term = self.engine.eval_at(eta, self.speed, cos_theta, f);
            sum += term;
            let mag = term.norm();
            let ratio = mag / prev;
            ratios.rotate_left(1);
            ratios[2] = ratio;
            if ratio > 1.0 {
                growth += 1;
                if growth >= 3 {
                    return Err(Error::BornDivergence {
                        lambda0: self.lambda0,
                        ratios,
                    });
                }
            } else {
                growth = 0;
            }
            if mag < 1e-11 * sum.norm().max(1e-300) {
                break;
            }
            prev = mag.max(1e-300);
        }
        Ok(sum)
    }

    /// Extrapolated on-shell T at a scattering angle.
    pub fn t_at(&self, cos_theta: f64) -> Result<TMatrixPoint> {
        let mut vals = Vec::with_capacity(self.ladder.0.len());
        for rung in 0..self.ladder.0.len() {
            vals.push(self.b_eta_at(rung, cos_theta)?);
        }
        let (value, residual) = extrapolate_ladder(&self.ladder.0, &vals)?;
        Ok(TMatrixPoint {
            value,
            residual,
            terms_kept: self.k_max,
        })
    }

    /// Differential cross section per unit solid angle.
    pub fn diff_at(&self, cos_theta: f64) -> Result<f64> {
        let t = self.t_at(cos_theta)?;
        Ok(crate::conventions::shell_factor(self.dim, self.speed) * t.value.norm_sqr())
    }

    /// Total cross section at a given angular resolution.
    pub fn total_n(&self, n_angle: usize) -> Result<f64> {
        let (nodes, weights) = gauss_legendre(n_angle);
        let sf = crate::conventions::shell_factor(self.dim, self.speed);
        match self.dim {
            3 => {
                let mut acc = 0.0;
                for (&ct, &w) in nodes.iter().zip(&weights) {
                    let t = self.t_at(ct)?;
                    acc += w * sf * t.value.norm_sqr();
                }
                Ok(acc * 2.0 * std::f64::consts::PI)
            }
            2 => {
                let mut acc = 0.0;
                for (&x, &w) in nodes.iter().zip(&weights) {
                    let theta = (x + 1.0) * std::f64::consts::PI / 2.0;
                    let t = self.t_at(theta.cos())?;
                    acc += w * (std::f64::consts::PI / 2.0) * sf * t.value.norm_sqr();
                }
                Ok(acc * 2.0)
            }
            _ => Err(Error::invalid("d = 2 or 3")),
        }
    }

    /// Total cross section with an n-vs-2n refinement check (1e-4 relative).
    pub fn total(&self) -> Result<f64> {
        let coarse = self.total_n(20)?;
        let fine = self.total_n(40)?;
        let rel = (coarse - fine).abs() / fine.abs().max(1e-300);
        if rel > 1e-4 && fine.abs() > 1e-14 {
            return Err(Error::QuadratureNotConverged {
                residual: rel,
                tol: 1e-4,
            });
        }
        Ok(fine)
    }
}
