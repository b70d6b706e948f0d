//! Small dimension-generic vectors (d = 1, 2, 3) used for momenta,
//! positions and directions.

use serde::{Deserialize, Serialize};

/// A point or vector in d dimensions, d <= 3.  Unused components are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VecD {
    pub dim: usize,
    pub c: [f64; 3],
}

impl VecD {
    pub fn new(dim: usize, c: [f64; 3]) -> Self {
        debug_assert!((1..=3).contains(&dim));
        let mut c = c;
        for k in dim..3 {
            c[k] = 0.0;
        }
        VecD { dim, c }
    }

    pub fn zero(dim: usize) -> Self {
        VecD::new(dim, [0.0; 3])
    }

    pub fn from_slice(dim: usize, s: &[f64]) -> Self {
        let mut c = [0.0; 3];
        c[..dim].copy_from_slice(&s[..dim]);
        VecD { dim, c }
    }

    pub fn dot(&self, other: &VecD) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for k in 0..self.dim {
            s += self.c[k] * other.c[k];
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, a: f64) -> VecD {
        let mut c = self.c;
        for x in &mut c {
            *x *= a;
        }
        VecD { dim: self.dim, c }
    }

    pub fn add(&self, other: &VecD) -> VecD {
        debug_assert_eq!(self.dim, other.dim);
        let mut c = self.c;
        for k in 0..3 {
            c[k] += other.c[k];
        }
        VecD { dim: self.dim, c }
    }

    pub fn sub(&self, other: &VecD) -> VecD {
        debug_assert_eq!(self.dim, other.dim);
        let mut c = self.c;
        for k in 0..3 {
            c[k] -= other.c[k];
        }
        VecD { dim: self.dim, c }
    }

    pub fn normalized(&self) -> VecD {
        let n = self.norm();
        debug_assert!(n > 0.0);
        self.scale(1.0 / n)
    }

    /// Unit vector at polar angle `acos(cos_theta)` from `axis`, azimuth `phi`
    /// in an arbitrary but fixed frame orthogonal to `axis`.
    /// In 2D, `phi` only selects the sign of the rotation (phi < pi -> +).
    pub fn rotate_from_axis(axis: &VecD, cos_theta: f64, phi: f64) -> VecD {
        let dim = axis.dim;
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        match dim {
            2 => {
                let s = if phi < std::f64::consts::PI { 1.0 } else { -1.0 };
                let (ax, ay) = (axis.c[0], axis.c[1]);
                VecD::new(
                    2,
                    [
                        cos_theta * ax - s * sin_theta * ay,
                        s * sin_theta * ax + cos_theta * ay,
                        0.0,
                    ],
                )
            }
            3 => {
                // Orthonormal pair completing the axis.
                let a = axis.normalized();
                let helper = if a.c[0].abs() < 0.9 {
                    VecD::new(3, [1.0, 0.0, 0.0])
                } else {
                    VecD::new(3, [0.0, 1.0, 0.0])
                };
                let e1 = {
                    let proj = a.scale(helper.dot(&a));
                    helper.sub(&proj).normalized()
                };
                let e2 = VecD::new(
                    3,
                    [
                        a.c[1] * e1.c[2] - a.c[2] * e1.c[1],
                        a.c[2] * e1.c[0] - a.c[0] * e1.c[2],
                        a.c[0] * e1.c[1] - a.c[1] * e1.c[0],
                    ],
                );
                a.scale(cos_theta)
                    .add(&e1.scale(sin_theta * phi.cos()))
                    .add(&e2.scale(sin_theta * phi.sin()))
            }
            _ => panic!("rotate_from_axis requires d = 2 or 3"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_preserves_angle_and_norm() {
        let axis = VecD::new(3, [0.3, -0.5, 0.81]).normalized();
        for &(ct, phi) in &[(0.2, 1.1), (-0.7, 4.4), (1.0, 0.0), (-1.0, 2.2)] {
            let w = VecD::rotate_from_axis(&axis, ct, phi);
            assert!((w.norm() - 1.0).abs() < 1e-12);
            assert!((w.dot(&axis) - ct).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_2d_signed() {
        let axis = VecD::new(2, [1.0, 0.0, 0.0]);
        let w = VecD::rotate_from_axis(&axis, 0.0, 0.1);
        assert!((w.c[1] - 1.0).abs() < 1e-12);
        let w = VecD::rotate_from_axis(&axis, 0.0, 5.0);
        assert!((w.c[1] + 1.0).abs() < 1e-12);
    }
}
