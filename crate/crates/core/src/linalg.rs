//! Small dense complex matrices: just enough for the Opitz evaluation of
//! divided differences of the exponential.

use crate::C64;

/// Dense column-major complex matrix, n <= ~16.
#[derive(Debug, Clone)]
pub struct CMat {
    pub n: usize,
    pub a: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            a: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.a[j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[j * self.n + i] = v;
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let b = other.a[j * n + k];
                if b.norm_sqr() == 0.0 {
                    continue;
                }
                for i in 0..n {
                    out.a[j * n + i] += self.a[k * n + i] * b;
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.a {
            *v *= s;
        }
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[j * n + i].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling and squaring with a Taylor series on
    /// the scaled matrix.  Adequate for the small matrices used here.
    pub fn expm(&self) -> CMat {
        let norm = self.one_norm();
        let s = if norm > 0.25 {
            (norm / 0.25).log2().ceil() as u32
        } else {
            0
        };
        let mut m = self.clone();
        m.scale(0.5f64.powi(s as i32));
        // Taylor: exp(m) = sum m^k / k!
        let mut term = CMat::eye(self.n);
        let mut sum = CMat::eye(self.n);
        for k in 1..=24 {
            term = term.matmul(&m);
            term.scale(1.0 / k as f64);
            for (acc, t) in sum.a.iter_mut().zip(&term.a) {
                *acc += t;
            }
            if term.one_norm() < 1e-18 * sum.one_norm() {
                break;
            }
        }
        for _ in 0..s {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

/// Divided difference `f[x_0, .., x_m]` of `f(x) = exp(c * x)` over complex
/// nodes, evaluated via the Opitz formula: it is the (0, m) entry of
/// `exp(c * J)` where `J` is bidiagonal with the nodes on the diagonal and
/// ones above it.  Uniformly stable for clustered and coincident nodes.
pub fn divided_difference_exp(c: C64, nodes: &[C64]) -> C64 {
    let n = nodes.len();
    assert!(n >= 1);
    if n == 1 {
        return (c * nodes[0]).exp();
    }
    // exp(c J) with J bidiagonal (diag x_j, unit superdiagonal): the
    // (0, m) entry is exactly f[x_0, .., x_m] for f = exp(c .).
    let mut j = CMat::zeros(n);
    for (i, &x) in nodes.iter().enumerate() {
        j.set(i, i, c * x);
        if i + 1 < n {
            j.set(i, i + 1, c);
        }
    }
    j.expm().at(0, n - 1)
}
