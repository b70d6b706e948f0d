//! Quadrature support: Gauss-Legendre rules, composite panels, adaptive
//! refinement, and simplex product rules.

use crate::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
/// Computed by Newton iteration on the Legendre polynomial; cached per n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = (n + 1) / 2;
    for i in 0..half {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A 1D quadrature rule as explicit nodes and weights.
#[derive(Debug, Clone, Default)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn gauss(n: usize, a: f64, b: f64) -> Rule1D {
        let (x, w) = gauss_legendre(n);
        let mid = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        Rule1D {
            nodes: x.iter().map(|&t| mid + hw * t).collect(),
            weights: w.iter().map(|&wi| wi * hw).collect(),
        }
    }

    /// Composite Gauss rule over consecutive panels given by breakpoints.
    pub fn composite(points_per_panel: usize, breaks: &[f64]) -> Rule1D {
        let mut rule = Rule1D::default();
        for w in breaks.windows(2) {
            let sub = Rule1D::gauss(points_per_panel, w[0], w[1]);
            rule.nodes.extend(sub.nodes);
            rule.weights.extend(sub.weights);
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Breakpoints on [0, s_max] geometrically graded toward an interior point
/// `s_star` until panel width `w_min`, elsewhere panels of width ~`w_smooth`.
/// Used for radial grids that must resolve a near-singular shell.
pub fn graded_breaks(s_max: f64, s_star: Option<f64>, w_min: f64, w_smooth: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let push_uniform = |b: &mut Vec<f64>, from: f64, to: f64| {
        if to - from < 1e-300 {
            return;
        }
        let n = ((to - from) / w_smooth).ceil().max(1.0) as usize;
        for k in 1..=n {
            b.push(from + (to - from) * k as f64 / n as f64);
        }
    };
    match s_star {
        Some(s0) if s0 > 0.0 && s0 < s_max => {
            // Geometric grading away from the shell on both sides: the
            // finest panels (width w_min) sit adjacent to s0.
            let mut left = vec![s0];
            let mut w = w_min;
            let mut pos = s0;
            while pos > 0.0 && w < w_smooth {
                pos -= w;
                if pos <= 0.5 * w_min {
                    pos = 0.0;
                }
                left.push(pos);
                if pos == 0.0 {
                    break;
                }
                w *= 1.7;
            }
            let left_end = *left.last().unwrap();
            push_uniform(&mut b, 0.0, left_end);
            left.pop();
            left.reverse();
            b.extend(left);
            let mut w = w_min;
            let mut pos = s0;
            loop {
                let next = pos + w;
                if next >= s_max - 0.5 * w_min {
                    break;
                }
                b.push(next);
                pos = next;
                if w >= w_smooth {
                    break;
                }
                w *= 1.7;
            }
            push_uniform(&mut b, pos, s_max);
        }
        _ => push_uniform(&mut b, 0.0, s_max),
    }
    b.sort_by(|a, c| a.total_cmp(c));
    b.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    b
}

/// Adaptive panel-splitting quadrature for smooth scalar integrands.
/// Bisects panels until the 2n-vs-n Gauss difference is below tolerance.
pub fn adaptive(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut err = 0.0;
    let mut stack = vec![(a, b, 0usize)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = Rule1D::gauss(8, lo, hi).integrate(&mut *f);
        let fine = Rule1D::gauss(16, lo, hi).integrate(&mut *f);
        let e = (fine - coarse).abs();
        if e < abs_floor + rel_tol * fine.abs() || depth >= 40 {
            if depth >= 40 && e > 1e3 * (abs_floor + rel_tol * fine.abs()) {
                return Err(Error::QuadratureNotConverged {
                    residual: e,
                    tol: abs_floor + rel_tol * fine.abs(),
                });
            }
            total += fine;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok((total, err))
}

/// Product Gauss rule on the standard simplex
/// `{a_j >= 0, sum_{j=0}^{m} a_j = t}` parameterized by the free variables
/// `a_1..a_m` (with `a_0 = t - sum`), mapped panel-wise via the Duffy-type
/// substitution so weights stay positive.  Returns nodes as rows of the
/// full (m+1)-vector `[a_0, .., a_m]` together with weights integrating to
/// `t^m / m!` (the simplex volume).
pub fn simplex_rule(t: f64, m: usize, points_per_dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if m == 0 {
        return (vec![vec![t]], vec![1.0]);
    }
    let (x, w) = gauss_legendre(points_per_dim);
    // Map [-1,1] -> [0,1].
    let x: Vec<f64> = x.iter().map(|&t| 0.5 * (t + 1.0)).collect();
    let w: Vec<f64> = w.iter().map(|&t| 0.5 * t).collect();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; m];
    loop {
        // Stick-breaking map: u_k in [0,1] -> simplex, with Jacobian.
        let mut rest = t;
        let mut a = vec![0.0; m + 1];
        let mut jac = 1.0;
        for k in 0..m {
            let u = x[idx[k]];
            // a_k = rest * u, carrying Jacobian rest * du.
            a[k] = rest * u;
            jac *= rest * w[idx[k]];
            rest -= a[k];
        }
        a[m] = rest;
        nodes.push(a);
        weights.push(jac);
        // Odometer increment.
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < points_per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == m {
                return (nodes, weights);
            }
        }
    }
}
