//! Adaptive Runge-Kutta integration (Cash-Karp 4(5)) for small real systems.

/// Integrate dy/dt = f(t, y) from t0 to t1 with adaptive step control.
/// `y` is updated in place; returns the number of accepted steps.
pub fn integrate_adaptive(
    f: &dyn Fn(f64, &[f64], &mut [f64]),
    t0: f64,
    t1: f64,
    y: &mut [f64],
    rel_tol: f64,
    abs_tol: f64,
) -> usize {
    const A: [[f64; 5]; 5] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
        [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
        [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
        [
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ];
    const B5: [f64; 6] = [
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ];
    const B4: [f64; 6] = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ];
    const C: [f64; 6] = [0.0, 0.2, 0.3, 0.6, 1.0, 7.0 / 8.0];

    let n = y.len();
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut h = dir * ((t1 - t0).abs() / 100.0).min(0.1).max(1e-10);
    let mut k = vec![vec![0.0; n]; 6];
    let mut ytmp = vec![0.0; n];
    let mut accepted = 0;

    while (t1 - t) * dir > 1e-14 * (1.0 + t.abs()) {
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        f(t, y, &mut k[0]);
        for stage in 1..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (s, ks) in k.iter().enumerate().take(stage) {
                    acc += A[stage - 1][s] * ks[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            f(t + C[stage] * h, &ytmp, &mut tail[0]);
        }
        let mut err = 0.0f64;
        for i in 0..n {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for s in 0..6 {
                y5 += B5[s] * k[s][i];
                y4 += B4[s] * k[s][i];
            }
            ytmp[i] = y[i] + h * y5;
            let scale = abs_tol + rel_tol * y[i].abs().max(ytmp[i].abs());
            err = err.max((h * (y5 - y4)).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ytmp);
            accepted += 1;
            let grow = 0.9 * err.powf(-0.2);
            h *= grow.min(5.0).max(0.2);
        } else {
            h *= (0.9 * err.powf(-0.25)).max(0.1);
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            // Step collapse: bail out rather than loop forever.
            break;
        }
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut y = [1.0, 0.0];
        integrate_adaptive(&f, 0.0, 10.0, &mut y, 1e-10, 1e-12);
        assert!((y[0] - 10.0f64.cos()).abs() < 1e-7);
        assert!((y[1] + 10.0f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn stiffish_decay() {
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -40.0 * y[0];
        };
        let mut y = [1.0];
        integrate_adaptive(&f, 0.0, 1.0, &mut y, 1e-9, 1e-12);
        assert!((y[0] - (-40.0f64).exp()).abs() < 1e-12);
    }
}
