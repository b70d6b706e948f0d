//! Special functions used by the partial-wave machinery: Legendre
//! polynomials and Riccati-Bessel functions (elementary in 3D).

/// Legendre polynomial P_l(x) by upward recurrence.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=l {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Riccati-Bessel functions `S_l(x) = x j_l(x)` and `C_l(x) = -x y_l(x)`
/// together with their derivatives, for l = 0..=l_max.
///
/// `S_l` is computed by downward recurrence (stable), `C_l` upward.
pub fn riccati_bessel(l_max: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    assert!(x > 0.0);
    let n = l_max + 1;
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];

    // C_l upward: C_0 = cos x, C_1 = cos x / x + sin x.
    c[0] = x.cos();
    if n > 1 {
        c[1] = x.cos() / x + x.sin();
        for l in 1..l_max {
            c[l + 1] = (2.0 * l as f64 + 1.0) / x * c[l] - c[l - 1];
        }
    }

    // S_l downward from a start order well above both l_max and x.
    let start = l_max + 16 + (1.5 * x) as usize;
    let mut sp = 0.0f64; // S_{l+1}, unnormalized
    let mut sc = 1e-280; // S_l at l = start, arbitrary scale
    let mut stored = vec![0.0; n];
    for l in (0..=start).rev() {
        // S_{l-1} = (2l+1)/x S_l - S_{l+1}
        let s_lm1 = (2.0 * l as f64 + 1.0) / x * sc - sp;
        if l <= l_max {
            stored[l] = sc;
        }
        sp = sc;
        sc = s_lm1;
        if sc.abs() > 1e250 {
            for v in &mut stored {
                *v /= 1e250;
            }
            sp /= 1e250;
            sc /= 1e250;
        }
    }
    // After the loop sc = S_{-1} (unnormalized); true S_{-1} = cos x,
    // S_0 = sin x.  Normalize with whichever anchor is larger.
    let scale = if x.sin().abs() > x.cos().abs() {
        x.sin() / stored[0]
    } else {
        x.cos() / sc
    };
    for l in 0..n {
        s[l] = stored[l] * scale;
    }

    // Derivatives from the recurrences:
    // S_l' = S_{l-1} - l/x S_l  (with S_{-1} = cos x)
    // C_l' = C_{l-1} - l/x C_l  (with C_{-1} = -sin x)
    let mut ds = vec![0.0; n];
    let mut dc = vec![0.0; n];
    ds[0] = x.cos();
    dc[0] = -x.sin();
    for l in 1..n {
        ds[l] = s[l - 1] - l as f64 / x * s[l];
        dc[l] = c[l - 1] - l as f64 / x * c[l];
    }
    (s, c, ds, dc)
}

/// Cylinder Bessel J_0 (rational/asymptotic approximation, ~1e-8 absolute).
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let p1 = 57568490574.0
            + y * (-13362590354.0
                + y * (651619640.7 + y * (-11214424.18 + y * (77392.33017 + y * -184.9052456))));
        let p2 = 57568490411.0
            + y * (1029532985.0
                + y * (9494680.718 + y * (59272.64853 + y * (267.8532712 + y))));
        p1 / p2
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 0.785398164;
        let p1 = 1.0
            + y * (-0.1098628627e-2
                + y * (0.2734510407e-4 + y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
        let p2 = -0.1562499995e-1
            + y * (0.1430488765e-3
                + y * (-0.6911147651e-5 + y * (0.7621095161e-6 + y * -0.934935152e-7)));
        (0.636619772 / ax).sqrt() * (xx.cos() * p1 - z * xx.sin() * p2)
    }
}

/// Cylinder Bessel J_1.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let val = if ax < 8.0 {
        let y = x * x;
        let p1 = x * (72362614232.0
            + y * (-7895059235.0
                + y * (242396853.1 + y * (-2972611.439 + y * (15704.48260 + y * -30.16036606)))));
        let p2 = 144725228442.0
            + y * (2300535178.0
                + y * (18583304.74 + y * (99447.43394 + y * (376.9991397 + y))));
        p1 / p2
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 2.356194491;
        let p1 = 1.0
            + y * (0.183105e-2
                + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * -0.240337019e-6)));
        let p2 = 0.04687499995
            + y * (-0.2002690873e-3
                + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        (0.636619772 / ax).sqrt() * (xx.cos() * p1 - z * xx.sin() * p2)
    };
    if x < 0.0 {
        -val
    } else {
        val
    }
}

/// Cylinder Bessel Y_0 (x > 0).
pub fn bessel_y0(x: f64) -> f64 {
    assert!(x > 0.0);
    if x < 8.0 {
        let y = x * x;
        let p1 = -2957821389.0
            + y * (7062834065.0
                + y * (-512359803.6 + y * (10879881.29 + y * (-86327.92757 + y * 228.4622733))));
        let p2 = 40076544269.0
            + y * (745249964.8
                + y * (7189466.438 + y * (47447.26470 + y * (226.1030244 + y))));
        p1 / p2 + 0.636619772 * bessel_j0(x) * x.ln()
    } else {
        let z = 8.0 / x;
        let y = z * z;
        let xx = x - 0.785398164;
        let p1 = 1.0
            + y * (-0.1098628627e-2
                + y * (0.2734510407e-4 + y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
        let p2 = -0.1562499995e-1
            + y * (0.1430488765e-3
                + y * (-0.6911147651e-5 + y * (0.7621095161e-6 + y * -0.934935152e-7)));
        (0.636619772 / x).sqrt() * (xx.sin() * p1 + z * xx.cos() * p2)
    }
}

/// Cylinder Bessel Y_1 (x > 0).
pub fn bessel_y1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x < 8.0 {
        let y = x * x;
        let p1 = x * (-4.900604943e13
            + y * (1.275274390e13
                + y * (-5.153438139e11
                    + y * (7.349264551e9 + y * (-4.237922726e7 + y * 8.511937935e4)))));
        let p2 = 2.499580570e14
            + y * (4.244419664e12
                + y * (3.733650367e10
                    + y * (2.245904002e8 + y * (1.020426050e6 + y * (3.549632885e3 + y)))));
        p1 / p2 + 0.636619772 * (bessel_j1(x) * x.ln() - 1.0 / x)
    } else {
        let z = 8.0 / x;
        let y = z * z;
        let xx = x - 2.356194491;
        let p1 = 1.0
            + y * (0.183105e-2
                + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * -0.240337019e-6)));
        let p2 = 0.04687499995
            + y * (-0.2002690873e-3
                + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        (0.636619772 / x).sqrt() * (xx.sin() * p1 + z * xx.cos() * p2)
    }
}

/// Arrays of J_l(x), Y_l(x) and derivatives for l = 0..=l_max.
/// J by downward recurrence (Miller), Y upward (always stable).
pub fn cylinder_bessel_jy(l_max: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    assert!(x > 0.0);
    let n = l_max + 1;
    let mut jv = vec![0.0; n];
    let mut yv = vec![0.0; n];
    yv[0] = bessel_y0(x);
    if n > 1 {
        yv[1] = bessel_y1(x);
        for l in 1..l_max {
            yv[l + 1] = 2.0 * l as f64 / x * yv[l] - yv[l - 1];
        }
    }
    let start = l_max + 18 + (1.3 * x) as usize;
    let mut jp = 0.0f64;
    let mut jc = 1e-280f64;
    let mut stored = vec![0.0; n];
    for l in (0..=start).rev() {
        // J_{l-1} = 2l/x J_l - J_{l+1}
        let j_lm1 = 2.0 * l as f64 / x * jc - jp;
        if l <= l_max {
            stored[l] = jc;
        }
        jp = jc;
        jc = j_lm1;
        if jc.abs() > 1e250 {
            for v in &mut stored {
                *v /= 1e250;
            }
            jp /= 1e250;
            jc /= 1e250;
        }
    }
    let j0 = bessel_j0(x);
    let j1 = bessel_j1(x);
    let scale = if j0.abs() > j1.abs() || n == 1 {
        j0 / stored[0]
    } else {
        j1 / stored[1]
    };
    for l in 0..n {
        jv[l] = stored[l] * scale;
    }
    // f_l' = f_{l-1} - l/x f_l, with f_{-1}' convention f_0' = -f_1.
    let mut dj = vec![0.0; n];
    let mut dy = vec![0.0; n];
    dj[0] = -j1;
    dy[0] = -bessel_y1(x);
    for l in 1..n {
        dj[l] = jv[l - 1] - l as f64 / x * jv[l];
        dy[l] = yv[l - 1] - l as f64 / x * yv[l];
    }
    (jv, yv, dj, dy)
}
