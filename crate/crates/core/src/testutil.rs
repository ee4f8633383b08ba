//! Test-only oracles kept independent of the implementation paths they check.

use crate::dynamics::LorenzModel;

/// Adaptive Dormand-Prince 5(4) integration of the Lorenz equations,
/// driven to a local error tolerance of ~1e-12. Serves as the reference
/// for the fixed-step RK4 map.
pub fn lorenz_reference(m: &LorenzModel, x0: [f64; 3], t_end: f64) -> [f64; 3] {
    let rhs = |u: [f64; 3]| -> [f64; 3] {
        [
            m.sigma * (u[1] - u[0]),
            u[0] * (m.rho - u[2]) - u[1],
            u[0] * u[1] - m.beta * u[2],
        ]
    };

    // Butcher tableau of the Dormand-Prince 5(4) pair.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    const TOL: f64 = 1e-12;

    let mut t = 0.0;
    let mut y = x0;
    let mut h = (t_end / 10.0).min(1e-3);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k = [[0.0; 3]; 7];
        k[0] = rhs(y);
        for s in 1..7 {
            let mut ys = y;
            for j in 0..s {
                let a = A[s - 1][j];
                for i in 0..3 {
                    ys[i] += h * a * k[j][i];
                }
            }
            k[s] = rhs(ys);
        }
        let mut y5 = y;
        let mut y4 = y;
        for (j, kj) in k.iter().enumerate() {
            for i in 0..3 {
                y5[i] += h * B5[j] * kj[i];
                y4[i] += h * B4[j] * kj[i];
            }
        }
        let err = (0..3)
            .map(|i| (y5[i] - y4[i]).abs())
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        if err <= TOL {
            t += h;
            y = y5;
        }
        h *= (0.9 * (TOL / err).powf(0.2)).clamp(0.2, 5.0);
    }
    y
}

/// Arithmetic mean.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation (normalized by `n`).
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}
