use super::matrix::DenseMatrix;
use super::NumericsError;

/// Dormand-Prince 4(5) node points.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

/// Runge-Kutta matrix (strictly lower triangular rows).
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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

// The last row of A doubles as the fifth-order solution weights (FSAL).

/// Error-estimate weights: fifth-order minus embedded fourth-order.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Order-4 continuous-extension coefficients: the interpolation weight of
/// stage i at fraction theta is theta*(BI[i][0] + theta*(BI[i][1] + ...)).
const BI: [[f64; 4]; 7] = [
    [1.0, -183.0 / 64.0, 37.0 / 12.0, -145.0 / 128.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 1500.0 / 371.0, -1000.0 / 159.0, 1000.0 / 371.0],
    [0.0, -125.0 / 32.0, 125.0 / 12.0, -375.0 / 64.0],
    [0.0, 9477.0 / 3392.0, -729.0 / 106.0, 25515.0 / 6784.0],
    [0.0, -11.0 / 7.0, 11.0 / 3.0, -55.0 / 28.0],
    [0.0, 3.0 / 2.0, -4.0, 5.0 / 2.0],
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - 0.75 * BETA;
const FACMIN: f64 = 0.2;
const FACMAX: f64 = 10.0;
const MIN_STEP: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

/// Trajectory sampled on the caller's output grid via dense output.
#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub grid_times: Vec<f64>,
    /// Row t holds the state at grid_times[t].
    pub states: DenseMatrix,
    /// Row t holds the derivative recomputed at (grid_times[t], states row t),
    /// so reported accelerations satisfy the ODE at grid points.
    pub rhs_values: DenseMatrix,
    pub stats: OdeStats,
}

/// Adaptive Dormand-Prince 4(5) with PI step control, FSAL, and the order-4
/// continuous extension for grid sampling. Maximum step defaults to one tenth
/// of the span.
pub fn integrate_rk45<F>(
    mut rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    rtol: f64,
    atol: f64,
    output_grid: &[f64],
) -> Result<OdeSolution, NumericsError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (t0, t_end) = t_span;
    assert!(t_end > t0, "integration span must be forward and nonempty");
    let n = y0.len();
    let span = t_end - t0;
    let max_step = span / 10.0;

    for w in output_grid.windows(2) {
        assert!(w[1] > w[0], "output grid must be strictly increasing");
    }
    if let (Some(&first), Some(&last)) = (output_grid.first(), output_grid.last()) {
        if first < t0 - 1e-12 || last > t_end + 1e-12 {
            return Err(NumericsError::GridOutOfSpan);
        }
    }

    let mut stats = OdeStats::default();
    let mut states = DenseMatrix::zeros(output_grid.len(), n);
    let mut grid_idx = 0;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    // Grid points sitting exactly at the start take the initial state.
    while grid_idx < output_grid.len() && output_grid[grid_idx] <= t0 {
        for i in 0..n {
            states[(grid_idx, i)] = y[i];
        }
        grid_idx += 1;
    }

    rhs(t, &y, &mut k[0]);
    stats.rhs_evals += 1;
    if !k[0].iter().all(|v| v.is_finite()) {
        return Err(NumericsError::NonFiniteRhs { t });
    }

    let mut h = initial_step(&mut rhs, t, &y, &k[0], rtol, atol, max_step, &mut stats);
    let mut facold: f64 = 1e-4;
    let mut rejected_last = false;

    while t < t_end {
        if h < MIN_STEP {
            return Err(NumericsError::StepUnderflow { t });
        }
        let mut last_step = false;
        if t + h >= t_end {
            h = t_end - t;
            last_step = true;
        }

        // Stages 2..7; stage 1 comes from FSAL or the initial evaluation.
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            rhs(t + C[s] * h, &y_stage, &mut k[s]);
            stats.rhs_evals += 1;
        }
        // Stage 7 is evaluated at the fifth-order solution point: reuse it.
        y_new.copy_from_slice(&y_stage);

        let finite = y_new.iter().all(|v| v.is_finite())
            && k.iter().all(|ks| ks.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(NumericsError::NonFiniteRhs { t });
        }

        // Scaled RMS error norm of h * sum(E_j k_j).
        let mut err_acc = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            let r = h * e / sc;
            err_acc += r * r;
        }
        let err = (err_acc / n as f64).sqrt();

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if last_step { t_end } else { t + h };

            // Dense output over (t, t_new].
            while grid_idx < output_grid.len() && output_grid[grid_idx] <= t_new {
                let theta = ((output_grid[grid_idx] - t) / h).clamp(0.0, 1.0);
                let mut w = [0.0; 7];
                for (j, wj) in w.iter_mut().enumerate() {
                    let bi = BI[j];
                    *wj = theta * (bi[0] + theta * (bi[1] + theta * (bi[2] + theta * bi[3])));
                }
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        if w[j] != 0.0 {
                            acc += w[j] * kj[i];
                        }
                    }
                    states[(grid_idx, i)] = y[i] + h * acc;
                }
                grid_idx += 1;
            }

            // PI controller (Lund stabilization).
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FACMAX, 1.0 / FACMIN);
            let mut h_new = (h / fac).min(max_step);
            if rejected_last {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            rejected_last = false;

            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6); // FSAL
            t = t_new;
            h = h_new;
        } else {
            stats.rejected += 1;
            rejected_last = true;
            h /= (fac11 / SAFETY).min(1.0 / FACMIN);
        }
    }

    debug_assert_eq!(grid_idx, output_grid.len(), "grid not fully covered");

    // Report derivatives at the grid states themselves.
    let mut rhs_values = DenseMatrix::zeros(output_grid.len(), n);
    let mut dy = vec![0.0; n];
    for (g, &tg) in output_grid.iter().enumerate() {
        let row = states.row(g).to_vec();
        rhs(tg, &row, &mut dy);
        stats.rhs_evals += 1;
        for i in 0..n {
            rhs_values[(g, i)] = dy[i];
        }
    }

    Ok(OdeSolution {
        grid_times: output_grid.to_vec(),
        states,
        rhs_values,
        stats,
    })
}

/// Hairer's automatic initial step selection.
#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    rtol: f64,
    atol: f64,
    max_step: f64,
    stats: &mut OdeStats,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|v| atol + rtol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(&sc)
            .map(|(x, s)| (x / s) * (x / s))
            .sum::<f64>();
        (s / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(max_step);

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h0, &y1, &mut f1);
    stats.rhs_evals += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;

    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1).min(max_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exponential_decay_matches_analytic() {
        let grid = uniform_grid(0.0, 1.0, 11);
        let sol = integrate_rk45(
            |_t, y, dy| dy[0] = -y[0],
            &[1.0],
            (0.0, 1.0),
            1e-8,
            1e-8,
            &grid,
        )
        .unwrap();
        for (g, &tg) in grid.iter().enumerate() {
            let exact = (-tg).exp();
            assert!(
                (sol.states[(g, 0)] - exact).abs() < 1e-7,
                "t={tg}: {} vs {exact}",
                sol.states[(g, 0)]
            );
        }
        // Reported derivative satisfies the ODE at grid states.
        for g in 0..grid.len() {
            assert_eq!(sol.rhs_values[(g, 0)], -sol.states[(g, 0)]);
        }
    }

    #[test]
    fn undamped_oscillator_conserves_energy() {
        let omega = 2.0 * std::f64::consts::PI;
        let grid = uniform_grid(0.0, 10.0, 2001);
        let sol = integrate_rk45(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -omega * omega * y[0];
            },
            &[1.0, 0.0],
            (0.0, 10.0),
            1e-8,
            1e-8,
            &grid,
        )
        .unwrap();
        let e0 = 0.5 * omega * omega;
        for g in 0..grid.len() {
            let q = sol.states[(g, 0)];
            let v = sol.states[(g, 1)];
            let e = 0.5 * (v * v + omega * omega * q * q);
            assert!((e - e0).abs() / e0 < 1e-6, "energy drift at row {g}");
        }
    }

    #[test]
    fn damped_sdof_matches_closed_form() {
        // m=1, c=0.2, k=4: zeta = 0.05, wn = 2; impulse start v0 = 1.
        let (c, ks): (f64, f64) = (0.2, 4.0);
        let wn = ks.sqrt();
        let zeta = c / (2.0 * wn);
        let wd = wn * (1.0 - zeta * zeta).sqrt();
        let grid = uniform_grid(0.0, 10.0, 4001);
        let sol = integrate_rk45(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -c * y[1] - ks * y[0];
            },
            &[0.0, 1.0],
            (0.0, 10.0),
            1e-8,
            1e-8,
            &grid,
        )
        .unwrap();
        let amp = 1.0 / wd; // envelope scale of the analytic solution
        let mut worst = 0.0_f64;
        for (g, &tg) in grid.iter().enumerate() {
            let exact = (1.0 / wd) * (-zeta * wn * tg).exp() * (wd * tg).sin();
            worst = worst.max((sol.states[(g, 0)] - exact).abs() / amp);
        }
        assert!(worst < 1e-6, "max relative error {worst}");
    }

    #[test]
    fn tightening_tolerance_is_self_consistent() {
        // Duffing-flavored nonlinear oscillator.
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -0.1 * y[1] - 4.0 * y[0] - 30.0 * y[0] * y[0] * y[0];
        };
        let grid = uniform_grid(0.0, 5.0, 501);
        let loose = integrate_rk45(rhs, &[0.5, 0.0], (0.0, 5.0), 1e-8, 1e-8, &grid).unwrap();
        let tight = integrate_rk45(rhs, &[0.5, 0.0], (0.0, 5.0), 1e-10, 1e-10, &grid).unwrap();
        let scale = 0.5;
        for g in 0..grid.len() {
            let d = (loose.states[(g, 0)] - tight.states[(g, 0)]).abs();
            assert!(d / scale < 10.0 * 1e-8, "row {g} deviates by {d}");
        }
    }

    #[test]
    fn blow_up_reports_failure() {
        // y' = y^2 from y(0)=1 blows up at t = 1.
        let grid = vec![0.0, 2.0];
        let res = integrate_rk45(
            |_t, y, dy| dy[0] = y[0] * y[0],
            &[1.0],
            (0.0, 2.0),
            1e-8,
            1e-8,
            &grid,
        );
        match res {
            Err(NumericsError::StepUnderflow { t }) | Err(NumericsError::NonFiniteRhs { t }) => {
                assert!((t - 1.0).abs() < 0.05, "failure reported at t = {t}");
            }
            other => panic!("expected blow-up failure, got {other:?}"),
        }
    }

    #[test]
    fn stats_count_steps() {
        let grid = uniform_grid(0.0, 1.0, 3);
        let sol = integrate_rk45(
            |_t, y, dy| dy[0] = -y[0],
            &[1.0],
            (0.0, 1.0),
            1e-8,
            1e-8,
            &grid,
        )
        .unwrap();
        assert!(sol.stats.accepted > 0);
        // 6 evals per step plus init plus grid re-evaluations.
        assert!(sol.stats.rhs_evals >= 6 * sol.stats.accepted + grid.len() as u64);
    }
}
