//! Classical fourth-order Runge–Kutta for autonomous systems on flat state
//! vectors. Used for reference flows and as an independent oracle for the
//! closed-form geodesic and Jacobi computations.

/// Integrates `y' = f(y)` from `t = 0` to `t = t_end` with `n` equal RK4 steps.
pub fn rk4<F>(f: F, y0: &[f64], t_end: f64, n: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = n.max(1);
    let h = t_end / n as f64;
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut tmp = vec![0.0; dim];
    for _ in 0..n {
        let k1 = f(&y);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = f(&tmp);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = f(&tmp);
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        let k4 = f(&tmp);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}
