//! Derivative-free minimization and the sinusoid quadrature fit.
//!
//! The nonlinear fits in this crate are all low-dimensional (2–3 parameters)
//! and well initialized, so a compact Nelder–Mead simplex with a restart is
//! sufficient and keeps the dependency surface small.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("minimization did not converge (best residual {residual:.3e})")]
    NonConvergence { residual: f64 },
}

/// Result of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Nelder–Mead downhill simplex.
///
/// `init` is the starting point, `scale` the initial simplex edge per
/// coordinate. Converges when the simplex collapses below `tol` in both
/// value spread and coordinate spread.
pub fn nelder_mead<F>(
    f: F,
    init: &[f64],
    scale: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Minimum, OptimizeError>
where
    F: Fn(&[f64]) -> f64,
{
    let n = init.len();
    assert_eq!(scale.len(), n);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(init.to_vec());
    for i in 0..n {
        let mut p = init.to_vec();
        p[i] += scale[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for iter in 0..max_iter {
        // sort ascending by value
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let simplex_s: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let values_s: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_s;
        values = values_s;

        let vspread = (values[n] - values[0]).abs();
        let xspread = (0..n)
            .map(|j| {
                simplex
                    .iter()
                    .map(|p| p[j])
                    .fold(f64::NEG_INFINITY, f64::max)
                    - simplex.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        if vspread < tol && xspread < tol {
            return Ok(Minimum {
                x: simplex[0].clone(),
                value: values[0],
                iterations: iter,
            });
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + alpha * (centroid[j] - simplex[n][j]))
            .collect();
        let fr = f(&reflect);

        if fr < values[0] {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + gamma * (reflect[j] - centroid[j]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[n] = expand;
                values[n] = fe;
            } else {
                simplex[n] = reflect;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflect;
            values[n] = fr;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|j| centroid[j] + rho * (simplex[n][j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc < values[n] {
                simplex[n] = contract;
                values[n] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] =
                            simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    Err(OptimizeError::NonConvergence {
        residual: values.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// Least-squares quadratures of a sinusoid `y ≈ c + a·cos(k·x) + b·sin(k·x)`
/// sampled on arbitrary phases. Returns `(c, a, b)`; the fitted amplitude is
/// `hypot(a, b)` and the phase offset `atan2(a, b)` for the `sin(kx + φ0)`
/// parametrization.
pub fn sinusoid_quadratures(x: &[f64], y: &[f64], k: f64) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    // normal equations for the 3-parameter linear model
    let (mut scc, mut sss, mut scs, mut sc, mut ss) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut syc, mut sys, mut sy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let c = (k * xi).cos();
        let s = (k * xi).sin();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        sc += c;
        ss += s;
        syc += yi * c;
        sys += yi * s;
        sy += yi;
    }
    let nf = n as f64;
    // Solve the 3x3 system [ [n, sc, ss], [sc, scc, scs], [ss, scs, sss] ]
    let m = [[nf, sc, ss], [sc, scc, scs], [ss, scs, sss]];
    let rhs = [sy, syc, sys];
    let sol = solve3(m, rhs);
    (sol[0], sol[1], sol[2])
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    // Gaussian elimination with partial pivoting; the systems here are tiny
    // and well conditioned for any non-degenerate phase grid.
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        let d = m[col][col];
        for row in (col + 1)..3 {
            let f = m[row][col] / d;
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |p: &[f64]| {
            let (x, y) = (p[0], p[1]);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 1e-12, 5000).unwrap();
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn recovers_sinusoid() {
        let xs: Vec<f64> = (0..24).map(|i| i as f64 * 0.26).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 0.3 + 0.8 * (2.0 * x + 0.7).sin())
            .collect();
        let (c, a, b) = sinusoid_quadratures(&xs, &ys, 2.0);
        // A sin(kx + p) = A sin(p) cos(kx) + A cos(p) sin(kx)
        assert_abs_diff_eq!(c, 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(a.hypot(b), 0.8, epsilon = 1e-10);
        assert_abs_diff_eq!(f64::atan2(a, b), 0.7, epsilon = 1e-10);
    }
}
