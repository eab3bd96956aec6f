//! Small numerical helpers shared across modules.

/// sin(x)/x with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// 1 − sinc(x), computed without cancellation for small |x|.
pub fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        x2 / 6.0 - x2 * x2 / 120.0
    } else {
        1.0 - x.sin() / x
    }
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}

/// Mean of a slice.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance (denominator n).
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sinc_limits() {
        assert_abs_diff_eq!(sinc(0.0), 1.0);
        assert_abs_diff_eq!(sinc(std::f64::consts::PI), 0.0, epsilon = 1e-15);
        // series and direct branches agree at the crossover
        assert_abs_diff_eq!(sinc(1.0001e-4), sinc(0.9999e-4), epsilon = 1e-12);
        assert_abs_diff_eq!(
            one_minus_sinc(2e-4) + sinc(2e-4),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun tables
        assert_abs_diff_eq!(bessel_j0(0.0), 1.0);
        assert_abs_diff_eq!(bessel_j0(2.404825557695773), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bessel_j1(0.1), 0.049937526036242, epsilon = 1e-12);
        assert_abs_diff_eq!(bessel_j1(1.0), 0.440050585744933, epsilon = 1e-12);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert_abs_diff_eq!(linear_slope(&x, &y), 2.0, epsilon = 1e-14);
    }
}
