//! Contrast-decay models and the linewidth conventions.
//!
//! All linewidth conversions live here and nowhere else:
//!
//! * Exponential contrast exp(−t/τ) ⇒ Lorentzian FWHM Δν = 1/(πτ).
//! * Gaussian contrast exp(−(t/τg)²) comes from a quasi-static Gaussian
//!   frequency spread of σ_ν = √2/(2πτg); the reported linewidth is that
//!   Gaussian's FWHM, Δν = √(8 ln 2)·σ_ν.
//! * The Bessel model C = c0·|J₀(a·sin(πft))| describes dephasing by a
//!   single field tone at frequency f; it has no linewidth, the tone
//!   frequency is the physical output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::bessel_j0;
use crate::optimize::{nelder_mead, OptimizeError};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("contrast fit needs at least 6 time points (got {0})")]
    TooFewPoints(usize),
    #[error("fit did not converge (best residual {residual:.3e})")]
    NonConvergence { residual: f64 },
}

impl From<OptimizeError> for FitError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::NonConvergence { residual } => FitError::NonConvergence { residual },
        }
    }
}

/// Measured fringe contrast versus sequence duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastCurve {
    pub times: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl ContrastCurve {
    pub fn to_csv(&self) -> String {
        crate::io::csv_string(
            &["time_s", "contrast"],
            self.times
                .iter()
                .zip(&self.contrast)
                .map(|(&t, &c)| vec![t, c]),
        )
    }

    /// Linear interpolation of the duration where contrast crosses `level`.
    pub fn crossing_time(&self, level: f64) -> Option<f64> {
        for w in self.times.windows(2).zip(self.contrast.windows(2)) {
            let ((t0, t1), (c0, c1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
            if (c0 - level) * (c1 - level) <= 0.0 && c0 != c1 {
                return Some(t0 + (level - c0) / (c1 - c0) * (t1 - t0));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    Exponential,
    Gaussian,
    Bessel,
}

/// Fitted decay parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastFit {
    pub model: FitModel,
    /// Initial contrast c0.
    pub amplitude: f64,
    /// Exponential: 1/e time τ. Gaussian: 1/e time τg. Bessel: the modulation
    /// index a.
    pub scale: f64,
    /// Bessel only: fitted tone frequency, Hz.
    pub tone_frequency_hz: Option<f64>,
    /// Linewidth under the documented convention; None for Bessel.
    pub linewidth_hz: Option<f64>,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Lorentzian FWHM from an exponential 1/e time.
pub fn lorentzian_linewidth_hz(tau: f64) -> f64 {
    1.0 / (std::f64::consts::PI * tau)
}

/// Gaussian FWHM from a Gaussian-contrast 1/e time.
pub fn gaussian_linewidth_hz(tau_g: f64) -> f64 {
    let sigma_nu = std::f64::consts::SQRT_2 / (crate::TWO_PI * tau_g);
    (8.0 * std::f64::consts::LN_2).sqrt() * sigma_nu
}

fn rms_residual<F: Fn(f64) -> f64>(curve: &ContrastCurve, f: F) -> f64 {
    let n = curve.times.len() as f64;
    (curve
        .times
        .iter()
        .zip(&curve.contrast)
        .map(|(&t, &c)| (c - f(t)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Least-squares fit of a decay model to a contrast curve.
pub fn fit_contrast(curve: &ContrastCurve, model: FitModel) -> Result<ContrastFit, FitError> {
    if curve.times.len() < 6 {
        return Err(FitError::TooFewPoints(curve.times.len()));
    }
    let t_span = curve.times.last().unwrap() - curve.times[0];
    let c_max = curve.contrast.iter().cloned().fold(0.0, f64::max).max(1e-3);

    match model {
        FitModel::Exponential | FitModel::Gaussian => {
            let power = if model == FitModel::Exponential { 1.0 } else { 2.0 };
            // log-linear initialization over the usable part of the decay
            let mut tau0 = t_span.max(1e-6);
            for (&t, &c) in curve.times.iter().zip(&curve.contrast) {
                if c < c_max * 0.37 && t > 0.0 {
                    tau0 = t;
                    break;
                }
            }
            let sse = |x: &[f64]| {
                let (c0, tau) = (x[0], x[1]);
                if tau <= 0.0 || c0 <= 0.0 || c0 > 1.5 {
                    return 1e9;
                }
                curve
                    .times
                    .iter()
                    .zip(&curve.contrast)
                    .map(|(&t, &c)| {
                        let m = c0 * (-(t / tau).powf(power)).exp();
                        (c - m) * (c - m)
                    })
                    .sum()
            };
            let m = nelder_mead(&sse, &[c_max, tau0], &[0.1 * c_max, 0.3 * tau0], 1e-14, 4000)?;
            let (c0, tau) = (m.x[0], m.x[1]);
            let fitted = |t: f64| c0 * (-(t / tau).powf(power)).exp();
            Ok(ContrastFit {
                model,
                amplitude: c0,
                scale: tau,
                tone_frequency_hz: None,
                linewidth_hz: Some(match model {
                    FitModel::Exponential => lorentzian_linewidth_hz(tau),
                    _ => gaussian_linewidth_hz(tau),
                }),
                residual: rms_residual(curve, fitted),
            })
        }
        FitModel::Bessel => {
            let sse = |x: &[f64]| {
                let (c0, a, f) = (x[0], x[1], x[2]);
                if c0 <= 0.0 || c0 > 1.5 || a < 0.0 || f <= 0.0 {
                    return 1e9;
                }
                curve
                    .times
                    .iter()
                    .zip(&curve.contrast)
                    .map(|(&t, &c)| {
                        let m = c0 * bessel_j0(a * (std::f64::consts::PI * f * t).sin()).abs();
                        (c - m) * (c - m)
                    })
                    .sum()
            };
            // coarse grid over plausible mains frequencies and indices
            let mut best = (f64::INFINITY, [c_max, 1.0, 50.0]);
            for f_try in (1..=30).map(|k| 5.0 * k as f64) {
                for a_try in [0.3, 1.0, 2.0, 4.0, 8.0] {
                    let v = sse(&[c_max, a_try, f_try]);
                    if v < best.0 {
                        best = (v, [c_max, a_try, f_try]);
                    }
                }
            }
            let m = nelder_mead(&sse, &best.1, &[0.05, 0.2, 2.0], 1e-14, 6000)?;
            let (c0, a, f) = (m.x[0], m.x[1], m.x[2]);
            let fitted =
                |t: f64| c0 * bessel_j0(a * (std::f64::consts::PI * f * t).sin()).abs();
            Ok(ContrastFit {
                model,
                amplitude: c0,
                scale: a,
                tone_frequency_hz: Some(f),
                linewidth_hz: None,
                residual: rms_residual(curve, fitted),
            })
        }
    }
}
