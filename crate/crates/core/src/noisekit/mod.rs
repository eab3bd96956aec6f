//! Parametric noise spectra of the laser (and, reused, the magnetic field),
//! their filtered versions, and diagnostics that probe them through a driven
//! two-level ion.
//!
//! A [`NoisePsd`] describes instantaneous frequency noise in one-sided
//! convention: `S(f)` carries units of (rad/s)²/Hz and integrates over
//! `f ∈ (0, ∞)` to the variance of the frequency offset. (Two-sided spectra
//! halve the level and extend over negative f; everything in this crate is
//! one-sided.) Components:
//!
//! * `white_level` — flat density, the Lorentzian-linewidth part. A white
//!   level `w` dephases a Ramsey fringe as exp(−w·t/4), i.e. a FWHM
//!   linewidth of w/(4π) Hz.
//! * `flicker_level` — 1/f density, the slow wander.
//! * `lines` — discrete tones (mains pickup at 50 Hz and friends), stored as
//!   rms amplitude with a phase policy.
//! * `bumps` — Gaussian-shaped servo bumps applied symmetrically at ±center,
//!   parametrized by their integrated one-sided power. Center 1.1 MHz and
//!   FWHM 1 MHz are the documented defaults; the absolute power is a free
//!   parameter fixed by saturation-curve calibration.
//! * `quasi_static_rms` — per-realization Gaussian frequency offset, the
//!   shot-to-shot drift channel.
//!
//! [`cavity_filter`] attaches the Lorentzian power transfer
//! |H(f)|² = 1/(1+(2f/Γc)²) of the reference cavity: discrete lines are
//! scaled once at their exact frequency, continuous components pointwise at
//! evaluation time.

pub mod spectroscopy;
pub mod synth;

pub use spectroscopy::{
    calibrate_bump_power, rabi_spectroscopy, saturation_curve, ExcitationSpectrum,
    SaturationCurve,
};
pub use synth::{synthesize, welch_psd, NoiseTrajectory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("negative spectral level: {0}")]
    NegativeLevel(f64),
    #[error("bump FWHM must be positive (got {0})")]
    NonPositiveFwhm(f64),
    #[error(
        "aliasing guard: dt = {dt} s is too coarse for content at {f_max} Hz (need dt < {limit} s)"
    )]
    AliasingGuard { dt: f64, f_max: f64, limit: f64 },
    #[error("trajectory too short for Welch segments of {nperseg}")]
    TooShortForWelch { nperseg: usize },
}

/// Phase assignment for a discrete tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhasePolicy {
    /// New uniform phase per realization; the ensemble-averaged case.
    Random,
    /// Deterministic phase, for line-locked scenarios.
    Fixed(f64),
}

/// A discrete spectral tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub frequency_hz: f64,
    /// RMS amplitude of the frequency offset; the peak is √2 larger.
    pub rms: f64,
    pub phase: PhasePolicy,
}

/// A servo bump: Gaussian power density applied at ±center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoBump {
    pub center_hz: f64,
    pub fwhm_hz: f64,
    /// Integrated one-sided power, (rad/s)².
    pub power: f64,
}

/// Reference cavity as a spectral filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Linewidth Γc, Hz.
    pub linewidth_hz: f64,
    pub finesse: f64,
    /// Free spectral range, Hz.
    pub fsr_hz: f64,
}

impl CavityParams {
    /// Lorentzian power transfer |H(f)|² = 1/(1+(2f/Γc)²).
    pub fn transfer_sq(&self, f_hz: f64) -> f64 {
        let x = 2.0 * f_hz / self.linewidth_hz;
        1.0 / (1.0 + x * x)
    }

    /// Soft consistency check: Γc should be close to fsr/finesse.
    pub fn consistency_warning(&self) -> Option<String> {
        let implied = self.fsr_hz / self.finesse;
        let rel = (self.linewidth_hz - implied).abs() / implied;
        (rel > 0.2).then(|| {
            format!(
                "cavity linewidth {} Hz differs from fsr/finesse = {:.1} Hz by {:.0}%",
                self.linewidth_hz,
                implied,
                rel * 100.0
            )
        })
    }
}

/// Parametric one-sided frequency-noise spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePsd {
    /// Flat density, (rad/s)²/Hz.
    pub white_level: f64,
    /// 1/f coefficient: S(f) = flicker_level / f.
    pub flicker_level: f64,
    pub lines: Vec<SpectralLine>,
    pub bumps: Vec<ServoBump>,
    /// Per-realization Gaussian offset, rad/s rms.
    pub quasi_static_rms: f64,
    /// Attached cavity filter, applied pointwise to continuous components.
    pub cavity: Option<CavityParams>,
}

impl Default for NoisePsd {
    fn default() -> Self {
        Self::quiet()
    }
}

impl NoisePsd {
    /// A completely quiet spectrum.
    pub fn quiet() -> Self {
        Self {
            white_level: 0.0,
            flicker_level: 0.0,
            lines: Vec::new(),
            bumps: Vec::new(),
            quasi_static_rms: 0.0,
            cavity: None,
        }
    }

    /// White level producing a Lorentzian FWHM of `linewidth_hz`.
    pub fn from_lorentzian_linewidth(linewidth_hz: f64) -> Self {
        Self {
            white_level: 4.0 * std::f64::consts::PI * linewidth_hz,
            ..Self::quiet()
        }
    }

    /// Quasi-static Gaussian frequency spread producing a Gaussian line of
    /// FWHM `linewidth_hz` (σ_ν = FWHM/√(8 ln 2)).
    pub fn from_gaussian_linewidth(linewidth_hz: f64) -> Self {
        let sigma_nu = linewidth_hz / (8.0 * std::f64::consts::LN_2).sqrt();
        Self {
            quasi_static_rms: crate::hz_to_rad(sigma_nu),
            ..Self::quiet()
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for &level in &[self.white_level, self.flicker_level, self.quasi_static_rms] {
            if level < 0.0 {
                return Err(NoiseError::NegativeLevel(level));
            }
        }
        for line in &self.lines {
            if line.rms < 0.0 {
                return Err(NoiseError::NegativeLevel(line.rms));
            }
        }
        for bump in &self.bumps {
            if bump.fwhm_hz <= 0.0 {
                return Err(NoiseError::NonPositiveFwhm(bump.fwhm_hz));
            }
            if bump.power < 0.0 {
                return Err(NoiseError::NegativeLevel(bump.power));
            }
        }
        Ok(())
    }

    /// Continuous part of the spectrum at `f_hz` > 0 (white + flicker +
    /// bumps), including the attached cavity transfer.
    pub fn continuous_psd_at(&self, f_hz: f64) -> f64 {
        if f_hz <= 0.0 {
            return 0.0;
        }
        let mut s = self.white_level + self.flicker_level / f_hz;
        for bump in &self.bumps {
            let sigma = bump.fwhm_hz / (8.0 * std::f64::consts::LN_2).sqrt();
            let g = |center: f64| {
                let z = (f_hz - center) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            };
            // the −center image folds onto positive frequencies
            s += bump.power * (g(bump.center_hz) + g(-bump.center_hz));
        }
        match &self.cavity {
            Some(c) => s * c.transfer_sq(f_hz),
            None => s,
        }
    }

    /// Highest discrete/structured frequency in the model, for aliasing
    /// guards. White/flicker extend to Nyquist by construction.
    pub fn max_modeled_frequency(&self) -> f64 {
        let lines = self
            .lines
            .iter()
            .map(|l| l.frequency_hz)
            .fold(0.0, f64::max);
        let bumps = self
            .bumps
            .iter()
            .map(|b| b.center_hz + 2.0 * b.fwhm_hz)
            .fold(0.0, f64::max);
        lines.max(bumps)
    }

    /// Total integrated power of the bump components, (rad/s)².
    pub fn bump_power(&self) -> f64 {
        self.bumps.iter().map(|b| b.power).sum()
    }

    /// Scale every bump's power by `factor`.
    pub fn scale_bump_power(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.power *= factor;
        }
        out
    }
}

/// Attach the cavity to a spectrum: discrete lines are attenuated once at
/// their exact offset frequency, continuous components pointwise via the
/// stored transfer function.
pub fn cavity_filter(psd: &NoisePsd, cavity: CavityParams) -> NoisePsd {
    let mut out = psd.clone();
    for line in &mut out.lines {
        line.rms *= cavity.transfer_sq(line.frequency_hz).sqrt();
    }
    out.cavity = Some(cavity);
    out
}

/// The documented default servo-bump geometry: ±1.1 MHz center, 1 MHz FWHM.
pub fn default_servo_bump(power: f64) -> ServoBump {
    ServoBump {
        center_hz: 1.1e6,
        fwhm_hz: 1.0e6,
        power,
    }
}

/// Servo-bump integrated power that saturates the bump-peak excitation
/// (0.475, the knee of the curve) after a 400 µs unfiltered pulse at
/// Ω/2π = 100 kHz. Obtained from [`calibrate_bump_power`]; the
/// `calibrate_bump` example reproduces it.
pub const CALIBRATED_BUMP_POWER: f64 = 9.45e12;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_cavity() -> CavityParams {
        CavityParams {
            linewidth_hz: 22e3,
            finesse: 1e5,
            fsr_hz: 1.93e9,
        }
    }

    #[test]
    fn transfer_reference_points() {
        let c = reference_cavity();
        assert_eq!(c.transfer_sq(0.0), 1.0);
        // half-width definition
        assert_abs_diff_eq!(c.transfer_sq(11e3), 0.5, epsilon = 1e-12);
        // three orders of magnitude at the servo bump
        let t = c.transfer_sq(1.1e6);
        assert_abs_diff_eq!(t, 9.999e-5, epsilon = 1e-8);
        assert_abs_diff_eq!(t, 1.0 / 10001.0, epsilon = 1e-18);
    }

    #[test]
    fn transfer_is_monotone() {
        let c = reference_cavity();
        let mut prev = c.transfer_sq(0.0);
        for k in 1..2000 {
            let cur = c.transfer_sq(k as f64 * 1e3);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn cavity_consistency_check() {
        let c = reference_cavity();
        // 22 kHz vs 1.93 GHz / 1e5 = 19.3 kHz: within 20%
        assert!(c.consistency_warning().is_none());
        let bad = CavityParams {
            linewidth_hz: 40e3,
            ..c
        };
        assert!(bad.consistency_warning().is_some());
    }

    #[test]
    fn filter_scales_lines_and_continuum() {
        let psd = NoisePsd {
            white_level: 2.0,
            lines: vec![SpectralLine {
                frequency_hz: 1.1e6,
                rms: 100.0,
                phase: PhasePolicy::Random,
            }],
            bumps: vec![default_servo_bump(1e8)],
            ..NoisePsd::quiet()
        };
        let filtered = cavity_filter(&psd, reference_cavity());
        let h2 = reference_cavity().transfer_sq(1.1e6);
        assert_abs_diff_eq!(filtered.lines[0].rms, 100.0 * h2.sqrt(), epsilon = 1e-9);
        // continuum suppressed pointwise
        let ratio = filtered.continuous_psd_at(1.1e6) / psd.continuous_psd_at(1.1e6);
        assert_abs_diff_eq!(ratio, h2, epsilon = 1e-12);
        // near DC the white level passes through
        let ratio0 = filtered.continuous_psd_at(1.0) / psd.continuous_psd_at(1.0);
        assert_abs_diff_eq!(ratio0, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn linewidth_constructors() {
        let psd = NoisePsd::from_lorentzian_linewidth(11.0);
        assert_abs_diff_eq!(
            psd.white_level / (4.0 * std::f64::consts::PI),
            11.0,
            epsilon = 1e-12
        );
        let g = NoisePsd::from_gaussian_linewidth(65.86);
        // σ_ν = FWHM / √(8 ln 2) ≈ 27.97 Hz
        assert_abs_diff_eq!(
            crate::rad_to_hz(g.quasi_static_rms),
            27.968,
            epsilon = 0.01
        );
    }

    #[test]
    fn bump_power_integrates() {
        // numerically integrate the continuous PSD of a lone bump
        let psd = NoisePsd {
            bumps: vec![default_servo_bump(3.3e4)],
            ..NoisePsd::quiet()
        };
        let df = 500.0;
        let mut acc = 0.0;
        let mut f = df / 2.0;
        while f < 8e6 {
            acc += psd.continuous_psd_at(f) * df;
            f += df;
        }
        assert_abs_diff_eq!(acc, 3.3e4, epsilon = 3.3e4 * 1e-3);
    }
}
