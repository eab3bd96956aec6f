//! Closed-form Mølmer–Sørensen dynamics and gate calibration.
//!
//! For zero asymmetric detuning and a ground-state-cooled mode, the MS
//! propagator factorizes into a spin-dependent displacement D(Ĵα) and a
//! collective phase exp(iΦĴ²) with Φ = 2θ, where
//!
//! ```text
//! α(t) = (ηΩ/δ)(e^{iδt} − 1)
//! θ(t) = (η²Ω²t / 2δ)(1 − sinc(δt))
//! ```
//!
//! which gives the closed-form populations implemented in
//! [`analytic_populations`]. These expressions serve as the independent
//! oracle for the numerical propagator in [`crate::qcore`] (and vice versa):
//! the two must agree to 1e-3 anywhere in the validated parameter region.
//!
//! Submodules cover the 2D parameter maps with light-shift registration
//! ([`maps`]) and the parity-scan / maximum-likelihood fidelity pipeline
//! ([`parity`]).

pub mod maps;
pub mod parity;

pub use maps::{register_maps, scan_map, MapAxis, MapError, MapMetadata, PopulationMap};
pub use parity::{ml_fit_parity, parity_scan, ParityData, ParityError, ParityFit};

use num_complex::Complex64;
use thiserror::Error;

use crate::math::one_minus_sinc;
use crate::qcore::{GateParams, Populations};

#[derive(Debug, Error)]
pub enum MsError {
    #[error("closed forms require zero asymmetric detuning (Δ = {0} rad/s); use the propagator")]
    AsymmetricDetuning(f64),
    #[error("closed forms start from |SS, n=0⟩ (initial_n = {0})")]
    ExcitedInitialState(usize),
}

/// Coherent displacement and accumulated geometric phase at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSAnalyticPoint {
    pub alpha: Complex64,
    pub theta: f64,
    pub populations: Populations,
}

/// The phase-space trajectory α(t) and geometric phase θ(t).
///
/// The δ → 0 limit is taken analytically: α → iηΩt, θ → 0.
pub fn alpha_theta(params: &GateParams, t: f64) -> (Complex64, f64) {
    let drive = params.eta * params.omega;
    if params.delta == 0.0 {
        return (Complex64::new(0.0, drive * t), 0.0);
    }
    let x = params.delta * t;
    // e^{iδt} − 1 without cancellation
    let loop_pos = Complex64::new(-2.0 * (0.5 * x).sin().powi(2), x.sin());
    let alpha = (drive / params.delta) * loop_pos;
    let theta = drive * drive * t / (2.0 * params.delta) * one_minus_sinc(x);
    (alpha, theta)
}

/// Closed-form populations for Δ = 0 starting from |SS, n=0⟩.
pub fn analytic_populations(params: &GateParams, t: f64) -> Result<Populations, MsError> {
    if params.delta_asym != 0.0 {
        return Err(MsError::AsymmetricDetuning(params.delta_asym));
    }
    if params.initial_n != 0 {
        return Err(MsError::ExcitedInitialState(params.initial_n));
    }
    let (alpha, theta) = alpha_theta(params, t);
    let x = alpha.norm_sqr();
    let shared = (3.0 + (-2.0 * x).exp() - 4.0 * (-x / 2.0).exp()) / 8.0;
    let coherence = (-x / 2.0).exp();
    Ok(Populations {
        p0: shared + theta.sin().powi(2) * coherence,
        p1: 0.25 * (1.0 - (-2.0 * x).exp()),
        p2: shared + theta.cos().powi(2) * coherence,
    })
}

/// Analytic point (displacement, phase, populations) in one call.
pub fn analytic_point(params: &GateParams, t: f64) -> Result<MSAnalyticPoint, MsError> {
    let (alpha, theta) = alpha_theta(params, t);
    Ok(MSAnalyticPoint {
        alpha,
        theta,
        populations: analytic_populations(params, t)?,
    })
}

/// The detuning δ = 2ηΩ and duration T = 2π/δ that close the phase-space
/// loop exactly when the accumulated collective phase reaches π/4.
pub fn gate_point(omega: f64, eta: f64) -> (f64, f64) {
    assert!(omega > 0.0 && eta > 0.0, "gate point needs a finite drive");
    let delta = 2.0 * eta * omega;
    (delta, crate::TWO_PI / delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hz_to_rad;
    use approx::assert_abs_diff_eq;

    fn params(delta_hz: f64) -> GateParams {
        GateParams {
            omega: hz_to_rad(100e3),
            eta: 0.05,
            delta: hz_to_rad(delta_hz),
            delta_asym: 0.0,
            nu: hz_to_rad(0.98e6),
            n_max: 20,
            initial_n: 0,
        }
    }

    #[test]
    fn alpha_closes_after_one_loop() {
        let p = params(10e3);
        let (alpha, _) = alpha_theta(&p, crate::TWO_PI / p.delta);
        assert!(alpha.norm() < 1e-12);
    }

    #[test]
    fn theta_reaches_quarter_pi_at_gate_point() {
        let mut p = params(0.0);
        let (delta, t_gate) = gate_point(p.omega, p.eta);
        p.delta = delta;
        let (_, theta) = alpha_theta(&p, t_gate);
        assert_abs_diff_eq!(theta, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn zero_detuning_limit() {
        let mut p = params(0.0);
        p.delta = 0.0;
        let t = 31e-6;
        let (alpha, theta) = alpha_theta(&p, t);
        let drive = p.eta * p.omega;
        assert_abs_diff_eq!(alpha.im, drive * t, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theta, 0.0, epsilon = 1e-12);
        // continuity: a tiny detuning lands next to the limit
        p.delta = 1e-6;
        let (alpha_eps, theta_eps) = alpha_theta(&p, t);
        assert!((alpha_eps - alpha).norm() < 1e-6);
        assert!((theta_eps - theta).abs() < 1e-9);
    }

    #[test]
    fn populations_start_in_ss() {
        let p = params(10e3);
        let pops = analytic_populations(&p, 0.0).unwrap();
        assert_abs_diff_eq!(pops.p0, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pops.p1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pops.p2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn populations_at_gate_point() {
        let mut p = params(0.0);
        let (delta, t_gate) = gate_point(p.omega, p.eta);
        p.delta = delta;
        let pops = analytic_populations(&p, t_gate).unwrap();
        assert_abs_diff_eq!(pops.p0, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pops.p1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pops.p2, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn populations_normalize_everywhere() {
        let p = params(7.3e3);
        for k in 0..200 {
            let t = k as f64 * 2.1e-6;
            let pops = analytic_populations(&p, t).unwrap();
            assert_abs_diff_eq!(pops.sum(), 1.0, epsilon = 1e-12);
            assert!(pops.p0 >= -1e-15 && pops.p1 >= -1e-15 && pops.p2 >= -1e-15);
        }
    }

    #[test]
    fn rejects_asymmetric_detuning() {
        let mut p = params(10e3);
        p.delta_asym = hz_to_rad(1e3);
        assert!(matches!(
            analytic_populations(&p, 1e-5),
            Err(MsError::AsymmetricDetuning(_))
        ));
    }

    #[test]
    fn gate_point_examples() {
        // δ/2π = 10.5 kHz pairs with a 95.2 µs gate
        let eta = 0.05;
        let omega = hz_to_rad(10.5e3) / (2.0 * eta);
        let (delta, t_gate) = gate_point(omega, eta);
        assert_abs_diff_eq!(crate::rad_to_hz(delta), 10.5e3, epsilon = 1e-9);
        assert_abs_diff_eq!(t_gate, 95.238e-6, epsilon = 0.05e-6);
        // plain arithmetic case
        let (delta, t_gate) = gate_point(hz_to_rad(100e3), 0.05);
        assert_abs_diff_eq!(crate::rad_to_hz(delta), 10e3, epsilon = 1e-9);
        assert_abs_diff_eq!(t_gate, 100e-6, epsilon = 1e-12);
        // doubling the drive halves the gate time
        let (_, t2) = gate_point(2.0 * hz_to_rad(100e3), 0.05);
        assert_abs_diff_eq!(t2, t_gate / 2.0, epsilon = 1e-18);
    }
}
