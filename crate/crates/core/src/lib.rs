//! Simulation and calibration toolkit for a two-qubit register of trapped-ion
//! optical qubits driven by a narrow-linewidth laser.
//!
//! The crate models the full measurement chain of such an experiment at desk
//! scale:
//!
//! * [`qcore`] — two optical qubits coupled to one quantized vibrational mode,
//!   with a time-ordered propagator for the Mølmer–Sørensen interaction and
//!   ideal carrier rotations.
//! * [`msgate`] — closed-form MS dynamics, gate-point calibration, 2D
//!   population maps, light-shift map registration, parity scans and
//!   maximum-likelihood Bell-state fidelity estimation.
//! * [`noisekit`] — parametric laser/magnetic noise spectra, realization
//!   synthesis, cavity Lorentzian filtering, Rabi excitation spectroscopy and
//!   servo-bump saturation curves.
//! * [`seqlab`] — Ramsey, Hahn-echo and magnetic-field dynamic-decoupling
//!   (MFDD) sequences, fringe-contrast extraction and linewidth fits.
//! * [`addressing`] — micromotion-sideband individual addressing of a two-ion
//!   crystal and composite-pulse robustness.
//! * [`readout`] — fluorescence photon-count histograms and their
//!   maximum-likelihood inversion to register populations.
//! * [`freqplan`] — the double-pass/single-pass AOM frequency chain: per-pulse
//!   frequency and phase bookkeeping plus reference-cavity drift compensation.
//!
//! All frequencies are stored internally in angular units (rad/s); every
//! configuration surface (CLI flags, JSON files) speaks ordinary frequency in
//! Hz. Conversions happen at the module boundaries and nowhere else.
//!
//! Every stochastic routine takes an explicit seed and derives per-task
//! sub-seeds through [`seeds`], so identical inputs give identical outputs
//! regardless of thread count.

pub mod addressing;
pub mod freqplan;
pub mod io;
pub mod math;
pub mod msgate;
pub mod noisekit;
pub mod optimize;
pub mod pulse;
pub mod qcore;
pub mod readout;
pub mod seeds;
pub mod seqlab;

pub use num_complex::Complex64;

/// 2π, the conversion factor between ordinary (Hz) and angular (rad/s)
/// frequency.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Convert ordinary frequency (Hz) to angular frequency (rad/s).
#[inline]
pub fn hz_to_rad(f_hz: f64) -> f64 {
    TWO_PI * f_hz
}

/// Convert angular frequency (rad/s) to ordinary frequency (Hz).
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}
