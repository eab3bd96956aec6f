//! Parity-scan simulation and maximum-likelihood Bell fidelity estimation.
//!
//! After the entangling interaction, a collective π/2 analysis pulse with
//! scanned phase φ converts the SS–DD coherence into a parity oscillation
//! P0 + P2 − P1 = A·sin(2φ + φ0) with A = 2|ρ_SS,DD|. The Bell fidelity is
//! F = (P0 + P2)/2 + A/2, with the populations measured at the bare gate
//! output.
//!
//! The fit maximizes the product of per-phase binomial likelihoods (each
//! parity sample comes from `shots` two-outcome measurements of even/odd
//! S-counts). Confidence is estimated by a parametric bootstrap: counts are
//! resampled from the fitted model and refitted, and the reported sigma is
//! the spread of the replicas.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimize::{nelder_mead, sinusoid_quadratures};
use crate::qcore::{apply_rotation, measure_populations, RegisterState, RotationTarget};
use crate::seeds;

#[derive(Debug, Error)]
pub enum ParityError {
    #[error("parity fit needs at least 5 distinct phases (got {0})")]
    TooFewPhases(usize),
    #[error("parity fit is unidentifiable: all phases coincide")]
    DegeneratePhases,
    #[error("phase and parity lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("likelihood maximization failed: {0}")]
    FitFailed(#[from] crate::optimize::OptimizeError),
}

/// Empirical parity versus analysis phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityData {
    /// Analysis-pulse phases, rad.
    pub phases: Vec<f64>,
    /// Measurements per phase; `None` marks exact (infinite-shot) parities.
    pub shots_per_phase: Option<u64>,
    /// Parity samples in [-1, 1].
    pub parity: Vec<f64>,
    /// Seed the samples were drawn with, for provenance.
    pub seed: Option<u64>,
}

/// Result of the maximum-likelihood parity fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParityFit {
    /// Parity oscillation amplitude A ∈ [0, 1].
    pub amplitude: f64,
    /// Phase offset φ0 of A·sin(2φ + φ0).
    pub phase: f64,
    /// Bell fidelity (P0+P2)/2 + A/2, clamped to [0, 1].
    pub fidelity: f64,
    /// One-sigma uncertainty on the fidelity.
    pub fidelity_sigma: f64,
    /// 95% confidence interval on the fidelity.
    pub confidence: (f64, f64),
}

/// Scan the analysis phase over a register state: collective π/2 rotation,
/// exact parity expectation, and (optionally) `shots` binomial draws of the
/// even/odd outcome per phase.
pub fn parity_scan(
    state: &RegisterState,
    phases: &[f64],
    shots: Option<u64>,
    seed: u64,
) -> ParityData {
    let mut parity = Vec::with_capacity(phases.len());
    for (k, &phi) in phases.iter().enumerate() {
        let rotated = apply_rotation(state, RotationTarget::Both, std::f64::consts::FRAC_PI_2, phi);
        let pops = measure_populations(&rotated);
        let exact = pops.p0 + pops.p2 - pops.p1;
        match shots {
            None => parity.push(exact),
            Some(n) => {
                let p_even = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                let mut rng = seeds::child_rng(seed, k as u64);
                let draw = Binomial::new(n, p_even).unwrap().sample(&mut rng);
                parity.push(2.0 * draw as f64 / n as f64 - 1.0);
            }
        }
    }
    ParityData {
        phases: phases.to_vec(),
        shots_per_phase: shots,
        parity,
        seed: Some(seed),
    }
}

/// Negative log-likelihood kernel for parity(φ) = A sin(2φ + φ0) given
/// per-phase even-outcome counts `s` out of `n`.
fn parity_nll(phases: &[f64], s: &[f64], n: f64, a: f64, phi0: f64) -> f64 {
    if !(0.0..=1.0).contains(&a) {
        // steep but finite barrier keeps the simplex inside the physical box
        return 1e12 * (1.0 + a.abs());
    }
    let mut nll = 0.0;
    for (&phi, &si) in phases.iter().zip(s) {
        let q = ((1.0 + a * (2.0 * phi + phi0).sin()) / 2.0).clamp(1e-12, 1.0 - 1e-12);
        nll -= si * q.ln() + (n - si) * (1.0 - q).ln();
    }
    nll
}

fn quadrature_estimate(data: &ParityData) -> (f64, f64) {
    let (_, a, b) = sinusoid_quadratures(&data.phases, &data.parity, 2.0);
    let amp = a.hypot(b);
    let phase = f64::atan2(a, b);
    (amp.min(1.0), phase)
}

/// Maximum-likelihood fit of the parity oscillation and the resulting Bell
/// fidelity. `pop02` is P0+P2 measured at the bare gate output and
/// `pop02_sigma` its uncertainty (0 for exact populations).
pub fn ml_fit_parity(
    data: &ParityData,
    pop02: f64,
    pop02_sigma: f64,
) -> Result<ParityFit, ParityError> {
    if data.phases.len() != data.parity.len() {
        return Err(ParityError::LengthMismatch(
            data.phases.len(),
            data.parity.len(),
        ));
    }
    let mut distinct: Vec<f64> = Vec::new();
    for &p in &data.phases {
        if !distinct.iter().any(|&q| (q - p).abs() < 1e-12) {
            distinct.push(p);
        }
    }
    if distinct.len() == 1 {
        return Err(ParityError::DegeneratePhases);
    }
    if distinct.len() < 5 {
        return Err(ParityError::TooFewPhases(distinct.len()));
    }

    let (amp0, phase0) = quadrature_estimate(data);
    let (amplitude, phase) = match data.shots_per_phase {
        // exact parities: the linear quadrature fit is already the MLE
        None => (amp0, phase0),
        Some(n) => {
            let nf = n as f64;
            let s: Vec<f64> = data.parity.iter().map(|p| nf * (1.0 + p) / 2.0).collect();
            let nll = |x: &[f64]| parity_nll(&data.phases, &s, nf, x[0], x[1]);
            let m = nelder_mead(
                &nll,
                &[amp0.clamp(1e-3, 1.0 - 1e-3), phase0],
                &[0.05, 0.05],
                1e-10,
                2000,
            )?;
            (m.x[0].clamp(0.0, 1.0), m.x[1])
        }
    };

    let fidelity = (pop02 / 2.0 + amplitude / 2.0).clamp(0.0, 1.0);
    let amp_sigma = match data.shots_per_phase {
        None => 0.0,
        Some(n) => bootstrap_amplitude_sigma(data, amplitude, phase, n),
    };
    let sigma = (amp_sigma * amp_sigma / 4.0 + pop02_sigma * pop02_sigma / 4.0).sqrt();
    let confidence = (
        (fidelity - 1.96 * sigma).max(0.0),
        (fidelity + 1.96 * sigma).min(1.0),
    );
    Ok(ParityFit {
        amplitude,
        phase,
        fidelity,
        fidelity_sigma: sigma,
        confidence,
    })
}

const BOOTSTRAP_REPLICAS: usize = 200;
const BOOTSTRAP_SEED_SALT: u64 = 0xB001_57A9;

fn bootstrap_amplitude_sigma(data: &ParityData, a_hat: f64, phi_hat: f64, n: u64) -> f64 {
    let root = data.seed.unwrap_or(0) ^ BOOTSTRAP_SEED_SALT;
    let nf = n as f64;
    let mut amps = Vec::with_capacity(BOOTSTRAP_REPLICAS);
    for b in 0..BOOTSTRAP_REPLICAS {
        let mut rng = seeds::child_rng(root, b as u64);
        let mut replica = data.clone();
        for (k, &phi) in data.phases.iter().enumerate() {
            let q = ((1.0 + a_hat * (2.0 * phi + phi_hat).sin()) / 2.0).clamp(0.0, 1.0);
            let draw = Binomial::new(n, q).unwrap().sample(&mut rng);
            replica.parity[k] = 2.0 * draw as f64 / nf - 1.0;
        }
        let (amp0, phase0) = quadrature_estimate(&replica);
        let s: Vec<f64> = replica.parity.iter().map(|p| nf * (1.0 + p) / 2.0).collect();
        let nll = |x: &[f64]| parity_nll(&replica.phases, &s, nf, x[0], x[1]);
        let amp = match nelder_mead(
            &nll,
            &[amp0.clamp(1e-3, 1.0 - 1e-3), phase0],
            &[0.05, 0.05],
            1e-9,
            1500,
        ) {
            Ok(m) => m.x[0].clamp(0.0, 1.0),
            Err(_) => amp0,
        };
        amps.push(amp);
    }
    crate::math::variance(&amps).sqrt()
}

/// Phases spanning a full parity period twice, the standard scan layout.
pub fn uniform_phases(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| k as f64 * crate::TWO_PI / count as f64)
        .collect()
}

/// Binomial shot sampling of a bare-output population sum: returns the
/// empirical estimate and its standard error.
pub fn sample_population_sum(p: f64, shots: u64, seed: u64) -> (f64, f64) {
    let mut rng = seeds::rng_from(seed);
    let draw = Binomial::new(shots, p.clamp(0.0, 1.0))
        .unwrap()
        .sample(&mut rng);
    let est = draw as f64 / shots as f64;
    (est, (est * (1.0 - est) / shots as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::Qubit;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn bell_state(n_max: usize) -> RegisterState {
        // (|SS,0⟩ + i|DD,0⟩)/√2, the ideal gate output
        let mut amps = vec![Complex64::ZERO; 4 * n_max];
        amps[0] = Complex64::new(0.5f64.sqrt(), 0.0);
        amps[3 * n_max] = Complex64::new(0.0, 0.5f64.sqrt());
        RegisterState::from_amplitudes(amps, n_max).unwrap()
    }

    /// Independent 4x4 oracle: reduced qubit density matrix, explicit
    /// rotation matrix, parity as a trace.
    fn parity_oracle(state: &RegisterState, phi: f64) -> f64 {
        let n_max = state.n_max();
        // reduced 4x4 density matrix over (q1,q2), motion traced out
        let mut rho = [[Complex64::ZERO; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for n in 0..n_max {
                    rho[a][b] +=
                        state.amplitudes()[a * n_max + n] * state.amplitudes()[b * n_max + n].conj();
                }
            }
        }
        // single-qubit rotation in the (S, D) ordering
        let c = Complex64::new((std::f64::consts::FRAC_PI_2 / 2.0).cos(), 0.0);
        let s = (std::f64::consts::FRAC_PI_2 / 2.0).sin();
        let r = [
            [c, -Complex64::i() * Complex64::cis(-phi) * s],
            [-Complex64::i() * Complex64::cis(phi) * s, c],
        ];
        let mut r2 = [[Complex64::ZERO; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        r2[i * 2 + k][j * 2 + l] = r[i][j] * r[k][l];
                    }
                }
            }
        }
        // parity operator σz ⊗ σz is diagonal: (+1, -1, -1, +1)
        let z = [1.0, -1.0, -1.0, 1.0];
        let mut parity = Complex64::ZERO;
        for a in 0..4 {
            for b in 0..4 {
                for c2 in 0..4 {
                    parity += z[a] * r2[a][b] * rho[b][c2] * r2[a][c2].conj();
                }
            }
        }
        parity.re
    }

    #[test]
    fn ideal_bell_parity_matches_matrix_oracle() {
        let state = bell_state(6);
        for k in 0..16 {
            let phi = k as f64 * crate::TWO_PI / 16.0;
            let data = parity_scan(&state, &[phi], None, 0);
            let oracle = parity_oracle(&state, phi);
            assert_abs_diff_eq!(data.parity[0], oracle, epsilon = 1e-12);
            // the 2φ oscillation has unit amplitude: parity = -sin(2φ)
            assert_abs_diff_eq!(data.parity[0], -(2.0 * phi).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn product_state_parity_is_flat() {
        // a product state has no SS-DD coherence: the parity signal carries
        // no 2φ component at all (the rotated qubits sit on the equator, so
        // the exact parity is identically zero)
        let state = RegisterState::basis(Qubit::S, Qubit::S, 0, 6);
        let phases = uniform_phases(16);
        let exact = parity_scan(&state, &phases, None, 0);
        for p in &exact.parity {
            assert_abs_diff_eq!(*p, 0.0, epsilon = 1e-12);
        }
        // with shots, the fitted 2φ amplitude stays below the noise floor
        let data = parity_scan(&state, &phases, Some(400), 3);
        let fit = ml_fit_parity(&data, 1.0, 0.0).unwrap();
        let floor = 3.0 / (400f64).sqrt();
        assert!(
            fit.amplitude < floor,
            "flat parity fitted amplitude {} above noise floor {floor}",
            fit.amplitude
        );
    }

    #[test]
    fn reduced_coherence_scales_the_amplitude() {
        // motional which-path information caps |ρ_SS,DD| at 0.45
        let n_max = 6;
        let overlap = 0.9;
        let mut amps = vec![Complex64::ZERO; 4 * n_max];
        amps[0] = Complex64::new(0.5f64.sqrt(), 0.0);
        amps[3 * n_max] = Complex64::new(0.0, 0.5f64.sqrt()) * overlap;
        amps[3 * n_max + 1] =
            Complex64::new(0.0, 0.5f64.sqrt()) * (1.0 - overlap * overlap).sqrt();
        let state = RegisterState::from_amplitudes(amps, n_max).unwrap();
        let phases = uniform_phases(20);
        let data = parity_scan(&state, &phases, None, 0);
        let fit = ml_fit_parity(&data, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(fit.amplitude, 0.90, epsilon = 1e-9);
        // and with shots, recovery within sampling error
        let data = parity_scan(&state, &phases, Some(2000), 11);
        let fit = ml_fit_parity(&data, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(fit.amplitude, 0.90, epsilon = 0.03);
    }

    #[test]
    fn noiseless_fit_recovers_amplitude_exactly() {
        let phases = uniform_phases(12);
        let data = ParityData {
            parity: phases.iter().map(|&p| 0.9 * (2.0 * p + 0.4).sin()).collect(),
            phases,
            shots_per_phase: None,
            seed: None,
        };
        let fit = ml_fit_parity(&data, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(fit.amplitude, 0.9, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.phase, 0.4, epsilon = 1e-6);
        // P0+P2 = 1 and A = 1 give unit fidelity
        let data_unit = ParityData {
            phases: uniform_phases(12),
            shots_per_phase: None,
            parity: uniform_phases(12)
                .iter()
                .map(|&p| (2.0 * p).sin())
                .collect(),
            seed: None,
        };
        let fit = ml_fit_parity(&data_unit, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(fit.fidelity, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn estimator_converges_with_shots() {
        // amplitude error shrinks like 1/√shots
        let state = bell_state(6);
        let phases = uniform_phases(20);
        let err_at = |shots: u64, reps: u64| -> f64 {
            let mut acc = 0.0;
            for r in 0..reps {
                let data = parity_scan(&state, &phases, Some(shots), 1000 + r);
                let fit = ml_fit_parity(&data, 1.0, 0.0).unwrap();
                acc += (fit.amplitude - 1.0).powi(2);
            }
            (acc / reps as f64).sqrt()
        };
        let e_small = err_at(50, 20);
        let e_large = err_at(800, 20);
        // 16x the shots should cut the error by about 4; allow slack for
        // the boundary at A = 1
        assert!(
            e_large < e_small / 2.0,
            "no convergence: {e_small:.4} -> {e_large:.4}"
        );
    }

    #[test]
    fn degenerate_phases_are_rejected() {
        let data = ParityData {
            phases: vec![0.3; 8],
            shots_per_phase: Some(100),
            parity: vec![0.0; 8],
            seed: None,
        };
        assert!(matches!(
            ml_fit_parity(&data, 1.0, 0.0),
            Err(ParityError::DegeneratePhases)
        ));
        let data = ParityData {
            phases: vec![0.0, 0.1, 0.2, 0.3],
            shots_per_phase: Some(100),
            parity: vec![0.0; 4],
            seed: None,
        };
        assert!(matches!(
            ml_fit_parity(&data, 1.0, 0.0),
            Err(ParityError::TooFewPhases(4))
        ));
    }
}
