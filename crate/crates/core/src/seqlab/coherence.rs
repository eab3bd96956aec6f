//! Monte Carlo fringe-contrast simulation.
//!
//! Per realization, the accumulated interferometer phase is
//!
//! ```text
//! φ = ∫ e(t)·δω_L(t) dt  +  ∫ e(t)·κ(t)·B(t) dt
//! ```
//!
//! with e(t) the optical echo sign, κ(t) the active Zeeman coefficient and
//! B(t) the field realization. Quasi-static offsets, tones and white noise
//! integrate in closed form per constant-weight segment; 1/f and bump
//! content falls back to a synthesized trajectory on a segment-aligned grid.
//! The closing π/2 phase is scanned and the fringe fitted with a sinusoid of
//! fixed 1/2 offset, exactly like the experimental pipeline; exact
//! expectation values and shot-sampled modes are both available.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DDSequence, ZeemanModel};
use crate::noisekit::{synthesize, NoisePsd, PhasePolicy};
use crate::optimize::sinusoid_quadratures;
use crate::seeds;

/// Simulation inputs shared across the sequence family.
#[derive(Debug, Clone)]
pub struct CoherenceConfig<'a> {
    /// Laser frequency-noise spectrum, rad/s units.
    pub laser: &'a NoisePsd,
    /// Magnetic field spectrum in tesla units, with its Zeeman sensitivity.
    pub field: Option<(&'a NoisePsd, &'a ZeemanModel)>,
    pub realizations: usize,
    /// Number of analysis phases spread over [0, 2π).
    pub phase_points: usize,
    /// Per-phase measurement shots; `None` keeps exact expectations.
    pub shots: Option<u64>,
    pub seed: u64,
}

/// Fringe observables at one sequence duration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub contrast: f64,
    /// Fitted fringe phase, rad.
    pub fringe_phase: f64,
    pub phases: Vec<f64>,
    pub excitation: Vec<f64>,
}

fn integrate_tone_segment(w: f64, peak: f64, phase: f64, t0: f64, t1: f64) -> f64 {
    if w == 0.0 {
        return peak * phase.cos() * (t1 - t0);
    }
    peak * ((w * t1 + phase).sin() - (w * t0 + phase).sin()) / w
}

/// Accumulate one realization of ∫ weight(t)·x(t) dt for a noise process
/// described by `psd`, over piecewise-constant weight segments.
fn integrate_noise<R: Rng>(
    weights: &[(f64, f64, f64)],
    psd: &NoisePsd,
    total_time: f64,
    rng: &mut R,
) -> f64 {
    let mut phi = 0.0;

    if psd.quasi_static_rms > 0.0 {
        let offset = Normal::new(0.0, psd.quasi_static_rms).unwrap().sample(rng);
        for &(t0, t1, w) in weights {
            phi += offset * w * (t1 - t0);
        }
    }

    for line in &psd.lines {
        let peak = line.rms * std::f64::consts::SQRT_2;
        let phase = match line.phase {
            PhasePolicy::Fixed(p) => p,
            PhasePolicy::Random => rng.random::<f64>() * crate::TWO_PI,
        };
        let w_line = crate::TWO_PI * line.frequency_hz;
        for &(t0, t1, w) in weights {
            phi += w * integrate_tone_segment(w_line, peak, phase, t0, t1);
        }
    }

    if psd.white_level > 0.0 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        for &(t0, t1, w) in weights {
            // Var(∫ x dt) over a segment = S₀·Δt/2 in one-sided convention
            let sigma = (psd.white_level * (t1 - t0) / 2.0).sqrt();
            phi += w * sigma * normal.sample(rng);
        }
    }

    if psd.flicker_level > 0.0 || !psd.bumps.is_empty() {
        // trajectory path for spectrally structured noise; the synthesis
        // window is padded well past the sequence so the realization carries
        // spectral weight below 1/T (1/f noise is dominated by it)
        let mut shaped = psd.clone();
        shaped.quasi_static_rms = 0.0;
        shaped.lines.clear();
        shaped.white_level = 0.0;
        let min_seg = weights
            .iter()
            .map(|(a, b, _)| b - a)
            .fold(f64::INFINITY, f64::min);
        let f_max = shaped.max_modeled_frequency();
        let mut dt = (min_seg / 8.0).min(total_time / 1024.0);
        if f_max > 0.0 {
            dt = dt.min(1.0 / (8.0 * f_max));
        }
        let padded = 32.0 * total_time;
        dt = dt.max(padded / (1 << 21) as f64);
        let traj = synthesize(&shaped, padded, dt, rng.random::<u64>())
            .expect("aliasing guard satisfied by construction");
        for &(t0, t1, w) in weights {
            let mut t = t0;
            while t < t1 - 1e-18 {
                let step = dt.min(t1 - t);
                let k = ((t + 0.5 * step) / dt) as usize;
                phi += w * traj.samples[k.min(traj.samples.len() - 1)] * step;
                t += step;
            }
        }
    }

    phi
}

/// Mean interferometer phase accumulated by one realization.
fn realization_phase<R: Rng>(
    seq: &DDSequence,
    cfg: &CoherenceConfig<'_>,
    laser_weights: &[(f64, f64, f64)],
    field_weights: Option<&[(f64, f64, f64)]>,
    rng: &mut R,
) -> f64 {
    let mut phi = integrate_noise(laser_weights, cfg.laser, seq.total_time, rng);
    if let (Some((psd, _)), Some(weights)) = (cfg.field, field_weights) {
        phi += integrate_noise(weights, psd, seq.total_time, rng);
    }
    phi
}

/// Simulate the fringe at the sequence's full duration and extract contrast
/// and phase from the scanned closing pulse.
pub fn simulate_coherence(seq: &DDSequence, cfg: &CoherenceConfig<'_>) -> CoherencePoint {
    let phases: Vec<f64> = (0..cfg.phase_points)
        .map(|k| k as f64 * crate::TWO_PI / cfg.phase_points as f64)
        .collect();
    let laser_weights = seq.laser_weights();
    let field_weights = cfg.field.map(|(_, z)| seq.magnetic_weights(z));

    let reps = cfg.realizations.max(1);
    let phis: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeds::child_rng(cfg.seed, r as u64);
            realization_phase(seq, cfg, &laser_weights, field_weights.as_deref(), &mut rng)
        })
        .collect();

    // P(φ_a) = (1 + cos(φ − φ_a))/2 averaged over realizations
    let mut excitation: Vec<f64> = phases
        .iter()
        .map(|&pa| {
            phis.iter()
                .map(|&phi| 0.5 * (1.0 + (phi - pa).cos()))
                .sum::<f64>()
                / reps as f64
        })
        .collect();

    if let Some(shots) = cfg.shots {
        for (k, p) in excitation.iter_mut().enumerate() {
            let mut rng = seeds::child_rng(cfg.seed ^ 0x5ca1ab1e, k as u64);
            let draw = Binomial::new(shots, p.clamp(0.0, 1.0))
                .unwrap()
                .sample(&mut rng);
            *p = draw as f64 / shots as f64;
        }
    }

    let (_, a, b) = sinusoid_quadratures(&phases, &excitation, 1.0);
    // P = 1/2 + (C/2)(cos φ_r cos φ_a + sin φ_r sin φ_a)
    let contrast = 2.0 * a.hypot(b);
    let fringe_phase = f64::atan2(b, a);
    CoherencePoint {
        contrast,
        fringe_phase,
        phases,
        excitation,
    }
}

/// Contrast at each duration, building the sequence per point.
pub fn coherence_curve<F>(
    build: F,
    times: &[f64],
    cfg: &CoherenceConfig<'_>,
) -> super::ContrastCurve
where
    F: Fn(f64) -> DDSequence,
{
    let contrast: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut cfg_t = cfg.clone();
            cfg_t.seed = seeds::child_seed(cfg.seed, k as u64);
            simulate_coherence(&build(t), &cfg_t).contrast
        })
        .collect();
    super::ContrastCurve {
        times: times.to_vec(),
        contrast,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::bessel_j0;
    use crate::noisekit::SpectralLine;
    use crate::seqlab::{build_mfdd, hahn_echo, ramsey};
    use approx::assert_abs_diff_eq;

    fn exact_cfg<'a>(
        laser: &'a NoisePsd,
        field: Option<(&'a NoisePsd, &'a ZeemanModel)>,
        realizations: usize,
        seed: u64,
    ) -> CoherenceConfig<'a> {
        CoherenceConfig {
            laser,
            field,
            realizations,
            phase_points: 12,
            shots: None,
            seed,
        }
    }

    #[test]
    fn no_noise_means_full_contrast() {
        let quiet = NoisePsd::quiet();
        for seq in [ramsey(1e-3).unwrap(), hahn_echo(2e-3).unwrap(), build_mfdd(5e-3, 4).unwrap()] {
            let point = simulate_coherence(&seq, &exact_cfg(&quiet, None, 10, 1));
            assert_abs_diff_eq!(point.contrast, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn static_field_cancels_under_mfdd_but_shifts_ramsey() {
        let quiet = NoisePsd::quiet();
        let z = ZeemanModel::standard();
        let b0 = 20e-9; // 20 nT constant offset
        let field = NoisePsd {
            lines: vec![SpectralLine {
                frequency_hz: 0.0,
                rms: b0 / std::f64::consts::SQRT_2,
                phase: PhasePolicy::Fixed(0.0),
            }],
            ..NoisePsd::quiet()
        };
        let t = 1.5e-3;
        let mfdd = build_mfdd(t, 3).unwrap();
        let point = simulate_coherence(&mfdd, &exact_cfg(&quiet, Some((&field, &z)), 4, 2));
        assert_abs_diff_eq!(point.contrast, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point.fringe_phase, 0.0, epsilon = 1e-6);

        let plain = ramsey(t).unwrap();
        let point = simulate_coherence(&plain, &exact_cfg(&quiet, Some((&field, &z)), 4, 2));
        let expected = z.coeff_initial * b0 * t;
        let mut diff = (point.fringe_phase - expected) % crate::TWO_PI;
        if diff > std::f64::consts::PI {
            diff -= crate::TWO_PI;
        }
        assert_abs_diff_eq!(diff, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(point.contrast, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn echo_refocuses_static_laser_detuning() {
        let laser = NoisePsd {
            lines: vec![SpectralLine {
                frequency_hz: 0.0,
                rms: 500.0 / std::f64::consts::SQRT_2,
                phase: PhasePolicy::Fixed(0.0),
            }],
            ..NoisePsd::quiet()
        };
        let seq = hahn_echo(5e-3).unwrap();
        let point = simulate_coherence(&seq, &exact_cfg(&laser, None, 4, 3));
        assert_abs_diff_eq!(point.contrast, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point.fringe_phase.sin(), 0.0, epsilon = 1e-9);
        // echo also kills per-shot quasi-static spread
        let qs = NoisePsd {
            quasi_static_rms: 800.0,
            ..NoisePsd::quiet()
        };
        let point = simulate_coherence(&seq, &exact_cfg(&qs, None, 200, 4));
        assert_abs_diff_eq!(point.contrast, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn monotone_field_follows_the_bessel_curve() {
        // a single 50 Hz tone dephases a plain Ramsey fringe as
        // |J₀(κ·B_peak·2 sin(πfT)/(2πf))|
        let quiet = NoisePsd::quiet();
        let z = ZeemanModel::standard();
        let b_rms = 13e-9;
        let field = NoisePsd {
            lines: vec![SpectralLine {
                frequency_hz: 50.0,
                rms: b_rms,
                phase: PhasePolicy::Random,
            }],
            ..NoisePsd::quiet()
        };
        let b_peak = b_rms * std::f64::consts::SQRT_2;
        let mut sum_sq_err = 0.0;
        let mut count = 0;
        for k in 1..=8 {
            let t = k as f64 * 1.2e-3;
            let seq = ramsey(t).unwrap();
            let point =
                simulate_coherence(&seq, &exact_cfg(&quiet, Some((&field, &z)), 3000, 40 + k));
            let arg = z.coeff_initial * b_peak * 2.0 * (std::f64::consts::PI * 50.0 * t).sin()
                / (crate::TWO_PI * 50.0);
            let expect = bessel_j0(arg).abs();
            sum_sq_err += (point.contrast - expect).powi(2);
            count += 1;
            assert!(
                (point.contrast - expect).abs() < 0.05,
                "contrast {:.3} vs Bessel {:.3} at T={t}",
                point.contrast,
                expect
            );
        }
        let rms = (sum_sq_err / count as f64).sqrt();
        assert!(rms < 0.02, "rms deviation from Bessel model {rms:.4}");
    }

    #[test]
    fn white_laser_noise_decays_the_fringe_exponentially() {
        // analytic contrast e^{-w·T/4}
        let psd = NoisePsd::from_lorentzian_linewidth(11.0);
        let t = 20e-3;
        let seq = ramsey(t).unwrap();
        let point = simulate_coherence(&seq, &exact_cfg(&psd, None, 6000, 5));
        let expect = (-psd.white_level * t / 4.0).exp();
        assert!(
            (point.contrast - expect).abs() < 0.03,
            "white-noise contrast {:.3} vs {:.3}",
            point.contrast,
            expect
        );
    }

    #[test]
    fn mfdd_does_not_touch_laser_white_noise() {
        let psd = NoisePsd::from_lorentzian_linewidth(30.0);
        let t = 6e-3;
        let plain = simulate_coherence(&ramsey(t).unwrap(), &exact_cfg(&psd, None, 5000, 6));
        let mfdd =
            simulate_coherence(&build_mfdd(t, 4).unwrap(), &exact_cfg(&psd, None, 5000, 7));
        assert!(
            (plain.contrast - mfdd.contrast).abs() < 0.04,
            "MFDD changed white-laser contrast: {:.3} vs {:.3}",
            plain.contrast,
            mfdd.contrast
        );
    }

    #[test]
    fn echo_beats_ramsey_under_flicker_noise() {
        let psd = NoisePsd {
            flicker_level: 2.5e4,
            ..NoisePsd::quiet()
        };
        let t = 8e-3;
        let plain = simulate_coherence(&ramsey(t).unwrap(), &exact_cfg(&psd, None, 800, 8));
        let echo = simulate_coherence(&hahn_echo(t).unwrap(), &exact_cfg(&psd, None, 800, 8));
        assert!(
            echo.contrast > plain.contrast + 0.05,
            "echo {:.3} vs ramsey {:.3}",
            echo.contrast,
            plain.contrast
        );
    }

    #[test]
    fn more_blocks_help_against_slow_field_noise() {
        // 50 Hz tone: deeper decoupling keeps more contrast at fixed T
        let quiet = NoisePsd::quiet();
        let z = ZeemanModel::standard();
        let field = NoisePsd {
            lines: vec![SpectralLine {
                frequency_hz: 50.0,
                rms: 60e-9,
                phase: PhasePolicy::Random,
            }],
            ..NoisePsd::quiet()
        };
        let t = 9e-3;
        let contrast_at = |n: usize| {
            let seq = if n == 0 {
                ramsey(t).unwrap()
            } else {
                build_mfdd(t, n).unwrap()
            };
            simulate_coherence(&seq, &exact_cfg(&quiet, Some((&field, &z)), 1500, 9)).contrast
        };
        let c0 = contrast_at(0);
        let c1 = contrast_at(1);
        let c4 = contrast_at(4);
        assert!(c1 > c0 + 0.05, "N=1 {c1:.3} vs plain {c0:.3}");
        assert!(c4 > c1, "N=4 {c4:.3} vs N=1 {c1:.3}");
    }

    #[test]
    fn sampled_mode_is_deterministic_and_close_to_exact() {
        let psd = NoisePsd::from_gaussian_linewidth(65.0);
        let seq = ramsey(4e-3).unwrap();
        let mut cfg = exact_cfg(&psd, None, 400, 10);
        cfg.shots = Some(500);
        let a = simulate_coherence(&seq, &cfg);
        let b = simulate_coherence(&seq, &cfg);
        assert_eq!(a.excitation, b.excitation);
        let exact = simulate_coherence(&seq, &exact_cfg(&psd, None, 400, 10));
        assert!((a.contrast - exact.contrast).abs() < 0.08);
    }
}
