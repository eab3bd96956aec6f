//! Time-domain realizations of a [`NoisePsd`] and the Welch periodogram used
//! to verify them.
//!
//! Continuous components are synthesized by shaping complex Gaussian
//! amplitudes per FFT bin (E|X_k|² set by the one-sided density) and inverse
//! transforming; tones are added as deterministic-amplitude oscillators with
//! their phase policy, and the quasi-static channel as a per-trajectory
//! constant. The averaged periodogram of the output reproduces the target
//! density, which the tests pin to ±1–1.5 dB.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{NoiseError, NoisePsd, PhasePolicy};
use crate::seeds;

/// A sampled frequency-offset realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrajectory {
    /// Sample spacing, s.
    pub dt: f64,
    /// Instantaneous frequency offset, rad/s, at t = k·dt.
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl NoiseTrajectory {
    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len().saturating_sub(1)) as f64
    }
}

/// Draw one realization of `psd` covering `duration` at spacing `dt`.
pub fn synthesize(
    psd: &NoisePsd,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<NoiseTrajectory, NoiseError> {
    psd.validate()?;
    let f_max = psd.max_modeled_frequency();
    if f_max > 0.0 {
        let limit = 1.0 / (4.0 * f_max);
        if dt >= limit {
            return Err(NoiseError::AliasingGuard { dt, f_max, limit });
        }
    }
    let n = (duration / dt).ceil() as usize + 1;
    let mut samples = vec![0.0f64; n];
    let mut rng = seeds::child_rng(seed, 0);

    // continuous components through the inverse FFT
    if psd.white_level > 0.0 || psd.flicker_level > 0.0 || !psd.bumps.is_empty() {
        let m = n.next_power_of_two().max(64);
        let df = 1.0 / (m as f64 * dt);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut spectrum = vec![Complex64::ZERO; m];
        for k in 1..m / 2 {
            let s = psd.continuous_psd_at(k as f64 * df);
            // E|X_k|² = S·df/2 so the pair (k, m-k) contributes S·df
            let scale = (s * df).sqrt() / 2.0;
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            spectrum[k] = Complex64::new(scale * re, scale * im);
            spectrum[m - k] = spectrum[k].conj();
        }
        let s_nyq = psd.continuous_psd_at((m / 2) as f64 * df);
        spectrum[m / 2] = Complex64::new((s_nyq * df).sqrt() * normal.sample(&mut rng), 0.0);
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(m).process(&mut spectrum);
        for (x, v) in samples.iter_mut().zip(&spectrum) {
            *x = v.re;
        }
    }

    for line in &psd.lines {
        let peak = line.rms * std::f64::consts::SQRT_2;
        let phase = match line.phase {
            PhasePolicy::Fixed(p) => p,
            PhasePolicy::Random => rng.random::<f64>() * crate::TWO_PI,
        };
        let w = crate::TWO_PI * line.frequency_hz;
        for (k, x) in samples.iter_mut().enumerate() {
            *x += peak * (w * k as f64 * dt + phase).cos();
        }
    }

    if psd.quasi_static_rms > 0.0 {
        let offset = Normal::new(0.0, psd.quasi_static_rms)
            .unwrap()
            .sample(&mut rng);
        for x in &mut samples {
            *x += offset;
        }
    }

    Ok(NoiseTrajectory { dt, samples, seed })
}

/// Welch one-sided PSD estimate: Hann window, 50% overlap.
///
/// Returns (frequencies Hz, density (rad/s)²/Hz); the DC bin is dropped.
pub fn welch_psd(
    samples: &[f64],
    dt: f64,
    nperseg: usize,
) -> Result<(Vec<f64>, Vec<f64>), NoiseError> {
    if samples.len() < nperseg || nperseg < 8 {
        return Err(NoiseError::TooShortForWelch { nperseg });
    }
    let window: Vec<f64> = (0..nperseg)
        .map(|k| {
            let x = std::f64::consts::PI * k as f64 / nperseg as f64;
            x.sin().powi(2)
        })
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fs = 1.0 / dt;
    let hop = nperseg / 2;
    let n_segments = (samples.len() - nperseg) / hop + 1;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nperseg);
    let mut acc = vec![0.0f64; nperseg / 2 + 1];
    let mut buf = vec![Complex64::ZERO; nperseg];
    for seg in 0..n_segments {
        let start = seg * hop;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(samples[start + k] * window[k], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let scale = if k == 0 || k == nperseg / 2 { 1.0 } else { 2.0 };
            *a += scale * buf[k].norm_sqr() / (fs * win_power);
        }
    }
    for a in &mut acc {
        *a /= n_segments as f64;
    }
    let freqs: Vec<f64> = (1..=nperseg / 2).map(|k| k as f64 * fs / nperseg as f64).collect();
    Ok((freqs, acc[1..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mean, variance};
    use crate::noisekit::{default_servo_bump, SpectralLine};
    use approx::assert_abs_diff_eq;

    #[test]
    fn quiet_spectrum_gives_zero_trajectory() {
        let traj = synthesize(&NoisePsd::quiet(), 1e-3, 1e-6, 42).unwrap();
        assert!(traj.samples.iter().all(|&x| x == 0.0));
        assert!(traj.duration() >= 1e-3);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let psd = NoisePsd {
            white_level: 100.0,
            ..NoisePsd::quiet()
        };
        let a = synthesize(&psd, 0.01, 1e-5, 7).unwrap();
        let b = synthesize(&psd, 0.01, 1e-5, 7).unwrap();
        let c = synthesize(&psd, 0.01, 1e-5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn tone_variance_matches_rms() {
        let rms = 320.0;
        let psd = NoisePsd {
            lines: vec![SpectralLine {
                frequency_hz: 50.0,
                rms,
                phase: PhasePolicy::Random,
            }],
            ..NoisePsd::quiet()
        };
        // two full seconds, exactly 100 periods
        let traj = synthesize(&psd, 2.0, 1e-3, 3).unwrap();
        let n_full = (2.0 / 1e-3) as usize; // whole periods only
        let var = variance(&traj.samples[..n_full]);
        assert!(
            (var - rms * rms).abs() < 0.05 * rms * rms,
            "variance {var} vs {}",
            rms * rms
        );
    }

    #[test]
    fn aliasing_guard_fires() {
        let psd = NoisePsd {
            lines: vec![SpectralLine {
                frequency_hz: 1e6,
                rms: 1.0,
                phase: PhasePolicy::Random,
            }],
            ..NoisePsd::quiet()
        };
        assert!(matches!(
            synthesize(&psd, 1e-3, 1e-6, 0),
            Err(NoiseError::AliasingGuard { .. })
        ));
        assert!(synthesize(&psd, 1e-3, 2e-7, 0).is_ok());
    }

    #[test]
    fn white_periodogram_is_flat_over_two_decades() {
        let level = 250.0;
        let psd = NoisePsd {
            white_level: level,
            ..NoisePsd::quiet()
        };
        let dt = 1e-5;
        let nperseg = 1024;
        let mut acc: Vec<f64> = vec![0.0; nperseg / 2];
        let n_seeds = 50;
        for seed in 0..n_seeds {
            let traj = synthesize(&psd, 0.66, dt, seed).unwrap();
            let (_, p) = welch_psd(&traj.samples, dt, nperseg).unwrap();
            for (a, v) in acc.iter_mut().zip(&p) {
                *a += v / n_seeds as f64;
            }
        }
        let (freqs, _) = welch_psd(
            &synthesize(&psd, 0.66, dt, 0).unwrap().samples,
            dt,
            nperseg,
        )
        .unwrap();
        // two decades: 400 Hz to 40 kHz
        for (f, p) in freqs.iter().zip(&acc) {
            if *f < 400.0 || *f > 40_000.0 {
                continue;
            }
            let db = 10.0 * (p / level).log10();
            assert!(
                db.abs() < 1.0,
                "periodogram off by {db:.2} dB at {f:.0} Hz"
            );
        }
    }

    #[test]
    fn bump_band_round_trip() {
        let psd = NoisePsd {
            bumps: vec![default_servo_bump(4.0e9)],
            ..NoisePsd::quiet()
        };
        let dt = 8e-8;
        let nperseg = 4096;
        let mut acc: Vec<f64> = vec![0.0; nperseg / 2];
        let n_seeds = 40;
        for seed in 0..n_seeds {
            let traj = synthesize(&psd, 0.02, dt, seed).unwrap();
            let (_, p) = welch_psd(&traj.samples, dt, nperseg).unwrap();
            for (a, v) in acc.iter_mut().zip(&p) {
                *a += v / n_seeds as f64;
            }
        }
        let freqs: Vec<f64> = (1..=nperseg / 2)
            .map(|k| k as f64 / (nperseg as f64 * dt))
            .collect();
        for (f, p) in freqs.iter().zip(&acc) {
            if *f < 0.7e6 || *f > 1.5e6 {
                continue;
            }
            let target = psd.continuous_psd_at(*f);
            let db = 10.0 * (p / target).log10();
            assert!(
                db.abs() < 1.5,
                "bump periodogram off by {db:.2} dB at {f:.3e} Hz"
            );
        }
    }

    #[test]
    fn quasi_static_offsets_vary_per_trajectory() {
        let psd = NoisePsd {
            quasi_static_rms: 175.0,
            ..NoisePsd::quiet()
        };
        let offsets: Vec<f64> = (0..400)
            .map(|seed| mean(&synthesize(&psd, 1e-3, 1e-4, seed).unwrap().samples))
            .collect();
        let sd = variance(&offsets).sqrt();
        assert!(
            (sd - 175.0).abs() < 20.0,
            "per-shot offset spread {sd} vs 175"
        );
    }
}
