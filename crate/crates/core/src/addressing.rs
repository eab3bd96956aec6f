//! Individual addressing of a two-ion crystal through micromotion sidebands.
//!
//! An ion displaced from the rf null undergoes driven motion at the trap
//! frequency; in its rest frame the laser acquires FM sidebands with
//! modulation index k·x_MM. Tuning the laser to the first sideband drives
//! that ion at Ω_MM = Ωc·J₁(k·x) while an ion parked exactly on the null
//! (J₁(0) = 0) stays dark. On the carrier, the driven ion's Rabi frequency
//! is reduced to Ωc·J₀(k·x).
//!
//! Each ion evolves as an independent two-level Rabi problem at its own
//! effective rate; register populations come from the product state. Slow
//! drifts of the micromotion amplitude enter as per-shot Gaussian fractional
//! Rabi jitter, and the composite sequence X_{π/2} Y_π X_{π/2} shows how a π
//! flip can be made first-order insensitive to that jitter.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::math::{bessel_j0, bessel_j1};
use crate::qcore::Populations;
use crate::seeds;

/// Drive and modulation parameters of the two-ion register.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AddressingParams {
    /// Carrier Rabi frequency Ωc without excess micromotion, rad/s.
    pub omega_c: f64,
    /// Modulation depth k·x_MM per ion (dimensionless radians).
    pub k_dot_x: [f64; 2],
    /// Trap drive frequency, Hz. Bookkeeping for the frequency chain.
    pub trap_drive_hz: f64,
    /// Per-shot rms fractional Rabi-frequency jitter.
    pub rabi_jitter: f64,
}

impl Default for AddressingParams {
    fn default() -> Self {
        Self {
            omega_c: crate::hz_to_rad(20e3) / bessel_j1(0.4),
            k_dot_x: [0.0, 0.4],
            trap_drive_hz: 21.75e6,
            rabi_jitter: 0.0,
        }
    }
}

/// Which spectral component the laser sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriveLine {
    Carrier,
    MmSideband,
}

/// Micromotion-sideband Rabi frequency and the carrier reduction factor for
/// modulation depth `k_dot_x`.
pub fn mm_rabi(omega_c: f64, k_dot_x: f64) -> (f64, f64) {
    assert!(k_dot_x >= 0.0, "modulation depth must be non-negative");
    (omega_c * bessel_j1(k_dot_x), bessel_j0(k_dot_x))
}

/// Map axial displacement to modulation depth with a user-supplied linear
/// coefficient κ (rad per meter); the endcap boundary fields that set κ are
/// inputs, not modeled.
pub fn modulation_from_position(kappa: f64, z: f64) -> f64 {
    (kappa * z).abs()
}

/// P0/P1/P2 time traces of the register under the chosen drive line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlopTrace {
    pub times: Vec<f64>,
    pub pops: Vec<Populations>,
}

impl FlopTrace {
    pub fn to_csv(&self) -> String {
        crate::io::csv_string(
            &["time_s", "p0", "p1", "p2"],
            self.times
                .iter()
                .zip(&self.pops)
                .map(|(&t, p)| vec![t, p.p0, p.p1, p.p2]),
        )
    }
}

fn effective_rates(params: &AddressingParams, drive: DriveLine) -> [f64; 2] {
    let rate = |kx: f64| match drive {
        DriveLine::Carrier => params.omega_c * bessel_j0(kx),
        DriveLine::MmSideband => params.omega_c * bessel_j1(kx),
    };
    [rate(params.k_dot_x[0]), rate(params.k_dot_x[1])]
}

/// Register populations over `times`, averaged over `realizations` draws of
/// the per-shot Rabi jitter (one draw with jitter 0). Both ions start in S.
pub fn simulate_register_flops(
    params: &AddressingParams,
    drive: DriveLine,
    times: &[f64],
    realizations: usize,
    seed: u64,
) -> FlopTrace {
    let rates = effective_rates(params, drive);
    let reps = if params.rabi_jitter > 0.0 {
        realizations.max(1)
    } else {
        1
    };
    let normal = Normal::new(0.0, params.rabi_jitter.max(0.0)).unwrap();
    let mut acc = vec![Populations::new(0.0, 0.0, 0.0); times.len()];
    for r in 0..reps {
        let mut rng = seeds::child_rng(seed, r as u64);
        let scale = [
            1.0 + normal.sample(&mut rng),
            1.0 + normal.sample(&mut rng),
        ];
        for (k, &t) in times.iter().enumerate() {
            // each ion: P(still in S) = cos²(Ω_eff t / 2)
            let ps1 = (0.5 * rates[0] * scale[0] * t).cos().powi(2);
            let ps2 = (0.5 * rates[1] * scale[1] * t).cos().powi(2);
            acc[k].p2 += ps1 * ps2;
            acc[k].p1 += ps1 * (1.0 - ps2) + (1.0 - ps1) * ps2;
            acc[k].p0 += (1.0 - ps1) * (1.0 - ps2);
        }
    }
    let inv = 1.0 / reps as f64;
    for p in &mut acc {
        p.p0 *= inv;
        p.p1 *= inv;
        p.p2 *= inv;
    }
    FlopTrace {
        times: times.to_vec(),
        pops: acc,
    }
}

/// Transfer probabilities of a π flip with fractional Rabi error ε: plain
/// pulse and the composite X_{π/2} Y_π X_{π/2}.
///
/// Closed forms from the 2x2 rotation product (the product itself is the
/// test oracle): with a = (1+ε)π/2, S = sin a, C = cos a,
/// plain P = S², composite P = S²(1+C²) = 1 − sin⁴(επ/2).
pub fn composite_pi(epsilon: f64) -> (f64, f64) {
    assert!(epsilon.abs() < 0.5, "composite formula domain is |ε| < 0.5");
    let a = (1.0 + epsilon) * std::f64::consts::FRAC_PI_2;
    let s = a.sin();
    let c = a.cos();
    (s * s, s * s * (1.0 + c * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    #[test]
    fn mm_rabi_limits() {
        let (w, scale) = mm_rabi(1.0, 0.0);
        assert_eq!(w, 0.0);
        assert_eq!(scale, 1.0);
        // small-amplitude form Ωc·x/2 holds to 0.13% at x = 0.1
        let (w, _) = mm_rabi(1.0, 0.1);
        assert_abs_diff_eq!(w, 0.049937526036242, epsilon = 1e-12);
        assert!((w - 0.05).abs() / 0.05 < 1.3e-3);
    }

    #[test]
    fn small_angle_domain_guard() {
        // |J₁(x) − x/2| / (x/2) < 1% for x < 0.283
        for k in 1..=283 {
            let x = k as f64 * 1e-3;
            let rel = (bessel_j1(x) - x / 2.0).abs() / (x / 2.0);
            assert!(rel < 0.01, "relative error {rel:.4} at x={x}");
        }
    }

    #[test]
    fn twenty_khz_sideband_flops() {
        // Ωc and k·x chosen for Ω_MM/2π = 20 kHz: a π flip then takes 25 µs
        let target = crate::hz_to_rad(20e3);
        let kx = 0.4;
        let omega_c = target / bessel_j1(kx);
        let (w, _) = mm_rabi(omega_c, kx);
        assert_abs_diff_eq!(w, target, epsilon = 1e-9);
        let params = AddressingParams {
            omega_c,
            k_dot_x: [0.0, kx],
            trap_drive_hz: 21.75e6,
            rabi_jitter: 0.0,
        };
        // after half a Rabi period the addressed ion is fully flipped
        let t_pi = std::f64::consts::PI / w;
        assert_abs_diff_eq!(t_pi, 25e-6, epsilon = 1e-9);
        let trace =
            simulate_register_flops(&params, DriveLine::MmSideband, &[t_pi], 1, 0);
        assert_abs_diff_eq!(trace.pops[0].p1, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn null_ion_is_protected() {
        let params = AddressingParams {
            omega_c: crate::hz_to_rad(100e3),
            k_dot_x: [0.0, 0.35],
            trap_drive_hz: 21.75e6,
            rabi_jitter: 0.0,
        };
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 1e-6).collect();
        let trace = simulate_register_flops(&params, DriveLine::MmSideband, &times, 1, 0);
        let mut max_p0: f64 = 0.0;
        let mut min_sum: f64 = 1.0;
        let mut max_amp: f64 = 0.0;
        for p in &trace.pops {
            max_p0 = max_p0.max(p.p0);
            min_sum = min_sum.min(p.p1 + p.p2);
            max_amp = max_amp.max(p.p1);
        }
        // exact protection in the ideal model, antiphase P1/P2
        assert_eq!(max_p0, 0.0);
        assert!((min_sum - 1.0).abs() < 1e-12);
        assert!(max_amp > 0.99);
    }

    #[test]
    fn carrier_flop_flips_both() {
        let params = AddressingParams {
            omega_c: crate::hz_to_rad(193e3),
            k_dot_x: [0.0, 0.0],
            trap_drive_hz: 21.75e6,
            rabi_jitter: 0.0,
        };
        let t_pi = std::f64::consts::PI / params.omega_c;
        let trace = simulate_register_flops(&params, DriveLine::Carrier, &[t_pi], 1, 0);
        assert_abs_diff_eq!(trace.pops[0].p0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jittered_carrier_flops_keep_high_flip_fidelity() {
        // 20 flops at Ω/2π = 193 kHz with 1% jitter: envelope consistent
        // with single-flip fidelity ≥ 0.997
        let params = AddressingParams {
            omega_c: crate::hz_to_rad(193e3),
            k_dot_x: [0.0, 0.0],
            trap_drive_hz: 21.75e6,
            rabi_jitter: 0.01,
        };
        let t_pi = std::f64::consts::PI / params.omega_c;
        let times: Vec<f64> = (1..=20).map(|k| k as f64 * t_pi).collect();
        let trace = simulate_register_flops(&params, DriveLine::Carrier, &times, 4000, 5);
        // both ions flip independently: P0(T_π) = p_flip²
        let flip_fidelity = trace.pops[0].p0.sqrt();
        assert!(
            flip_fidelity >= 0.997,
            "single-flip fidelity {flip_fidelity:.5}"
        );
        // the envelope decays but stays coherent through flop 19 (odd flops
        // leave both ions in D, so P0 carries the contrast there)
        let p0_late = trace.pops[18].p0;
        assert!(p0_late > 0.8, "late-flop contrast collapsed to {p0_late}");
        assert!(p0_late < trace.pops[0].p0);
    }

    /// Direct 2x2 rotation-matrix product, the oracle for the closed forms.
    fn composite_oracle(epsilon: f64) -> (f64, f64) {
        let rot = |theta: f64, sigma_y: bool| -> [[Complex64; 2]; 2] {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let s = (theta / 2.0).sin();
            if sigma_y {
                [
                    [c, Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), c],
                ]
            } else {
                [
                    [c, Complex64::new(0.0, -s)],
                    [Complex64::new(0.0, -s), c],
                ]
            }
        };
        let mul = |a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]| {
            let mut m = [[Complex64::ZERO; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        m[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            m
        };
        let th = (1.0 + epsilon) * std::f64::consts::PI;
        let plain = rot(th, false);
        let comp = mul(rot(th / 2.0, false), mul(rot(th, true), rot(th / 2.0, false)));
        (plain[1][0].norm_sqr(), comp[1][0].norm_sqr())
    }

    #[test]
    fn composite_matches_matrix_product() {
        for &eps in &[0.0, 0.013, -0.05, 0.2, -0.31, 0.49] {
            let (p_plain, p_comp) = composite_pi(eps);
            let (o_plain, o_comp) = composite_oracle(eps);
            assert_abs_diff_eq!(p_plain, o_plain, epsilon = 1e-12);
            assert_abs_diff_eq!(p_comp, o_comp, epsilon = 1e-12);
        }
    }

    #[test]
    fn composite_reference_point() {
        let (p_plain, p_comp) = composite_pi(0.05);
        // exact: sin²(0.025π) = 6.1558e-3 and its square 3.7894e-5
        assert_abs_diff_eq!(1.0 - p_plain, 6.16e-3, epsilon = 5e-6);
        assert_abs_diff_eq!(1.0 - p_comp, 3.80e-5, epsilon = 2e-7);
        assert_abs_diff_eq!(1.0 - p_plain, (0.025 * std::f64::consts::PI).sin().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 - p_comp, (0.025 * std::f64::consts::PI).sin().powi(4), epsilon = 1e-12);
        let (p0, c0) = composite_pi(0.0);
        assert_eq!(p0, 1.0);
        assert_eq!(c0, 1.0);
    }

    #[test]
    fn composite_beats_plain_over_the_domain() {
        for k in 1..300 {
            let eps = k as f64 * 1e-3;
            for e in [eps, -eps] {
                let (p_plain, p_comp) = composite_pi(e);
                assert!(
                    1.0 - p_comp < 1.0 - p_plain,
                    "composite worse at ε={e}"
                );
            }
        }
    }

    #[test]
    fn error_scaling_exponents() {
        // log-log slopes: 2 for plain, 4 for composite over ε ∈ [1e-3, 1e-1]
        let eps: Vec<f64> = (0..30)
            .map(|k| 1e-3 * (100f64).powf(k as f64 / 29.0))
            .collect();
        let (mut lx, mut ly_plain, mut ly_comp) = (vec![], vec![], vec![]);
        for &e in &eps {
            let (p, c) = composite_pi(e);
            lx.push(e.ln());
            ly_plain.push((1.0 - p).ln());
            ly_comp.push((1.0 - c).ln());
        }
        let slope_plain = crate::math::linear_slope(&lx, &ly_plain);
        let slope_comp = crate::math::linear_slope(&lx, &ly_comp);
        assert!((slope_plain - 2.0).abs() < 0.05, "plain slope {slope_plain}");
        assert!((slope_comp - 4.0).abs() < 0.05, "composite slope {slope_comp}");
    }
}
