//! Calibrate the servo-bump integrated power against the saturation anchor:
//! 50% excitation after a 400 µs unfiltered pulse at the bump peak.
//!
//! Run with `cargo run --release -p iongate --example calibrate_bump`.

use iongate::hz_to_rad;
use iongate::noisekit::{
    calibrate_bump_power, cavity_filter, default_servo_bump, saturation_curve,
    spectroscopy::SATURATION_KNEE, CavityParams, NoisePsd,
};

fn main() {
    let template = NoisePsd {
        bumps: vec![default_servo_bump(1e9)],
        ..NoisePsd::quiet()
    };
    let omega = hz_to_rad(100e3);
    let (calibrated, achieved) =
        calibrate_bump_power(&template, omega, 400e-6, SATURATION_KNEE, 64, 1)
            .expect("calibration");
    println!(
        "calibrated bump power: {:.4e} (rad/s)^2, excitation at 400 us = {:.4}",
        calibrated.bump_power(),
        achieved
    );

    let cavity = CavityParams {
        linewidth_hz: 22e3,
        finesse: 1e5,
        fsr_hz: 1.93e9,
    };
    let filtered = cavity_filter(&calibrated, cavity);
    let durations: Vec<f64> = (1..=100).map(|k| k as f64 * 4e-6).collect();
    let window = (4e-6, 100e-6);
    let unf = saturation_curve(&calibrated, omega, -1.1e6, &durations, 64, 2, window).unwrap();
    let fil = saturation_curve(&filtered, omega, -1.1e6, &durations, 64, 2, window).unwrap();
    println!(
        "slope unfiltered = {:.4e}/s, filtered = {:.4e}/s, ratio = {:.1}",
        unf.slope_per_s,
        fil.slope_per_s,
        unf.slope_per_s / fil.slope_per_s
    );
    println!("saturation curve (unfiltered): {:?}", unf.excitation);
}
