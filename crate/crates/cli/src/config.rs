//! Run configuration: one JSON file per run, flat `--set key=value`
//! overrides, and a snapshot that reproduces the run byte-for-byte.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use iongate::msgate::MapAxis;
use iongate::qcore::GateParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootConfig {
    /// Optional label; must match the subcommand when present.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` overrides.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Rayon worker threads; 0 keeps the default. Results never depend on
    /// this.
    #[serde(default)]
    pub threads: usize,

    #[serde(default)]
    pub gate: Option<GateConfig>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub parity: Option<ParityConfig>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub coherence: Option<CoherenceConfig>,
    #[serde(default)]
    pub address: Option<AddressConfig>,
    #[serde(default)]
    pub readout: Option<ReadoutConfig>,
    #[serde(default)]
    pub freq: Option<FreqConfig>,
    #[serde(default)]
    pub register: Option<RegisterConfig>,
}

/// MS interaction parameters in configuration units (Hz).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub omega_hz: f64,
    pub eta: f64,
    /// Symmetric detuning; if absent, the gate point 2ηΩ is used.
    #[serde(default)]
    pub delta_hz: Option<f64>,
    #[serde(default)]
    pub delta_asym_hz: f64,
    #[serde(default = "default_nu_hz")]
    pub nu_hz: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub initial_n: usize,
}

fn default_nu_hz() -> f64 {
    0.98e6
}
fn default_n_max() -> usize {
    20
}

impl GateConfig {
    pub fn to_params(&self) -> GateParams {
        let omega = iongate::hz_to_rad(self.omega_hz);
        let delta = match self.delta_hz {
            Some(d) => iongate::hz_to_rad(d),
            None => 2.0 * self.eta * omega,
        };
        GateParams {
            omega,
            eta: self.eta,
            delta,
            delta_asym: iongate::hz_to_rad(self.delta_asym_hz),
            nu: iongate::hz_to_rad(self.nu_hz),
            n_max: self.n_max,
            initial_n: self.initial_n,
        }
    }
}

/// Uniform grid specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 1 {
            bail!("grid needs at least one point");
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|k| self.start + k as f64 * step)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AxisName {
    Time,
    Delta,
    DeltaAsym,
}

impl From<AxisName> for MapAxis {
    fn from(a: AxisName) -> Self {
        match a {
            AxisName::Time => MapAxis::Time,
            AxisName::Delta => MapAxis::Delta,
            AxisName::DeltaAsym => MapAxis::DeltaAsym,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub axis1: AxisName,
    pub grid1: GridSpec,
    pub axis2: AxisName,
    pub grid2: GridSpec,
    /// Interaction time when time is not a scan axis, s.
    #[serde(default)]
    pub t_fixed_s: Option<f64>,
    #[serde(default)]
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityConfig {
    /// Interaction time; defaults to the gate point 2π/δ.
    #[serde(default)]
    pub t_gate_s: Option<f64>,
    #[serde(default = "default_phase_count")]
    pub phases: usize,
    /// Analysis shots per phase; None = exact expectations.
    #[serde(default)]
    pub shots: Option<u64>,
    /// Shots for the bare-output population measurement; None = exact.
    #[serde(default)]
    pub pop_shots: Option<u64>,
}

fn default_phase_count() -> usize {
    20
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdConfig {
    #[serde(default)]
    pub white_level: f64,
    #[serde(default)]
    pub flicker_level: f64,
    #[serde(default)]
    pub quasi_static_rms: f64,
    #[serde(default)]
    pub lines: Vec<LineConfig>,
    #[serde(default)]
    pub bumps: Vec<BumpConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub frequency_hz: f64,
    pub rms: f64,
    /// Fixed phase in rad; absent = random per realization.
    #[serde(default)]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    #[serde(default = "default_bump_center")]
    pub center_hz: f64,
    #[serde(default = "default_bump_fwhm")]
    pub fwhm_hz: f64,
    #[serde(default = "default_bump_power")]
    pub power: f64,
}

fn default_bump_center() -> f64 {
    1.1e6
}
fn default_bump_fwhm() -> f64 {
    1.0e6
}
fn default_bump_power() -> f64 {
    iongate::noisekit::CALIBRATED_BUMP_POWER
}

impl PsdConfig {
    pub fn to_psd(&self) -> iongate::noisekit::NoisePsd {
        use iongate::noisekit::{NoisePsd, PhasePolicy, ServoBump, SpectralLine};
        NoisePsd {
            white_level: self.white_level,
            flicker_level: self.flicker_level,
            quasi_static_rms: self.quasi_static_rms,
            lines: self
                .lines
                .iter()
                .map(|l| SpectralLine {
                    frequency_hz: l.frequency_hz,
                    rms: l.rms,
                    phase: match l.phase {
                        Some(p) => PhasePolicy::Fixed(p),
                        None => PhasePolicy::Random,
                    },
                })
                .collect(),
            bumps: self
                .bumps
                .iter()
                .map(|b| ServoBump {
                    center_hz: b.center_hz,
                    fwhm_hz: b.fwhm_hz,
                    power: b.power,
                })
                .collect(),
            cavity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    #[serde(default = "default_cavity_linewidth")]
    pub linewidth_hz: f64,
    #[serde(default = "default_finesse")]
    pub finesse: f64,
    #[serde(default = "default_fsr")]
    pub fsr_hz: f64,
}

fn default_cavity_linewidth() -> f64 {
    22e3
}
fn default_finesse() -> f64 {
    1e5
}
fn default_fsr() -> f64 {
    1.93e9
}

impl CavityConfig {
    pub fn to_cavity(&self) -> iongate::noisekit::CavityParams {
        iongate::noisekit::CavityParams {
            linewidth_hz: self.linewidth_hz,
            finesse: self.finesse,
            fsr_hz: self.fsr_hz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub psd: PsdConfig,
    pub omega_hz: f64,
    #[serde(default = "default_pulse")]
    pub pulse_s: f64,
    pub detunings_hz: GridSpec,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// When present, a second, cavity-filtered spectrum column is computed.
    #[serde(default)]
    pub cavity: Option<CavityConfig>,
}

fn default_pulse() -> f64 {
    100e-6
}
fn default_realizations() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Field spectrum in tesla units.
    pub psd: PsdConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub times_s: GridSpec,
    /// MFDD block count (ignored by ramsey/echo).
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    pub laser: PsdConfig,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default = "default_coh_realizations")]
    pub realizations: usize,
    #[serde(default = "default_phase_points")]
    pub phase_points: usize,
    #[serde(default)]
    pub shots: Option<u64>,
    /// Decay model fitted to the curve: exponential | gaussian | bessel.
    #[serde(default)]
    pub fit: Option<String>,
}

fn default_blocks() -> usize {
    4
}
fn default_coh_realizations() -> usize {
    400
}
fn default_phase_points() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddressConfig {
    pub omega_c_hz: f64,
    pub k_dot_x: [f64; 2],
    #[serde(default = "default_trap_drive")]
    pub trap_drive_hz: f64,
    #[serde(default)]
    pub rabi_jitter: f64,
    /// carrier | mm-sideband
    pub drive: String,
    pub times_s: GridSpec,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_trap_drive() -> f64 {
    21.75e6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    #[serde(default = "default_lambda_bright")]
    pub lambda_bright: f64,
    #[serde(default = "default_lambda_dark")]
    pub lambda_dark: f64,
    #[serde(default = "default_window")]
    pub window_s: f64,
    #[serde(default = "default_lifetime")]
    pub d_lifetime_s: f64,
    #[serde(default = "default_true")]
    pub decay_correction: bool,
}

fn default_lambda_bright() -> f64 {
    30.0
}
fn default_lambda_dark() -> f64 {
    0.5
}
fn default_window() -> f64 {
    1e-3
}
fn default_lifetime() -> f64 {
    0.390
}
fn default_true() -> bool {
    true
}

impl DetectionConfig {
    pub fn to_model(&self) -> iongate::readout::DetectionModel {
        iongate::readout::DetectionModel {
            lambda_bright: self.lambda_bright,
            lambda_dark: self.lambda_dark,
            window: self.window_s,
            d_lifetime: self.d_lifetime_s,
            decay_correction: self.decay_correction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    /// Register populations (p0, p1, p2) for simulation runs.
    #[serde(default)]
    pub populations: Option<[f64; 3]>,
    #[serde(default)]
    pub model: Option<DetectionConfig>,
    #[serde(default = "default_readout_shots")]
    pub shots: u64,
    /// Histogram CSV to invert (readout-fit).
    #[serde(default)]
    pub histogram_csv: Option<PathBuf>,
}

fn default_readout_shots() -> u64 {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub points: Vec<(f64, f64)>,
    #[serde(default = "default_max_slope")]
    pub max_slope_hz_per_s: f64,
    #[serde(default)]
    pub curvature_bound_hz_per_s2: Option<f64>,
    /// Times at which to evaluate the correction.
    #[serde(default)]
    pub evaluate_at_s: Vec<f64>,
}

fn default_max_slope() -> f64 {
    2000.0 / 60.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqConfig {
    #[serde(default = "default_trap_drive")]
    pub trap_drive_hz: f64,
    pub base_hz: f64,
    pub carrier_hz: f64,
    pub f1_hz: f64,
    pub sideband_offset_hz: f64,
    pub f2_hz: f64,
    #[serde(default)]
    pub drift: Option<DriftConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterConfig {
    pub measured_csv: PathBuf,
    pub calculated_csv: PathBuf,
    pub axis: AxisName,
}

/// Load a config file, apply `--set` overrides, and return both the typed
/// config and the merged JSON snapshot.
pub fn load(path: &Path, overrides: &[String]) -> Result<(RootConfig, serde_json::Value)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).context("config is not valid JSON")?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    let config: RootConfig =
        serde_json::from_value(value.clone()).context("config schema validation")?;
    Ok((config, value))
}

/// Apply one `dotted.path=json_value` override.
fn apply_override(root: &mut serde_json::Value, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| anyhow!("override {item:?} is not of the form key=value"))?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if k + 1 == parts.len() {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(part.to_string(), parsed);
                    return Ok(());
                }
                _ => bail!("override path {path:?} walks through a non-object"),
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default())),
            _ => bail!("override path {path:?} walks through a non-object"),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_and_create_nodes() {
        let mut v: serde_json::Value =
            serde_json::from_str(r#"{"gate": {"eta": 0.05}, "seed": 1}"#).unwrap();
        apply_override(&mut v, "gate.eta=0.07").unwrap();
        apply_override(&mut v, "scan.shots=200").unwrap();
        apply_override(&mut v, "seed=9").unwrap();
        assert_eq!(v["gate"]["eta"], serde_json::json!(0.07));
        assert_eq!(v["scan"]["shots"], serde_json::json!(200));
        assert_eq!(v["seed"], serde_json::json!(9));
        assert!(apply_override(&mut v, "nonsense").is_err());
    }

    #[test]
    fn grid_spec_expands() {
        let g = GridSpec {
            start: 0.0,
            stop: 1.0,
            points: 5,
        };
        assert_eq!(g.values().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
