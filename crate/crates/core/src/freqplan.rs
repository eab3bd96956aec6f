//! Deterministic ledger of the double-pass + single-pass AOM frequency chain.
//!
//! The optical offset delivered to the ions is always
//!
//! ```text
//! offset = 2 · (base + double-pass channel) + single-pass channel
//! ```
//!
//! where the double-pass channel is either the carrier or the micromotion
//! (MM) source (an rf switch selects one; they sit trap_drive/2 apart so the
//! doubled output hops by the full trap drive), and the single-pass channel
//! is one of the gate sidebands (rsb/bsb), the phase-referenced carrier
//! source f1, or the freely retunable f2.
//!
//! Each source accrues phase 2π·f·t continuously from its configured origin.
//! Phase bookkeeping reduces f·t modulo one cycle with an exact two-product
//! (valid while f·t stays below 2^52 cycles), so pulses separated by integer
//! periods report equal phases to well under a nanoradian. Retuning any
//! source mid-run is phase-continuous but marks that source as
//! coherence-reset — except the base source, whose updates are common-mode
//! through the double pass and exist precisely so drift correction does not
//! disturb relative phases.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pulse::PulseSequence;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("channel {0:?} is not configured")]
    Unconfigured(ChannelName),
    #[error(
        "carrier and mm sources must differ by trap_drive/2 = {expected} Hz (got {got} Hz)"
    )]
    CarrierMmSpacing { expected: f64, got: f64 },
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("calibration points must be time-sorted")]
    UnsortedCalibration,
    #[error("t = {t} s is outside the calibration span (extrapolation limit {limit} s)")]
    OutsideCalibration { t: f64, limit: f64 },
    #[error("{0}")]
    Sequence(#[from] crate::pulse::SequenceError),
}

/// Every rf source in the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelName {
    Base,
    Carrier,
    Mm,
    Rsb,
    Bsb,
    F1,
    F2,
}

impl ChannelName {
    /// 2 for sources feeding the double-pass AOM, 1 for single-pass.
    pub fn pass_multiplier(&self) -> f64 {
        match self {
            ChannelName::Base | ChannelName::Carrier | ChannelName::Mm => 2.0,
            _ => 1.0,
        }
    }
}

/// One rf source: frequency and phase origin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SourceChannel {
    pub name: ChannelName,
    pub frequency_hz: f64,
    pub phase_origin_rad: f64,
}

/// Double-pass path selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrivePath {
    Carrier,
    Mm,
}

/// Single-pass source selection; `None` leaves the single-pass contribution
/// out of the sum.
pub type Sideband = Option<SinglePassChannel>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SinglePassChannel {
    Rsb,
    Bsb,
    F1,
    F2,
}

impl SinglePassChannel {
    fn name(&self) -> ChannelName {
        match self {
            SinglePassChannel::Rsb => ChannelName::Rsb,
            SinglePassChannel::Bsb => ChannelName::Bsb,
            SinglePassChannel::F1 => ChannelName::F1,
            SinglePassChannel::F2 => ChannelName::F2,
        }
    }
}

/// A configured frequency chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyPlan {
    pub trap_drive_hz: f64,
    pub base: SourceChannel,
    pub carrier: SourceChannel,
    pub mm: SourceChannel,
    pub rsb: SourceChannel,
    pub bsb: SourceChannel,
    pub f1: SourceChannel,
    pub f2: SourceChannel,
}

impl FrequencyPlan {
    /// A chain with the carrier/MM pair split by `trap_drive/2` and the gate
    /// sidebands placed symmetrically at ±sideband_offset around f1.
    pub fn new(
        trap_drive_hz: f64,
        base_hz: f64,
        carrier_hz: f64,
        f1_hz: f64,
        sideband_offset_hz: f64,
        f2_hz: f64,
    ) -> Self {
        let chan = |name, frequency_hz| SourceChannel {
            name,
            frequency_hz,
            phase_origin_rad: 0.0,
        };
        Self {
            trap_drive_hz,
            base: chan(ChannelName::Base, base_hz),
            carrier: chan(ChannelName::Carrier, carrier_hz),
            mm: chan(ChannelName::Mm, carrier_hz - trap_drive_hz / 2.0),
            rsb: chan(ChannelName::Rsb, f1_hz - sideband_offset_hz),
            bsb: chan(ChannelName::Bsb, f1_hz + sideband_offset_hz),
            f1: chan(ChannelName::F1, f1_hz),
            f2: chan(ChannelName::F2, f2_hz),
        }
    }

    pub fn channel(&self, name: ChannelName) -> &SourceChannel {
        match name {
            ChannelName::Base => &self.base,
            ChannelName::Carrier => &self.carrier,
            ChannelName::Mm => &self.mm,
            ChannelName::Rsb => &self.rsb,
            ChannelName::Bsb => &self.bsb,
            ChannelName::F1 => &self.f1,
            ChannelName::F2 => &self.f2,
        }
    }

    /// Check the structural invariants of the chain.
    pub fn validate(&self) -> Result<(), PlanError> {
        let expected = self.trap_drive_hz / 2.0;
        let got = (self.carrier.frequency_hz - self.mm.frequency_hz).abs();
        if (got - expected).abs() > 1e-3 {
            return Err(PlanError::CarrierMmSpacing { expected, got });
        }
        Ok(())
    }

    /// True when rsb/bsb sit symmetrically around f1 (the MS configuration).
    pub fn ms_sidebands_symmetric(&self) -> bool {
        let lo = self.f1.frequency_hz - self.rsb.frequency_hz;
        let hi = self.bsb.frequency_hz - self.f1.frequency_hz;
        (lo - hi).abs() <= 1e-3
    }
}

/// A pulse routed through the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub path: DrivePath,
    pub sideband: Sideband,
}

/// Optical frequency offset of a pulse, Hz.
pub fn pulse_frequency(plan: &FrequencyPlan, pulse: &PulseSpec) -> Result<f64, PlanError> {
    plan.validate()?;
    let dp = match pulse.path {
        DrivePath::Carrier => plan.carrier.frequency_hz,
        DrivePath::Mm => plan.mm.frequency_hz,
    };
    let sp = pulse
        .sideband
        .map(|s| plan.channel(s.name()).frequency_hz)
        .unwrap_or(0.0);
    Ok(2.0 * (plan.base.frequency_hz + dp) + sp)
}

// ---------------------------------------------------------------------------
// drift compensation

/// Calibration history of the reference-cavity-vs-atom offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftModel {
    /// (wall-clock time s, measured offset Hz), time-sorted.
    pub points: Vec<(f64, f64)>,
    /// Largest drift slope the cavity exhibits, Hz/s.
    pub max_slope_hz_per_s: f64,
    /// Bound on the drift curvature |f''|, Hz/s²; enables the analytic
    /// worst-case residual of linear interpolation, M·h²/8.
    pub curvature_bound_hz_per_s2: Option<f64>,
}

impl DriftModel {
    /// Hard structural checks plus soft warnings (slope exceeding the stated
    /// maximum is a data-quality warning, not an error).
    pub fn validate(&self) -> Result<Vec<String>, PlanError> {
        if self.points.is_empty() {
            return Err(PlanError::EmptyCalibration);
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(PlanError::UnsortedCalibration);
        }
        let mut warnings = Vec::new();
        for w in self.points.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if slope.abs() > self.max_slope_hz_per_s {
                warnings.push(format!(
                    "calibration slope {:.3} Hz/s between t={} and t={} exceeds the stated \
                     maximum {:.3} Hz/s",
                    slope, w[0].0, w[1].0, self.max_slope_hz_per_s
                ));
            }
        }
        Ok(warnings)
    }

    /// Curvature estimate from discrete slope differences, used when no
    /// explicit bound is supplied.
    fn estimated_curvature(&self) -> f64 {
        let mut est: f64 = 0.0;
        for w in self.points.windows(3) {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            let span = 0.5 * (w[2].0 - w[0].0);
            est = est.max(((s2 - s1) / span).abs());
        }
        est
    }
}

/// Output of [`compensate_drift`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriftCorrection {
    /// Base-frequency correction to apply at `t`, Hz.
    pub correction_hz: f64,
    /// Worst-case interpolation residual, Hz.
    pub residual_bound_hz: f64,
    /// Set when `t` lies past the last calibration point (allowed up to one
    /// interval).
    pub extrapolated: bool,
}

/// Piecewise-linear interpolation of the calibration history at `t`.
pub fn compensate_drift(model: &DriftModel, t: f64) -> Result<DriftCorrection, PlanError> {
    model.validate()?;
    let pts = &model.points;
    let first = pts[0].0;
    let last = pts[pts.len() - 1].0;
    let last_interval = if pts.len() >= 2 {
        last - pts[pts.len() - 2].0
    } else {
        0.0
    };
    if t < first || t > last + last_interval {
        return Err(PlanError::OutsideCalibration {
            t,
            limit: last + last_interval,
        });
    }
    let curvature = model
        .curvature_bound_hz_per_s2
        .unwrap_or_else(|| model.estimated_curvature());

    let (i0, i1, extrapolated) = if t > last {
        (pts.len() - 2, pts.len() - 1, true)
    } else {
        let j = pts.partition_point(|p| p.0 < t).min(pts.len() - 1).max(1);
        (j - 1, j, false)
    };
    let (t0, f0) = pts[i0];
    let (t1, f1) = pts[i1];
    let h = t1 - t0;
    let w = (t - t0) / h;
    let correction = f0 + w * (f1 - f0);
    // linear interpolation of a curvature-bounded function errs by at most
    // M·h²/8 inside the interval; extrapolation by up to one interval is
    // bounded by M·h²/2 at its far end
    let residual = if extrapolated {
        curvature * (t - t1).powi(2) / 2.0 + curvature * h * h / 8.0
    } else {
        curvature * h * h / 8.0
    };
    Ok(DriftCorrection {
        correction_hz: correction,
        residual_bound_hz: residual,
        extrapolated,
    })
}

// ---------------------------------------------------------------------------
// phase ledger

/// Events the ledger understands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LedgerEvent {
    /// Fire a pulse through the chain.
    Pulse(PulseSpec),
    /// Retune a source; phase-continuous, but marks the source (except the
    /// common-mode base) as coherence-reset.
    Retune {
        channel: ChannelName,
        frequency_hz: f64,
    },
}

/// Phase table entry for one pulse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub pulse: PulseSpec,
    /// Optical frequency offset at pulse time, Hz.
    pub frequency_hz: f64,
    /// Total accrued optical phase at pulse start, rad in [0, 2π).
    pub phase_rad: f64,
    /// Accrued phase of the single-pass contributor alone, rad in [0, 2π).
    pub single_pass_phase_rad: f64,
    /// False when a contributing source was retuned earlier in the run.
    pub coherence_ok: bool,
}

/// Exact fractional part of f·t in cycles.
///
/// The two-product splits the rounding residue off the primary product, so
/// the result is accurate to ~1e-16 cycles as long as |f·t| < 2^52.
fn fract_cycles(f_hz: f64, dt_s: f64) -> f64 {
    let hi = f_hz * dt_s;
    let lo = f_hz.mul_add(dt_s, -hi);
    let frac = (hi - hi.round()) + lo;
    frac - frac.floor()
}

#[derive(Debug, Clone, Copy)]
struct ChannelState {
    frequency_hz: f64,
    /// accumulated cycles (mod 1) at `segment_start`
    cycles_at_start: f64,
    segment_start: f64,
    reset: bool,
}

impl ChannelState {
    fn phase_cycles_at(&self, t: f64) -> f64 {
        let c = self.cycles_at_start + fract_cycles(self.frequency_hz, t - self.segment_start);
        c - c.floor()
    }

    fn retune(&mut self, t: f64, f_new: f64) {
        self.cycles_at_start = self.phase_cycles_at(t);
        self.segment_start = t;
        self.frequency_hz = f_new;
    }
}

/// Walk a timed event list and produce the per-pulse frequency/phase table.
pub fn phase_ledger(
    plan: &FrequencyPlan,
    sequence: &PulseSequence<LedgerEvent>,
) -> Result<Vec<LedgerRow>, PlanError> {
    plan.validate()?;
    let all = [
        ChannelName::Base,
        ChannelName::Carrier,
        ChannelName::Mm,
        ChannelName::Rsb,
        ChannelName::Bsb,
        ChannelName::F1,
        ChannelName::F2,
    ];
    let mut states: Vec<(ChannelName, ChannelState)> = all
        .iter()
        .map(|&name| {
            let ch = plan.channel(name);
            (
                name,
                ChannelState {
                    frequency_hz: ch.frequency_hz,
                    cycles_at_start: ch.phase_origin_rad / crate::TWO_PI,
                    segment_start: 0.0,
                    reset: false,
                },
            )
        })
        .collect();
    let state_of = |states: &[(ChannelName, ChannelState)], name: ChannelName| -> ChannelState {
        states.iter().find(|(n, _)| *n == name).unwrap().1
    };

    let mut rows = Vec::new();
    let mut plan_now = plan.clone();
    for ev in sequence.events() {
        match ev.action {
            LedgerEvent::Retune {
                channel,
                frequency_hz,
            } => {
                let entry = states.iter_mut().find(|(n, _)| *n == channel).unwrap();
                entry.1.retune(ev.t, frequency_hz);
                if channel != ChannelName::Base {
                    entry.1.reset = true;
                }
                // keep a current plan for frequency reporting
                match channel {
                    ChannelName::Base => plan_now.base.frequency_hz = frequency_hz,
                    ChannelName::Carrier => plan_now.carrier.frequency_hz = frequency_hz,
                    ChannelName::Mm => plan_now.mm.frequency_hz = frequency_hz,
                    ChannelName::Rsb => plan_now.rsb.frequency_hz = frequency_hz,
                    ChannelName::Bsb => plan_now.bsb.frequency_hz = frequency_hz,
                    ChannelName::F1 => plan_now.f1.frequency_hz = frequency_hz,
                    ChannelName::F2 => plan_now.f2.frequency_hz = frequency_hz,
                }
            }
            LedgerEvent::Pulse(pulse) => {
                let dp_name = match pulse.path {
                    DrivePath::Carrier => ChannelName::Carrier,
                    DrivePath::Mm => ChannelName::Mm,
                };
                let base = state_of(&states, ChannelName::Base);
                let dp = state_of(&states, dp_name);
                let sp = pulse.sideband.map(|s| state_of(&states, s.name()));
                let mut cycles =
                    2.0 * (base.phase_cycles_at(ev.t) + dp.phase_cycles_at(ev.t));
                let sp_cycles = sp.map(|s| s.phase_cycles_at(ev.t)).unwrap_or(0.0);
                cycles += sp_cycles;
                let cycles = cycles - cycles.floor();
                let coherence_ok = !dp.reset && !sp.map(|s| s.reset).unwrap_or(false);
                let frequency_hz = pulse_frequency(&plan_now, &pulse)?;
                rows.push(LedgerRow {
                    t: ev.t,
                    pulse,
                    frequency_hz,
                    phase_rad: cycles * crate::TWO_PI,
                    single_pass_phase_rad: (sp_cycles - sp_cycles.floor()) * crate::TWO_PI,
                    coherence_ok,
                });
            }
        }
    }
    Ok(rows)
}
