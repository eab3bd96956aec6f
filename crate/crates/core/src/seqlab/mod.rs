//! Ramsey, Hahn-echo and magnetic-field dynamic-decoupling sequences, with
//! fringe-contrast simulation and linewidth fitting.
//!
//! The MFDD trick: the qubit superposition involves one ground Zeeman state
//! at a time, and the two available ground states shift oppositely with
//! magnetic field at a 1:4 magnitude ratio (+2/5 vs −8/5 in units of
//! μ_B·B/ħ). rf π pulses inside the ground manifold therefore let the
//! magnetic phase unwind itself — spending 4/5 of each block in the weakly
//! shifted state and 1/5 in the strongly shifted one cancels the integral
//! exactly for fields constant over a block — while the optical local
//! oscillator (the laser) keeps accumulating phase untouched. Laser noise is
//! what remains.

pub mod coherence;
pub mod fit;

pub use coherence::{simulate_coherence, coherence_curve, CoherenceConfig, CoherencePoint};
pub use fit::{
    fit_contrast, gaussian_linewidth_hz, lorentzian_linewidth_hz, ContrastCurve, ContrastFit,
    FitError, FitModel,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pulse::PulseSequence;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("sequence time must be positive (got {0} s)")]
    NonPositiveTime(f64),
    #[error("need at least one block (got {0})")]
    NoBlocks(usize),
    #[error("{blocks} blocks do not fit in {total} s with resolvable flip windows")]
    BlocksDontFit { blocks: usize, total: f64 },
    #[error(transparent)]
    Sequence(#[from] crate::pulse::SequenceError),
}

/// Zeeman sensitivity of the two optical transitions sharing the D level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeemanModel {
    /// Shift of the transition from the initially populated ground state,
    /// rad/s per tesla (+2/5 · μB/ħ).
    pub coeff_initial: f64,
    /// Shift after an rf flip to the other ground state (−8/5 · μB/ħ).
    pub coeff_flipped: f64,
}

/// μB/ħ in rad/s per tesla.
pub const BOHR_MAGNETON_OVER_HBAR: f64 = 8.794_100_1e10;

impl ZeemanModel {
    /// The 1:4 opposite-sign pair of the S(−1/2)→D(−1/2) and S(+1/2)→D(−1/2)
    /// transitions.
    pub fn standard() -> Self {
        Self {
            coeff_initial: 0.4 * BOHR_MAGNETON_OVER_HBAR,
            coeff_flipped: -1.6 * BOHR_MAGNETON_OVER_HBAR,
        }
    }

    /// Opposite signs, magnitude ratio exactly 1:4.
    pub fn validate(&self) -> bool {
        self.coeff_initial * self.coeff_flipped < 0.0
            && (self.coeff_flipped / self.coeff_initial + 4.0).abs() < 1e-12
    }
}

/// Which ground Zeeman state holds the superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Initial,
    Flipped,
}

/// Timed actions of a decoupling sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeqAction {
    /// Optical π/2; the closing pulse's phase is scanned at simulation time.
    PiHalf { phase: f64 },
    /// Optical π (Hahn echo): reverses laser and magnetic phase accumulation.
    OpticalPi,
    /// rf π inside the ground manifold: swaps the Zeeman coefficient only.
    RfFlip,
}

/// A Ramsey-style sequence with its event list and block structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DDSequence {
    pub total_time: f64,
    /// Number of MFDD blocks (0 for plain Ramsey and Hahn echo).
    pub blocks: usize,
    pub events: PulseSequence<SeqAction>,
}

impl DDSequence {
    /// Zeeman-coefficient segments (t0, t1, manifold) spanning the free
    /// evolution.
    pub fn switch_segments(&self) -> Vec<(f64, f64, Manifold)> {
        let mut segments = Vec::new();
        let mut manifold = Manifold::Initial;
        let mut t_prev = 0.0;
        for ev in self.events.events() {
            if let SeqAction::RfFlip = ev.action {
                segments.push((t_prev, ev.t, manifold));
                manifold = match manifold {
                    Manifold::Initial => Manifold::Flipped,
                    Manifold::Flipped => Manifold::Initial,
                };
                t_prev = ev.t;
            }
        }
        segments.push((t_prev, self.total_time, manifold));
        segments
    }

    /// Echo sign e(t) segments (t0, t1, ±1) from the optical π pulses.
    pub fn echo_segments(&self) -> Vec<(f64, f64, f64)> {
        let mut segments = Vec::new();
        let mut sign = 1.0;
        let mut t_prev = 0.0;
        for ev in self.events.events() {
            if let SeqAction::OpticalPi = ev.action {
                segments.push((t_prev, ev.t, sign));
                sign = -sign;
                t_prev = ev.t;
            }
        }
        segments.push((t_prev, self.total_time, sign));
        segments
    }

    /// Piecewise-constant weight for magnetic-phase accumulation:
    /// e(t) · zeeman coefficient(t), rad/s per tesla.
    pub fn magnetic_weights(&self, model: &ZeemanModel) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &(e0, e1, sign) in &self.echo_segments() {
            for &(s0, s1, manifold) in &self.switch_segments() {
                let (lo, hi) = (e0.max(s0), e1.min(s1));
                if hi <= lo {
                    continue;
                }
                let coeff = match manifold {
                    Manifold::Initial => model.coeff_initial,
                    Manifold::Flipped => model.coeff_flipped,
                };
                out.push((lo, hi, sign * coeff));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Laser-phase weight: the echo sign alone.
    pub fn laser_weights(&self) -> Vec<(f64, f64, f64)> {
        self.echo_segments()
    }
}

/// Plain Ramsey: π/2 — wait T — π/2(scanned).
pub fn ramsey(total_time: f64) -> Result<DDSequence, SeqError> {
    if total_time <= 0.0 {
        return Err(SeqError::NonPositiveTime(total_time));
    }
    Ok(DDSequence {
        total_time,
        blocks: 0,
        events: PulseSequence::new(vec![
            (0.0, SeqAction::PiHalf { phase: 0.0 }),
            (total_time, SeqAction::PiHalf { phase: 0.0 }),
        ])?,
    })
}

/// Hahn echo: π/2 — T/2 — optical π — T/2 — π/2(scanned). Quasi-static laser
/// and magnetic phases both refocus.
pub fn hahn_echo(total_time: f64) -> Result<DDSequence, SeqError> {
    if total_time <= 0.0 {
        return Err(SeqError::NonPositiveTime(total_time));
    }
    Ok(DDSequence {
        total_time,
        blocks: 0,
        events: PulseSequence::new(vec![
            (0.0, SeqAction::PiHalf { phase: 0.0 }),
            (total_time / 2.0, SeqAction::OpticalPi),
            (total_time, SeqAction::PiHalf { phase: 0.0 }),
        ])?,
    })
}

/// MFDD with N blocks: per block of duration T_N = T/N, an rf flip at the
/// block midpoint − T_N/10 and back at midpoint + T_N/10, so the strongly
/// shifted state is occupied for T_N/5 and the block's Zeeman phase integral
/// vanishes.
pub fn build_mfdd(total_time: f64, blocks: usize) -> Result<DDSequence, SeqError> {
    if total_time <= 0.0 {
        return Err(SeqError::NonPositiveTime(total_time));
    }
    if blocks == 0 {
        return Err(SeqError::NoBlocks(blocks));
    }
    let t_block = total_time / blocks as f64;
    if t_block / 10.0 < 1e-9 {
        return Err(SeqError::BlocksDontFit {
            blocks,
            total: total_time,
        });
    }
    let mut events = vec![(0.0, SeqAction::PiHalf { phase: 0.0 })];
    for k in 0..blocks {
        let mid = (k as f64 + 0.5) * t_block;
        events.push((mid - t_block / 10.0, SeqAction::RfFlip));
        events.push((mid + t_block / 10.0, SeqAction::RfFlip));
    }
    events.push((total_time, SeqAction::PiHalf { phase: 0.0 }));
    Ok(DDSequence {
        total_time,
        blocks,
        events: PulseSequence::new(events)?,
    })
}
