//! Timed event lists shared by the sequence-oriented modules.
//!
//! A [`PulseSequence`] is the common language for anything that happens at a
//! wall-clock instant: optical π/2 and π pulses, rf spin flips, source
//! switching and retuning. Each module defines its own action vocabulary and
//! instantiates the generic container with it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("event times must be strictly increasing (index {index})")]
    NonMonotonicTimes { index: usize },
    #[error("event time {t} s is negative")]
    NegativeTime { t: f64 },
}

/// One timed action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent<A> {
    /// Wall-clock time of the event start, seconds.
    pub t: f64,
    pub action: A,
}

/// A time-ordered list of actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence<A> {
    events: Vec<PulseEvent<A>>,
}

impl<A> PulseSequence<A> {
    /// Build from `(time, action)` pairs, validating strict time ordering.
    pub fn new(events: Vec<(f64, A)>) -> Result<Self, SequenceError> {
        let mut prev = f64::NEG_INFINITY;
        for (i, (t, _)) in events.iter().enumerate() {
            if *t < 0.0 {
                return Err(SequenceError::NegativeTime { t: *t });
            }
            if *t <= prev {
                return Err(SequenceError::NonMonotonicTimes { index: i });
            }
            prev = *t;
        }
        Ok(Self {
            events: events
                .into_iter()
                .map(|(t, action)| PulseEvent { t, action })
                .collect(),
        })
    }

    pub fn events(&self) -> &[PulseEvent<A>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time of the last event, or 0 for an empty sequence.
    pub fn end_time(&self) -> f64 {
        self.events.last().map(|e| e.t).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unordered_times() {
        let r = PulseSequence::new(vec![(0.0, "a"), (2.0, "b"), (1.0, "c")]);
        assert_eq!(r.unwrap_err(), SequenceError::NonMonotonicTimes { index: 2 });
    }

    #[test]
    fn rejects_equal_times() {
        let r = PulseSequence::new(vec![(0.0, "a"), (0.0, "b")]);
        assert!(r.is_err());
    }
}
