//! Fluorescence photon-count histograms and their inversion.
//!
//! Only S-state ions fluoresce, so a detection window yields Poisson counts
//! with mean λ_dark + k·λ_bright when k qubits are in S. A measured
//! histogram is then a three-component Poisson mixture whose weights are the
//! register populations; [`infer_populations`] recovers them by maximizing
//! the mixture likelihood with EM (the log-likelihood is concave in the
//! weights, so EM finds the global optimum). Component means stay fixed —
//! they come from a separate calibration against pure reference states.
//!
//! D-state decay during the window makes a dark ion bright with probability
//! 1 − exp(−window/lifetime) (~0.26% for 1 ms against 390 ms). By default
//! both the forward simulation and the inversion account for it as a
//! mixture-weight adjustment.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::Populations;
use crate::seeds;

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error("detection model needs lambda_bright > lambda_dark >= 0 (got {bright}, {dark})")]
    InvalidModel { bright: f64, dark: f64 },
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("populations must be normalized (sum = {0})")]
    UnnormalizedPopulations(f64),
}

/// Photon statistics of the detection window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectionModel {
    /// Mean counts per S ion per window.
    pub lambda_bright: f64,
    /// Mean background counts per window.
    pub lambda_dark: f64,
    /// Window duration, s.
    pub window: f64,
    /// D-state lifetime, s; decay during the window is corrected for when
    /// `decay_correction` is on.
    pub d_lifetime: f64,
    pub decay_correction: bool,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            lambda_bright: 30.0,
            lambda_dark: 0.5,
            window: 1e-3,
            d_lifetime: 0.390,
            decay_correction: true,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<(), ReadoutError> {
        if !(self.lambda_bright > self.lambda_dark && self.lambda_dark >= 0.0) {
            return Err(ReadoutError::InvalidModel {
                bright: self.lambda_bright,
                dark: self.lambda_dark,
            });
        }
        Ok(())
    }

    fn decay_eps(&self) -> f64 {
        if self.decay_correction {
            crate::qcore::decay_probability(self.window, self.d_lifetime)
        } else {
            0.0
        }
    }

    /// Mean counts with k qubits in S.
    pub fn component_mean(&self, k: usize) -> f64 {
        self.lambda_dark + k as f64 * self.lambda_bright
    }

    /// The k-to-(k±1) component separation is marginal when it falls below
    /// three standard deviations of the wider component; fits then come back
    /// flagged as low-confidence.
    pub fn well_separated(&self) -> bool {
        let sigma_widest = self.component_mean(2).sqrt();
        self.lambda_bright >= 3.0 * sigma_widest
    }
}

/// Occurrences per photon number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonHistogram {
    pub counts: Vec<u64>,
}

impl PhotonHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        crate::io::csv_string(
            &["count", "occurrences"],
            self.counts
                .iter()
                .enumerate()
                .map(|(k, &c)| vec![k as f64, c as f64]),
        )
    }

    pub fn from_csv(text: &str) -> Result<Self, ReadoutError> {
        let mut counts = Vec::new();
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let k: usize = fields
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .map(|v| v as usize)
                .ok_or(ReadoutError::EmptyHistogram)?;
            let c: u64 = fields
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .map(|v| v as u64)
                .ok_or(ReadoutError::EmptyHistogram)?;
            if counts.len() <= k {
                counts.resize(k + 1, 0);
            }
            counts[k] = c;
        }
        if counts.is_empty() {
            return Err(ReadoutError::EmptyHistogram);
        }
        Ok(Self { counts })
    }
}

/// Inferred populations with their uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub populations: Populations,
    /// One-sigma errors per component from the observed Fisher information.
    pub sigma: [f64; 3],
    /// Set when the component means are too close for a trustworthy fit.
    pub low_confidence: bool,
    pub log_likelihood: f64,
}

/// Draw a photon-count histogram for a register prepared with `pops`.
pub fn simulate_histogram(
    pops: &Populations,
    model: &DetectionModel,
    shots: u64,
    seed: u64,
) -> Result<PhotonHistogram, ReadoutError> {
    model.validate()?;
    if (pops.sum() - 1.0).abs() > 1e-6 {
        return Err(ReadoutError::UnnormalizedPopulations(pops.sum()));
    }
    let observed = pops.with_d_decay(model.decay_eps());
    let weights = [observed.p0, observed.p1, observed.p2];
    let mut counts: Vec<u64> = Vec::new();
    let mut rng = seeds::child_rng(seed, 0);
    for _ in 0..shots {
        let u: f64 = rand::Rng::random::<f64>(&mut rng) * pops.sum();
        let k = if u < weights[0] {
            0
        } else if u < weights[0] + weights[1] {
            1
        } else {
            2
        };
        let n = Poisson::new(model.component_mean(k))
            .unwrap()
            .sample(&mut rng) as usize;
        if counts.len() <= n {
            counts.resize(n + 1, 0);
        }
        counts[n] += 1;
    }
    Ok(PhotonHistogram { counts })
}

fn poisson_ln_pmf(mean: f64, k: usize) -> f64 {
    // ln Γ(k+1) via libm keeps the pmf stable for large counts
    k as f64 * mean.ln() - mean - libm::lgamma(k as f64 + 1.0)
}

/// Maximum-likelihood mixture weights for a histogram under fixed component
/// means, inverted back through the decay adjustment.
pub fn infer_populations(
    hist: &PhotonHistogram,
    model: &DetectionModel,
) -> Result<PopulationEstimate, ReadoutError> {
    model.validate()?;
    let total = hist.total();
    if total == 0 {
        return Err(ReadoutError::EmptyHistogram);
    }
    // per-bin component pmfs
    let pmf: Vec<[f64; 3]> = (0..hist.counts.len())
        .map(|n| {
            [
                poisson_ln_pmf(model.component_mean(0), n).exp(),
                poisson_ln_pmf(model.component_mean(1), n).exp(),
                poisson_ln_pmf(model.component_mean(2), n).exp(),
            ]
        })
        .collect();

    // EM on the simplex
    let mut w = [1.0 / 3.0; 3];
    let mut ll_prev = f64::NEG_INFINITY;
    let mut ll = 0.0;
    for _ in 0..10_000 {
        let mut resp_sum = [0.0; 3];
        ll = 0.0;
        for (n, &c) in hist.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mix = w[0] * pmf[n][0] + w[1] * pmf[n][1] + w[2] * pmf[n][2];
            let mix = mix.max(f64::MIN_POSITIVE);
            ll += c as f64 * mix.ln();
            for j in 0..3 {
                resp_sum[j] += c as f64 * w[j] * pmf[n][j] / mix;
            }
        }
        for j in 0..3 {
            w[j] = resp_sum[j] / total as f64;
        }
        if (ll - ll_prev).abs() < 1e-12 * total as f64 {
            break;
        }
        ll_prev = ll;
    }

    // observed Fisher information in the (w0, w1) chart, w2 eliminated
    let mut info = [[0.0f64; 2]; 2];
    for (n, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mix = (w[0] * pmf[n][0] + w[1] * pmf[n][1] + w[2] * pmf[n][2])
            .max(f64::MIN_POSITIVE);
        let d = [
            (pmf[n][0] - pmf[n][2]) / mix,
            (pmf[n][1] - pmf[n][2]) / mix,
        ];
        for a in 0..2 {
            for b in 0..2 {
                info[a][b] += c as f64 * d[a] * d[b];
            }
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    let sigma = if det > 0.0 {
        let cov00 = info[1][1] / det;
        let cov11 = info[0][0] / det;
        let cov01 = -info[0][1] / det;
        [
            cov00.max(0.0).sqrt(),
            cov11.max(0.0).sqrt(),
            // w2 = 1 - w0 - w1
            (cov00 + cov11 + 2.0 * cov01).max(0.0).sqrt(),
        ]
    } else {
        [f64::NAN; 3]
    };

    // undo the decay adjustment and project back to the simplex
    let eps = model.decay_eps();
    let observed = Populations::new(w[0], w[1], w[2]);
    let populations = invert_decay(&observed, eps);

    Ok(PopulationEstimate {
        populations,
        sigma,
        low_confidence: !model.well_separated(),
        log_likelihood: ll,
    })
}

fn invert_decay(observed: &Populations, eps: f64) -> Populations {
    if eps == 0.0 {
        return *observed;
    }
    // forward map is lower-triangular in (p0, p1, p2); invert directly
    let q = 1.0 - eps;
    let p0 = observed.p0 / (q * q);
    let p1 = (observed.p1 - p0 * 2.0 * eps * q) / q;
    let p2 = observed.p2 - p1 * eps - p0 * eps * eps;
    let mut p = [p0, p1, p2].map(|x| x.max(0.0));
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        for x in &mut p {
            *x /= sum;
        }
    }
    Populations::new(p[0], p[1], p[2])
}
