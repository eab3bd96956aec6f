//! 2D population maps over the MS interaction parameters, and rigid
//! registration of a measured map against a calculated one.
//!
//! Registration recovers systematic offsets along a frequency axis — in
//! practice an uncompensated light shift that biases the sideband-frequency
//! calibration — by minimizing the summed squared population difference over
//! a grid of trial shifts, then refining the minimum parabolically.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{self, GateError, GateParams, Qubit, RegisterState};
use crate::seeds;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("scan axes must be distinct")]
    DuplicateAxes,
    #[error("grid for {axis:?} must be monotonically increasing")]
    NonMonotonicGrid { axis: MapAxis },
    #[error("grid for {axis:?} must be uniform for registration")]
    NonUniformGrid { axis: MapAxis },
    #[error("propagation failed at cell ({i}, {j}) = ({v1:.6e}, {v2:.6e}): {source}")]
    CellPropagation {
        i: usize,
        j: usize,
        v1: f64,
        v2: f64,
        #[source]
        source: GateError,
    },
    #[error("registration axis {axis:?} not present in the map")]
    AxisNotPresent { axis: MapAxis },
    #[error("registration axis must be a frequency axis, not time")]
    TimeAxisRegistration,
    #[error("maps share no overlap within the searched shift range")]
    NoOverlap,
    #[error("map grids are incompatible: {0}")]
    IncompatibleGrids(String),
    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
}

/// A scannable interaction parameter. Grids are stored in external units:
/// seconds for time, Hz for the detunings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapAxis {
    Time,
    Delta,
    DeltaAsym,
}

impl MapAxis {
    pub fn label(&self) -> &'static str {
        match self {
            MapAxis::Time => "time_s",
            MapAxis::Delta => "delta_hz",
            MapAxis::DeltaAsym => "delta_asym_hz",
        }
    }
}

/// Gridded populations over two scanned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMap {
    pub axis1: MapAxis,
    pub grid1: Vec<f64>,
    pub axis2: MapAxis,
    pub grid2: Vec<f64>,
    pub p0: Array2<f64>,
    pub p1: Array2<f64>,
    pub p2: Array2<f64>,
}

/// Sidecar metadata serialized alongside the CSV payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapMetadata {
    pub omega_hz: f64,
    pub eta: f64,
    pub delta_hz: f64,
    pub delta_asym_hz: f64,
    pub nu_hz: f64,
    pub n_max: usize,
    pub initial_n: usize,
    pub t_fixed_s: f64,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
}

impl PopulationMap {
    pub fn shape(&self) -> (usize, usize) {
        (self.grid1.len(), self.grid2.len())
    }

    /// CSV with one row per cell: axis1, axis2, p0, p1, p2.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{},{},p0,p1,p2\n",
            self.axis1.label(),
            self.axis2.label()
        ));
        for (i, &v1) in self.grid1.iter().enumerate() {
            for (j, &v2) in self.grid2.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    v1,
                    v2,
                    self.p0[(i, j)],
                    self.p1[(i, j)],
                    self.p2[(i, j)]
                ));
            }
        }
        out
    }

    /// Parse the CSV format written by [`Self::to_csv`]. Axis identities are
    /// recovered from the header labels.
    pub fn from_csv(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MapError::CsvParse {
            line: 0,
            msg: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() != 5 {
            return Err(MapError::CsvParse {
                line: 1,
                msg: format!("expected 5 columns, found {}", cols.len()),
            });
        }
        let axis_from = |label: &str, line: usize| -> Result<MapAxis, MapError> {
            match label {
                "time_s" => Ok(MapAxis::Time),
                "delta_hz" => Ok(MapAxis::Delta),
                "delta_asym_hz" => Ok(MapAxis::DeltaAsym),
                other => Err(MapError::CsvParse {
                    line,
                    msg: format!("unknown axis label {other:?}"),
                }),
            }
        };
        let axis1 = axis_from(cols[0], 1)?;
        let axis2 = axis_from(cols[1], 1)?;
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(MapError::CsvParse {
                    line: lineno + 1,
                    msg: format!("expected 5 fields, found {}", fields.len()),
                });
            }
            let mut row = [0.0; 5];
            for (k, f) in fields.iter().enumerate() {
                row[k] = f.trim().parse().map_err(|e| MapError::CsvParse {
                    line: lineno + 1,
                    msg: format!("{e}"),
                })?;
            }
            rows.push(row);
        }
        let mut grid1: Vec<f64> = Vec::new();
        let mut grid2: Vec<f64> = Vec::new();
        for row in &rows {
            if grid1.last() != Some(&row[0]) && !grid1.contains(&row[0]) {
                grid1.push(row[0]);
            }
            if !grid2.contains(&row[1]) {
                grid2.push(row[1]);
            }
        }
        let (n1, n2) = (grid1.len(), grid2.len());
        if rows.len() != n1 * n2 {
            return Err(MapError::CsvParse {
                line: 0,
                msg: format!("{} rows do not fill a {}x{} grid", rows.len(), n1, n2),
            });
        }
        let mut p0 = Array2::zeros((n1, n2));
        let mut p1 = Array2::zeros((n1, n2));
        let mut p2 = Array2::zeros((n1, n2));
        for (idx, row) in rows.iter().enumerate() {
            let (i, j) = (idx / n2, idx % n2);
            p0[(i, j)] = row[2];
            p1[(i, j)] = row[3];
            p2[(i, j)] = row[4];
        }
        Ok(Self {
            axis1,
            grid1,
            axis2,
            grid2,
            p0,
            p1,
            p2,
        })
    }

    /// Replace exact per-cell populations by empirical frequencies from
    /// `shots` trinomial draws per cell.
    pub fn with_shot_noise(&self, shots: u64, seed: u64) -> Self {
        let mut out = self.clone();
        let (n1, n2) = self.shape();
        for i in 0..n1 {
            for j in 0..n2 {
                let mut rng = seeds::child_rng(seed, (i * n2 + j) as u64);
                let (c0, c1, c2) = trinomial_draw(
                    &mut rng,
                    shots,
                    self.p0[(i, j)],
                    self.p1[(i, j)],
                    self.p2[(i, j)],
                );
                out.p0[(i, j)] = c0 as f64 / shots as f64;
                out.p1[(i, j)] = c1 as f64 / shots as f64;
                out.p2[(i, j)] = c2 as f64 / shots as f64;
            }
        }
        out
    }
}

fn trinomial_draw<R: Rng>(rng: &mut R, shots: u64, p0: f64, p1: f64, p2: f64) -> (u64, u64, u64) {
    // categorical sampling keeps the three counts exactly consistent
    let total = (p0 + p1 + p2).max(f64::MIN_POSITIVE);
    let (mut c0, mut c1, mut c2) = (0u64, 0u64, 0u64);
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        if u < p0 {
            c0 += 1;
        } else if u < p0 + p1 {
            c1 += 1;
        } else {
            c2 += 1;
        }
    }
    (c0, c1, c2)
}

fn check_monotone(axis: MapAxis, grid: &[f64]) -> Result<(), MapError> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MapError::NonMonotonicGrid { axis });
    }
    Ok(())
}

/// Populations over a 2D parameter grid, one propagation per cell (time
/// columns share a trajectory). Hz in, Hz out; `params` supplies every value
/// not being scanned, `t_fixed` the interaction time when time is not one of
/// the axes. With `shots` given, exact values are replaced by per-cell
/// trinomial frequencies.
#[allow(clippy::too_many_arguments)]
pub fn scan_map(
    params: &GateParams,
    t_fixed: f64,
    axis1: MapAxis,
    grid1: &[f64],
    axis2: MapAxis,
    grid2: &[f64],
    shots: Option<u64>,
    seed: u64,
) -> Result<PopulationMap, MapError> {
    if axis1 == axis2 {
        return Err(MapError::DuplicateAxes);
    }
    check_monotone(axis1, grid1)?;
    check_monotone(axis2, grid2)?;

    let (n1, n2) = (grid1.len(), grid2.len());
    let mut p0 = Array2::zeros((n1, n2));
    let mut p1 = Array2::zeros((n1, n2));
    let mut p2 = Array2::zeros((n1, n2));

    let set_axis = |p: &mut GateParams, axis: MapAxis, v: f64| -> Option<f64> {
        match axis {
            MapAxis::Time => Some(v),
            MapAxis::Delta => {
                p.delta = crate::hz_to_rad(v);
                None
            }
            MapAxis::DeltaAsym => {
                p.delta_asym = crate::hz_to_rad(v);
                None
            }
        }
    };

    // Propagate once per non-time parameter set, snapshotting along time.
    let time_axis = [axis1, axis2].iter().position(|a| *a == MapAxis::Time);
    let results: Result<Vec<Vec<qcore::Populations>>, MapError> = match time_axis {
        Some(which_time) => {
            use rayon::prelude::*;
            let (times, other_grid, other_axis) = if which_time == 0 {
                (grid1, grid2, axis2)
            } else {
                (grid2, grid1, axis1)
            };
            other_grid
                .par_iter()
                .enumerate()
                .map(|(k, &v)| {
                    let mut p = *params;
                    set_axis(&mut p, other_axis, v);
                    let psi0 = RegisterState::basis(Qubit::S, Qubit::S, p.initial_n, p.n_max);
                    let snaps =
                        qcore::propagate_path(&psi0, &p, 0.0, times, 1e-8).map_err(|e| {
                            let (i, j, v1, v2) = if which_time == 0 {
                                (0, k, times[0], v)
                            } else {
                                (k, 0, v, times[0])
                            };
                            MapError::CellPropagation {
                                i,
                                j,
                                v1,
                                v2,
                                source: e,
                            }
                        })?;
                    Ok(snaps.iter().map(qcore::measure_populations).collect())
                })
                .collect()
        }
        None => {
            use rayon::prelude::*;
            grid1
                .par_iter()
                .enumerate()
                .map(|(i, &v1)| {
                    let mut col = Vec::with_capacity(n2);
                    for (j, &v2) in grid2.iter().enumerate() {
                        let mut p = *params;
                        set_axis(&mut p, axis1, v1);
                        set_axis(&mut p, axis2, v2);
                        let psi0 =
                            RegisterState::basis(Qubit::S, Qubit::S, p.initial_n, p.n_max);
                        let psi = qcore::propagate(&psi0, &p, 0.0, t_fixed, 1e-8).map_err(
                            |e| MapError::CellPropagation {
                                i,
                                j,
                                v1,
                                v2,
                                source: e,
                            },
                        )?;
                        col.push(qcore::measure_populations(&psi));
                    }
                    Ok(col)
                })
                .collect()
        }
    };
    let results = results?;

    match time_axis {
        Some(0) => {
            for (k, col) in results.iter().enumerate() {
                for (ti, pops) in col.iter().enumerate() {
                    p0[(ti, k)] = pops.p0;
                    p1[(ti, k)] = pops.p1;
                    p2[(ti, k)] = pops.p2;
                }
            }
        }
        Some(_) => {
            for (k, col) in results.iter().enumerate() {
                for (ti, pops) in col.iter().enumerate() {
                    p0[(k, ti)] = pops.p0;
                    p1[(k, ti)] = pops.p1;
                    p2[(k, ti)] = pops.p2;
                }
            }
        }
        None => {
            for (i, col) in results.iter().enumerate() {
                for (j, pops) in col.iter().enumerate() {
                    p0[(i, j)] = pops.p0;
                    p1[(i, j)] = pops.p1;
                    p2[(i, j)] = pops.p2;
                }
            }
        }
    }

    let map = PopulationMap {
        axis1,
        grid1: grid1.to_vec(),
        axis2,
        grid2: grid2.to_vec(),
        p0,
        p1,
        p2,
    };
    Ok(match shots {
        Some(s) => map.with_shot_noise(s, seed),
        None => map,
    })
}

/// Linear interpolation of a map column/row along the named axis; NaN outside
/// the covered range.
fn interp_along(
    grid: &[f64],
    values: impl Fn(usize) -> f64,
    x: f64,
) -> f64 {
    if x < grid[0] || x > *grid.last().unwrap() {
        return f64::NAN;
    }
    // grids are strictly increasing
    let j = match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(j) => return values(j),
        Err(j) => j,
    };
    let (x0, x1) = (grid[j - 1], grid[j]);
    let w = (x - x0) / (x1 - x0);
    values(j - 1) * (1.0 - w) + values(j) * w
}

/// Recover the rigid shift along `axis` that best aligns `measured` with
/// `calculated`, in Hz.
///
/// The returned offset is the amount to add to the measured axis labels to
/// land on the calculated ones — the uncompensated light shift when the
/// measured sideband frequency was biased. Shifts are searched on the grid
/// step out to half the grid span, then the discrete minimum is refined with
/// a parabola through its neighbors. An exact (zero-residual) discrete
/// minimum is returned as-is, so integer-step synthetic shifts are recovered
/// exactly.
pub fn register_maps(
    measured: &PopulationMap,
    calculated: &PopulationMap,
    axis: MapAxis,
) -> Result<f64, MapError> {
    if axis == MapAxis::Time {
        return Err(MapError::TimeAxisRegistration);
    }
    if measured.axis1 != calculated.axis1 || measured.axis2 != calculated.axis2 {
        return Err(MapError::IncompatibleGrids(
            "maps have different axes".into(),
        ));
    }
    let shift_first = if measured.axis1 == axis {
        true
    } else if measured.axis2 == axis {
        false
    } else {
        return Err(MapError::AxisNotPresent { axis });
    };

    let (shift_grid_m, shift_grid_c, fixed_m, fixed_c) = if shift_first {
        (&measured.grid1, &calculated.grid1, &measured.grid2, &calculated.grid2)
    } else {
        (&measured.grid2, &calculated.grid2, &measured.grid1, &calculated.grid1)
    };
    if fixed_m.len() != fixed_c.len()
        || fixed_m
            .iter()
            .zip(fixed_c)
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
    {
        return Err(MapError::IncompatibleGrids(
            "non-shifted axis grids differ".into(),
        ));
    }
    let step = uniform_step(shift_first, measured)?;
    let step_c = uniform_step(shift_first, calculated)?;
    if (step - step_c).abs() > 1e-9 * step {
        return Err(MapError::IncompatibleGrids(
            "shifted-axis grid steps differ".into(),
        ));
    }

    let span_m = shift_grid_m.last().unwrap() - shift_grid_m[0];
    let span_c = shift_grid_c.last().unwrap() - shift_grid_c[0];
    let half_span = 0.5 * span_m.max(span_c);
    let k_max = (half_span / step).floor() as i64;

    let objective = |offset: f64| -> Option<f64> {
        let mut acc = 0.0;
        let mut count = 0usize;
        for (i, &u) in shift_grid_m.iter().enumerate() {
            let target = u + offset;
            for (j, _) in fixed_m.iter().enumerate() {
                let sample = |arr: &Array2<f64>, carr: &Array2<f64>| -> (f64, f64) {
                    let (mv, cv) = if shift_first {
                        (
                            arr[(i, j)],
                            interp_along(shift_grid_c, |k| carr[(k, j)], target),
                        )
                    } else {
                        (
                            arr[(j, i)],
                            interp_along(shift_grid_c, |k| carr[(j, k)], target),
                        )
                    };
                    (mv, cv)
                };
                let pairs = [
                    sample(&measured.p0, &calculated.p0),
                    sample(&measured.p1, &calculated.p1),
                    sample(&measured.p2, &calculated.p2),
                ];
                if pairs.iter().any(|(m, c)| m.is_nan() || c.is_nan()) {
                    continue;
                }
                for (m, c) in pairs {
                    acc += (m - c) * (m - c);
                }
                count += 1;
            }
        }
        // require a meaningful overlap before trusting the score
        if count * 4 < shift_grid_m.len() * fixed_m.len() {
            None
        } else {
            Some(acc / count as f64)
        }
    };

    let mut best: Option<(i64, f64)> = None;
    let mut scores: Vec<(i64, f64)> = Vec::new();
    for k in -k_max..=k_max {
        if let Some(score) = objective(k as f64 * step) {
            scores.push((k, score));
            if best.map(|(_, s)| score < s).unwrap_or(true) {
                best = Some((k, score));
            }
        }
    }
    let (k_best, score_best) = best.ok_or(MapError::NoOverlap)?;

    // zero-residual minima are exact; skip refinement
    if score_best < 1e-18 {
        return Ok(k_best as f64 * step);
    }
    let neighbor = |k: i64| scores.iter().find(|(kk, _)| *kk == k).map(|(_, s)| *s);
    if let (Some(y_minus), Some(y_plus)) = (neighbor(k_best - 1), neighbor(k_best + 1)) {
        let denom = y_minus - 2.0 * score_best + y_plus;
        if denom > 0.0 {
            let frac = 0.5 * (y_minus - y_plus) / denom;
            return Ok((k_best as f64 + frac.clamp(-0.5, 0.5)) * step);
        }
    }
    Ok(k_best as f64 * step)
}

fn uniform_step(shift_first: bool, map: &PopulationMap) -> Result<f64, MapError> {
    let grid = if shift_first { &map.grid1 } else { &map.grid2 };
    let axis = if shift_first { map.axis1 } else { map.axis2 };
    if grid.len() < 2 {
        return Err(MapError::IncompatibleGrids(
            "shifted axis needs at least two points".into(),
        ));
    }
    let step = grid[1] - grid[0];
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs() {
            return Err(MapError::NonUniformGrid { axis });
        }
    }
    Ok(step)
}
