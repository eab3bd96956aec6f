//! One function per subcommand. Every run writes `config.snapshot.json`,
//! `run.json` and its CSV artifacts into the output directory.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;
use std::path::{Path, PathBuf};

use iongate::io;
use iongate::msgate;
use iongate::noisekit;
use iongate::qcore::{self, Qubit, RegisterState};
use iongate::readout;
use iongate::seqlab;

use crate::config::RootConfig;

/// Raised for physics-level failures (flagged-invalid results), which map to
/// exit code 3.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct PhysicsFlag(pub String);

pub struct RunContext {
    pub out_dir: PathBuf,
    pub snapshot: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunContext {
    pub fn new(out_dir: PathBuf, snapshot: serde_json::Value) -> Self {
        Self {
            out_dir,
            snapshot,
            outputs: Vec::new(),
        }
    }

    fn write_csv(&mut self, name: &str, text: &str) -> Result<()> {
        io::write_text(&self.out_dir.join(name), text)
            .with_context(|| format!("writing {name}"))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_named_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.out_dir.join(name), value)
            .with_context(|| format!("writing {name}"))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Finalize: snapshot + run.json with the scenario summary.
    pub fn finish(
        mut self,
        scenario: &str,
        seed: u64,
        results: serde_json::Value,
    ) -> Result<()> {
        io::write_json(&self.out_dir.join("config.snapshot.json"), &self.snapshot)
            .context("writing config snapshot")?;
        self.outputs.push("config.snapshot.json".to_string());
        let run = json!({
            "scenario": scenario,
            "seed": seed,
            "outputs": self.outputs,
            "results": results,
        });
        io::write_json(&self.out_dir.join("run.json"), &run).context("writing run.json")?;
        Ok(())
    }
}

fn need<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| anyhow!("config section {name:?} is required for this subcommand"))
}

pub fn ms_scan(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let gate = need(&cfg.gate, "gate")?;
    let scan = need(&cfg.scan, "scan")?;
    let params = gate.to_params();
    params.validate().map_err(|e| anyhow!("gate config: {e}"))?;
    let grid1 = scan.grid1.values()?;
    let grid2 = scan.grid2.values()?;
    let t_fixed = scan.t_fixed_s.unwrap_or(iongate::TWO_PI / params.delta);
    let map = msgate::scan_map(
        &params,
        t_fixed,
        scan.axis1.into(),
        &grid1,
        scan.axis2.into(),
        &grid2,
        scan.shots,
        cfg.seed,
    )
    .map_err(|e| PhysicsFlag(format!("scan: {e}")))?;

    let mut ctx = ctx;
    ctx.write_csv("map.csv", &map.to_csv())?;
    let meta = msgate::MapMetadata {
        omega_hz: gate.omega_hz,
        eta: gate.eta,
        delta_hz: iongate::rad_to_hz(params.delta),
        delta_asym_hz: gate.delta_asym_hz,
        nu_hz: gate.nu_hz,
        n_max: gate.n_max,
        initial_n: gate.initial_n,
        t_fixed_s: t_fixed,
        shots: scan.shots,
        seed: Some(cfg.seed),
    };
    ctx.write_named_json("map.meta.json", &meta)?;

    let (n1, n2) = map.shape();
    let mut worst_norm: f64 = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let s = map.p0[(i, j)] + map.p1[(i, j)] + map.p2[(i, j)];
            worst_norm = worst_norm.max((s - 1.0).abs());
        }
    }
    ctx.finish(
        "ms-scan",
        cfg.seed,
        json!({
            "cells": n1 * n2,
            "worst_cell_norm_error": worst_norm,
            "t_fixed_s": t_fixed,
        }),
    )
}

pub fn ms_parity(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let gate = need(&cfg.gate, "gate")?;
    let parity_cfg = need(&cfg.parity, "parity")?;
    let params = gate.to_params();
    params.validate().map_err(|e| anyhow!("gate config: {e}"))?;
    let t_gate = parity_cfg
        .t_gate_s
        .unwrap_or(iongate::TWO_PI / params.delta);

    let psi0 = RegisterState::basis(Qubit::S, Qubit::S, params.initial_n, params.n_max);
    let psi = qcore::propagate(&psi0, &params, 0.0, t_gate, 1e-8)
        .map_err(|e| PhysicsFlag(format!("gate propagation: {e}")))?;
    let pops = qcore::measure_populations(&psi);

    // bare-output populations, optionally shot-sampled
    let (pop02, pop02_sigma) = match parity_cfg.pop_shots {
        None => (pops.p0 + pops.p2, 0.0),
        Some(n) => msgate::parity::sample_population_sum(
            pops.p0 + pops.p2,
            n,
            iongate::seeds::child_seed(cfg.seed, u64::MAX),
        ),
    };

    let phases = msgate::parity::uniform_phases(parity_cfg.phases);
    let data = msgate::parity_scan(&psi, &phases, parity_cfg.shots, cfg.seed);
    let fit = msgate::ml_fit_parity(&data, pop02, pop02_sigma)
        .map_err(|e| PhysicsFlag(format!("parity fit: {e}")))?;

    let mut ctx = ctx;
    ctx.write_csv(
        "parity.csv",
        &io::csv_string(
            &["phase_rad", "parity"],
            data.phases
                .iter()
                .zip(&data.parity)
                .map(|(&p, &v)| vec![p, v]),
        ),
    )?;
    ctx.write_named_json("parity_fit.json", &fit)?;
    ctx.finish(
        "ms-parity",
        cfg.seed,
        json!({
            "t_gate_s": t_gate,
            "populations": { "p0": pops.p0, "p1": pops.p1, "p2": pops.p2 },
            "pop02": pop02,
            "amplitude": fit.amplitude,
            "fidelity": fit.fidelity,
            "fidelity_sigma": fit.fidelity_sigma,
            "confidence": [fit.confidence.0, fit.confidence.1],
        }),
    )
}

pub fn spectrum(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let sc = need(&cfg.spectrum, "spectrum")?;
    let psd = sc.psd.to_psd();
    psd.validate().map_err(|e| anyhow!("psd config: {e}"))?;
    let omega = iongate::hz_to_rad(sc.omega_hz);
    let detunings = sc.detunings_hz.values()?;
    let unfiltered = noisekit::rabi_spectroscopy(
        &psd,
        omega,
        sc.pulse_s,
        &detunings,
        sc.realizations,
        cfg.seed,
    )
    .map_err(|e| PhysicsFlag(format!("spectroscopy: {e}")))?;

    let filtered = match &sc.cavity {
        Some(c) => Some(
            noisekit::rabi_spectroscopy(
                &noisekit::cavity_filter(&psd, c.to_cavity()),
                omega,
                sc.pulse_s,
                &detunings,
                sc.realizations,
                cfg.seed,
            )
            .map_err(|e| PhysicsFlag(format!("filtered spectroscopy: {e}")))?,
        ),
        None => None,
    };

    let mut ctx = ctx;
    match &filtered {
        Some(f) => ctx.write_csv(
            "spectrum.csv",
            &io::csv_string(
                &["detuning_hz", "excitation_unfiltered", "excitation_filtered"],
                detunings
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| vec![d, unfiltered.excitation[k], f.excitation[k]]),
            ),
        )?,
        None => ctx.write_csv("spectrum.csv", &unfiltered.to_csv())?,
    }
    let peak = unfiltered
        .excitation
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    ctx.finish(
        "spectrum",
        cfg.seed,
        json!({
            "points": detunings.len(),
            "peak_excitation": peak,
            "cavity_filtered_column": filtered.is_some(),
        }),
    )
}

fn coherence_run(cfg: &RootConfig, ctx: RunContext, kind: &str) -> Result<()> {
    let cc = need(&cfg.coherence, "coherence")?;
    let laser = cc.laser.to_psd();
    laser.validate().map_err(|e| anyhow!("laser psd: {e}"))?;
    let field_psd = cc.field.as_ref().map(|f| f.psd.to_psd());
    if let Some(p) = &field_psd {
        p.validate().map_err(|e| anyhow!("field psd: {e}"))?;
    }
    let zeeman = seqlab::ZeemanModel::standard();
    let times = cc.times_s.values()?;

    let build = |t: f64| -> Result<seqlab::DDSequence> {
        Ok(match kind {
            "ramsey" => seqlab::ramsey(t),
            "echo" => seqlab::hahn_echo(t),
            "mfdd" => seqlab::build_mfdd(t, cc.blocks),
            other => bail!("unknown coherence sequence {other}"),
        }
        .map_err(|e| PhysicsFlag(format!("sequence: {e}")))?)
    };
    // probe one sequence to surface construction errors eagerly
    build(times[times.len() - 1])?;

    let sim_cfg = seqlab::CoherenceConfig {
        laser: &laser,
        field: field_psd.as_ref().map(|p| (p, &zeeman)),
        realizations: cc.realizations,
        phase_points: cc.phase_points,
        shots: cc.shots,
        seed: cfg.seed,
    };
    let curve = seqlab::coherence_curve(|t| build(t).expect("validated above"), &times, &sim_cfg);

    let fit = match cc.fit.as_deref() {
        None => None,
        Some(name) => {
            let model = match name {
                "exponential" => seqlab::FitModel::Exponential,
                "gaussian" => seqlab::FitModel::Gaussian,
                "bessel" => seqlab::FitModel::Bessel,
                other => bail!("unknown fit model {other:?}"),
            };
            Some(
                seqlab::fit_contrast(&curve, model)
                    .map_err(|e| PhysicsFlag(format!("contrast fit: {e}")))?,
            )
        }
    };

    let mut ctx = ctx;
    ctx.write_csv("contrast.csv", &curve.to_csv())?;
    if let Some(f) = &fit {
        ctx.write_named_json("contrast_fit.json", f)?;
    }
    let results = json!({
        "points": times.len(),
        "final_contrast": curve.contrast.last(),
        "crossing_time_50pct_s": curve.crossing_time(0.5),
        "linewidth_hz": fit.as_ref().and_then(|f| f.linewidth_hz),
        "tone_frequency_hz": fit.as_ref().and_then(|f| f.tone_frequency_hz),
    });
    ctx.finish(kind, cfg.seed, results)
}

pub fn ramsey(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    coherence_run(cfg, ctx, "ramsey")
}
pub fn mfdd(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    coherence_run(cfg, ctx, "mfdd")
}
pub fn echo(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    coherence_run(cfg, ctx, "echo")
}

pub fn address(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let ac = need(&cfg.address, "address")?;
    let params = iongate::addressing::AddressingParams {
        omega_c: iongate::hz_to_rad(ac.omega_c_hz),
        k_dot_x: ac.k_dot_x,
        trap_drive_hz: ac.trap_drive_hz,
        rabi_jitter: ac.rabi_jitter,
    };
    let drive = match ac.drive.as_str() {
        "carrier" => iongate::addressing::DriveLine::Carrier,
        "mm-sideband" => iongate::addressing::DriveLine::MmSideband,
        other => bail!("unknown drive line {other:?} (carrier | mm-sideband)"),
    };
    let times = ac.times_s.values()?;
    let trace = iongate::addressing::simulate_register_flops(
        &params,
        drive,
        &times,
        ac.realizations,
        cfg.seed,
    );
    let max_p0 = trace.pops.iter().map(|p| p.p0).fold(0.0, f64::max);
    let mut ctx = ctx;
    ctx.write_csv("trace.csv", &trace.to_csv())?;
    ctx.finish(
        "address",
        cfg.seed,
        json!({
            "points": times.len(),
            "max_p0": max_p0,
        }),
    )
}

pub fn readout_sim(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let rc = need(&cfg.readout, "readout")?;
    let pops = rc
        .populations
        .ok_or_else(|| anyhow!("readout.populations is required for readout-sim"))?;
    let model = rc
        .model
        .clone()
        .unwrap_or_else(|| serde_json::from_value(json!({})).unwrap());
    let model = model.to_model();
    let pops = qcore::Populations::new(pops[0], pops[1], pops[2]);
    let hist = readout::simulate_histogram(&pops, &model, rc.shots, cfg.seed)
        .map_err(|e| PhysicsFlag(format!("histogram simulation: {e}")))?;
    let mut ctx = ctx;
    ctx.write_csv("histogram.csv", &hist.to_csv())?;
    ctx.finish(
        "readout-sim",
        cfg.seed,
        json!({
            "shots": rc.shots,
            "bins": hist.counts.len(),
        }),
    )
}

pub fn readout_fit(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let rc = need(&cfg.readout, "readout")?;
    let path = rc
        .histogram_csv
        .as_ref()
        .ok_or_else(|| anyhow!("readout.histogram_csv is required for readout-fit"))?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading histogram {}", path.display()))?;
    let hist = readout::PhotonHistogram::from_csv(&text)
        .map_err(|e| anyhow!("histogram parse: {e}"))?;
    let model = rc
        .model
        .clone()
        .unwrap_or_else(|| serde_json::from_value(json!({})).unwrap());
    let model = model.to_model();
    let est = readout::infer_populations(&hist, &model)
        .map_err(|e| PhysicsFlag(format!("inversion: {e}")))?;
    let mut ctx = ctx;
    ctx.write_named_json("populations.json", &est)?;
    let result = json!({
        "p0": est.populations.p0,
        "p1": est.populations.p1,
        "p2": est.populations.p2,
        "sigma": est.sigma,
        "low_confidence": est.low_confidence,
    });
    ctx.finish("readout-fit", cfg.seed, result)?;
    if est.low_confidence {
        return Err(PhysicsFlag(
            "detection components too close; populations flagged low-confidence".into(),
        )
        .into());
    }
    Ok(())
}

pub fn freq_table(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    use iongate::freqplan::*;
    let fc = need(&cfg.freq, "freq")?;
    let plan = FrequencyPlan::new(
        fc.trap_drive_hz,
        fc.base_hz,
        fc.carrier_hz,
        fc.f1_hz,
        fc.sideband_offset_hz,
        fc.f2_hz,
    );
    plan.validate().map_err(|e| anyhow!("plan: {e}"))?;

    let mut table = String::new();
    table.push_str("path      sideband  optical offset (Hz)\n");
    let mut rows = Vec::new();
    for path in [DrivePath::Carrier, DrivePath::Mm] {
        for sideband in [
            None,
            Some(SinglePassChannel::Rsb),
            Some(SinglePassChannel::Bsb),
            Some(SinglePassChannel::F1),
            Some(SinglePassChannel::F2),
        ] {
            let spec = PulseSpec { path, sideband };
            let f = pulse_frequency(&plan, &spec).map_err(|e| anyhow!("{e}"))?;
            let sb_name = match sideband {
                None => "-",
                Some(SinglePassChannel::Rsb) => "rsb",
                Some(SinglePassChannel::Bsb) => "bsb",
                Some(SinglePassChannel::F1) => "f1",
                Some(SinglePassChannel::F2) => "f2",
            };
            let path_name = match path {
                DrivePath::Carrier => "carrier",
                DrivePath::Mm => "mm",
            };
            table.push_str(&format!("{path_name:<9} {sb_name:<9} {f}\n"));
            rows.push(json!({ "path": path_name, "sideband": sb_name, "offset_hz": f }));
        }
    }
    print!("{table}");

    let drift_results = match &fc.drift {
        None => serde_json::Value::Null,
        Some(dc) => {
            let model = DriftModel {
                points: dc.points.clone(),
                max_slope_hz_per_s: dc.max_slope_hz_per_s,
                curvature_bound_hz_per_s2: dc.curvature_bound_hz_per_s2,
            };
            let mut rows = Vec::new();
            for &t in &dc.evaluate_at_s {
                let c = compensate_drift(&model, t)
                    .map_err(|e| PhysicsFlag(format!("drift: {e}")))?;
                rows.push(json!({
                    "t_s": t,
                    "correction_hz": c.correction_hz,
                    "residual_bound_hz": c.residual_bound_hz,
                    "extrapolated": c.extrapolated,
                }));
            }
            serde_json::Value::Array(rows)
        }
    };

    let mut ctx = ctx;
    ctx.write_csv("freq_table.txt", &table)?;
    ctx.write_named_json("plan.json", &plan)?;
    ctx.finish(
        "freq-table",
        cfg.seed,
        json!({
            "outputs_hz": rows,
            "ms_sidebands_symmetric": plan.ms_sidebands_symmetric(),
            "drift": drift_results,
        }),
    )
}

pub fn calibrate_lightshift(cfg: &RootConfig, ctx: RunContext) -> Result<()> {
    let rc = need(&cfg.register, "register")?;
    let read_map = |p: &Path| -> Result<msgate::PopulationMap> {
        let text = std::fs::read_to_string(p)
            .with_context(|| format!("reading map {}", p.display()))?;
        msgate::PopulationMap::from_csv(&text).map_err(|e| anyhow!("map parse: {e}"))
    };
    let measured = read_map(&rc.measured_csv)?;
    let calculated = read_map(&rc.calculated_csv)?;
    let offset = msgate::register_maps(&measured, &calculated, rc.axis.into())
        .map_err(|e| PhysicsFlag(format!("registration: {e}")))?;
    let ctx = ctx;
    ctx.finish(
        "calibrate-lightshift",
        cfg.seed,
        json!({ "offset_hz": offset }),
    )
}
