//! WebAssembly bindings behind the static demo page in `www/`.
//!
//! Every export takes plain strings/numbers and returns a JSON string, so
//! the page needs no extra glue beyond `JSON.parse`.

use aoswake::desim::{record_path, SimConfig};
use aoswake::policies::{build, closed_form, phase_fractions, PolicyKind, PolicyParams};
use aoswake::sweep::{run_sweep, GridScale, Mode, SweepSpec, SweepValues, SweptParam};
use aoswake::{analyze, Error};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct StateProbability {
    label: String,
    probability: f64,
}

#[derive(Serialize)]
struct PointReport {
    policy: PolicyKind,
    avg_aos: f64,
    avg_power: f64,
    closed_form_aos: f64,
    closed_form_power: f64,
    states: Vec<StateProbability>,
    phases: Vec<(String, f64)>,
}

fn parse_params(json: &str) -> Result<PolicyParams, String> {
    if json.trim().is_empty() {
        return Ok(PolicyParams::default());
    }
    serde_json::from_str(json).map_err(|e| format!("params: {e}"))
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Analytical result of one policy, with per-state probabilities.
pub fn analyze_point_json(policy: &str, params_json: &str) -> Result<String, String> {
    let kind: PolicyKind = policy.parse()?;
    let params = parse_params(params_json)?;
    let built = build(kind, &params).map_err(err)?;
    let result = analyze(kind, &params).map_err(err)?;
    let printed = closed_form(kind, &params).map_err(err)?;
    let states = built
        .model
        .labels_by_index()
        .into_iter()
        .zip(result.pi.as_slice())
        .map(|(label, &probability)| StateProbability { label, probability })
        .collect();
    let phases = phase_fractions(&built, &result.pi)
        .iter()
        .map(|(c, m)| (c.as_str().to_string(), *m))
        .collect();
    let report = PointReport {
        policy: kind,
        avg_aos: result.avg_aos,
        avg_power: result.avg_power,
        closed_form_aos: printed.avg_aos,
        closed_form_power: printed.avg_power,
        states,
        phases,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Analytical trade-off curve(s) over a grid of one parameter.
pub fn tradeoff_curve_json(
    policies: &str,
    param: &str,
    min: f64,
    max: f64,
    count: usize,
    log_scale: bool,
    params_json: &str,
) -> Result<String, String> {
    let policies = policies
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<PolicyKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let param: SweptParam = param.parse()?;
    let spec = SweepSpec {
        policies,
        param,
        values: SweepValues::Grid {
            min,
            max,
            count,
            scale: if log_scale {
                GridScale::Log
            } else {
                GridScale::Linear
            },
        },
        fixed: parse_params(params_json)?,
        mode: Mode::Analytical,
        sim: SimConfig::default(),
    };
    let points = run_sweep(&spec).map_err(err)?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

/// One simulated AoS sample path (sawtooth) of length `horizon`.
pub fn sample_path_json(
    policy: &str,
    params_json: &str,
    horizon: f64,
    seed: u64,
    max_records: usize,
) -> Result<String, String> {
    let kind: PolicyKind = policy.parse()?;
    let params = parse_params(params_json)?;
    let config = SimConfig {
        horizon,
        warmup: 0.0,
        seed,
        batches: 2,
        event_cap: 1e7,
    };
    let records = record_path(kind, &params, &config, max_records).map_err(err)?;
    serde_json::to_string(&records).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn analyze_point(policy: &str, params_json: &str) -> Result<String, JsValue> {
    analyze_point_json(policy, params_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tradeoff_curve(
    policies: &str,
    param: &str,
    min: f64,
    max: f64,
    count: usize,
    log_scale: bool,
    params_json: &str,
) -> Result<String, JsValue> {
    tradeoff_curve_json(policies, param, min, max, count, log_scale, params_json)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sample_path(
    policy: &str,
    params_json: &str,
    horizon: f64,
    seed: u32,
    max_records: usize,
) -> Result<String, JsValue> {
    sample_path_json(policy, params_json, horizon, u64::from(seed), max_records)
        .map_err(|e| JsValue::from_str(&e))
}
