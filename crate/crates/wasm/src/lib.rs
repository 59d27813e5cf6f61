//! Browser bindings. Points cross the boundary as a flat `Float64Array` of
//! 2-D coordinates; results come back as JSON strings.
//!
//! The `*_json` functions hold the logic and are plain Rust so they can be
//! tested natively; the exported wrappers only convert errors.

use korm::baselines::dk_outliers;
use korm::online_fl::{online_fl_run, Step, StopCondition};
use korm::rng::RngStream;
use korm::{korm_run_points, Error, KormConfig, Metric, Point};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn points(coords: &[f64]) -> Result<Vec<Point>, Error> {
    if !coords.len().is_multiple_of(2) {
        return Err(Error::Range {
            name: "coords",
            reason: format!("odd length {}", coords.len()),
        });
    }
    coords.chunks_exact(2).map(|c| Point::new(c.to_vec())).collect()
}

fn xy(p: &Point) -> Value {
    json!(p.coords())
}

pub fn korm_json(coords: &[f64], k: usize, score_o: u32, num: usize, seed: u64) -> Result<String, Error> {
    let pts = points(coords)?;
    let cfg = KormConfig {
        k,
        score_threshold: score_o,
        chunk_size: num,
        seed,
        ..KormConfig::default()
    }
    .validate()?;
    let run = korm_run_points(&pts, &cfg).map_err(|a| a.error)?;
    let medians: Vec<Value> = run
        .final_medians
        .iter()
        .map(|m| json!({ "id": m.id.0, "at": xy(&m.location), "weight": m.weight, "score": m.outlier_score }))
        .collect();
    let outliers: Vec<Value> = run
        .real_outliers
        .iter()
        .map(|v| {
            json!({
                "id": v.median.id.0,
                "at": xy(&v.median.location),
                "weight": v.median.weight,
                "decided_phase": v.decided_phase,
            })
        })
        .collect();
    let phases: Vec<Value> = run
        .phases
        .iter()
        .map(|p| json!({ "phase": p.phase, "lower_bound": p.lower_bound, "medians": p.medians, "cost": p.solution_cost }))
        .collect();
    Ok(json!({ "medians": medians, "outliers": outliers, "phases": phases }).to_string())
}

pub fn dk_json(coords: &[f64], knn: usize, top_n: usize) -> Result<String, Error> {
    let pts = points(coords)?;
    let ranking = dk_outliers(&pts, knn, top_n, Metric::Euclidean)?;
    let top: Vec<Value> = ranking.iter().map(|e| json!({ "index": e.index, "dk": e.dk })).collect();
    Ok(Value::Array(top).to_string())
}

/// One unbounded online facility location pass, step by step.
pub fn fl_trace_json(coords: &[f64], facility_cost: f64, seed: u64) -> Result<String, Error> {
    let pts = points(coords)?;
    let mut rng = RngStream::new(seed, 0).generator();
    let run = online_fl_run(
        pts.iter().map(|p| (p, 1.0)),
        facility_cost,
        &mut rng,
        StopCondition::unbounded(),
        Metric::SquaredEuclidean,
        true,
    )?;
    let fs = run.facilities.facilities();
    let steps: Vec<Value> = run
        .transcript
        .unwrap_or_default()
        .iter()
        .map(|t| match t.step {
            Step::Opened { facility } => json!({ "input": t.input, "open": true, "facility": facility }),
            Step::Assigned { facility, theta } => {
                json!({ "input": t.input, "open": false, "facility": facility, "theta": theta })
            }
        })
        .collect();
    let facilities: Vec<Value> = fs
        .iter()
        .map(|f| json!({ "at": xy(&f.location), "weight": f.weight, "source": f.source }))
        .collect();
    Ok(json!({
        "steps": steps,
        "facilities": facilities,
        "cost": run.facilities.total_cost(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn run_korm(coords: &[f64], k: usize, score_o: u32, num: usize, seed: u64) -> Result<String, JsError> {
    Ok(korm_json(coords, k, score_o, num, seed)?)
}

#[wasm_bindgen]
pub fn rank_dk(coords: &[f64], knn: usize, top_n: usize) -> Result<String, JsError> {
    Ok(dk_json(coords, knn, top_n)?)
}

#[wasm_bindgen]
pub fn trace_fl(coords: &[f64], facility_cost: f64, seed: u64) -> Result<String, JsError> {
    Ok(fl_trace_json(coords, facility_cost, seed)?)
}
