//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export takes primitives and returns a JSON string. Failures come
//! back as `{"error": "..."}` so the page never has to catch exceptions.

use mlrank_geom::segre::{
    extremum_witness, slice_curvature_field, LinearFunctional, NormalFrame, ProbeCurve,
};
use mlrank_geom::tucker::{verify_minimality, DEFAULT_MINIMALITY_TOL};
use mlrank_geom::{DenseTensor, MultilinearRank, Shape};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_FIELD_GRID: usize = 40;
const MAX_SAMPLES: usize = 200;
const CURVE_POINTS: usize = 201;

fn parse_list(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("'{}': {e}", s.trim())))
        .collect()
}

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

#[derive(Serialize)]
struct FieldPoint {
    p: f64,
    q: f64,
    /// joint probabilities, row-major
    point: Vec<f64>,
    h: Vec<f64>,
    h_norm: f64,
}

fn field_points(grid: usize) -> Result<Vec<FieldPoint>, String> {
    if !(2..=MAX_FIELD_GRID).contains(&grid) {
        return Err(format!("grid must be between 2 and {MAX_FIELD_GRID}"));
    }
    let rows = slice_curvature_field(&[2, 2], grid).map_err(|e| e.to_string())?;
    Ok(rows
        .into_iter()
        .map(|r| FieldPoint {
            p: r.params[0],
            q: r.params[1],
            point: r.point,
            h: r.h,
            h_norm: r.h_norm,
        })
        .collect())
}

/// Mean curvature field of two independent binary variables on a
/// `grid` × `grid` parameter grid.
#[wasm_bindgen]
pub fn independence_field(grid: usize) -> String {
    respond(field_points(grid))
}

#[derive(Serialize)]
struct CampaignSummary {
    pass: bool,
    max_ratio: f64,
    samples: usize,
    dim: usize,
    ratios: Vec<Option<f64>>,
}

fn campaign(shape: &str, rank: &str, samples: usize, seed: u64) -> Result<CampaignSummary, String> {
    if !(1..=MAX_SAMPLES).contains(&samples) {
        return Err(format!("samples must be between 1 and {MAX_SAMPLES}"));
    }
    let shape = Shape::new(parse_list(shape)?).map_err(|e| e.to_string())?;
    if shape.len() > 4096 {
        return Err("shape too large for the demo".into());
    }
    let rank = MultilinearRank::new(parse_list(rank)?);
    let report = verify_minimality(&shape, &rank, samples, seed, DEFAULT_MINIMALITY_TOL).map_err(|e| e.to_string())?;
    Ok(CampaignSummary {
        pass: report.pass,
        max_ratio: report.max_ratio,
        samples,
        dim: rank.manifold_dim(&shape),
        ratios: report.results.iter().map(|r| r.curvature_ratio).collect(),
    })
}

/// Seeded minimality campaign; `shape` and `rank` are comma separated.
#[wasm_bindgen]
pub fn minimality(shape: &str, rank: &str, samples: usize, seed: u64) -> String {
    respond(campaign(shape, rank, samples, seed))
}

#[derive(Serialize)]
struct ProbeTrace {
    level: usize,
    coefficient: f64,
    u_plus: f64,
    u_minus: f64,
    pairings: Vec<f64>,
    u: Vec<f64>,
    /// ⟨γ(u) − T, ℓ⟩ along the witness curve and its twin
    gamma: Vec<f64>,
    twin: Vec<f64>,
}

fn probe(shape: &str, values: &str, span: f64) -> Result<ProbeTrace, String> {
    if !(span > 0.0 && span <= 3.2) {
        return Err("span must be in (0, 3.2]".into());
    }
    let shape = Shape::new(parse_list(shape)?).map_err(|e| e.to_string())?;
    let data: Vec<f64> = values
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("'{}': {e}", s.trim())))
        .collect::<Result<_, _>>()?;
    let ell = LinearFunctional::new(DenseTensor::new(shape.clone(), data).map_err(|e| e.to_string())?);
    let frame = NormalFrame::new(&shape);
    let w = extremum_witness(&ell, &frame, span.min(0.1)).map_err(|e| e.to_string())?;
    let gamma = ProbeCurve::through(&shape, &w.index, false).map_err(|e| e.to_string())?;
    let twin = ProbeCurve::through(&shape, &w.index, true).map_err(|e| e.to_string())?;
    let base = frame.base();
    let along = |c: &ProbeCurve, u: f64| c.evaluate(u).sub(&base).and_then(|d| d.inner(&ell.ell));
    let u: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| -span + 2.0 * span * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    let trace = |c: &ProbeCurve| -> Result<Vec<f64>, String> {
        u.iter().map(|&x| along(c, x).map_err(|e| e.to_string())).collect()
    };
    Ok(ProbeTrace {
        level: w.level,
        coefficient: w.coefficient,
        u_plus: w.u_plus,
        u_minus: w.u_minus,
        pairings: gamma.pairings(&ell, w.level).map_err(|e| e.to_string())?,
        gamma: trace(&gamma)?,
        twin: trace(&twin)?,
        u,
    })
}

/// Witness curves for a functional given by its entries (last index
/// fastest) on a tensor of the given shape.
#[wasm_bindgen]
pub fn witness_curves(shape: &str, values: &str, span: f64) -> String {
    respond(probe(shape, values, span))
}
