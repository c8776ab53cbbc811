//! WebAssembly bindings behind `www/index.html`. The exported functions take
//! plain numbers and strings and hand back bytes or JSON text, so the page
//! needs no bundler.

use nlsgraph::ground_state::assemble_with;
use nlsgraph::oracle::reconstruct_profile;
use nlsgraph::stability::{lambda_star, lin_spaced, log_spaced, phase_diagram, state_report, verdict_for};
use nlsgraph::{Graph, ModelParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse_graph(name: &str) -> Result<Graph, String> {
    match name {
        "t" => Ok(Graph::TGraph),
        "tadpole" => Ok(Graph::Tadpole),
        other => Err(format!("unknown graph '{other}', expected 't' or 'tadpole'")),
    }
}

fn params(graph: &str, p: f64) -> Result<ModelParams, String> {
    ModelParams::new(p, parse_graph(graph)?).map_err(|e| e.to_string())
}

/// RGBA pixels, `nx` wide and `ny` tall, with the largest `p` in the top row.
pub fn diagram_rgba(
    graph: &str,
    pmin: f64,
    pmax: f64,
    lmin: f64,
    lmax: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<u8>, String> {
    if nx < 2 || ny < 2 || nx * ny > 250_000 {
        return Err(format!("grid {nx} x {ny} is out of range"));
    }
    if !(lmin > 0.0 && lmax > lmin && pmin > 2.0 && pmax > pmin) {
        return Err("ranges need 0 < lmin < lmax and 2 < pmin < pmax".into());
    }
    let d = phase_diagram(
        parse_graph(graph)?,
        &log_spaced(lmin, lmax, nx),
        &lin_spaced(pmin, pmax, ny),
        None,
    )
    .map_err(|e| e.to_string())?;
    let rgb = d.rgb_rows();
    let mut rgba = Vec::with_capacity(rgb.len() / 3 * 4);
    for px in rgb.chunks_exact(3) {
        rgba.extend_from_slice(px);
        rgba.push(255);
    }
    Ok(rgba)
}

#[derive(Serialize)]
struct CurvePoint {
    lambda: f64,
    mass: f64,
    dmass: f64,
    verdict: &'static str,
}

#[derive(Serialize)]
struct MassCurve {
    p: f64,
    lambda_star: f64,
    points: Vec<CurvePoint>,
}

/// `lambda -> Theta(lambda)` on a log grid, with the verdict at every point.
pub fn mass_curve_json(graph: &str, p: f64, lmin: f64, lmax: f64, n: usize) -> Result<String, String> {
    if n < 2 || n > 5000 || !(lmin > 0.0 && lmax > lmin) {
        return Err("need 2 <= n <= 5000 and 0 < lmin < lmax".into());
    }
    let params = params(graph, p)?;
    let nl = params.nonlinearity();
    let star = lambda_star(&nl, params.theta()).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity(n);
    for lambda in log_spaced(lmin, lmax, n) {
        let r = assemble_with(&nl, params, lambda).map_err(|e| e.to_string())?;
        points.push(CurvePoint {
            lambda,
            mass: r.theta,
            dmass: r.dtheta_dlambda,
            verdict: verdict_for(&r, star).kind.as_str(),
        });
    }
    serde_json::to_string(&MassCurve {
        p,
        lambda_star: star,
        points,
    })
    .map_err(|e| e.to_string())
}

/// Samples of the ground state on every edge.
pub fn profile_json(graph: &str, p: f64, lambda: f64, n: usize) -> Result<String, String> {
    let prof = reconstruct_profile(params(graph, p)?, lambda, n).map_err(|e| e.to_string())?;
    serde_json::to_string(&prof).map_err(|e| e.to_string())
}

pub fn state_json(graph: &str, p: f64, lambda: f64) -> Result<String, String> {
    let report = state_report(params(graph, p)?, lambda).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = phaseDiagram)]
pub fn phase_diagram_js(
    graph: &str,
    pmin: f64,
    pmax: f64,
    lmin: f64,
    lmax: f64,
    nx: usize,
    ny: usize,
) -> Result<Vec<u8>, JsError> {
    js(diagram_rgba(graph, pmin, pmax, lmin, lmax, nx, ny))
}

#[wasm_bindgen(js_name = massCurve)]
pub fn mass_curve_js(graph: &str, p: f64, lmin: f64, lmax: f64, n: usize) -> Result<String, JsError> {
    js(mass_curve_json(graph, p, lmin, lmax, n))
}

#[wasm_bindgen(js_name = groundProfile)]
pub fn profile_js(graph: &str, p: f64, lambda: f64, n: usize) -> Result<String, JsError> {
    js(profile_json(graph, p, lambda, n))
}

#[wasm_bindgen(js_name = groundState)]
pub fn state_js(graph: &str, p: f64, lambda: f64) -> Result<String, JsError> {
    js(state_json(graph, p, lambda))
}
