//! WebAssembly bindings for the browser demo. Each exported function takes
//! plain numbers and returns a JSON string; the work is done by the pure
//! functions in [`demo`], which are also usable natively.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Partial OT between two point clouds on a line; see [`demo::solve_points`].
#[wasm_bindgen]
pub fn solve_points(source: Vec<f64>, target: Vec<f64>, beta: f64, alpha: f64, eps: f64) -> Result<String, JsValue> {
    to_js(demo::solve_points(&source, &target, beta, alpha, eps).and_then(|r| demo::json(&r)))
}

/// Bound terms on one random instance; see [`demo::bound_terms`].
#[wasm_bindgen]
pub fn bound_terms(seed: u64, theorem: u8, alpha: f64, beta: f64) -> Result<String, JsValue> {
    to_js(demo::bound_terms(seed, theorem, alpha, beta).and_then(|r| demo::json(&r)))
}

/// WARMPOT weights on a synthetic task; see [`demo::train_weights`].
#[wasm_bindgen]
pub fn train_weights(scheme: &str, shift: f64, alpha_max: f64, iters: usize, seed: u64) -> Result<String, JsValue> {
    to_js(demo::train_weights(scheme, shift, alpha_max, iters, seed).and_then(|r| demo::json(&r)))
}
