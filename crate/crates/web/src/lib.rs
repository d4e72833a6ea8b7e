//! Three browser operations over the core library. Each returns a JSON string
//! so the page can plot it without extra bindings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sqlab_core::avalanche::{self, DegreeSpec};
use sqlab_core::instance::{self, trial_seed};
use sqlab_core::numtheory::{Constants, Landscape};
use sqlab_core::peeling;
use sqlab_core::predictors::{self, PredictorSet};

/// Largest `x` the page accepts; keeps a sieve and a peeling run under a second.
pub const MAX_X: u64 = 2_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct CoreCurves {
    pub x: u64,
    pub eta: f64,
    pub n_rows: usize,
    pub j: f64,
    pub z0: usize,
    pub z_minus: usize,
    pub z_plus: usize,
    pub z: Vec<usize>,
    pub lambda: Vec<f64>,
    pub center: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Simulated `m(z)` per trial on the same grid.
    pub simulated: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoCurves {
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AvalancheHistogram {
    pub m: usize,
    pub trials: usize,
    pub predicted_mean_d: f64,
    pub mean_d: f64,
    pub se_d: f64,
    /// `counts[d]` for `d <= d_max`; larger values land in the last bin.
    pub counts: Vec<usize>,
    pub tail: Vec<(usize, f64)>,
}

fn check_x(x: f64) -> Result<u64, String> {
    if !(x.is_finite() && (4.0..=MAX_X as f64).contains(&x)) {
        return Err(format!("x must lie in [4, {MAX_X}], got {x}"));
    }
    Ok(x.round() as u64)
}

fn grid(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let lo = lo.max(1);
    let mut pts: Vec<usize> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1).max(1) as f64;
            ((lo as f64) * (hi as f64 / lo as f64).powf(t)).round() as usize
        })
        .collect();
    pts.dedup();
    pts
}

/// Predicted band for `m(z)` next to simulated trajectories.
pub fn core_curves(x: f64, eta: f64, trials: usize, seed: u64) -> Result<CoreCurves, String> {
    let x = check_x(x)?;
    if trials > 20 {
        return Err(format!("at most 20 trials, got {trials}"));
    }
    let land = Landscape::new(x).map_err(|e| e.to_string())?;
    let constants = Constants::default_for(eta).map_err(|e| e.to_string())?;
    let params = land.params(eta, constants, false).map_err(|e| e.to_string())?;
    let pred = PredictorSet::new(&land, params).map_err(|e| e.to_string())?;
    let z = grid(1, params.max_z, 120);
    let mut out = CoreCurves {
        x,
        eta,
        n_rows: params.n_rows,
        j: params.j.j,
        z0: params.z0(),
        z_minus: params.z_minus,
        z_plus: params.z_plus,
        z: z.clone(),
        lambda: Vec::with_capacity(z.len()),
        center: Vec::with_capacity(z.len()),
        lo: Vec::with_capacity(z.len()),
        hi: Vec::with_capacity(z.len()),
        simulated: Vec::with_capacity(trials),
    };
    for &zi in &z {
        let m = pred.predicted_m(zi).map_err(|e| e.to_string())?;
        out.lambda.push(pred.lambda(zi));
        out.center.push(m.center);
        out.lo.push(m.lo);
        out.hi.push(m.hi);
    }
    for t in 0..trials as u64 {
        let inst = instance::sample_instance(&params, &land.table, trial_seed(seed, t)).map_err(|e| e.to_string())?;
        let traj = peeling::run_peeling(&inst, params.max_z, 1);
        out.simulated.push(z.iter().map(|&zi| traj.state_at(zi).0).collect());
    }
    Ok(out)
}

/// `rho(u)` on `[0, u_max]` and `alpha(eta)` on `[0, eta_max]`.
pub fn rho_alpha_curves(u_max: f64, eta_max: f64, points: usize) -> Result<RhoCurves, String> {
    if !(u_max > 0.0 && u_max <= 60.0) {
        return Err(format!("u_max must lie in (0, 60], got {u_max}"));
    }
    if !(eta_max > 0.0 && eta_max < predictors::EXP_NEG_GAMMA) {
        return Err(format!("eta_max must lie in (0, e^-gamma), got {eta_max}"));
    }
    let n = points.clamp(2, 2_000);
    let mut c = RhoCurves { u: Vec::new(), rho: Vec::new(), eta: Vec::new(), alpha: Vec::new() };
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let u = t * u_max;
        c.u.push(u);
        c.rho.push(predictors::dickman_rho(u).map_err(|e| e.to_string())?);
        let eta = t * eta_max;
        c.eta.push(eta);
        c.alpha.push(predictors::alpha(eta).map_err(|e| e.to_string())?);
    }
    Ok(c)
}

/// Avalanche sizes on a subcritical random hypergraph with `s2` 2-edges and `s3` 3-edges.
pub fn avalanche_histogram(m: usize, s2: usize, s3: usize, trials: usize, seed: u64) -> Result<AvalancheHistogram, String> {
    if trials == 0 || trials > 200_000 {
        return Err(format!("trials must lie in [1, 200000], got {trials}"));
    }
    let spec = DegreeSpec::new(m, [(2, s2), (3, s3)]).map_err(|e| e.to_string())?;
    let (report, results) = avalanche::avalanche_stats(&spec, trials, seed, 0.2).map_err(|e| e.to_string())?;
    let d_max = 40;
    let mut counts = vec![0; d_max + 1];
    for r in &results {
        counts[r.d.min(d_max)] += 1;
    }
    Ok(AvalancheHistogram {
        m,
        trials,
        predicted_mean_d: report.predicted_mean_d,
        mean_d: report.mean_d,
        se_d: report.se_d,
        counts,
        tail: report.tail,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = coreCurves)]
pub fn core_curves_js(x: f64, eta: f64, trials: u32, seed: u32) -> Result<String, JsValue> {
    to_js(core_curves(x, eta, trials as usize, seed as u64))
}

#[wasm_bindgen(js_name = rhoAlphaCurves)]
pub fn rho_alpha_curves_js(u_max: f64, eta_max: f64, points: u32) -> Result<String, JsValue> {
    to_js(rho_alpha_curves(u_max, eta_max, points as usize))
}

#[wasm_bindgen(js_name = avalancheHistogram)]
pub fn avalanche_histogram_js(m: u32, s2: u32, s3: u32, trials: u32, seed: u32) -> Result<String, JsValue> {
    to_js(avalanche_histogram(m as usize, s2 as usize, s3 as usize, trials as usize, seed as u64))
}
