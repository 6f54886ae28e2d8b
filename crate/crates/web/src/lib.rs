//! wasm-bindgen entry points for the static demo page. Each returns a JSON
//! document; the plain `*_report` functions carry the logic and are tested
//! natively.

use metastable_core::chain::{
    capacity, heuristic_mean_time, invariant_measure, mean_hitting_time, Generator,
};
use metastable_core::diffusion::{mc_transition_time, SdeConfig, WellSet};
use metastable_core::landscape::PotentialSpec;
use metastable_core::poisson::{solve_reduction, ReductionSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Replica cap; the page runs single-threaded on the main thread.
pub const MAX_REPLICAS: usize = 2000;

#[derive(Debug, Serialize)]
pub struct CriticalPointView {
    pub x: f64,
    pub u: f64,
    pub kind: String,
}

#[derive(Debug, Serialize)]
pub struct ProfileReport {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub critical_points: Vec<CriticalPointView>,
    /// Eyring-Kramers escape time from the left minimum.
    pub escape_time: f64,
}

/// `U(x) = a x^4 / 4 - b x^2 / 2` sampled on a grid with its critical
/// points and Eyring-Kramers escape time at `eps`.
pub fn profile_report(a: f64, b: f64, eps: f64, points: usize) -> Result<ProfileReport, String> {
    let spec = PotentialSpec::quartic(a, b).map_err(|e| e.to_string())?;
    let crit = spec.critical_points().map_err(|e| e.to_string())?;
    let reach = crit.iter().map(|c| c.location[0].abs()).fold(0.0, f64::max) * 1.6 + 0.5;
    let n = points.clamp(2, 2000);
    let x: Vec<f64> = (0..n)
        .map(|k| -reach + 2.0 * reach * k as f64 / (n - 1) as f64)
        .collect();
    let u = x
        .iter()
        .map(|v| spec.value(&[*v]))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let critical_points = crit
        .iter()
        .map(|c| {
            Ok(CriticalPointView {
                x: c.location[0],
                u: spec.value(&c.location)?,
                kind: format!("{:?}", c.kind).to_lowercase(),
            })
        })
        .collect::<Result<_, metastable_core::Error>>()
        .map_err(|e| e.to_string())?;
    let left = spec.minima().map_err(|e| e.to_string())?;
    let escape_time = spec
        .escape_time_prediction(&left[0].location, eps)
        .map_err(|e| e.to_string())?;
    Ok(ProfileReport {
        x,
        u,
        critical_points,
        escape_time,
    })
}

#[derive(Debug, Serialize)]
pub struct ReductionReport {
    pub q: f64,
    pub capacity: f64,
    pub heuristic_time: f64,
    pub exact_time: f64,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub lambda: f64,
    pub max_sup_deviation: f64,
    pub residual: f64,
}

/// Symmetric three-well chain: capacity between the outer wells, the
/// heuristic and exact mean transition times, and the Poisson solution.
pub fn reduction_report(q: f64) -> Result<ReductionReport, String> {
    let run = || -> metastable_core::Result<ReductionReport> {
        let g = Generator::symmetric_three_well(q)?;
        let mu = invariant_measure(&g)?;
        let cap = capacity(&g, &mu, &[0], &[2])?;
        let sol = solve_reduction(&g, &mu, &ReductionSpec::symmetric_three_well(q)?)?;
        Ok(ReductionReport {
            q,
            capacity: cap,
            heuristic_time: heuristic_mean_time(&mu, cap, &[0])?,
            exact_time: mean_hitting_time(&g, 0, &[2])?,
            max_sup_deviation: sol.max_sup_deviation(),
            psi: sol.psi,
            phi: sol.phi,
            lambda: sol.lambda,
            residual: sol.residual,
        })
    };
    run().map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct TransitionReport {
    pub n: usize,
    pub taus: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub prediction: f64,
    pub ks_p: Option<f64>,
}

/// Monte Carlo transition times of the quartic double well from the left
/// minimum into a ball of `radius` around the right one.
pub fn transition_report(
    eps: f64,
    radius: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<TransitionReport, String> {
    let run = || -> metastable_core::Result<TransitionReport> {
        let spec = PotentialSpec::standard_quartic();
        let wells = vec![
            WellSet::new(&spec, vec![-1.0], radius)?,
            WellSet::new(&spec, vec![1.0], radius)?,
        ];
        let prediction = spec.escape_time_prediction(&[-1.0], eps)?;
        let config = SdeConfig::new(spec, eps, dt, seed, wells)?;
        let r = mc_transition_time(&config, 0, n.min(MAX_REPLICAS))?;
        Ok(TransitionReport {
            n: r.stats.completed,
            taus: r.records.iter().map(|h| h.tau).collect(),
            mean: r.stats.mean,
            std_error: r.stats.std_error,
            prediction,
            ks_p: r.stats.ks.map(|k| k.p_value),
        })
    };
    run().map_err(|e| e.to_string())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn potential_profile(a: f64, b: f64, eps: f64, points: usize) -> Result<String, JsValue> {
    to_js(profile_report(a, b, eps, points))
}

#[wasm_bindgen]
pub fn three_well_reduction(q: f64) -> Result<String, JsValue> {
    to_js(reduction_report(q))
}

#[wasm_bindgen]
pub fn transition_times(
    eps: f64,
    radius: f64,
    dt: f64,
    n: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(transition_report(eps, radius, dt, n, u64::from(seed)))
}
