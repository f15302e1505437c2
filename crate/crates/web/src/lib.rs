//! Browser demo. Each export takes plain numbers and returns a JSON string
//! for the page to draw; the `*_json` functions hold the logic so it can be
//! tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use pulab_core::dist::draw;
use pulab_core::harness::{
    run_trial, sweep_sample_complexity, threshold_of, ExperimentConfig, InstanceSpec,
    LearnerSpec, Prepared,
};
use pulab_core::geometry::GridPartition;
use pulab_core::instances::{die_error_exact, die_instance, geometric_preset, to_f64, uniform_die_set};
use pulab_core::learners::die_learner_l0;
use pulab_core::rng::{rng_from_seed, stream_seed, Stream};
use pulab_core::{Hypothesis, LabError, Result};

/// One box-filter run on the 2-D preset: points, both samples, the grid,
/// the learned box and how many positives the filter dropped.
pub fn alg1_view_json(b: usize, a: usize, gamma: f64, stray: bool, seed: u64) -> Result<Value> {
    let preset = if stray { "alg1_stray" } else { "alg1" };
    let prep = Prepared::new(geometric_preset(preset)?)?;
    let geometry = prep
        .instance
        .geometry
        .clone()
        .ok_or_else(|| LabError::Domain("preset has no coordinates".into()))?;
    let (record, hypothesis) = run_trial(&prep, LearnerSpec::Algorithm1 { gamma }, b, a, seed)?;
    // run_trial draws from these same streams.
    let s_p = draw(&prep.instance.p, b, stream_seed(seed, Stream::Positive)).items;
    let s_u = draw(&prep.marginal, a, stream_seed(seed, Stream::Unlabeled)).items;
    let labels: Vec<u8> = (0..geometry.n())
        .map(|x| {
            let pos = prep.instance.d.atoms().iter().any(|t| t.x == x && t.y == 1 && t.p > 0.0);
            u8::from(pos)
        })
        .collect();
    let grid = GridPartition::for_margin(2, gamma)?;
    let rect = match &hypothesis {
        Hypothesis::Box { lo, hi } => json!({"lo": lo, "hi": hi}),
        _ => Value::Null,
    };
    Ok(json!({
        "points": geometry.points,
        "labels": labels,
        "positives": s_p,
        "unlabeled": s_u,
        "grid_cells": grid.cells,
        "box": rect,
        "filtered": record.filter.map_or(0, |f| f.filtered_count),
        "err": record.err,
        "excess": record.excess,
    }))
}

/// Failure rate of PERM against sample size on the realizable SCAR
/// instance, with the fitted threshold.
pub fn failure_curve_json(eps: f64, trials: usize, seed: u64) -> Result<Value> {
    let grid = vec![10, 20, 40, 80, 160, 320];
    let config = ExperimentConfig {
        instance: InstanceSpec::ScarPos {
            d: 10,
            rho: 0.3,
            o: (0..9).collect(),
        },
        learner: LearnerSpec::Perm,
        b_grid: grid.clone(),
        a_grid: grid,
        paired: true,
        eps,
        delta: 0.1,
        trials,
        seed,
        pi: None,
    };
    let rows = sweep_sample_complexity(&config)?;
    Ok(json!({
        "rows": rows,
        "threshold": threshold_of(&rows, config.delta),
    }))
}

/// Rolls the weighted die, runs `L₀` and scores it exactly.
pub fn die_demo_json(k: usize, eps: f64, rolls: usize, seed: u64) -> Result<Value> {
    let mut rng = rng_from_seed(stream_seed(seed, Stream::Instance));
    let o = uniform_die_set(k, &mut rng)?;
    let die = die_instance(k, eps, &o)?;
    let mut roll_rng = rng_from_seed(stream_seed(seed, Stream::Positive));
    let faces = die.roll(rolls, &mut roll_rng);
    let mut counts = vec![0usize; k];
    for &f in &faces {
        counts[f - 1] += 1;
    }
    let h = die_learner_l0(&faces, k)?;
    let err = die_error_exact(&h, k, &o)?;
    Ok(json!({
        "O": o,
        "probabilities": die.probabilities.iter().map(|p| p.value).collect::<Vec<_>>(),
        "counts": counts,
        "prediction": h,
        "err": to_f64(err),
        "err_exact": err.to_string(),
    }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn alg1_view(b: usize, a: usize, gamma: f64, stray: bool, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(alg1_view_json(b, a, gamma, stray, seed.into()))
}

#[wasm_bindgen]
pub fn failure_curve(eps: f64, trials: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(failure_curve_json(eps, trials, seed.into()))
}

#[wasm_bindgen]
pub fn die_demo(k: usize, eps: f64, rolls: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(die_demo_json(k, eps, rolls, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alg1_view_draws_a_box() {
        let v = alg1_view_json(200, 400, 0.25, false, 1).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 12);
        assert_eq!(v["grid_cells"], 6);
        assert!(v["box"]["lo"].is_array());
        assert_eq!(v["positives"].as_array().unwrap().len(), 200);
    }

    #[test]
    fn stray_positives_get_filtered() {
        let v = alg1_view_json(200, 400, 0.25, true, 1).unwrap();
        assert!(v["filtered"].as_u64().unwrap() > 0);
        // The stray corner never enters the box.
        assert!(v["box"]["hi"][0].as_f64().unwrap() < 0.95);
    }

    #[test]
    fn curve_falls() {
        let v = failure_curve_json(0.1, 60, 3).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 6);
        let first = rows[0]["failure_rate"].as_f64().unwrap();
        let last = rows[5]["failure_rate"].as_f64().unwrap();
        assert!(first > last);
    }

    #[test]
    fn die_demo_is_consistent() {
        let v = die_demo_json(8, 0.2, 400, 5).unwrap();
        let counts: u64 = v["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(counts, 400);
        let o = v["O"].as_array().unwrap().len();
        assert!(0 < o && o < 8);
        assert!(v["err"].as_f64().unwrap() >= 0.0);
        assert!(die_demo_json(1, 0.2, 10, 0).is_err());
    }
}
