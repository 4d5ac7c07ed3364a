//! Browser bindings: closed-form received power versus codebook size,
//! water-filling, and a single-user Monte Carlo check against the closed form.

use ris_codebook::codebook::water_fill;
use ris_codebook::harness::{paper_scale, point_setup, run_campaign, theory_inputs, ExperimentConfig, SweepVar};
use ris_codebook::theory::scaling_law;
use wasm_bindgen::prelude::*;

fn dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

fn single_user(n: usize, f_r_db: f64, imperfect: bool, q_max: usize) -> Result<ExperimentConfig, String> {
    if q_max == 0 {
        return Err("q_max must be at least 1".into());
    }
    let mut cfg = paper_scale(if imperfect { "fig3b" } else { "fig3a" }).map_err(|e| e.to_string())?;
    cfg.set_ris_elements(n);
    cfg.series_f_r_db = vec![f_r_db];
    cfg.q_size = q_max;
    cfg.sweep.var = SweepVar::Q;
    cfg.sweep.values = (1..=q_max).map(|q| q as f64).collect();
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Closed-form received power in dBm for Q = 1..=q_max.
#[wasm_bindgen]
pub fn scaling_law_curve(n: usize, f_r_db: f64, imperfect: bool, q_max: usize) -> Result<Vec<f64>, String> {
    let cfg = single_user(n, f_r_db, imperfect, q_max)?;
    cfg.sweep
        .values
        .iter()
        .map(|&q| {
            let setup = point_setup(&cfg, Some(f_r_db), q).map_err(|e| e.to_string())?;
            let law = scaling_law(&theory_inputs(&setup)).map_err(|e| e.to_string())?;
            Ok(dbm(law.total))
        })
        .collect()
}

/// Water-filling over noise floors under a total budget. Returns the
/// per-user powers followed by the water level.
#[wasm_bindgen]
pub fn water_fill_levels(floors: Vec<f64>, budget: f64) -> Result<Vec<f64>, String> {
    if floors.is_empty() {
        return Err("need at least one floor".into());
    }
    if floors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err("floors must be positive and finite".into());
    }
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err("budget must be non-negative and finite".into());
    }
    let ones = vec![1.0; floors.len()];
    let wf = water_fill(&ones, &floors, budget);
    let mut out = wf.powers;
    out.push(wf.water_level);
    Ok(out)
}

/// Monte Carlo mean received power and the closed form, both in dBm, as
/// `[Q, simulated, theory]` triples for Q = 1..=q_max.
#[wasm_bindgen]
pub fn simulate_single_user(
    n: usize,
    f_r_db: f64,
    imperfect: bool,
    q_max: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let mut cfg = single_user(n, f_r_db, imperfect, q_max)?;
    cfg.trials = trials;
    cfg.seed = seed;
    let stats = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(3 * stats.rows.len());
    for row in &stats.rows {
        let sim = row.mean_received_power.ok_or("no received power recorded")?;
        let theory = row.theory_received_power.ok_or("no closed form for this point")?;
        out.extend([row.sweep_value, dbm(sim), dbm(theory)]);
    }
    Ok(out)
}
