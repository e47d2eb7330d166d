#![allow(dead_code)]

use ricci_harnack::scenario::{run_scenario, RunOutput, ScenarioConfig};

/// Validated scenarios spanning ε ∈ {0, 0.25, 0.5, 1} and c₀ ∈ {0.3, 0.5, 0.7},
/// all with non-constant initial data.
pub fn suite() -> Vec<ScenarioConfig> {
    let cases: [(f64, f64, &[f64], &[f64], &[f64]); 5] = [
        (0.0, 0.5, &[0.0, 0.1], &[0.3, 0.5, -0.4], &[0.5, 0.3]),
        (0.25, 0.3, &[-0.15, 0.05, 0.03], &[0.0, -0.6, 0.3], &[0.4, -0.25]),
        (0.5, 0.7, &[0.0, 0.15, 0.0, -0.05], &[1.0, 0.4], &[0.5, 0.3, -0.1]),
        (1.0, 0.5, &[0.0, 0.1, 0.05], &[-0.5, 0.8], &[0.6, -0.3]),
        (1.0, 0.7, &[-0.05, 0.0, 0.1], &[0.5, 0.0, -0.7], &[0.45, 0.2, 0.2]),
    ];
    cases
        .iter()
        .map(|&(epsilon, c0, u0, ls, h0)| scenario(epsilon, c0, u0, ls, h0))
        .collect()
}

/// A run with a single positive solution and no order constraint.
pub fn single_solution() -> ScenarioConfig {
    scenario(0.5, 0.5, &[0.0, 0.1], &[0.2, 0.6], &[])
}

pub fn scenario(epsilon: f64, c0: f64, u0: &[f64], log_s0: &[f64], h0: &[f64]) -> ScenarioConfig {
    let text = serde_json::json!({
        "epsilon": epsilon,
        "c0": c0,
        "n_theta": 128,
        "t_end": 0.2,
        "u0_coeffs": u0,
        "logS0_coeffs": log_s0,
        "h0_coeffs": h0,
        "output": "unused",
    })
    .to_string();
    ricci_harnack::scenario::parse_and_validate(&text).expect("suite scenario validates")
}

/// Run every config on its own thread.
pub fn run_all(cfgs: &[ScenarioConfig]) -> Vec<RunOutput> {
    std::thread::scope(|s| {
        let handles: Vec<_> = cfgs.iter().map(|c| s.spawn(move || run_scenario(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread").expect("scenario runs"))
            .collect()
    })
}
