//! Scenario configuration, hypothesis checks and the run pipeline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, h_consistency, FlowState, StepControl, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{area, cos_polynomial, scalar_curvature, Grid, MetricState, ScalarField};
use crate::harnack::{curvature_threshold, MarginKind, MarginSeries};
use crate::pathopt::{
    pathwise_differential_check, random_queries, verify_integrated_with, DpOptions, PathQuery,
    PathResult, DEFAULT_LAYERS, DEFAULT_WINDOW,
};

pub const MAX_CELLS: usize = 4096;
/// Pointwise floor for the tensor inequality, which is exact algebra.
pub const ELEM_TOL: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-4;

fn default_sigma() -> f64 {
    0.2
}
fn default_true() -> bool {
    true
}
fn default_dt_min() -> f64 {
    1e-12
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_ceiling() -> f64 {
    1e3
}
fn default_delta_h() -> f64 {
    1e-6
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_layers() -> usize {
    DEFAULT_LAYERS
}
fn default_output() -> String {
    "out/scenario".into()
}
fn default_query_t_min() -> f64 {
    0.02
}

/// Endpoints `(θ, t)` of a requested path query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub epsilon: f64,
    pub c0: f64,
    pub n_theta: usize,
    pub t_end: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_true")]
    pub nonlinear_term: bool,
    /// `u₀ = Σ a_k cos^k θ`.
    #[serde(default)]
    pub u0_coeffs: Vec<f64>,
    /// `ln S₀ = Σ b_k cos^k θ`.
    #[serde(rename = "logS0_coeffs", default)]
    pub log_s0_coeffs: Vec<f64>,
    /// `h₀ = c₀ + (1 - c₀) Σ d_k cos^k θ`; empty for a run without `T`.
    #[serde(default)]
    pub h0_coeffs: Vec<f64>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,

    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_ceiling")]
    pub r_ceiling: f64,
    /// Slack added to the curvature threshold.
    #[serde(default)]
    pub delta: f64,
    /// Slack kept between `h₀` and the interval ends.
    #[serde(default = "default_delta_h")]
    pub delta_h: f64,
    /// Integrate `h` through its own equation alongside `T/S`.
    #[serde(default = "default_true")]
    pub track_ratio: bool,

    #[serde(default)]
    pub path_queries: Vec<QuerySpec>,
    #[serde(default)]
    pub random_queries: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_query_t_min")]
    pub query_t_min: f64,
    #[serde(default = "default_window")]
    pub dp_window: usize,
    #[serde(default = "default_layers")]
    pub dp_layers: usize,
}

impl ScenarioConfig {
    pub fn has_companion(&self) -> bool {
        !self.h0_coeffs.is_empty()
    }

    /// Whether the constrained estimate's curvature lower bound is a hypothesis here.
    pub fn requires_curvature_condition(&self) -> bool {
        self.nonlinear_term && self.has_companion()
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            sigma: self.sigma,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            nonlinear_term: self.nonlinear_term,
            r_ceiling: self.r_ceiling,
        }
    }

    pub fn dp_options(&self) -> DpOptions {
        DpOptions { window: self.dp_window, layers: self.dp_layers }
    }

    /// Same scenario with twice the cells and a quarter of the step bounds.
    pub fn refined(&self) -> ScenarioConfig {
        ScenarioConfig {
            n_theta: 2 * self.n_theta,
            dt_min: self.dt_min / 4.0,
            dt_max: self.dt_max / 4.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn initial_state(&self) -> Result<FlowState> {
        let grid = Grid::new(self.n_theta)?;
        let u = cos_polynomial(&grid, &self.u0_coeffs);
        let s = cos_polynomial(&grid, &self.log_s0_coeffs).map(f64::exp);
        let t = self.initial_ratio(&grid).map(|h| h.zip_map(&s, |h, s| h * s));
        let state = FlowState::new(MetricState::new(u), s, t)?;
        Ok(if self.track_ratio && self.has_companion() { state.with_ratio_tracking() } else { state })
    }

    fn initial_ratio(&self, grid: &std::sync::Arc<Grid>) -> Option<ScalarField> {
        self.has_companion().then(|| {
            cos_polynomial(grid, &self.h0_coeffs).map(|p| self.c0 + (1.0 - self.c0) * p)
        })
    }

    /// Every time at which the integrator must land exactly.
    pub fn schedule(&self) -> Vec<f64> {
        let mut stops = self.snapshot_times.clone();
        for q in &self.path_queries {
            stops.push(q.from[1]);
            stops.push(q.to[1]);
        }
        stops
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon = {} must be finite and >= 0", self.epsilon));
        }
        if !(self.c0 > 0.0 && self.c0 < 1.0) {
            return bad(format!("c0 = {} must lie in (0, 1)", self.c0));
        }
        if self.n_theta < crate::geometry::MIN_CELLS || self.n_theta > MAX_CELLS {
            return bad(format!(
                "n_theta = {} must lie in [{}, {MAX_CELLS}]",
                self.n_theta,
                crate::geometry::MIN_CELLS
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be finite and > 0", self.t_end));
        }
        self.step_control().validate()?;
        if !(self.delta >= 0.0 && self.delta_h > 0.0 && self.delta_h < 0.5) {
            return bad(format!(
                "validation slacks must satisfy delta >= 0 and 0 < delta_h < 0.5 (got {}, {})",
                self.delta, self.delta_h
            ));
        }
        let coeffs = self.u0_coeffs.iter().chain(&self.log_s0_coeffs).chain(&self.h0_coeffs);
        if coeffs.into_iter().any(|c| !c.is_finite()) {
            return bad("initial-data coefficients must be finite".into());
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(t >= 0.0 && t <= self.t_end)) {
            return bad(format!("snapshot time {t} outside [0, t_end = {}]", self.t_end));
        }
        for q in &self.path_queries {
            let ([th1, t1], [th2, t2]) = (q.from, q.to);
            if !(t1 < t2) {
                return Err(Error::Query(format!("requires t1 < t2 (got t1 = {t1}, t2 = {t2})")));
            }
            if !(t1 > 0.0 && t2 <= self.t_end) {
                return Err(Error::Query(format!("query times must lie in (0, t_end] (got {t1}, {t2})")));
            }
            if [th1, th2].iter().any(|th| !(*th > 0.0 && *th < PI)) {
                return Err(Error::Query(format!("query colatitudes must lie in (0, π) (got {th1}, {th2})")));
            }
        }
        if self.random_queries > 0 && !(self.query_t_min > 0.0 && self.query_t_min < self.t_end) {
            return bad(format!("query_t_min = {} must lie in (0, t_end)", self.query_t_min));
        }
        if self.dp_window == 0 || self.dp_layers == 0 {
            return bad("dp_window and dp_layers must be at least 1".into());
        }

        let grid = Grid::new(self.n_theta)?;
        let metric = MetricState::new(cos_polynomial(&grid, &self.u0_coeffs));
        let min_r = scalar_curvature(&metric).min();
        if self.requires_curvature_condition() {
            let threshold = curvature_threshold(self.c0);
            if !(min_r > threshold + self.delta) {
                return Err(Error::CurvatureCondition { min_r, threshold, c0: self.c0 });
            }
        } else if !(min_r > 0.0) {
            return Err(Error::PositiveCurvature { min_r });
        }

        if let Some(h) = self.initial_ratio(&grid) {
            let (lower, upper) = (self.c0 + self.delta_h, 1.0 - self.delta_h);
            let (h_min, h_max) = (h.min(), h.max());
            if !(h_min > lower && h_max < upper) {
                return Err(Error::OrderCondition { h_min, h_max, lower, upper });
            }
        }

        if self.epsilon > 0.0 {
            // Gauss–Bonnet: dA/dt = -8πε, so the flow dies at A₀/(8πε).
            let extinction = area(&metric) / (8.0 * PI * self.epsilon);
            if !(self.t_end < extinction) {
                return bad(format!(
                    "t_end = {} is not before the extinction time {extinction:.6}",
                    self.t_end
                ));
            }
        }
        Ok(())
    }
}

/// Parse a JSON scenario and check every hypothesis.
pub fn parse_and_validate(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub margins: MarginSeries,
    pub paths: Vec<PathResult>,
    /// Smallest pathwise differential margin along all query paths.
    pub pathwise_min: Option<f64>,
    pub h_consistency_max: Option<f64>,
}

/// Evolve the scenario and evaluate every monitor.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let initial = cfg.initial_state()?;
    let mut margins = MarginSeries::new(cfg.epsilon, cfg.c0);
    let mut observer = |s: &FlowState| margins.observe(s);
    let trajectory = evolve(
        initial,
        cfg.epsilon,
        &cfg.step_control(),
        cfg.t_end,
        &cfg.schedule(),
        &mut [&mut observer],
    )?;

    let mut queries = Vec::new();
    for q in &cfg.path_queries {
        queries.push(PathQuery::new(q.from[0], q.from[1], q.to[0], q.to[1], &trajectory)?);
    }
    if cfg.random_queries > 0 {
        queries.extend(random_queries(&trajectory, cfg.random_queries, cfg.seed, cfg.query_t_min)?);
    }
    let mut paths = Vec::new();
    let mut pathwise_min: Option<f64> = None;
    if trajectory.nonlinear_term {
        for q in &queries {
            let res = verify_integrated_with(q, &trajectory, cfg.dp_options())?;
            for s in pathwise_differential_check(&res.path, &trajectory)? {
                pathwise_min = Some(pathwise_min.map_or(s.margin, |m| m.min(s.margin)));
            }
            paths.push(res);
        }
    }
    let h_consistency_max = {
        let d = h_consistency(&trajectory);
        (!d.is_empty()).then(|| d.into_iter().fold(0.0, f64::max))
    };
    Ok(RunOutput { trajectory, margins, paths, pathwise_min, h_consistency_max })
}

/// Margin kinds whose negative values count as violations beyond `tol`.
pub const TOLERANCED: [MarginKind; 3] = [MarginKind::Thm11, MarginKind::ThmD, MarginKind::Chow];

/// Human-readable list of every monitored inequality that fails.
pub fn violations(cfg: &ScenarioConfig, run: &RunOutput, tol: f64) -> Vec<String> {
    let minima = run.margins.global_minima();
    let mut out = Vec::new();
    for kind in TOLERANCED {
        if let Some(v) = minima.get(kind) {
            if !(v > -tol) {
                out.push(format!("{} = {v:e} <= -tol = {:e}", kind.column(), -tol));
            }
        }
    }
    for kind in [MarginKind::HLow, MarginKind::HHigh] {
        if let Some(v) = minima.get(kind) {
            if !(v > 0.0) {
                out.push(format!("{} = {v:e} <= 0 (order not preserved)", kind.column()));
            }
        }
    }
    if cfg.requires_curvature_condition() {
        if let Some(v) = minima.get(MarginKind::Cond) {
            if !(v > 0.0) {
                out.push(format!("m_cond = {v:e} <= 0 (curvature condition lost)"));
            }
        }
    }
    if let Some(v) = minima.get(MarginKind::Elem) {
        if !(v >= -ELEM_TOL) {
            out.push(format!("m_elem = {v:e} < -{ELEM_TOL:e}"));
        }
    }
    for p in &run.paths {
        if !(p.margin > 0.0) {
            out.push(format!(
                "integrated inequality margin {:e} <= 0 for ({}, {}) -> ({}, {})",
                p.margin, p.query.theta1, p.query.t1, p.query.theta2, p.query.t2
            ));
        }
    }
    if let Some(v) = run.pathwise_min {
        if !(v > -tol) {
            out.push(format!("pathwise margin {v:e} <= -tol = {:e}", -tol));
        }
    }
    out
}

/// Size of the worst negative excursion of `kind`, zero if none.
pub fn excursion(series: &MarginSeries, kind: MarginKind) -> f64 {
    series.global_minima().get(kind).map_or(0.0, |v| (-v).max(0.0))
}
