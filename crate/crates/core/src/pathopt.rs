//! Space-time path action and the integrated Harnack inequality.
//!
//! The action of a meridian path `γ(t) = θ(t)` is
//! `¼ ∫ e^t (|γ'|²_{g(t)} + 4/t) dt` with `|γ'|² = e^{2u} θ'²`. The `4/t`
//! part does not depend on the path and is integrated exactly; the kinetic
//! part is minimised by dynamic programming over a layered graph whose
//! layers are a nested subset of the stored time samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{three_point_derivative, FlowState, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{d_theta, ScalarField};
use crate::quadrature::exp_over_t_integral;

pub const DEFAULT_WINDOW: usize = 16;
pub const DEFAULT_LAYERS: usize = 64;

/// Endpoints of an integrated Harnack query, snapped to stored data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathQuery {
    pub theta1: f64,
    pub t1: f64,
    pub theta2: f64,
    pub t2: f64,
    pub node1: usize,
    pub node2: usize,
    pub step1: usize,
    pub step2: usize,
}

impl PathQuery {
    pub fn new(theta1: f64, t1: f64, theta2: f64, t2: f64, traj: &Trajectory) -> Result<Self> {
        use std::f64::consts::PI;
        if !(t1 < t2) {
            return Err(Error::Query(format!("requires t1 < t2 (got t1 = {t1}, t2 = {t2})")));
        }
        if !(t1 > 0.0) {
            return Err(Error::Query(format!("requires t1 > 0 (got {t1})")));
        }
        for theta in [theta1, theta2] {
            if !(theta > 0.0 && theta < PI) {
                return Err(Error::Query(format!("colatitude {theta} outside (0, π)")));
            }
        }
        let (lo, hi) = traj.t_range();
        if t1 < lo || t2 > hi * (1.0 + 1e-12) {
            return Err(Error::Query(format!(
                "times [{t1}, {t2}] leave the stored range [{lo}, {hi}]"
            )));
        }
        let grid = traj.states[0].metric.grid().clone();
        let step1 = traj.nearest_index(t1);
        let step2 = traj.nearest_index(t2);
        if step2 <= step1 || traj.states[step1].time <= 0.0 {
            return Err(Error::Query(format!(
                "t1 = {t1} and t2 = {t2} do not resolve to distinct positive stored times"
            )));
        }
        let node1 = grid.nearest_node(theta1);
        let node2 = grid.nearest_node(theta2);
        Ok(PathQuery {
            theta1: grid.nodes()[node1],
            t1: traj.states[step1].time,
            theta2: grid.nodes()[node2],
            t2: traj.states[step2].time,
            node1,
            node2,
            step1,
            step2,
        })
    }
}

/// Piecewise-linear meridian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePath {
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl SpaceTimePath {
    pub fn new(times: Vec<f64>, thetas: Vec<f64>) -> Result<Self> {
        if times.len() != thetas.len() || times.len() < 2 {
            return Err(Error::Query("a path needs at least two (t, θ) samples".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Query("path times must be strictly increasing".into()));
        }
        Ok(SpaceTimePath { times, thetas })
    }

    /// Position and velocity at time `t`; velocity of the segment starting at or before `t`.
    fn locate(&self, t: f64) -> (f64, f64) {
        let seg = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let (ta, tb) = (self.times[seg], self.times[seg + 1]);
        let (xa, xb) = (self.thetas[seg], self.thetas[seg + 1]);
        let v = (xb - xa) / (tb - ta);
        (xa + v * (t - ta), v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub query: PathQuery,
    pub gamma_value: f64,
    pub path: SpaceTimePath,
    /// `e^{t1} ln S(x1, t1)`.
    pub lhs: f64,
    /// `e^{t2} ln S(x2, t2) + Γ`.
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    /// Largest node jump allowed on one segment.
    pub window: usize,
    /// Number of time intervals between the endpoints.
    pub layers: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions { window: DEFAULT_WINDOW, layers: DEFAULT_LAYERS }
    }
}

/// Conformal exponent at an arbitrary `(θ, t)` inside the stored range.
fn field_at(traj: &Trajectory, pick: impl Fn(&FlowState) -> &ScalarField, theta: f64, t: f64) -> f64 {
    let states = &traj.states;
    let k = states.partition_point(|s| s.time <= t).clamp(1, states.len() - 1) - 1;
    let (a, b) = (&states[k], &states[k + 1]);
    let grid = a.metric.grid();
    let fa = grid.interpolate(pick(a).values(), theta);
    let fb = grid.interpolate(pick(b).values(), theta);
    let w = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
    fa * (1.0 - w) + fb * w
}

fn kinetic(delta_theta: f64, ta: f64, tb: f64, conformal: f64) -> f64 {
    let v = delta_theta / (tb - ta);
    0.25 * v * v * conformal * (tb.exp() - ta.exp())
}

/// `¼ ∫ e^t (|γ'|² + 4/t) dt` along `path`.
pub fn action(path: &SpaceTimePath, traj: &Trajectory) -> Result<f64> {
    let (lo, hi) = traj.t_range();
    let (first, last) = (path.times[0], path.times[path.times.len() - 1]);
    if first < lo || last > hi || !(first > 0.0) {
        return Err(Error::Query(format!(
            "path time span [{first}, {last}] leaves the stored range ({lo}, {hi}]"
        )));
    }
    let mut total = exp_over_t_integral(first, last);
    for k in 0..path.times.len() - 1 {
        let (ta, tb) = (path.times[k], path.times[k + 1]);
        let (xa, xb) = (path.thetas[k], path.thetas[k + 1]);
        if xa == xb {
            continue;
        }
        let u = field_at(traj, |s| &s.metric.u, 0.5 * (xa + xb), 0.5 * (ta + tb));
        total += kinetic(xb - xa, ta, tb, (2.0 * u).exp());
    }
    Ok(total)
}

/// Stored-step index of every DP layer; layer sets for `L` and `2L` are nested.
fn layer_steps(step1: usize, step2: usize, layers: usize) -> Vec<usize> {
    let span = step2 - step1;
    let l = layers.min(span).max(1);
    (0..=l).map(|m| step1 + (2 * m * span + l) / (2 * l)).collect()
}

/// Upper bound on `Γ` by dynamic programming over piecewise-linear node paths.
pub fn gamma_dp(query: &PathQuery, traj: &Trajectory, window: usize) -> Result<PathResult> {
    gamma_dp_with(query, traj, DpOptions { window, ..Default::default() })
}

pub fn gamma_dp_with(query: &PathQuery, traj: &Trajectory, opts: DpOptions) -> Result<PathResult> {
    if opts.window == 0 || opts.layers == 0 {
        return Err(Error::Query("window and layer count must be at least 1".into()));
    }
    if traj.states.len() < 2 || query.step2 >= traj.states.len() {
        return Err(Error::Query("trajectory too short for the query".into()));
    }
    let grid = traj.states[0].metric.grid().clone();
    let n = grid.n_theta();
    let h = grid.d_theta();
    let steps = layer_steps(query.step1, query.step2, opts.layers);
    let times: Vec<f64> = steps.iter().map(|&k| traj.states[k].time).collect();
    let layers = steps.len();

    // Jump order: 0, -1, +1, -2, +2, ... so ties go to the smallest move.
    let window = opts.window.min(n - 1) as isize;
    let jumps: Vec<isize> =
        std::iter::once(0).chain((1..=window).flat_map(|d| [-d, d])).collect();

    let mut best = vec![vec![f64::INFINITY; n]; layers];
    let mut back = vec![vec![(usize::MAX, usize::MAX); n]; layers];
    best[0][query.node1] = 0.0;

    let mut conformal = vec![0.0; n];
    for b in 1..layers {
        for a in 0..b {
            let (ta, tb) = (times[a], times[b]);
            let tm = 0.5 * (ta + tb);
            for (j, c) in conformal.iter_mut().enumerate() {
                *c = field_at(traj, |s| &s.metric.u, grid.nodes()[j], tm);
            }
            let (done, rest) = best.split_at_mut(b);
            let base = &done[a];
            let target = &mut rest[0];
            for &d in &jumps {
                for j in 0..n {
                    let i = j as isize - d;
                    if i < 0 || i >= n as isize {
                        continue;
                    }
                    let i = i as usize;
                    if !base[i].is_finite() {
                        continue;
                    }
                    let cost = if d == 0 {
                        base[i]
                    } else {
                        // midpoint of the segment sits at node index (i + j)/2
                        let lo = (i + j) / 2;
                        let u = if (i + j) % 2 == 0 {
                            conformal[lo]
                        } else {
                            0.5 * (conformal[lo] + conformal[lo + 1])
                        };
                        base[i] + kinetic(d as f64 * h, ta, tb, (2.0 * u).exp())
                    };
                    if cost < target[j] {
                        target[j] = cost;
                        back[b][j] = (a, i);
                    }
                }
            }
        }
    }

    let last = layers - 1;
    let kinetic_min = best[last][query.node2];
    if !kinetic_min.is_finite() {
        return Err(Error::Query(format!(
            "node {} is unreachable from node {} with window {}",
            query.node2, query.node1, opts.window
        )));
    }
    let mut rev = vec![(last, query.node2)];
    let (mut layer, mut node) = (last, query.node2);
    while layer != 0 {
        let (a, i) = back[layer][node];
        rev.push((a, i));
        layer = a;
        node = i;
    }
    rev.reverse();
    let path = SpaceTimePath {
        times: rev.iter().map(|&(l, _)| times[l]).collect(),
        thetas: rev.iter().map(|&(_, j)| grid.nodes()[j]).collect(),
    };

    let gamma_value = kinetic_min + exp_over_t_integral(query.t1, query.t2);
    let log_s1 = traj.states[query.step1].dominant.values()[query.node1].ln();
    let log_s2 = traj.states[query.step2].dominant.values()[query.node2].ln();
    let lhs = query.t1.exp() * log_s1;
    let rhs = query.t2.exp() * log_s2 + gamma_value;
    Ok(PathResult { query: *query, gamma_value, path, lhs, rhs, margin: rhs - lhs })
}

/// Check `e^{t1} ln S(x1,t1) < e^{t2} ln S(x2,t2) + Γ` with the DP bound for `Γ`.
pub fn verify_integrated(query: &PathQuery, traj: &Trajectory) -> Result<PathResult> {
    verify_integrated_with(query, traj, DpOptions::default())
}

pub fn verify_integrated_with(query: &PathQuery, traj: &Trajectory, opts: DpOptions) -> Result<PathResult> {
    if !traj.nonlinear_term {
        return Err(Error::Domain(
            "the integrated inequality with e^t weights needs the f ln f reaction term".into(),
        ));
    }
    gamma_dp_with(query, traj, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathwiseSample {
    pub t: f64,
    pub margin: f64,
}

/// `d/dt(e^t ln S(γ(t), t)) + e^t(¼|γ'|² + 1/t)` at every stored time strictly
/// inside the path's time span.
pub fn pathwise_differential_check(path: &SpaceTimePath, traj: &Trajectory) -> Result<Vec<PathwiseSample>> {
    let (first, last) = (path.times[0], path.times[path.times.len() - 1]);
    let (lo, hi) = traj.t_range();
    if first < lo || last > hi || !(first > 0.0) {
        return Err(Error::Query(format!(
            "path time span [{first}, {last}] leaves the stored range ({lo}, {hi}]"
        )));
    }
    let grid = traj.states[0].metric.grid().clone();
    let logs: Vec<ScalarField> = traj
        .states
        .iter()
        .map(FlowState::log_dominant)
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 1..traj.states.len() - 1 {
        let t = traj.states[k].time;
        if t <= first || t >= last {
            continue;
        }
        let (theta, v) = path.locate(t);
        let ts = [traj.states[k - 1].time, t, traj.states[k + 1].time];
        let l = [
            grid.interpolate(logs[k - 1].values(), theta),
            grid.interpolate(logs[k].values(), theta),
            grid.interpolate(logs[k + 1].values(), theta),
        ];
        let dl_dt = three_point_derivative(ts, l);
        let dl_dtheta = grid.interpolate(d_theta(&logs[k]).values(), theta);
        let u = grid.interpolate(traj.states[k].metric.u.values(), theta);
        let speed_sq = (2.0 * u).exp() * v * v;
        let margin = t.exp() * (l[1] + dl_dt + dl_dtheta * v + 0.25 * speed_sq + 1.0 / t);
        out.push(PathwiseSample { t, margin });
    }
    Ok(out)
}

/// `count` reproducible queries with `t_min ≤ t1 < t2 ≤ t_end`.
pub fn random_queries(traj: &Trajectory, count: usize, seed: u64, t_min: f64) -> Result<Vec<PathQuery>> {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, hi) = traj.t_range();
    if !(t_min > 0.0 && t_min < hi) {
        return Err(Error::Query(format!("t_min = {t_min} must lie in (0, {hi})")));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.gen_range(t_min..hi);
        let b = rng.gen_range(t_min..hi);
        let (t1, t2) = (a.min(b), a.max(b));
        let theta1 = rng.gen_range(0.0..PI);
        let theta2 = rng.gen_range(0.0..PI);
        if let Ok(q) = PathQuery::new(theta1.max(1e-9), t1, theta2.max(1e-9), t2, traj) {
            if q.step2 > q.step1 {
                out.push(q);
            }
        }
    }
    Ok(out)
}
