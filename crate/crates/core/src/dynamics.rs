//! Time integration of the coupled flow.
//!
//! The state is the conformal exponent `u` of the metric together with two
//! positive solutions `S ≥ T` of the reaction-diffusion equation
//!
//! ```text
//! ∂u/∂t = -(ε/2) R
//! ∂S/∂t = Δ_g S - S ln S + ε R S
//! ∂T/∂t = Δ_g T - T ln T + ε R T
//! ```
//!
//! and, optionally, the ratio `h = T/S` integrated on its own through
//! `∂h/∂t = Δ_g h + 2⟨∇h, ∇ln S⟩ - h ln h` as a consistency check.
//! In linear mode the `f ln f` reaction terms are dropped.

use crate::error::{Error, Result};
use crate::geometry::{grad_dot_g, laplace_g, scalar_curvature, MetricState, ScalarField};
use crate::quadrature::adaptive_simpson;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// CFL safety factor.
    pub sigma: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// `false` drops the `-f ln f` reaction terms.
    pub nonlinear_term: bool,
    /// Abort once `max R` exceeds this value.
    pub r_ceiling: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { sigma: 0.2, dt_min: 1e-12, dt_max: 1e-2, nonlinear_term: true, r_ceiling: 1e3 }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 0.5) {
            return Err(Error::Config(format!("sigma = {} must lie in (0, 0.5]", self.sigma)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::Config(format!(
                "time-step bounds must satisfy 0 < dt_min <= dt_max (got {}, {})",
                self.dt_min, self.dt_max
            )));
        }
        if !(self.r_ceiling > 0.0) {
            return Err(Error::Config(format!("r_ceiling = {} must be positive", self.r_ceiling)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub time: f64,
    pub metric: MetricState,
    /// The larger solution `S`.
    pub dominant: ScalarField,
    /// The smaller solution `T`, absent for single-solution runs.
    pub companion: Option<ScalarField>,
    /// `h` integrated through its own evolution equation.
    pub h_direct: Option<ScalarField>,
}

impl FlowState {
    pub fn new(
        metric: MetricState,
        dominant: ScalarField,
        companion: Option<ScalarField>,
    ) -> Result<Self> {
        let state = FlowState { time: 0.0, metric, dominant, companion, h_direct: None };
        state.check_positive()?;
        Ok(state)
    }

    /// Start tracking `h` separately, initialised to `T/S`.
    pub fn with_ratio_tracking(mut self) -> Self {
        self.h_direct = self.ratio();
        self
    }

    pub fn curvature(&self) -> ScalarField {
        scalar_curvature(&self.metric)
    }

    /// `h = T/S`.
    pub fn ratio(&self) -> Option<ScalarField> {
        self.companion.as_ref().map(|t| t.zip_map(&self.dominant, |t, s| t / s))
    }

    pub fn log_dominant(&self) -> Result<ScalarField> {
        check_positive_field(&self.dominant, "S", self.time)?;
        Ok(self.dominant.map(f64::ln))
    }

    fn check_positive(&self) -> Result<()> {
        check_positive_field(&self.dominant, "S", self.time)?;
        if let Some(t) = &self.companion {
            check_positive_field(t, "T", self.time)?;
        }
        if let Some(h) = &self.h_direct {
            check_positive_field(h, "h", self.time)?;
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let fields = [
            ("u", Some(&self.metric.u)),
            ("S", Some(&self.dominant)),
            ("T", self.companion.as_ref()),
            ("h", self.h_direct.as_ref()),
        ];
        for (name, f) in fields {
            if let Some(f) = f {
                if !f.is_finite() {
                    return Err(Error::NonFinite { time: self.time, field: name });
                }
            }
        }
        Ok(())
    }

    fn axpy(&self, rates: &Rates, scale: f64) -> FlowState {
        let add = |a: &ScalarField, b: &ScalarField| a.zip_map(b, |x, y| x + scale * y);
        FlowState {
            time: self.time,
            metric: MetricState::new(add(&self.metric.u, &rates.metric)),
            dominant: add(&self.dominant, &rates.dominant),
            companion: zip_opt(&self.companion, &rates.companion, add),
            h_direct: zip_opt(&self.h_direct, &rates.ratio, add),
        }
    }
}

fn zip_opt(
    a: &Option<ScalarField>,
    b: &Option<ScalarField>,
    f: impl Fn(&ScalarField, &ScalarField) -> ScalarField,
) -> Option<ScalarField> {
    match (a, b) {
        (Some(a), Some(b)) => Some(f(a, b)),
        _ => None,
    }
}

fn check_positive_field(f: &ScalarField, field: &'static str, time: f64) -> Result<()> {
    match f.values().iter().position(|&v| !(v > 0.0)) {
        Some(node) => Err(Error::Positivity { time, field, node, value: f.values()[node] }),
        None => Ok(()),
    }
}

/// Time derivatives of every evolved field.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub metric: ScalarField,
    pub dominant: ScalarField,
    pub companion: Option<ScalarField>,
    pub ratio: Option<ScalarField>,
}

impl Rates {
    fn combine(parts: [(&Rates, f64); 4]) -> Rates {
        let lin = |pick: &dyn Fn(&Rates) -> &ScalarField| {
            let mut acc = vec![0.0; pick(parts[0].0).values().len()];
            for (r, w) in parts {
                for (a, v) in acc.iter_mut().zip(pick(r).values()) {
                    *a += w * v;
                }
            }
            ScalarField::from_vec(pick(parts[0].0).grid().clone(), acc)
        };
        Rates {
            metric: lin(&|r| &r.metric),
            dominant: lin(&|r| &r.dominant),
            companion: parts[0].0.companion.as_ref().map(|_| lin(&|r| r.companion.as_ref().unwrap())),
            ratio: parts[0].0.ratio.as_ref().map(|_| lin(&|r| r.ratio.as_ref().unwrap())),
        }
    }
}

fn reaction_rate(f: &ScalarField, m: &MetricState, r: &ScalarField, epsilon: f64, nonlinear: bool) -> ScalarField {
    let lap = laplace_g(f, m);
    let values = f
        .values()
        .iter()
        .zip(lap.values())
        .zip(r.values())
        .map(|((&v, &l), &r)| {
            let reaction = if nonlinear { -v * v.ln() } else { 0.0 };
            l + reaction + epsilon * r * v
        })
        .collect();
    ScalarField::from_vec(f.grid().clone(), values)
}

/// Right-hand side of the coupled system.
pub fn rhs(state: &FlowState, epsilon: f64, ctl: &StepControl) -> Result<Rates> {
    state.check_positive()?;
    let m = &state.metric;
    let r = scalar_curvature(m);
    let nonlinear = ctl.nonlinear_term;
    let metric = r.map(|r| -0.5 * epsilon * r);
    let dominant = reaction_rate(&state.dominant, m, &r, epsilon, nonlinear);
    let companion = state.companion.as_ref().map(|t| reaction_rate(t, m, &r, epsilon, nonlinear));
    let ratio = state.h_direct.as_ref().map(|h| {
        let log_s = state.dominant.map(f64::ln);
        let lap = laplace_g(h, m);
        let cross = grad_dot_g(h, &log_s, m);
        let values = h
            .values()
            .iter()
            .zip(lap.values())
            .zip(cross.values())
            .map(|((&h, &l), &c)| {
                let reaction = if nonlinear { -h * h.ln() } else { 0.0 };
                l + 2.0 * c + reaction
            })
            .collect();
        ScalarField::from_vec(h.grid().clone(), values)
    });
    Ok(Rates { metric, dominant, companion, ratio })
}

/// Diffusion-limited step `σ Δθ² / max e^{-2u}`, clamped to the configured
/// bounds and cut so it does not pass `next_output`.
pub fn select_dt(state: &FlowState, ctl: &StepControl, next_output: Option<f64>) -> f64 {
    let d_theta = state.metric.grid().d_theta();
    let max_factor = state.metric.u.values().iter().map(|u| (-2.0 * u).exp()).fold(0.0, f64::max);
    let dt = (ctl.sigma * d_theta * d_theta / max_factor).clamp(ctl.dt_min, ctl.dt_max);
    match next_output {
        Some(t_out) if t_out > state.time => dt.min(t_out - state.time),
        _ => dt,
    }
}

/// One classical Runge–Kutta step.
pub fn step_rk4(state: &FlowState, dt: f64, epsilon: f64, ctl: &StepControl) -> Result<FlowState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step {dt} must be positive")));
    }
    let stage = |base: &FlowState, k: &Rates, scale: f64, t: f64| -> Result<FlowState> {
        let mut s = base.axpy(k, scale);
        s.time = t;
        s.check_finite()?;
        s.check_positive()?;
        Ok(s)
    };
    let t0 = state.time;
    let k1 = rhs(state, epsilon, ctl)?;
    let y2 = stage(state, &k1, 0.5 * dt, t0 + 0.5 * dt)?;
    let k2 = rhs(&y2, epsilon, ctl)?;
    let y3 = stage(state, &k2, 0.5 * dt, t0 + 0.5 * dt)?;
    let k3 = rhs(&y3, epsilon, ctl)?;
    let y4 = stage(state, &k3, dt, t0 + dt)?;
    let k4 = rhs(&y4, epsilon, ctl)?;
    let incr = Rates::combine([(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)]);
    stage(state, &incr, dt / 6.0, t0 + dt)
}

/// Accepted states of a run, starting with the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub epsilon: f64,
    pub nonlinear_term: bool,
    pub states: Vec<FlowState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    /// Index of the stored state closest in time to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let idx = self.states.partition_point(|s| s.time < t);
        if idx == 0 {
            return 0;
        }
        if idx == self.states.len() {
            return idx - 1;
        }
        if (self.states[idx].time - t) < (t - self.states[idx - 1].time) {
            idx
        } else {
            idx - 1
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.states[0].time, self.states[self.states.len() - 1].time)
    }
}

pub type Observer<'a> = dyn FnMut(&FlowState) -> Result<()> + 'a;

/// Advance `initial` to `t_end`, landing exactly on every time in `schedule`.
pub fn evolve(
    initial: FlowState,
    epsilon: f64,
    ctl: &StepControl,
    t_end: f64,
    schedule: &[f64],
    observers: &mut [&mut Observer<'_>],
) -> Result<Trajectory> {
    ctl.validate()?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon = {epsilon} must be a finite nonnegative number")));
    }
    if !(t_end > initial.time && t_end.is_finite()) {
        return Err(Error::Config(format!(
            "t_end = {t_end} must exceed the initial time {}",
            initial.time
        )));
    }
    initial.check_finite()?;
    initial.check_positive()?;

    let mut stops: Vec<f64> = schedule
        .iter()
        .copied()
        .filter(|&t| t > initial.time && t < t_end)
        .chain(std::iter::once(t_end))
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut states = vec![initial];
    let mut next = 0;
    while next < stops.len() {
        let current = states.last().expect("trajectory is never empty");
        let target = stops[next];
        let dt = select_dt(current, ctl, Some(target));
        let mut new = step_rk4(current, dt, epsilon, ctl)?;
        if target - new.time <= 1e-12 * target.max(1.0) {
            new.time = target;
            next += 1;
        }
        let max_r = new.curvature().max();
        if !max_r.is_finite() {
            return Err(Error::NonFinite { time: new.time, field: "R" });
        }
        if max_r > ctl.r_ceiling {
            return Err(Error::BlowUp { time: new.time, max_r, ceiling: ctl.r_ceiling });
        }
        for obs in observers.iter_mut() {
            obs(&new)?;
        }
        states.push(new);
    }
    Ok(Trajectory { epsilon, nonlinear_term: ctl.nonlinear_term, states })
}

/// Closed-form solutions for spatially homogeneous data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// `R(t) = R₀ / (1 - ε R₀ t)`.
    RoundCurvature { r0: f64, epsilon: f64 },
    /// `L = ln S` with `L' = -L + ε R(t)` on a homogeneous sphere.
    ConstLogS { l0: f64, epsilon: f64, r0: f64 },
    /// `h(t) = α^{e^{-t}}`.
    ConstRatio { alpha: f64 },
}

impl Reference {
    fn check_extinction(epsilon: f64, r0: f64, t: f64) -> Result<()> {
        if epsilon * r0 * t >= 1.0 {
            return Err(Error::Domain(format!(
                "t = {t} is at or beyond the extinction time {}",
                1.0 / (epsilon * r0)
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match *self {
            Reference::RoundCurvature { r0, epsilon } => {
                Self::check_extinction(epsilon, r0, t)?;
                Ok(r0 / (1.0 - epsilon * r0 * t))
            }
            Reference::ConstLogS { l0, epsilon, r0 } => {
                Self::check_extinction(epsilon, r0, t)?;
                let decay = (-t).exp();
                if epsilon == 0.0 {
                    return Ok(l0 * decay);
                }
                let forcing = |s: f64| s.exp() * epsilon * r0 / (1.0 - epsilon * r0 * s);
                Ok(decay * l0 + decay * adaptive_simpson(&forcing, 0.0, t, 1e-14))
            }
            Reference::ConstRatio { alpha } => Ok(alpha.powf((-t).exp())),
        }
    }
}

/// Derivative at the middle of three samples with unequal spacing.
pub fn three_point_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let hm = t[1] - t[0];
    let hp = t[2] - t[1];
    -hp / (hm * (hm + hp)) * f[0] + (hp - hm) / (hm * hp) * f[1] + hm / (hp * (hm + hp)) * f[2]
}

/// `max |∂R/∂t - ε(Δ_g R + R²)|` at each interior stored time, with the time
/// derivative taken from the neighbouring stored states.
pub fn r_evolution_residual(traj: &Trajectory) -> Vec<f64> {
    let eps = traj.epsilon;
    let curv: Vec<ScalarField> = traj.states.iter().map(FlowState::curvature).collect();
    (1..traj.states.len().saturating_sub(1))
        .map(|k| {
            let t = [traj.states[k - 1].time, traj.states[k].time, traj.states[k + 1].time];
            let lap = laplace_g(&curv[k], &traj.states[k].metric);
            (0..curv[k].values().len())
                .map(|j| {
                    let f = [curv[k - 1].values()[j], curv[k].values()[j], curv[k + 1].values()[j]];
                    let r = f[1];
                    (three_point_derivative(t, f) - eps * (lap.values()[j] + r * r)).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `sup |h_direct - T/S|` at every stored time that tracks `h`.
pub fn h_consistency(traj: &Trajectory) -> Vec<f64> {
    traj.states
        .iter()
        .filter_map(|s| match (&s.h_direct, s.ratio()) {
            (Some(h), Some(ratio)) => Some(h.max_abs_diff(&ratio)),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn homogeneous(n: usize, u: f64, s: f64, t: Option<f64>) -> FlowState {
        let g = Grid::new(n).unwrap();
        FlowState::new(
            MetricState::new(ScalarField::constant(&g, u)),
            ScalarField::constant(&g, s),
            t.map(|t| ScalarField::constant(&g, t)),
        )
        .unwrap()
    }

    #[test]
    fn rhs_examples() {
        let ctl = StepControl::default();
        let g = Grid::new(32).unwrap();
        let state = FlowState::new(
            MetricState::new(ScalarField::from_fn(&g, |t| 0.1 * t.cos())),
            ScalarField::from_fn(&g, |t| 1.0 + 0.5 * t.cos()),
            None,
        )
        .unwrap();
        let r = rhs(&state, 0.0, &ctl).unwrap();
        assert!(r.metric.values().iter().all(|&v| v == 0.0));

        let r = rhs(&homogeneous(32, 0.0, 1.0, None), 1.0, &ctl).unwrap();
        assert!(r.dominant.values().iter().all(|&v| v == 2.0));

        let r = rhs(&homogeneous(32, 0.0, E, None), 0.0, &ctl).unwrap();
        assert!(r.dominant.values().iter().all(|&v| (v + E).abs() < 1e-15));

        let linear = StepControl { nonlinear_term: false, ..ctl };
        let r = rhs(&homogeneous(32, 0.0, E, None), 0.0, &linear).unwrap();
        assert!(r.dominant.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_rejects_nonpositive_solution() {
        let g = Grid::new(16).unwrap();
        let mut state = homogeneous(16, 0.0, 1.0, Some(0.5));
        state.companion = Some(ScalarField::from_fn(&g, |t| t.cos()));
        let err = rhs(&state, 1.0, &StepControl::default()).unwrap_err();
        assert!(matches!(err, Error::Positivity { field: "T", .. }));
    }

    #[test]
    fn dt_selection() {
        let ctl = StepControl::default();
        let dt = select_dt(&homogeneous(128, 0.0, 1.0, None), &ctl, None);
        assert_relative_eq!(dt, 1.204_785_693_492_353_4e-4, max_relative = 1e-12);
        let c = 0.3;
        let scaled = select_dt(&homogeneous(128, c, 1.0, None), &ctl, None);
        assert_relative_eq!(scaled / dt, (2.0 * c).exp(), max_relative = 1e-12);
        let capped = StepControl { dt_max: 1e-5, ..ctl };
        assert_eq!(select_dt(&homogeneous(128, 0.0, 1.0, None), &capped, None), 1e-5);
        let st = homogeneous(128, 0.0, 1.0, None);
        assert_relative_eq!(select_dt(&st, &ctl, Some(3e-5)), 3e-5);
    }

    #[test]
    fn single_rk4_step_on_constant_data() {
        // Hand RK4 on S' = -S ln S from S = e with dt = 0.1.
        let f = |s: f64| -s * s.ln();
        let (s, h) = (E, 0.1);
        let k1 = f(s);
        let k2 = f(s + 0.5 * h * k1);
        let k3 = f(s + 0.5 * h * k2);
        let k4 = f(s + h * k3);
        let oracle = (s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).ln();
        assert_relative_eq!(oracle, 0.904_838_218_407_426_7, max_relative = 1e-14);

        let state = homogeneous(16, 0.0, E, None);
        let ctl = StepControl::default();
        let next = step_rk4(&state, 0.1, 0.0, &ctl).unwrap();
        let l = next.dominant.values()[3].ln();
        assert_relative_eq!(l, oracle, max_relative = 1e-14);
        assert!((l - (-0.1f64).exp()).abs() < 1e-6);
        assert_eq!(next.metric, state.metric);
        assert_eq!(next.time, 0.1);

        assert_eq!(step_rk4(&state, 0.0, 1.0, &ctl).unwrap(), state);
    }

    #[test]
    fn static_metric_is_frozen_bitwise() {
        let g = Grid::new(32).unwrap();
        let u0 = ScalarField::from_fn(&g, |t| 0.1 * t.cos() + 0.05 * t.cos().powi(2));
        let state = FlowState::new(
            MetricState::new(u0.clone()),
            ScalarField::from_fn(&g, |t| (0.3 * t.cos()).exp()),
            None,
        )
        .unwrap();
        let traj = evolve(state, 0.0, &StepControl::default(), 0.05, &[], &mut []).unwrap();
        assert!(traj.states.iter().all(|s| s.metric.u == u0));
        assert_eq!(traj.t_range().1, 0.05);
    }

    #[test]
    fn schedule_is_hit_exactly() {
        let state = homogeneous(16, 0.0, 1.5, Some(1.2));
        let mut count = 0usize;
        let mut obs = |_: &FlowState| -> Result<()> {
            count += 1;
            Ok(())
        };
        let traj = evolve(state, 1.0, &StepControl::default(), 0.1, &[0.0123, 0.05], &mut [&mut obs]).unwrap();
        let times = traj.times();
        assert!(times.contains(&0.0123) && times.contains(&0.05) && times.contains(&0.1));
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(count, traj.states.len() - 1);
    }

    #[test]
    fn blow_up_guard_trips_near_extinction() {
        let state = homogeneous(16, 0.0, 1.0, None);
        let ctl = StepControl { r_ceiling: 20.0, ..Default::default() };
        let err = evolve(state, 1.0, &ctl, 0.49, &[], &mut []).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn evolve_rejects_bad_horizon() {
        let state = homogeneous(16, 0.0, 1.0, None);
        assert!(evolve(state, 1.0, &StepControl::default(), 0.0, &[], &mut []).is_err());
    }

    #[test]
    fn reference_solutions() {
        let r = Reference::RoundCurvature { r0: 2.0, epsilon: 1.0 };
        assert_relative_eq!(r.eval(0.2).unwrap(), 10.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(r.eval(0.5), Err(Error::Domain(_))));

        let h = Reference::ConstRatio { alpha: 0.7 };
        assert_relative_eq!(h.eval(0.5).unwrap(), 0.805_465_998_399_872_5, max_relative = 1e-14);

        let l = Reference::ConstLogS { l0: 1.0, epsilon: 0.0, r0: 2.0 };
        assert_eq!(l.eval(0.0).unwrap(), 1.0);
        assert_relative_eq!(l.eval(0.5).unwrap(), 0.606_530_659_712_633_4, max_relative = 1e-14);
        let l = Reference::ConstLogS { l0: 1.0, epsilon: 1.0, r0: 2.0 };
        // mpmath quadrature of the variation-of-constants formula
        assert_relative_eq!(l.eval(0.2).unwrap(), 1.285_651_041_001_486_2, max_relative = 1e-12);
    }

    #[test]
    fn three_point_derivative_is_exact_for_quadratics() {
        let f = |t: f64| 3.0 * t * t - t + 2.0;
        let t = [0.1, 0.13, 0.2];
        let d = three_point_derivative(t, [f(t[0]), f(t[1]), f(t[2])]);
        assert_relative_eq!(d, 6.0 * 0.13 - 1.0, max_relative = 1e-12);
    }
}
