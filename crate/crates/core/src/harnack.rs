//! Harnack quantities and inequality margins.
//!
//! Every margin is written so that the inequality it monitors reads
//! `margin > 0` (or `≥ 0` for the pointwise tensor bound).

use serde::{Deserialize, Serialize};

use crate::dynamics::{three_point_derivative, FlowState, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{
    d_theta, grad_sq_g, hessian_g, laplace_g, scalar_curvature, tensor_contract, MetricState,
    ScalarField, SymTensorField,
};

/// `h ↦ 2 ln h / (1 - h²)`, increasing on `(0, 1)`.
pub fn log_ratio_map(h: f64) -> f64 {
    2.0 * h.ln() / (1.0 - h * h)
}

/// Lower bound on the initial curvature: `-2 ln c₀ / (1 - c₀²) - 1`.
pub fn curvature_threshold(c0: f64) -> f64 {
    -log_ratio_map(c0) - 1.0
}

/// `Q = Δ_g ln S + ε R`.
pub fn q_quantity(state: &FlowState, epsilon: f64) -> Result<ScalarField> {
    let log_s = state.log_dominant()?;
    let r = state.curvature();
    Ok(laplace_g(&log_s, &state.metric).zip_map(&r, |l, r| l + epsilon * r))
}

fn ratio_checked(state: &FlowState) -> Result<ScalarField> {
    let h = state
        .ratio()
        .ok_or_else(|| Error::Domain("the constrained term needs a second solution T".into()))?;
    if let Some(node) = h.values().iter().position(|&v| !(v < 1.0)) {
        return Err(Error::Order { time: state.time, node, value: h.values()[node] });
    }
    Ok(h)
}

/// `|∇h|²_g / (1 - h²)` with `h = T/S`.
pub fn constrained_term(state: &FlowState) -> Result<ScalarField> {
    let h = ratio_checked(state)?;
    let grad = grad_sq_g(&h, &state.metric);
    Ok(grad.zip_map(&h, |g, h| g / (1.0 - h * h)))
}

/// Margins of every monitored inequality at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackSample {
    pub t: f64,
    /// `min(P + 1/t)`, `P = Δ ln S + εR - |∇h|²/(1-h²)`.
    pub m_thm11: Option<f64>,
    /// `min(Δ ln S + εR + 1/t)`.
    pub m_thmd: f64,
    /// `min(ε(Δ ln R + R) + 1/t)`, only when `R > 0`.
    pub m_chow: Option<f64>,
    pub m_h_low: Option<f64>,
    pub m_h_high: Option<f64>,
    /// `min R + 1 + 2 ln c₀/(1 - c₀²)`.
    pub m_cond: f64,
    /// `min(|M|² - P²/2)`.
    pub m_elem: f64,
    pub min_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarginKind {
    Thm11,
    ThmD,
    Chow,
    HLow,
    HHigh,
    Cond,
    Elem,
    MinR,
}

impl MarginKind {
    pub const ALL: [MarginKind; 8] = [
        MarginKind::Thm11,
        MarginKind::ThmD,
        MarginKind::Chow,
        MarginKind::HLow,
        MarginKind::HHigh,
        MarginKind::Cond,
        MarginKind::Elem,
        MarginKind::MinR,
    ];

    pub fn column(self) -> &'static str {
        match self {
            MarginKind::Thm11 => "m_thm11",
            MarginKind::ThmD => "m_thmD",
            MarginKind::Chow => "m_chow",
            MarginKind::HLow => "m_h_low",
            MarginKind::HHigh => "m_h_high",
            MarginKind::Cond => "m_cond",
            MarginKind::Elem => "m_elem",
            MarginKind::MinR => "min_R",
        }
    }
}

impl HarnackSample {
    pub fn get(&self, kind: MarginKind) -> Option<f64> {
        match kind {
            MarginKind::Thm11 => self.m_thm11,
            MarginKind::ThmD => Some(self.m_thmd),
            MarginKind::Chow => self.m_chow,
            MarginKind::HLow => self.m_h_low,
            MarginKind::HHigh => self.m_h_high,
            MarginKind::Cond => Some(self.m_cond),
            MarginKind::Elem => Some(self.m_elem),
            MarginKind::MinR => Some(self.min_r),
        }
    }
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// The tensor `Hess ln S + (ε/2) R g - ∇h⊗∇h/(1-h²)` whose trace is `P`.
pub fn harnack_tensor(
    log_s: &ScalarField,
    r: &ScalarField,
    h: Option<&ScalarField>,
    m: &MetricState,
    epsilon: f64,
) -> SymTensorField {
    let hess = hessian_g(log_s, m);
    let g_part = SymTensorField::metric_multiple(&r.map(|r| 0.5 * epsilon * r), m);
    let mut a_tt = hess.a_tt.zip_map(&g_part.a_tt, |a, b| a + b);
    let a_pp = hess.a_pp.zip_map(&g_part.a_pp, |a, b| a + b);
    if let Some(h) = h {
        let ht = d_theta(h);
        let corr = ht.zip_map(h, |d, h| d * d / (1.0 - h * h));
        a_tt = a_tt.zip_map(&corr, |a, c| a - c);
    }
    SymTensorField { a_tt, a_pp }
}

/// Evaluate every margin at a state with `t > 0`.
pub fn margins(state: &FlowState, epsilon: f64, c0: f64) -> Result<HarnackSample> {
    let t = state.time;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("margins need t > 0 (got t = {t})")));
    }
    let m = &state.metric;
    let inv_t = 1.0 / t;
    let log_s = state.log_dominant()?;
    let r = scalar_curvature(m);
    let min_r = r.min();
    let q = laplace_g(&log_s, m).zip_map(&r, |l, r| l + epsilon * r);
    let m_thmd = min_of(q.values().iter().map(|q| q + inv_t));

    let m_chow = (min_r > 0.0).then(|| {
        let lap = laplace_g(&r.map(f64::ln), m);
        min_of(lap.values().iter().zip(r.values()).map(|(l, r)| epsilon * (l + r) + inv_t))
    });
    let m_cond = min_r + 1.0 + log_ratio_map(c0);

    let h = state.ratio();
    let (m_h_low, m_h_high) = match &h {
        Some(h) => (Some(h.min() - c0), Some(1.0 - h.max())),
        None => (None, None),
    };
    let usable_h = h.as_ref().filter(|h| h.max() < 1.0);

    let p = match usable_h {
        Some(h) => {
            let c = grad_sq_g(h, m).zip_map(h, |g, h| g / (1.0 - h * h));
            q.zip_map(&c, |q, c| q - c)
        }
        None => q.clone(),
    };
    let m_thm11 = usable_h.map(|_| min_of(p.values().iter().map(|p| p + inv_t)));

    let tensor = harnack_tensor(&log_s, &r, usable_h, m, epsilon);
    let (_, norm_sq) = tensor_contract(&tensor, m);
    let m_elem = min_of(norm_sq.values().iter().zip(p.values()).map(|(n, p)| n - 0.5 * p * p));

    Ok(HarnackSample { t, m_thm11, m_thmd, m_chow, m_h_low, m_h_high, m_cond, m_elem, min_r })
}

/// Per-margin minima over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Minima {
    pub m_thm11: Option<f64>,
    #[serde(rename = "m_thmD")]
    pub m_thmd: Option<f64>,
    pub m_chow: Option<f64>,
    pub m_h_low: Option<f64>,
    pub m_h_high: Option<f64>,
    pub m_cond: Option<f64>,
    pub m_elem: Option<f64>,
    #[serde(rename = "min_R")]
    pub min_r: Option<f64>,
}

impl Minima {
    fn slot(&mut self, kind: MarginKind) -> &mut Option<f64> {
        match kind {
            MarginKind::Thm11 => &mut self.m_thm11,
            MarginKind::ThmD => &mut self.m_thmd,
            MarginKind::Chow => &mut self.m_chow,
            MarginKind::HLow => &mut self.m_h_low,
            MarginKind::HHigh => &mut self.m_h_high,
            MarginKind::Cond => &mut self.m_cond,
            MarginKind::Elem => &mut self.m_elem,
            MarginKind::MinR => &mut self.min_r,
        }
    }

    pub fn get(&self, kind: MarginKind) -> Option<f64> {
        let mut copy = *self;
        *copy.slot(kind)
    }

    fn absorb(&mut self, sample: &HarnackSample) {
        for kind in MarginKind::ALL {
            if let Some(v) = sample.get(kind) {
                let slot = self.slot(kind);
                *slot = Some(slot.map_or(v, |old| old.min(v)));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSeries {
    pub epsilon: f64,
    pub c0: f64,
    samples: Vec<HarnackSample>,
    global_minima: Minima,
}

impl MarginSeries {
    pub fn new(epsilon: f64, c0: f64) -> Self {
        MarginSeries { epsilon, c0, samples: Vec::new(), global_minima: Minima::default() }
    }

    pub fn push(&mut self, sample: HarnackSample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(sample.t > last.t) {
                return Err(Error::Domain(format!(
                    "margin samples must increase in time ({} after {})",
                    sample.t, last.t
                )));
            }
        }
        self.global_minima.absorb(&sample);
        self.samples.push(sample);
        Ok(())
    }

    /// Evaluate and record the margins of `state`.
    pub fn observe(&mut self, state: &FlowState) -> Result<()> {
        let sample = margins(state, self.epsilon, self.c0)?;
        self.push(sample)
    }

    pub fn samples(&self) -> &[HarnackSample] {
        &self.samples
    }

    pub fn global_minima(&self) -> &Minima {
        &self.global_minima
    }

    /// Margins of every stored state after `t = 0`.
    pub fn from_trajectory(traj: &Trajectory, c0: f64) -> Result<Self> {
        let mut series = MarginSeries::new(traj.epsilon, c0);
        for state in traj.states.iter().filter(|s| s.time > 0.0) {
            series.observe(state)?;
        }
        Ok(series)
    }
}

fn rescaled_metric(m: &MetricState, epsilon: f64) -> MetricState {
    // ḡ = g/ε  ⇔  ū = u - ½ ln ε
    let shift = 0.5 * epsilon.ln();
    MetricState::new(m.u.map(|u| u - shift))
}

/// Largest pointwise discrepancy between the Harnack quantities written for
/// `g` and for the rescaled metric `ḡ = g/ε` with diffusion coefficient
/// `α = 1/ε`.
pub fn rescale_identity_check(state: &FlowState, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("rescaling needs epsilon > 0 (got {epsilon})")));
    }
    let alpha = 1.0 / epsilon;
    let m = &state.metric;
    let bar = rescaled_metric(m, epsilon);
    let log_s = state.log_dominant()?;

    let q = q_quantity(state, epsilon)?;
    let r_bar = scalar_curvature(&bar);
    let q_bar = laplace_g(&log_s, &bar).zip_map(&r_bar, |l, r| alpha * l + r);
    let mut worst = q.max_abs_diff(&q_bar);

    if let Some(h) = state.ratio().filter(|h| h.max() < 1.0) {
        let plain = grad_sq_g(&h, m).zip_map(&h, |g, h| g / (1.0 - h * h));
        let scaled = grad_sq_g(&h, &bar).zip_map(&h, |g, h| alpha * g / (1.0 - h * h));
        worst = worst.max(plain.max_abs_diff(&scaled));
    }
    Ok(worst)
}

/// `min(P̄ + 1/t)` computed entirely from the rescaled description.
pub fn rescaled_thm11_margin(state: &FlowState, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("rescaling needs epsilon > 0 (got {epsilon})")));
    }
    if !(state.time > 0.0) {
        return Err(Error::Domain("margins need t > 0".into()));
    }
    let alpha = 1.0 / epsilon;
    let bar = rescaled_metric(&state.metric, epsilon);
    let log_s = state.log_dominant()?;
    let h = ratio_checked(state)?;
    let r_bar = scalar_curvature(&bar);
    let lap = laplace_g(&log_s, &bar);
    let grad = grad_sq_g(&h, &bar);
    let inv_t = 1.0 / state.time;
    Ok(min_of((0..h.values().len()).map(|j| {
        let hv = h.values()[j];
        alpha * lap.values()[j] + r_bar.values()[j] - alpha * grad.values()[j] / (1.0 - hv * hv)
            + inv_t
    })))
}

/// `max |Q - (∂_t ln S - |∇ln S|² + ln S)|` at each interior stored time,
/// with the `ln S` term dropped in linear mode.
pub fn q_consistency(traj: &Trajectory) -> Result<Vec<f64>> {
    let logs: Vec<ScalarField> =
        traj.states.iter().map(FlowState::log_dominant).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 1..traj.states.len().saturating_sub(1) {
        let state = &traj.states[k];
        let t = [traj.states[k - 1].time, state.time, traj.states[k + 1].time];
        let q = q_quantity(state, traj.epsilon)?;
        let grad = grad_sq_g(&logs[k], &state.metric);
        let worst = (0..q.values().len())
            .map(|j| {
                let l = [logs[k - 1].values()[j], logs[k].values()[j], logs[k + 1].values()[j]];
                let reaction = if traj.nonlinear_term { l[1] } else { 0.0 };
                let q_time = three_point_derivative(t, l) - grad.values()[j] + reaction;
                (q.values()[j] - q_time).abs()
            })
            .fold(0.0, f64::max);
        out.push(worst);
    }
    Ok(out)
}
