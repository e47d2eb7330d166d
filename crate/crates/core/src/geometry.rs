//! Axisymmetric conformal geometry on the unit 2-sphere.
//!
//! Every field depends on the colatitude `θ` only and lives on a
//! cell-centered mesh of `[0, π]`, so no node sits on a pole. Ghost values
//! across each pole come from even reflection, which is how a smooth
//! axisymmetric function extends through the axis.
//!
//! Metrics are conformal to the round one, `g = e^{2u} g₀`, and all tensor
//! components are stored in round coordinates `(θ, φ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

/// Cell-centered colatitude mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_theta: usize,
    d_theta: f64,
    nodes: Vec<f64>,
    sin: Vec<f64>,
    cos: Vec<f64>,
    cot: Vec<f64>,
}

impl Grid {
    pub fn new(n_theta: usize) -> Result<Arc<Grid>> {
        if n_theta < MIN_CELLS {
            return Err(Error::Config(format!(
                "n_theta = {n_theta} is below the minimum of {MIN_CELLS} cells"
            )));
        }
        let d_theta = PI / n_theta as f64;
        let nodes: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * d_theta).collect();
        let sin = nodes.iter().map(|t| t.sin()).collect();
        let cos = nodes.iter().map(|t| t.cos()).collect();
        let cot = nodes.iter().map(|t| t.cos() / t.sin()).collect();
        Ok(Arc::new(Grid { n_theta, d_theta, nodes, sin, cos, cot }))
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    /// Index of the node closest to `theta`.
    pub fn nearest_node(&self, theta: f64) -> usize {
        let j = (theta / self.d_theta - 0.5).round();
        j.clamp(0.0, (self.n_theta - 1) as f64) as usize
    }

    /// Linear interpolation of node values at an arbitrary colatitude,
    /// using the even extension past the outermost nodes.
    pub fn interpolate(&self, values: &[f64], theta: f64) -> f64 {
        let x = (theta / self.d_theta - 0.5).clamp(0.0, (self.n_theta - 1) as f64);
        let j = (x.floor() as usize).min(self.n_theta - 2);
        let w = x - j as f64;
        values[j] * (1.0 - w) + values[j + 1] * w
    }
}

/// Values of an axisymmetric function at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_theta {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} cells",
                values.len(),
                grid.n_theta
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite field value at node {j}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_theta);
        ScalarField { grid, values }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        ScalarField { grid: grid.clone(), values: vec![value; grid.n_theta] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&t| f(t)).collect();
        ScalarField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField::from_vec(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ScalarField::from_vec(self.grid.clone(), values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A metric `g = e^{2u} g₀` in the round conformal class.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricState {
    pub u: ScalarField,
}

impl MetricState {
    pub fn new(u: ScalarField) -> Self {
        MetricState { u }
    }

    pub fn round(grid: &Arc<Grid>) -> Self {
        MetricState { u: ScalarField::constant(grid, 0.0) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    /// `e^{-2u}` at every node.
    pub fn inverse_factor(&self) -> ScalarField {
        self.u.map(|u| (-2.0 * u).exp())
    }
}

/// Symmetric 2-tensor with vanishing cross components, in round coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub a_tt: ScalarField,
    pub a_pp: ScalarField,
}

impl SymTensorField {
    pub fn new(a_tt: ScalarField, a_pp: ScalarField) -> Result<Self> {
        if a_tt.grid() != a_pp.grid() {
            return Err(Error::Config("tensor components live on different grids".into()));
        }
        Ok(SymTensorField { a_tt, a_pp })
    }

    /// `λ g` for the metric `m`.
    pub fn metric_multiple(lambda: &ScalarField, m: &MetricState) -> Self {
        let grid = m.grid();
        let a_tt = lambda.zip_map(&m.u, |l, u| l * (2.0 * u).exp());
        let a_pp = ScalarField::from_vec(
            grid.clone(),
            a_tt.values.iter().zip(&grid.sin).map(|(a, s)| a * s * s).collect(),
        );
        SymTensorField { a_tt, a_pp }
    }
}

/// Neighbour values of node `j` with even reflection across the poles.
#[inline]
fn neighbours(v: &[f64], j: usize) -> (f64, f64) {
    let n = v.len();
    let left = if j == 0 { v[0] } else { v[j - 1] };
    let right = if j + 1 == n { v[n - 1] } else { v[j + 1] };
    (left, right)
}

/// Central first difference `f_θ`.
pub fn d_theta(f: &ScalarField) -> ScalarField {
    let h = f.grid.d_theta;
    let v = &f.values;
    let out = (0..v.len())
        .map(|j| {
            let (l, r) = neighbours(v, j);
            (r - l) / (2.0 * h)
        })
        .collect();
    ScalarField::from_vec(f.grid.clone(), out)
}

/// Central second difference `f_θθ`.
pub fn d2_theta(f: &ScalarField) -> ScalarField {
    let h2 = f.grid.d_theta * f.grid.d_theta;
    let v = &f.values;
    let out = (0..v.len())
        .map(|j| {
            let (l, r) = neighbours(v, j);
            (r - 2.0 * v[j] + l) / h2
        })
        .collect();
    ScalarField::from_vec(f.grid.clone(), out)
}

/// Round-sphere Laplacian `Δ₀f = f_θθ + cot θ f_θ`.
pub fn laplace_round(f: &ScalarField) -> ScalarField {
    let grid = &f.grid;
    let h = grid.d_theta;
    let v = &f.values;
    let out = (0..v.len())
        .map(|j| {
            let (l, r) = neighbours(v, j);
            (r - 2.0 * v[j] + l) / (h * h) + grid.cot[j] * (r - l) / (2.0 * h)
        })
        .collect();
    ScalarField::from_vec(grid.clone(), out)
}

/// Scalar curvature `R = 2 e^{-2u}(1 - Δ₀u)` of `g = e^{2u} g₀`.
pub fn scalar_curvature(m: &MetricState) -> ScalarField {
    let lap = laplace_round(&m.u);
    m.u.zip_map(&lap, |u, l| 2.0 * (-2.0 * u).exp() * (1.0 - l))
}

/// `Δ_g f = e^{-2u} Δ₀ f`.
pub fn laplace_g(f: &ScalarField, m: &MetricState) -> ScalarField {
    laplace_round(f).zip_map(&m.u, |l, u| (-2.0 * u).exp() * l)
}

/// `|∇f|²_g = e^{-2u} f_θ²`.
pub fn grad_sq_g(f: &ScalarField, m: &MetricState) -> ScalarField {
    d_theta(f).zip_map(&m.u, |d, u| (-2.0 * u).exp() * d * d)
}

/// `⟨∇f, ∇k⟩_g = e^{-2u} f_θ k_θ`.
pub fn grad_dot_g(f: &ScalarField, k: &ScalarField, m: &MetricState) -> ScalarField {
    let df = d_theta(f);
    let dk = d_theta(k);
    let values = df
        .values
        .iter()
        .zip(&dk.values)
        .zip(&m.u.values)
        .map(|((a, b), u)| (-2.0 * u).exp() * a * b)
        .collect();
    ScalarField::from_vec(f.grid.clone(), values)
}

/// Hessian of `f` for `g = e^{2u} g₀`.
///
/// In two dimensions `Hess_g f = Hess₀ f − du⊗df − df⊗du + ⟨du, df⟩₀ g₀`,
/// which for axisymmetric data leaves
/// `(θθ) = f_θθ − u_θ f_θ` and `(φφ) = sin θ cos θ f_θ + u_θ f_θ sin²θ`.
pub fn hessian_g(f: &ScalarField, m: &MetricState) -> SymTensorField {
    let grid = f.grid.clone();
    let ft = d_theta(f);
    let ftt = d2_theta(f);
    let ut = d_theta(&m.u);
    let n = grid.n_theta;
    let mut a_tt = Vec::with_capacity(n);
    let mut a_pp = Vec::with_capacity(n);
    for j in 0..n {
        let (s, c) = (grid.sin[j], grid.cos[j]);
        a_tt.push(ftt.values[j] - ut.values[j] * ft.values[j]);
        a_pp.push(s * c * ft.values[j] + ut.values[j] * ft.values[j] * s * s);
    }
    SymTensorField {
        a_tt: ScalarField::from_vec(grid.clone(), a_tt),
        a_pp: ScalarField::from_vec(grid, a_pp),
    }
}

/// Trace and squared norm of `a` with respect to `m`.
pub fn tensor_contract(a: &SymTensorField, m: &MetricState) -> (ScalarField, ScalarField) {
    let grid = a.a_tt.grid.clone();
    let n = grid.n_theta;
    let mut trace = Vec::with_capacity(n);
    let mut norm_sq = Vec::with_capacity(n);
    for j in 0..n {
        let s2 = grid.sin[j] * grid.sin[j];
        let w = (-2.0 * m.u.values[j]).exp();
        let tt = a.a_tt.values[j];
        let pp = a.a_pp.values[j] / s2;
        trace.push(w * (tt + pp));
        norm_sq.push(w * w * (tt * tt + pp * pp));
    }
    (ScalarField::from_vec(grid.clone(), trace), ScalarField::from_vec(grid, norm_sq))
}

/// `Σ a_k x^k`, used for initial data in `cos θ`.
pub fn polynomial(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Field `θ ↦ Σ a_k cos^k θ`.
pub fn cos_polynomial(grid: &Arc<Grid>, coeffs: &[f64]) -> ScalarField {
    ScalarField::from_fn(grid, |t| polynomial(coeffs, t.cos()))
}

/// Area `∫ e^{2u} dA₀ = 2π ∫ e^{2u} sin θ dθ` by the midpoint rule on the grid.
pub fn area(m: &MetricState) -> f64 {
    let grid = m.grid();
    2.0 * PI
        * grid.d_theta
        * m.u.values.iter().zip(&grid.sin).map(|(u, s)| (2.0 * u).exp() * s).sum::<f64>()
}
