//! Axisymmetric ε-Ricci flow on the 2-sphere coupled to the reaction-diffusion
//! equation `∂f/∂t = Δf - f ln f + εRf`, with monitors for the constrained
//! differential Harnack estimate, its integrated form and the auxiliary
//! inequalities used along the way.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harnack;
pub mod output;
pub mod pathopt;
pub mod quadrature;
pub mod scenario;

pub use error::{Error, Result};
