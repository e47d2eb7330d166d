use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration syntax error: {0}")]
    Syntax(#[from] serde_json::Error),

    /// Initial curvature does not satisfy the lower bound required by the
    /// constrained Harnack estimate.
    #[error(
        "curvature condition R(g(0)) > -2 ln c0/(1 - c0^2) - 1 violated: \
         min R(u0) = {min_r:.6}, threshold = {threshold:.6} (c0 = {c0})"
    )]
    CurvatureCondition { min_r: f64, threshold: f64, c0: f64 },

    #[error("positive curvature hypothesis R > 0 violated: min R(u0) = {min_r:.6}")]
    PositiveCurvature { min_r: f64 },

    #[error(
        "order condition 0 < c0 S < T < S violated: h0 ranges over [{h_min:.6}, {h_max:.6}], \
         required inside ({lower:.6}, {upper:.6})"
    )]
    OrderCondition { h_min: f64, h_max: f64, lower: f64, upper: f64 },

    #[error("positivity violation at t = {time}: {field} = {value} at node {node}")]
    Positivity { time: f64, field: &'static str, node: usize, value: f64 },

    #[error("order violation at t = {time}: h = {value} >= 1 at node {node}")]
    Order { time: f64, node: usize, value: f64 },

    #[error("blow-up at t = {time}: max R = {max_r} exceeds ceiling {ceiling}")]
    BlowUp { time: f64, max_r: f64, ceiling: f64 },

    #[error("non-finite {field} at t = {time}")]
    NonFinite { time: f64, field: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid path query: {0}")]
    Query(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
