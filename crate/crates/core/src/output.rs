//! CSV and JSON writers for run results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::FlowState;
use crate::error::{Error, Result};
use crate::geometry::{grad_sq_g, laplace_g, scalar_curvature};
use crate::harnack::{HarnackSample, MarginKind, MarginSeries, Minima};
use crate::scenario::{RunOutput, ScenarioConfig};

pub const MARGIN_HEADER: [&str; 9] =
    ["t", "m_thm11", "m_thmD", "m_chow", "m_h_low", "m_h_high", "m_cond", "m_elem", "min_R"];

pub const SNAPSHOT_HEADER: [&str; 8] = ["theta", "u", "S", "T", "R", "h", "Q", "P"];

const NOT_APPLICABLE: &str = "NA";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| NOT_APPLICABLE.to_string(), |v| v.to_string())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

fn sample_row(s: &HarnackSample) -> Vec<String> {
    std::iter::once(s.t.to_string())
        .chain(MarginKind::ALL.iter().map(|&k| num(s.get(k))))
        .collect()
}

pub fn write_margins_csv(path: &Path, series: &MarginSeries) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MARGIN_HEADER)?;
    for s in series.samples() {
        w.write_record(sample_row(s))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Per-node fields of one state.
pub fn write_snapshot_csv(path: &Path, state: &FlowState, epsilon: f64) -> Result<()> {
    ensure_parent(path)?;
    let m = &state.metric;
    let r = scalar_curvature(m);
    let log_s = state.log_dominant()?;
    let q = laplace_g(&log_s, m).zip_map(&r, |l, r| l + epsilon * r);
    let h = state.ratio();
    let p = h.as_ref().filter(|h| h.max() < 1.0).map(|h| {
        let c = grad_sq_g(h, m).zip_map(h, |g, h| g / (1.0 - h * h));
        q.zip_map(&c, |q, c| q - c)
    });
    let grid = m.grid();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SNAPSHOT_HEADER)?;
    for j in 0..grid.n_theta() {
        let at = |f: &Option<crate::geometry::ScalarField>| num(f.as_ref().map(|f| f.values()[j]));
        w.write_record([
            grid.nodes()[j].to_string(),
            m.u.values()[j].to_string(),
            state.dominant.values()[j].to_string(),
            at(&state.companion),
            r.values()[j].to_string(),
            at(&h),
            q.values()[j].to_string(),
            at(&p),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub theta1: f64,
    pub t1: f64,
    pub theta2: f64,
    pub t2: f64,
    pub gamma: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub status: String,
    pub config: ScenarioConfig,
    pub steps: usize,
    pub t_final: Option<f64>,
    pub global_minima: Minima,
    pub path_queries: Vec<PathSummary>,
    pub pathwise_min: Option<f64>,
    pub h_consistency_max: Option<f64>,
    pub violations: Vec<String>,
}

impl Report {
    /// Report for a configuration that was validated but not evolved.
    pub fn validated(config: &ScenarioConfig) -> Report {
        Report {
            status: "validated".into(),
            config: config.clone(),
            steps: 0,
            t_final: None,
            global_minima: Minima::default(),
            path_queries: Vec::new(),
            pathwise_min: None,
            h_consistency_max: None,
            violations: Vec::new(),
        }
    }

    pub fn from_run(config: &ScenarioConfig, run: &RunOutput, violations: Vec<String>) -> Report {
        let path_queries = run
            .paths
            .iter()
            .map(|p| PathSummary {
                theta1: p.query.theta1,
                t1: p.query.t1,
                theta2: p.query.theta2,
                t2: p.query.t2,
                gamma: p.gamma_value,
                lhs: p.lhs,
                rhs: p.rhs,
                margin: p.margin,
            })
            .collect();
        Report {
            status: if violations.is_empty() { "passed" } else { "violated" }.into(),
            config: config.clone(),
            steps: run.trajectory.states.len() - 1,
            t_final: run.trajectory.states.last().map(|s| s.time),
            global_minima: *run.margins.global_minima(),
            path_queries,
            pathwise_min: run.pathwise_min,
            h_consistency_max: run.h_consistency_max,
            violations,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let mut f = fs::File::create(path).map_err(io_err(path))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f).map_err(io_err(path))?;
        Ok(())
    }
}

pub fn margins_path(prefix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_margins.csv"))
}

pub fn report_path(prefix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_report.json"))
}

pub fn snapshot_path(prefix: &str, t: f64) -> PathBuf {
    PathBuf::from(format!("{prefix}_snapshot_t{t}.csv"))
}

/// Write the margins CSV, the JSON report and any snapshots under `prefix`.
pub fn write_outputs(
    prefix: &str,
    config: &ScenarioConfig,
    run: &RunOutput,
    violations: Vec<String>,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let margins = margins_path(prefix);
    write_margins_csv(&margins, &run.margins)?;
    written.push(margins);
    for &t in &config.snapshot_times {
        let k = run.trajectory.nearest_index(t);
        let path = snapshot_path(prefix, t);
        write_snapshot_csv(&path, &run.trajectory.states[k], run.trajectory.epsilon)?;
        written.push(path);
    }
    let report = report_path(prefix);
    Report::from_run(config, run, violations).write(&report)?;
    written.push(report);
    Ok(written)
}
