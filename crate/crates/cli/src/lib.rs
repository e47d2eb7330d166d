//! Argument parsing and subcommand dispatch for the `ricci-harnack` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use ricci_harnack::harnack::MarginKind;
use ricci_harnack::output::{write_outputs, Report};
use ricci_harnack::scenario::{
    excursion, parse_and_validate, run_scenario, violations, QuerySpec, RunOutput, ScenarioConfig,
    DEFAULT_TOL, TOLERANCED,
};
use ricci_harnack::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub summary: String,
}

impl CommandOutcome {
    fn error(msg: impl std::fmt::Display) -> Self {
        CommandOutcome { exit_code: EXIT_ERROR, summary: format!("error: {msg}") }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ricci-harnack", about = "Evolve ε-Ricci flow scenarios and monitor Harnack margins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a scenario, evaluate every margin and write outputs.
    Run {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Override the output prefix from the config.
        #[arg(long)]
        output: Option<String>,
    },
    /// Run at the configured resolution and at twice the resolution, and check
    /// that any negative excursion decays.
    Verify {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 2.0)]
        min_decay: f64,
        #[arg(long)]
        output: Option<String>,
    },
    /// Evaluate the integrated inequality between two space-time points.
    Gamma {
        config: PathBuf,
        /// Start point as θ,t.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        from: (f64, f64),
        /// End point as θ,t.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        to: (f64, f64),
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Run the scenario once per ε value.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        output: Option<String>,
    },
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected θ,t but got '{s}'"))?;
    let theta = a.trim().parse::<f64>().map_err(|e| format!("bad θ '{a}': {e}"))?;
    let t = b.trim().parse::<f64>().map_err(|e| format!("bad t '{b}': {e}"))?;
    Ok((theta, t))
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_and_validate(&text).map_err(|e| e.to_string())
}

/// Run the parsed command line and report how it went.
pub fn dispatch<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_ERROR,
            };
            return CommandOutcome { exit_code: code, summary: e.render().to_string() };
        }
    };
    match cli.command {
        Command::Run { config, tol, output } => cmd_run(&config, tol, output),
        Command::Verify { config, tol, min_decay, output } => cmd_verify(&config, tol, min_decay, output),
        Command::Gamma { config, from, to, window, layers } => cmd_gamma(&config, from, to, window, layers),
        Command::Sweep { config, epsilons, tol, output } => cmd_sweep(&config, &epsilons, tol, output),
    }
}

fn describe(cfg: &ScenarioConfig, run: &RunOutput, found: &[String]) -> String {
    let mut s = String::new();
    let minima = run.margins.global_minima();
    let _ = writeln!(
        s,
        "epsilon = {}, c0 = {}, n_theta = {}, steps = {}",
        cfg.epsilon,
        cfg.c0,
        cfg.n_theta,
        run.trajectory.states.len() - 1
    );
    for kind in MarginKind::ALL {
        if let Some(v) = minima.get(kind) {
            let _ = writeln!(s, "  min {:<9} {v:.6e}", kind.column());
        }
    }
    for p in &run.paths {
        let _ = writeln!(
            s,
            "  path ({:.4}, {:.4}) -> ({:.4}, {:.4}): gamma = {:.6}, margin = {:.6e}",
            p.query.theta1, p.query.t1, p.query.theta2, p.query.t2, p.gamma_value, p.margin
        );
    }
    for v in found {
        let _ = writeln!(s, "  VIOLATION: {v}");
    }
    s
}

fn run_and_write(cfg: &ScenarioConfig, tol: f64, prefix: &str) -> Result<(RunOutput, Vec<String>), Error> {
    let run = run_scenario(cfg)?;
    let found = violations(cfg, &run, tol);
    write_outputs(prefix, cfg, &run, found.clone())?;
    Ok((run, found))
}

fn cmd_run(config: &PathBuf, tol: f64, output: Option<String>) -> CommandOutcome {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::error(e),
    };
    let prefix = output.unwrap_or_else(|| cfg.output.clone());
    match run_and_write(&cfg, tol, &prefix) {
        Ok((run, found)) => CommandOutcome {
            exit_code: if found.is_empty() { EXIT_PASS } else { EXIT_VIOLATION },
            summary: describe(&cfg, &run, &found),
        },
        Err(e) => {
            let mut report = Report::validated(&cfg);
            report.status = "error".into();
            report.violations.push(e.to_string());
            let _ = report.write(&ricci_harnack::output::report_path(&prefix));
            CommandOutcome::error(e)
        }
    }
}

fn cmd_verify(config: &PathBuf, tol: f64, min_decay: f64, output: Option<String>) -> CommandOutcome {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::error(e),
    };
    let prefix = output.unwrap_or_else(|| cfg.output.clone());
    let fine_cfg = cfg.refined();
    let (base, fine) = match (
        run_and_write(&cfg, tol, &prefix),
        run_and_write(&fine_cfg, tol, &format!("{prefix}_refined")),
    ) {
        (Ok(b), Ok(f)) => (b, f),
        (Err(e), _) | (_, Err(e)) => return CommandOutcome::error(e),
    };
    let mut summary = describe(&cfg, &base.0, &base.1);
    summary.push_str(&describe(&fine_cfg, &fine.0, &fine.1));
    let mut ok = base.1.is_empty() && fine.1.is_empty();
    for kind in TOLERANCED {
        let coarse = excursion(&base.0.margins, kind);
        let refined = excursion(&fine.0.margins, kind);
        if coarse > 0.0 {
            let decay = if refined > 0.0 { coarse / refined } else { f64::INFINITY };
            let _ = writeln!(summary, "  {} excursion decay: {decay:.3}", kind.column());
            if decay < min_decay {
                ok = false;
                let _ = writeln!(summary, "  VIOLATION: decay {decay:.3} < {min_decay}");
            }
        }
    }
    CommandOutcome { exit_code: if ok { EXIT_PASS } else { EXIT_VIOLATION }, summary }
}

fn cmd_gamma(
    config: &PathBuf,
    from: (f64, f64),
    to: (f64, f64),
    window: Option<usize>,
    layers: Option<usize>,
) -> CommandOutcome {
    if !(from.1 < to.1) {
        return CommandOutcome::error(format!("requires t1 < t2 (got t1 = {}, t2 = {})", from.1, to.1));
    }
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::error(e),
    };
    cfg.path_queries = vec![QuerySpec { from: [from.0, from.1], to: [to.0, to.1] }];
    cfg.random_queries = 0;
    cfg.dp_window = window.unwrap_or(cfg.dp_window);
    cfg.dp_layers = layers.unwrap_or(cfg.dp_layers);
    let run = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => return CommandOutcome::error(e),
    };
    let Some(result) = run.paths.first() else {
        return CommandOutcome::error("path queries need the nonlinear reaction term");
    };
    let summary = serde_json::to_string_pretty(result).expect("path result serialises");
    CommandOutcome {
        exit_code: if result.margin > 0.0 { EXIT_PASS } else { EXIT_VIOLATION },
        summary,
    }
}

fn cmd_sweep(config: &PathBuf, epsilons: &[f64], tol: f64, output: Option<String>) -> CommandOutcome {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::error(e),
    };
    let prefix = output.unwrap_or_else(|| cfg.output.clone());
    let outcomes: Vec<CommandOutcome> = epsilons
        .par_iter()
        .map(|&eps| {
            let run_cfg = ScenarioConfig { epsilon: eps, ..cfg.clone() };
            let out = format!("{prefix}_eps{eps}");
            match run_cfg.validate().and_then(|_| run_and_write(&run_cfg, tol, &out)) {
                Ok((run, found)) => CommandOutcome {
                    exit_code: if found.is_empty() { EXIT_PASS } else { EXIT_VIOLATION },
                    summary: describe(&run_cfg, &run, &found),
                },
                Err(e) => CommandOutcome::error(format!("epsilon = {eps}: {e}")),
            }
        })
        .collect();
    CommandOutcome {
        exit_code: outcomes.iter().map(|o| o.exit_code).max().unwrap_or(EXIT_PASS),
        summary: outcomes.into_iter().map(|o| o.summary).collect::<Vec<_>>().join("\n"),
    }
}
