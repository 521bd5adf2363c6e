//! Command implementations behind the `ssp-dirk` binary.
//!
//! Each command returns a [`CommandOutcome`]; `main` only parses flags,
//! prints and exits. Machine-readable output (JSON or CSV) goes to
//! `CommandOutcome::output` and, when requested, to a file; the one-line
//! human summary is kept separate.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use ssp_dirk::integrator::{make_advection, make_burgers, run_tvd_experiment, SemiDiscreteProblem};
use ssp_dirk::search::{bound_sweep, sweep_csv, SearchConfig};
use ssp_dirk::ssp::Slacks;
use ssp_dirk::verify::{run_suite, SuiteOptions};
use ssp_dirk::{certify, make_optimal, ssp_radius, RungeKuttaMethod, SspError, TOL_ALG};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Slack allowed above `2s` before a search result counts as a violation.
pub const BOUND_TOL: f64 = 1e-8;
/// Allowed growth of total variation per step and per stage.
pub const TV_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutcome {
    /// 0 success, 1 failed check, 2 usage or input error.
    pub exit_code: i32,
    pub report_path: Option<PathBuf>,
    pub summary: String,
    /// Document for standard output; may be empty.
    pub output: String,
}

impl CommandOutcome {
    fn usage(summary: impl Into<String>) -> Self {
        Self {
            exit_code: EXIT_USAGE,
            report_path: None,
            summary: summary.into(),
            output: String::new(),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

/// Writes `text` to `path` if given; a write failure becomes a usage error.
fn write_report(path: Option<&Path>, text: &str) -> Result<Option<PathBuf>, CommandOutcome> {
    let Some(path) = path else {
        return Ok(None);
    };
    fs::write(path, text)
        .map(|_| Some(path.to_path_buf()))
        .map_err(|e| CommandOutcome::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn load_method(path: &Path) -> Result<RungeKuttaMethod, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    RungeKuttaMethod::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct CertificateReport {
    r: f64,
    invertible: bool,
    feasible: bool,
    min_slack: Option<f64>,
    slacks: Option<Slacks>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    label: String,
    s: usize,
    order2: bool,
    order2_residuals: [f64; 2],
    dirk: bool,
    /// `null` when the radius is unbounded.
    ssp_radius: Option<f64>,
    unbounded: bool,
    /// `null` when the radius is unbounded.
    certificate_at_radius: Option<CertificateReport>,
}

pub fn cmd_analyze(method_file: &Path, out: Option<&Path>) -> CommandOutcome {
    let method = match load_method(method_file) {
        Ok(m) => m,
        Err(e) => return CommandOutcome::usage(e),
    };
    let radius = ssp_radius(&method);
    let certificate_at_radius = radius.is_finite().then(|| {
        let c = certify(&method, radius);
        CertificateReport {
            r: c.r,
            invertible: c.invertible,
            feasible: c.feasible,
            min_slack: c.min_slack(),
            slacks: c.slacks,
        }
    });
    let (r1, r2) = method.order2_residuals();
    let report = AnalyzeReport {
        label: method.label().to_string(),
        s: method.stages(),
        order2: method.is_second_order(TOL_ALG),
        order2_residuals: [r1, r2],
        dirk: method.is_dirk(),
        ssp_radius: radius.is_finite().then_some(radius),
        unbounded: radius.is_infinite(),
        certificate_at_radius,
    };
    let output = to_json(&report);
    let report_path = match write_report(out, &output) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let radius_text = if radius.is_finite() {
        format!("{radius:.10}")
    } else {
        "unbounded".to_string()
    };
    CommandOutcome {
        exit_code: EXIT_OK,
        report_path,
        summary: format!(
            "{}: s={} order2={} dirk={} ssp_radius={radius_text}",
            report.label, report.s, report.order2, report.dirk
        ),
        output,
    }
}

/// Writes the method to `out`, or returns it as output when `out` is `None`.
pub fn cmd_make_optimal(s: usize, out: Option<&Path>) -> CommandOutcome {
    let member = match make_optimal(s) {
        Ok(m) => m,
        Err(e) => return CommandOutcome::usage(e.to_string()),
    };
    let json = member.method.to_json();
    let report_path = match write_report(out, &json) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let structure = member.verify_structure();
    CommandOutcome {
        exit_code: if structure { EXIT_OK } else { EXIT_CHECK_FAILED },
        summary: format!(
            "{}: claimed radius {} structure {}",
            member.method.label(),
            member.claimed_radius,
            if structure { "ok" } else { "FAILED" }
        ),
        output: if report_path.is_some() { String::new() } else { json },
        report_path,
    }
}

pub fn cmd_verify(seed: u64, inject_fault: bool, out: Option<&Path>) -> CommandOutcome {
    let report = run_suite(SuiteOptions { seed, inject_fault });
    let output = to_json(&report);
    let report_path = match write_report(out, &output) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let passed = report.checks.len() - failed.len();
    let mut summary = format!("verify (seed {seed}): {passed}/{} checks passed", report.checks.len());
    if !failed.is_empty() {
        summary.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    CommandOutcome {
        exit_code: if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED },
        report_path,
        summary,
        output,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchArgs {
    pub s_values: Vec<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

/// CSV goes to `out`, or to the output when `out` is `None`. Fails with
/// exit 1 if any restart certifies a radius above `2s + BOUND_TOL`.
pub fn cmd_search(args: &SearchArgs, out: Option<&Path>) -> CommandOutcome {
    let Some(&first) = args.s_values.first() else {
        return CommandOutcome::usage("search needs at least one --s value");
    };
    let cfg = SearchConfig {
        restarts: args.restarts,
        max_iters: args.max_iters,
        seed: args.seed,
        ..SearchConfig::new(first)
    };
    let entries = match bound_sweep(&args.s_values, &cfg) {
        Ok(e) => e,
        Err(e) => return CommandOutcome::usage(e.to_string()),
    };
    let csv = sweep_csv(&entries);
    let report_path = match write_report(out, &csv) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let mut violated = false;
    let parts: Vec<String> = entries
        .iter()
        .map(|e| {
            let bound = 2.0 * e.s as f64;
            let worst = e.runs.iter().map(|r| r.best_radius).fold(f64::NEG_INFINITY, f64::max);
            if worst > bound + BOUND_TOL {
                violated = true;
                format!("s={}: best {worst:.10} > {bound} VIOLATION", e.s)
            } else {
                format!(
                    "s={}: best {:.10} ≤ {bound} (distance {:.1e})",
                    e.s, e.best.best_radius, e.best.distance_to_optimal
                )
            }
        })
        .collect();
    CommandOutcome {
        exit_code: if violated { EXIT_CHECK_FAILED } else { EXIT_OK },
        summary: parts.join("; "),
        output: if report_path.is_some() { String::new() } else { csv },
        report_path,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Advection,
    Burgers,
}

impl ProblemKind {
    /// Unit-velocity problem on `m` cells of width `1/m`.
    pub fn build(self, m: usize) -> ssp_dirk::Result<SemiDiscreteProblem> {
        let dx = 1.0 / m as f64;
        match self {
            ProblemKind::Advection => make_advection(m, 1.0, dx),
            ProblemKind::Burgers => make_burgers(m, dx),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Advection => "advection",
            ProblemKind::Burgers => "burgers",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MethodSource {
    File(PathBuf),
    Optimal(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateArgs {
    pub method: MethodSource,
    pub problem: ProblemKind,
    pub m: usize,
    pub tau_ratio: f64,
    pub steps: usize,
}

#[derive(Serialize)]
struct IntegrateSummary<'a> {
    method: &'a str,
    problem: &'a str,
    m: usize,
    fe_step: f64,
    tau: f64,
    radius: f64,
    tau_ratio: f64,
    steps: usize,
    initial_tv: f64,
    final_tv: f64,
    stage_tv_max: f64,
    max_increase: f64,
    tvd: bool,
}

/// Steps with `τ = tau_ratio · R · τ₀`. The `step,tv` CSV goes to `out`; the
/// output is a JSON summary. Exit 1 when total variation grows by more than
/// [`TV_TOL`] in a step or a stage.
pub fn cmd_integrate(args: &IntegrateArgs, out: Option<&Path>) -> CommandOutcome {
    let method = match &args.method {
        MethodSource::File(path) => match load_method(path) {
            Ok(m) => m,
            Err(e) => return CommandOutcome::usage(e),
        },
        MethodSource::Optimal(s) => match make_optimal(*s) {
            Ok(m) => m.method,
            Err(e) => return CommandOutcome::usage(e.to_string()),
        },
    };
    if !method.is_dirk() {
        return CommandOutcome::usage(SspError::NotDirk.to_string());
    }
    if !(args.tau_ratio > 0.0) || args.steps == 0 {
        return CommandOutcome::usage("--tau-ratio must be positive and --steps at least 1");
    }
    let problem = match args.problem.build(args.m) {
        Ok(p) => p,
        Err(e) => return CommandOutcome::usage(e.to_string()),
    };
    let radius = ssp_radius(&method);
    if !(radius > 0.0 && radius.is_finite()) {
        return CommandOutcome::usage(format!(
            "{} has radius {radius}; τ = tau_ratio·R·τ₀ is undefined",
            method.label()
        ));
    }
    let tau = args.tau_ratio * radius * problem.fe_step();
    let report = match run_tvd_experiment(&method, &problem, tau, args.steps) {
        Ok(r) => r,
        Err(e) => {
            return CommandOutcome {
                exit_code: EXIT_CHECK_FAILED,
                report_path: None,
                summary: format!("integration failed: {e}"),
                output: String::new(),
            }
        }
    };
    let report_path = match write_report(out, &report.to_csv()) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let tvd = report.is_tvd(TV_TOL);
    let summary = IntegrateSummary {
        method: method.label(),
        problem: args.problem.name(),
        m: args.m,
        fe_step: problem.fe_step(),
        tau: report.tau,
        radius: report.radius,
        tau_ratio: report.tau_ratio,
        steps: report.steps,
        initial_tv: report.initial_tv(),
        final_tv: *report.tv_sequence.last().expect("steps >= 1"),
        stage_tv_max: report.stage_tv_max,
        max_increase: report.max_increase,
        tvd,
    };
    let stage_excess = (report.stage_tv_max - report.initial_tv()).max(0.0);
    CommandOutcome {
        exit_code: if tvd { EXIT_OK } else { EXIT_CHECK_FAILED },
        report_path,
        summary: format!(
            "TVD: max increase {:.1e}, stage excess {stage_excess:.1e}{}",
            report.max_increase,
            if tvd { "" } else { " FAILED" }
        ),
        output: to_json(&summary),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_optimal_without_out_returns_json() {
        let o = cmd_make_optimal(2, None);
        assert_eq!(o.exit_code, EXIT_OK);
        let m = RungeKuttaMethod::from_json(&o.output).unwrap();
        assert_eq!(m.a().to_rows(), vec![vec![0.25, 0.0], vec![0.5, 0.25]]);
        assert_eq!(m.b(), &[0.5, 0.5]);
        assert!(o.summary.contains("claimed radius 4"));
    }

    #[test]
    fn make_optimal_rejects_zero_stages() {
        assert_eq!(cmd_make_optimal(0, None).exit_code, EXIT_USAGE);
    }

    #[test]
    fn missing_method_file_is_usage_error() {
        let o = cmd_analyze(Path::new("/nonexistent/method.json"), None);
        assert_eq!(o.exit_code, EXIT_USAGE);
    }

    #[test]
    fn empty_search_is_usage_error() {
        let args = SearchArgs {
            s_values: vec![],
            restarts: 1,
            max_iters: 0,
            seed: 0,
        };
        assert_eq!(cmd_search(&args, None).exit_code, EXIT_USAGE);
    }

    #[test]
    fn integrate_rejects_bad_ratio() {
        let args = IntegrateArgs {
            method: MethodSource::Optimal(1),
            problem: ProblemKind::Advection,
            m: 20,
            tau_ratio: 0.0,
            steps: 5,
        };
        assert_eq!(cmd_integrate(&args, None).exit_code, EXIT_USAGE);
    }

    #[test]
    fn integrate_optimal_two_is_tvd() {
        let args = IntegrateArgs {
            method: MethodSource::Optimal(2),
            problem: ProblemKind::Advection,
            m: 30,
            tau_ratio: 1.0,
            steps: 10,
        };
        let o = cmd_integrate(&args, None);
        assert_eq!(o.exit_code, EXIT_OK, "{}", o.summary);
        assert!(o.summary.starts_with("TVD: max increase"));
        let v: serde_json::Value = serde_json::from_str(&o.output).unwrap();
        assert_eq!(v["tvd"], true);
        assert_eq!(v["steps"], 10);
    }
}
