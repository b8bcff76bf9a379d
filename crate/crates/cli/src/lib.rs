//! Benchmark harness behind the `splitmpc` command line: scenario loading,
//! single closed-loop runs with CSV/JSON artifacts, the multi-scheme
//! comparison table, and step-by-step feasibility certification.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use splitmpc::dynamics::ModelKind;
use splitmpc::horizon::{build_plan, HorizonPlan, SchemeSpec};
use splitmpc::scenario::Scenario;
use splitmpc::sim::{certified_loop, closed_loop, realized_cost, ClosedLoopTrace};
use splitmpc::Error;

/// Process exit codes, one per failure class.
pub mod exit_code {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const SOLVER_ABORT: u8 = 3;
    pub const CERTIFICATION: u8 = 4;
}

/// Error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit_code::USAGE,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: exit_code::VALIDATION,
            message: message.into(),
        }
    }

    pub fn abort(message: impl Into<String>) -> Self {
        Self {
            code: exit_code::SOLVER_ABORT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Validation { .. } | Error::InvalidParameter { .. } => {
                CliError::validation(e.to_string())
            }
            _ => CliError::abort(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::abort(format!("i/o failure: {e}"))
    }
}

/// Load and validate a scenario file; every failure names what is wrong.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::validation(format!("scenario file `{}`: {e}", path.display()))
    })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!("scenario file `{}`: malformed: {e}", path.display()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn build_validated_plan(scenario: &Scenario, scheme: &str) -> Result<HorizonPlan, CliError> {
    let spec = SchemeSpec::parse(scheme)
        .map_err(|e| CliError::usage(format!("scheme `{scheme}`: {e}")))?;
    Ok(build_plan(&spec, scenario)?)
}

fn sanitize(scheme: &str) -> String {
    scheme.replace('@', "-")
}

/// Fixed trace column layout; directly plottable.
pub const TRACE_HEADER: &str =
    "step,t,p_x,v_x,p_y,v_y,F_x,F_y,stage_cost,solver_status,sqp_iters,solve_time_ms";

pub fn trace_csv(trace: &ClosedLoopTrace) -> String {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for record in &trace.records {
        let s = &record.state;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            record.step,
            record.time,
            s[0],
            s[1],
            s[2],
            s[3],
            record.input[0],
            record.input[1],
            record.stage_cost,
            record.status,
            record.sqp_iterations,
            record.solve_time.as_secs_f64() * 1e3,
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// Summary emitted next to each trace.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scheme: String,
    #[serde(rename = "V_star")]
    pub v_star: f64,
    pub median_solve_ms: f64,
    pub n_decision_vars: usize,
    pub horizon_span_s: f64,
    pub converged_fraction: f64,
}

/// Everything a single run produces, beyond the files on disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub mean_solve_ms: f64,
}

/// Run one scheme, write `<scheme>_trace.csv` and `<scheme>_summary.json`
/// under the output directory, and return the summary.
pub fn run_command(
    scenario: &Scenario,
    scheme: &str,
    out_dir: &Path,
) -> Result<RunOutput, CliError> {
    scenario.validate()?;
    let plan = build_validated_plan(scenario, scheme)?;
    let mut trace = closed_loop(
        &plan,
        &DVector::from_column_slice(&scenario.x0),
        scenario.steps,
        &scenario.solver,
        scenario.seed_policy,
    )?;
    trace.scenario_id = format!("v{}", scenario.version);
    let summary = RunSummary {
        scheme: plan.label.clone(),
        v_star: realized_cost(&trace, &plan.segments[0].cost)?,
        median_solve_ms: trace.median_solve_ms(),
        n_decision_vars: plan.count_decision_variables(),
        horizon_span_s: plan.horizon_span(),
        converged_fraction: trace.converged_fraction(),
    };
    fs::create_dir_all(out_dir)?;
    let stem = sanitize(&plan.label);
    fs::write(out_dir.join(format!("{stem}_trace.csv")), trace_csv(&trace))?;
    fs::write(
        out_dir.join(format!("{stem}_summary.json")),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(RunOutput {
        summary,
        mean_solve_ms: trace.mean_solve_ms(),
    })
}

/// One comparison row; `error` is set when that scheme's run failed.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub scheme: String,
    pub k_s: usize,
    pub dt1: f64,
    pub long_steps: Option<usize>,
    pub long_model: Option<String>,
    pub dt2: Option<f64>,
    #[serde(rename = "V_star")]
    pub v_star: Option<f64>,
    pub median_solve_ms: Option<f64>,
    pub mean_solve_ms: Option<f64>,
    pub n_decision_vars: Option<usize>,
    pub horizon_span_s: Option<f64>,
    pub converged_fraction: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Aligned text rendering with one line per requested scheme.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<16} {:>4} {:>5} {:>10} {:>5} {:>10} {:>5} {:>7} {:>8} {:>6}",
            "method", "k_s", "dt1", "long", "dt2", "V*", "vars", "span_s", "med_ms", "conv"
        )
        .unwrap();
        for row in &self.rows {
            if let Some(err) = &row.error {
                writeln!(out, "{:<16} failed: {err}", row.scheme).unwrap();
                continue;
            }
            let long = match (&row.long_steps, &row.long_model) {
                (Some(steps), Some(model)) => format!("{steps} ({model})"),
                _ => "-".into(),
            };
            writeln!(
                out,
                "{:<16} {:>4} {:>5} {:>10} {:>5} {:>10.1} {:>5} {:>7.1} {:>8.2} {:>5.0}%",
                row.scheme,
                row.k_s,
                row.dt1,
                long,
                row.dt2.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
                row.v_star.unwrap_or(f64::NAN),
                row.n_decision_vars.unwrap_or(0),
                row.horizon_span_s.unwrap_or(f64::NAN),
                row.median_solve_ms.unwrap_or(f64::NAN),
                row.converged_fraction.unwrap_or(0.0) * 100.0,
            )
            .unwrap();
        }
        out
    }
}

fn row_for(scenario: &Scenario, scheme: &str, out_dir: &Path) -> ComparisonRow {
    let mut row = ComparisonRow {
        scheme: scheme.to_string(),
        k_s: scenario.k_s,
        dt1: scenario.dt1,
        long_steps: None,
        long_model: None,
        dt2: None,
        v_star: None,
        median_solve_ms: None,
        mean_solve_ms: None,
        n_decision_vars: None,
        horizon_span_s: None,
        converged_fraction: None,
        error: None,
    };
    let plan = match build_validated_plan(scenario, scheme) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.message);
            return row;
        }
    };
    row.k_s = plan.segments[0].steps;
    row.dt1 = plan.segments[0].model.dt;
    if let Some(seg2) = plan.segments.get(1) {
        row.long_steps = Some(seg2.steps);
        row.long_model = Some(
            match seg2.model.kind {
                ModelKind::Coarse => "cor.",
                ModelKind::Detailed => "det.",
            }
            .to_string(),
        );
        row.dt2 = Some(seg2.model.dt);
    }
    row.n_decision_vars = Some(plan.count_decision_variables());
    row.horizon_span_s = Some(plan.horizon_span());
    match run_command(scenario, scheme, out_dir) {
        Ok(output) => {
            row.v_star = Some(output.summary.v_star);
            row.median_solve_ms = Some(output.summary.median_solve_ms);
            row.mean_solve_ms = Some(output.mean_solve_ms);
            row.converged_fraction = Some(output.summary.converged_fraction);
        }
        Err(e) => row.error = Some(e.message),
    }
    row
}

/// Run every requested scheme and emit `comparison.json` plus per-scheme
/// artifacts. Individual failures become rows with an error note; the
/// remaining rows are still produced.
pub fn compare_command(
    scenario: &Scenario,
    schemes: &[String],
    out_dir: &Path,
) -> Result<ComparisonReport, CliError> {
    if schemes.is_empty() {
        return Err(CliError::usage("compare needs at least one scheme"));
    }
    scenario.validate()?;
    fs::create_dir_all(out_dir)?;
    let rows = schemes
        .iter()
        .map(|scheme| row_for(scenario, scheme, out_dir))
        .collect();
    let report = ComparisonReport { rows };
    fs::write(
        out_dir.join("comparison.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    Ok(report)
}

/// One certification line per executed step.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateRecord {
    pub step: usize,
    pub valid: bool,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub scheme: String,
    pub records: Vec<CertificateRecord>,
}

impl CertifyReport {
    pub fn first_invalid(&self) -> Option<usize> {
        self.records.iter().find(|r| !r.valid).map(|r| r.step)
    }
}

/// Run the closed loop and certify the shifted candidate at every step.
/// Only two-segment schemes have the boundary construction this checks.
pub fn certify_command(
    scenario: &Scenario,
    scheme: &str,
    steps: usize,
) -> Result<CertifyReport, CliError> {
    scenario.validate()?;
    let plan = build_validated_plan(scenario, scheme)?;
    if plan.segments.len() != 2 {
        return Err(CliError::usage(format!(
            "certify needs a two-segment scheme; `{scheme}` has a single segment"
        )));
    }
    let (_, certificates) = certified_loop(
        &plan,
        &DVector::from_column_slice(&scenario.x0),
        steps,
        &scenario.solver,
        scenario.seed_policy,
        scenario.solver.constraint_tol,
    )?;
    Ok(CertifyReport {
        scheme: plan.label,
        records: certificates
            .iter()
            .enumerate()
            .map(|(step, c)| CertificateRecord {
                step,
                valid: c.valid,
                max_violation: c.max_violation,
            })
            .collect(),
    })
}
