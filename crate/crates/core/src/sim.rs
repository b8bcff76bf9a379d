//! Closed-loop simulation, warm starting, and recursive-feasibility
//! certificates.
//!
//! At every loop step the optimal control problem is re-condensed at the
//! measured state and solved from one or two warm-start candidates: the
//! shifted previous solution, and optionally its y-reflection so the solver
//! can jump to the other side of an obstacle when that branch is cheaper.
//! The shifted candidate doubles as a feasibility certificate: when the
//! boundary state sits in a control-invariant standstill set, holding it
//! with zero input keeps the whole tail of the previous plan valid, so the
//! candidate's constraint violation should stay at solver tolerance.

use nalgebra::DVector;
use std::time::Duration;

use crate::dynamics::{ci_holding_input, step, LinearModel, ModelKind, CI_TOLERANCE};
use crate::error::{Error, Result};
use crate::horizon::{stage_cost, HorizonPlan, QuadraticCost};
use crate::nlp::{condense, solve, CondensedNlp, OcpSolution, SolveStatus, SolverConfig};
use crate::scenario::SeedPolicy;

/// One executed control step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    /// Absolute time at which the input was applied.
    pub time: f64,
    /// State the input was applied from.
    pub state: DVector<f64>,
    pub input: DVector<f64>,
    /// Stage cost of the successor state under the applied input.
    pub stage_cost: f64,
    pub status: SolveStatus,
    pub sqp_iterations: usize,
    pub solve_time: Duration,
}

/// Full closed-loop run: per-step records plus the visited states
/// (one more than the number of steps).
#[derive(Debug, Clone)]
pub struct ClosedLoopTrace {
    pub scheme: String,
    pub scenario_id: String,
    /// Plant sampling time.
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub states: Vec<DVector<f64>>,
}

impl ClosedLoopTrace {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trace has at least one state")
    }

    pub fn converged_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 1.0;
        }
        self.records
            .iter()
            .filter(|r| r.status.is_converged())
            .count() as f64
            / self.records.len() as f64
    }

    /// Median wall time of the per-step solves, in milliseconds.
    pub fn median_solve_ms(&self) -> f64 {
        let mut times: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.solve_time.as_secs_f64() * 1e3)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
        match times.len() {
            0 => 0.0,
            n if n % 2 == 1 => times[n / 2],
            n => 0.5 * (times[n / 2 - 1] + times[n / 2]),
        }
    }

    pub fn mean_solve_ms(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records
            .iter()
            .map(|r| r.solve_time.as_secs_f64() * 1e3)
            .sum::<f64>()
            / self.records.len() as f64
    }
}

/// Sum of realized stage costs over a trace: each applied input is charged
/// together with the successor state it produced.
pub fn realized_cost(trace: &ClosedLoopTrace, cost: &QuadraticCost) -> Result<f64> {
    let mut total = 0.0;
    for (k, record) in trace.records.iter().enumerate() {
        total += stage_cost(cost, &trace.states[k + 1], &record.input)?;
    }
    Ok(total)
}

/// Shift-based warm start: the candidate decision vector for the next
/// problem, with a note of how each filled slot was produced.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub w: DVector<f64>,
    /// True when the construction fell back to a cold start because the
    /// previous solution was too infeasible to shift.
    pub fallback: bool,
    pub log: Vec<String>,
}

/// Certificate that the shifted candidate remains feasible at the successor
/// state. An invalid certificate signals a breached assumption, not an
/// internal error.
#[derive(Debug, Clone)]
pub struct FeasibilityCertificate {
    pub candidate: DVector<f64>,
    pub max_violation: f64,
    pub valid: bool,
    pub log: Vec<String>,
}

fn clamp_to_box(
    mut u: DVector<f64>,
    lower: &[Option<f64>],
    upper: &[Option<f64>],
) -> DVector<f64> {
    for i in 0..u.len() {
        if let Some(lo) = lower[i] {
            u[i] = u[i].max(lo);
        }
        if let Some(hi) = upper[i] {
            u[i] = u[i].min(hi);
        }
    }
    u
}

/// Input that steers the first-segment velocity onto a target coarse input,
/// used to shift plans whose long segment has no standstill boundary. Falls
/// back to zero force when the velocity rows are not invertible.
fn velocity_matching_input(
    model: &LinearModel,
    state: &DVector<f64>,
    target: &DVector<f64>,
) -> Option<DVector<f64>> {
    let vel = model.kind.velocity_indices();
    if vel.len() != target.len() || vel.len() != model.input_dim() {
        return None;
    }
    let ax = &model.a * state;
    let rhs = DVector::from_fn(vel.len(), |i, _| target[i] - ax[vel[i]]);
    let b_vel = nalgebra::DMatrix::from_fn(vel.len(), model.input_dim(), |i, j| {
        model.b[(vel[i], j)]
    });
    b_vel.lu().solve(&rhs)
}

fn check_lengths(prev: &OcpSolution, plan: &HorizonPlan) -> Result<()> {
    let seg1 = &plan.segments[0];
    let expected_u = if plan.segments.len() == 2 {
        seg1.steps + 1
    } else {
        seg1.steps
    };
    if prev.u_seq.len() != expected_u {
        return Err(Error::PlanMismatch(format!(
            "solution has {} detailed inputs, plan expects {expected_u}",
            prev.u_seq.len()
        )));
    }
    if prev.states.len() != seg1.steps + 1 {
        return Err(Error::PlanMismatch(format!(
            "solution has {} detailed states, plan expects {}",
            prev.states.len(),
            seg1.steps + 1
        )));
    }
    if plan.segments.len() == 2 {
        let seg2 = &plan.segments[1];
        if prev.v_seq.len() != seg2.steps {
            return Err(Error::PlanMismatch(format!(
                "solution has {} coarse inputs, plan expects {}",
                prev.v_seq.len(),
                seg2.steps
            )));
        }
        if prev.u_seq[0].len() != seg1.model.input_dim() {
            return Err(Error::PlanMismatch("detailed input width differs".into()));
        }
    }
    Ok(())
}

/// Build the shifted warm-start candidate from the previous solution.
///
/// Detailed inputs move left by one slot. When the plan pins the boundary
/// state into a standstill set, the freed slots take the holding input and
/// the coarse tail is kept as is: the standstill absorbs the time shift,
/// so the previous coarse trajectory remains valid unchanged. Without a
/// boundary standstill the freed slot steers the velocity onto the next
/// coarse input and the coarse tail shifts with a holding input appended.
pub fn shift_warm_start(prev: &OcpSolution, plan: &HorizonPlan) -> Result<WarmStart> {
    plan.validate()?;
    check_lengths(prev, plan)?;
    let seg1 = &plan.segments[0];
    let n_u = seg1.model.input_dim();
    let two_seg = plan.segments.len() == 2;
    let k_s = seg1.steps;
    let mut log = Vec::new();

    let cold = |log: &mut Vec<String>, n: usize| {
        log.push("previous solution infeasible beyond tolerance; cold start".into());
        WarmStart {
            w: DVector::zeros(n),
            fallback: true,
            log: std::mem::take(log),
        }
    };

    if !two_seg {
        let n = k_s * n_u;
        let mut w = DVector::zeros(n);
        for k in 0..k_s.saturating_sub(1) {
            w.rows_mut(k * n_u, n_u).copy_from(&prev.u_seq[k + 1]);
        }
        log.push(format!("shifted detailed inputs 1..{}", k_s.saturating_sub(1)));
        let terminal_ci = plan.segments[0]
            .terminal
            .as_ref()
            .and_then(|t| t.ci.as_ref());
        if let Some(ci) = terminal_ci {
            match ci_holding_input(ci, &seg1.model, &prev.states[k_s]) {
                Ok(hold) => {
                    w.rows_mut((k_s - 1) * n_u, n_u).copy_from(&hold);
                    log.push(format!("slot {} holds the terminal set", k_s - 1));
                }
                Err(_) => return Ok(cold(&mut log, n)),
            }
        } else {
            log.push(format!("slot {} zero-filled (no terminal set)", k_s - 1));
        }
        return Ok(WarmStart {
            w,
            fallback: false,
            log,
        });
    }

    let seg2 = &plan.segments[1];
    let n_v = seg2.model.input_dim();
    let coarse_slots = seg2.steps - 1;
    let n = (k_s + 1) * n_u + coarse_slots * n_v;
    let mut w = DVector::zeros(n);

    for k in 0..k_s.saturating_sub(1) {
        w.rows_mut(k * n_u, n_u).copy_from(&prev.u_seq[k + 1]);
    }
    log.push(format!("shifted detailed inputs 1..{}", k_s.saturating_sub(1)));

    if let Some(ci) = &plan.boundary_ci {
        // Standstill boundary: hold it, keep the coarse tail unchanged.
        let boundary_state = &prev.states[k_s];
        match ci_holding_input(ci, &seg1.model, boundary_state) {
            Ok(hold) => {
                w.rows_mut((k_s - 1) * n_u, n_u).copy_from(&hold);
                log.push(format!("slot {} holds the boundary set", k_s - 1));
            }
            Err(_) => return Ok(cold(&mut log, n)),
        }
        // Boundary evaluation slot: the holding input again.
        log.push(format!("slot {k_s} holds the boundary set"));
        for j in 0..coarse_slots {
            w.rows_mut((k_s + 1) * n_u + j * n_v, n_v)
                .copy_from(&prev.v_seq[j + 1]);
        }
        log.push("coarse tail reused (standstill absorbs the shift)".into());
    } else {
        // No boundary standstill: steer the velocity onto the next coarse
        // input so the shifted coarse trajectory lines up, then shift the
        // coarse inputs and append a holding input.
        let target = if seg2.model.kind == ModelKind::Coarse && prev.v_seq.len() > 1 {
            Some(prev.v_seq[1].clone())
        } else {
            None
        };
        let fill = target
            .as_ref()
            .and_then(|t| velocity_matching_input(&seg1.model, &prev.states[k_s], t))
            .map(|u| clamp_to_box(u, &seg1.input_box.lower, &seg1.input_box.upper))
            .unwrap_or_else(|| DVector::zeros(n_u));
        log.push(format!("slot {} velocity-matching fill", k_s - 1));
        w.rows_mut((k_s - 1) * n_u, n_u).copy_from(&fill);
        if seg2.model.kind == ModelKind::Detailed && prev.v_seq.len() > 1 {
            // Identity-linked plans: the boundary slot becomes the first
            // long-segment input after the shift.
            w.rows_mut(k_s * n_u, n_u).copy_from(&prev.v_seq[1]);
            log.push(format!("slot {k_s} takes the shifted long-segment input"));
        }
        for j in 0..coarse_slots {
            if j + 2 < prev.v_seq.len() {
                w.rows_mut((k_s + 1) * n_u + j * n_v, n_v)
                    .copy_from(&prev.v_seq[j + 2]);
            }
            // else: appended holding input stays zero
        }
        log.push("coarse inputs shifted, holding input appended".into());
    }

    Ok(WarmStart {
        w,
        fallback: false,
        log,
    })
}

/// Evaluate the shifted candidate against the constraints at the successor
/// state. Valid when the violation stays within `tol` and the construction
/// did not fall back to a cold start.
pub fn certify_recursive_feasibility(
    prev: &OcpSolution,
    plan: &HorizonPlan,
    x1: &DVector<f64>,
    tol: f64,
) -> Result<FeasibilityCertificate> {
    let warm = shift_warm_start(prev, plan)?;
    let nlp = condense(plan, x1)?;
    let ce = nlp.eval_constraints(&warm.w)?;
    let max_violation = ce.max_violation();
    Ok(FeasibilityCertificate {
        candidate: warm.w,
        max_violation,
        valid: !warm.fallback && max_violation <= tol,
        log: warm.log,
    })
}

/// Solve from every candidate and keep the best solution: converged and
/// feasible beats everything, then lower objective, then lower violation.
/// Earlier candidates win ties.
pub fn multi_start_solve(
    nlp: &CondensedNlp,
    candidates: &[DVector<f64>],
    cfg: &SolverConfig,
) -> Result<OcpSolution> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter {
            name: "candidates",
            reason: "multi-start needs at least one candidate".into(),
        });
    }
    let mut best: Option<OcpSolution> = None;
    for candidate in candidates {
        let sol = solve(nlp, candidate, cfg)?;
        let replace = match &best {
            None => true,
            Some(incumbent) => {
                let sol_ok = sol.status.is_converged() && sol.is_feasible(cfg.constraint_tol);
                let inc_ok = incumbent.status.is_converged()
                    && incumbent.is_feasible(cfg.constraint_tol);
                match (sol_ok, inc_ok) {
                    (true, true) => sol.objective < incumbent.objective,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => sol.max_violation < incumbent.max_violation,
                }
            }
        };
        if replace {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one candidate was solved"))
}

fn dedupe(candidates: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for c in candidates {
        if !out.iter().any(|seen| seen == &c) {
            out.push(c);
        }
    }
    out
}

fn run_loop(
    plan: &HorizonPlan,
    x0: &DVector<f64>,
    steps: usize,
    cfg: &SolverConfig,
    policy: SeedPolicy,
    certify: bool,
    certify_tol: f64,
) -> Result<(ClosedLoopTrace, Vec<FeasibilityCertificate>)> {
    plan.validate()?;
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "a closed-loop run needs at least one step".into(),
        });
    }
    let plant = plan.plant.clone();
    let loop_cost = plan.segments[0].cost.clone();

    let mut state = x0.clone();
    let mut prev: Option<OcpSolution> = None;
    let mut states = Vec::with_capacity(steps + 1);
    let mut records = Vec::with_capacity(steps);
    let mut certificates = Vec::new();
    states.push(state.clone());

    for t in 0..steps {
        let nlp = condense(plan, &state)?;
        let mut candidates = Vec::new();
        match &prev {
            Some(p) => {
                let warm = shift_warm_start(p, plan)?;
                if policy == SeedPolicy::WarmReflect {
                    candidates.push(nlp.reflect_y(&warm.w)?);
                }
                // The plain warm start goes first so it wins objective ties.
                candidates.insert(0, warm.w);
            }
            None => {
                candidates.push(DVector::zeros(nlp.dim()));
            }
        }
        let candidates = dedupe(candidates);
        let solve_start = std::time::Instant::now();
        let sol = multi_start_solve(&nlp, &candidates, cfg)?;
        // charged as the step's solver cost: every candidate counts
        let solve_time = solve_start.elapsed();

        let input = sol.u_seq[0].clone();
        let next = step(&plant, &state, &input)?;
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!(
                "plant state became non-finite at step {t}"
            )));
        }
        if certify {
            certificates.push(certify_recursive_feasibility(&sol, plan, &next, certify_tol)?);
        }
        records.push(StepRecord {
            step: t,
            time: t as f64 * plant.dt,
            state: state.clone(),
            input: input.clone(),
            stage_cost: stage_cost(&loop_cost, &next, &input)?,
            status: sol.status,
            sqp_iterations: sol.sqp_iterations,
            solve_time,
        });
        prev = Some(sol);
        state = next;
        states.push(state.clone());
    }

    Ok((
        ClosedLoopTrace {
            scheme: plan.label.clone(),
            scenario_id: String::new(),
            dt: plant.dt,
            records,
            states,
        },
        certificates,
    ))
}

/// Run the receding-horizon loop: solve, apply the first input, advance the
/// plant one step, repeat. Non-converged solves contribute their best-effort
/// input and are recorded as such.
pub fn closed_loop(
    plan: &HorizonPlan,
    x0: &DVector<f64>,
    steps: usize,
    cfg: &SolverConfig,
    policy: SeedPolicy,
) -> Result<ClosedLoopTrace> {
    run_loop(plan, x0, steps, cfg, policy, false, CI_TOLERANCE).map(|(trace, _)| trace)
}

/// The closed loop plus one feasibility certificate per step, each checking
/// the shifted candidate at the state the plant actually reached.
pub fn certified_loop(
    plan: &HorizonPlan,
    x0: &DVector<f64>,
    steps: usize,
    cfg: &SolverConfig,
    policy: SeedPolicy,
    certify_tol: f64,
) -> Result<(ClosedLoopTrace, Vec<FeasibilityCertificate>)> {
    run_loop(plan, x0, steps, cfg, policy, true, certify_tol)
}

