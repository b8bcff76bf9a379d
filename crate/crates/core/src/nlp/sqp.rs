//! Sequential quadratic programming over a condensed program.
//!
//! The objective is exactly quadratic and convex; only the obstacle rows are
//! nonlinear (and concave), so each iteration solves a convex QP built from
//! the constant Hessian and the constraint linearizations at the current
//! iterate. Steps are globalized with an ℓ1 merit line search whose penalty
//! grows when violation increases. An infeasible subproblem is retried in
//! elastic mode: the conflicting inequality rows get nonnegative slacks with
//! a large linear price, which keeps the relaxation feasible by construction.

use nalgebra::{DMatrix, DVector};
use std::time::Instant;

use super::qp::{solve_qp, QpProblem, QpSolution, QpStatus};
use super::{CondensedNlp, OcpSolution, SolveStatus, SolverConfig};
use crate::error::{Error, Result};

struct Iterate {
    w: DVector<f64>,
    violation: f64,
    objective: f64,
    kkt: f64,
}

fn better(candidate: &Iterate, incumbent: &Iterate, tol: f64) -> bool {
    let cand_feasible = candidate.violation <= tol;
    let inc_feasible = incumbent.violation <= tol;
    match (cand_feasible, inc_feasible) {
        (true, true) => candidate.objective < incumbent.objective,
        (true, false) => true,
        (false, true) => false,
        (false, false) => candidate.violation < incumbent.violation,
    }
}

/// Relaxed subproblem with slacks on the conflicting inequality rows.
/// Returns the step restricted to the original variables plus the matching
/// multipliers, or None when the equalities themselves are inconsistent.
///
/// The slacked set and the starting point are built together so the start
/// is feasible by construction: anchor on the least-squares solution of the
/// equality rows, slack every inequality row that is tight or violated
/// there, and open each slack just past its row's violation.
fn solve_elastic(
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    eq_a: &DMatrix<f64>,
    eq_b: &DVector<f64>,
    ineq_a: &DMatrix<f64>,
    ineq_b: &DVector<f64>,
    max_iters: usize,
) -> Option<QpSolution> {
    let n = gradient.len();
    let m = ineq_b.len();

    let anchor = if eq_a.nrows() == 0 {
        DVector::zeros(n)
    } else {
        let svd = eq_a.clone().svd(true, true);
        let d = svd.solve(eq_b, 1e-12).ok()?;
        if (eq_a * &d - eq_b).amax() > 1e-8 * (1.0 + eq_b.amax()) {
            return None;
        }
        d
    };
    let residual = ineq_a * &anchor - ineq_b;
    let slacked: Vec<usize> = (0..m).filter(|&i| residual[i] > -1e-6).collect();
    let s = slacked.len();
    let slack_price = 1e4 * (1.0 + gradient.amax());

    let mut h = DMatrix::zeros(n + s, n + s);
    h.view_mut((0, 0), (n, n)).copy_from(hessian);
    for i in 0..s {
        h[(n + i, n + i)] = 1e-6;
    }
    let mut g = DVector::zeros(n + s);
    g.rows_mut(0, n).copy_from(gradient);
    for i in 0..s {
        g[n + i] = slack_price;
    }

    let mut eq = DMatrix::zeros(eq_a.nrows(), n + s);
    eq.view_mut((0, 0), (eq_a.nrows(), n)).copy_from(eq_a);

    // Original rows, with a slack column on the selected ones, plus the
    // nonnegativity rows of the slacks.
    let mut ineq = DMatrix::zeros(m + s, n + s);
    ineq.view_mut((0, 0), (m, n)).copy_from(ineq_a);
    for (j, &row) in slacked.iter().enumerate() {
        ineq[(row, n + j)] = -1.0;
        ineq[(m + j, n + j)] = -1.0;
    }
    let mut rhs = DVector::zeros(m + s);
    rhs.rows_mut(0, m).copy_from(ineq_b);

    let p = QpProblem {
        hessian: &h,
        gradient: &g,
        eq_a: &eq,
        eq_b,
        ineq_a: &ineq,
        ineq_b: &rhs,
    };
    let mut start = DVector::zeros(n + s);
    start.rows_mut(0, n).copy_from(&anchor);
    for (j, &row) in slacked.iter().enumerate() {
        start[n + j] = residual[row].max(0.0) * (1.0 + 1e-9) + 1e-9;
    }
    let sol = solve_qp(&p, Some(&start), &[], max_iters.max(2 * (n + s)));
    if sol.status == QpStatus::Infeasible {
        return None;
    }
    let mut ineq_multipliers = DVector::zeros(m);
    for i in 0..m {
        ineq_multipliers[i] = sol.ineq_multipliers[i];
    }
    Some(QpSolution {
        x: sol.x.rows(0, n).into_owned(),
        eq_multipliers: sol.eq_multipliers,
        ineq_multipliers,
        active_set: sol.active_set.into_iter().filter(|i| *i < m).collect(),
        iterations: sol.iterations,
        status: sol.status,
    })
}

/// Solve the condensed program from an initial decision vector.
///
/// Returns a point whose KKT residual and constraint violation are within
/// the configured tolerances, or the best iterate found flagged with a
/// non-converged status.
pub fn solve(nlp: &CondensedNlp, init: &DVector<f64>, cfg: &SolverConfig) -> Result<OcpSolution> {
    cfg.validate()?;
    if init.len() != nlp.dim() {
        return Err(Error::DimensionMismatch {
            context: "initial decision vector",
            expected: nlp.dim(),
            actual: init.len(),
        });
    }
    if !init.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "init",
            reason: "initial decision vector must be finite".into(),
        });
    }

    let start = Instant::now();
    let n = nlp.dim();
    let mut w = init.clone();
    let mut penalty = 1.0_f64;
    let mut active_seed: Vec<usize> = Vec::new();
    let mut elastic_used = false;
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut stall = 0;
    let mut best: Option<Iterate> = None;

    for _ in 0..cfg.max_sqp_iters {
        iterations += 1;
        let (objective, gradient) = nlp.eval_objective(&w)?;
        let ce = nlp.eval_constraints(&w)?;
        let violation = ce.max_violation();

        // Subproblem in the step d: linearized constraints, exact Hessian.
        let eq_rhs = -&ce.eq;
        let ineq_rhs = -&ce.ineq;
        let qp_problem = QpProblem {
            hessian: &nlp.hessian,
            gradient: &gradient,
            eq_a: &ce.eq_jac,
            eq_b: &eq_rhs,
            ineq_a: &ce.ineq_jac,
            ineq_b: &ineq_rhs,
        };
        let zero = DVector::zeros(n);
        let mut qp_sol = solve_qp(&qp_problem, Some(&zero), &active_seed, cfg.max_qp_iters);
        let mut relaxed = false;
        if qp_sol.status == QpStatus::Infeasible {
            elastic_used = true;
            relaxed = true;
            match solve_elastic(
                &nlp.hessian,
                &gradient,
                &ce.eq_jac,
                &eq_rhs,
                &ce.ineq_jac,
                &ineq_rhs,
                cfg.max_qp_iters,
            ) {
                Some(sol) => qp_sol = sol,
                None => {
                    status = SolveStatus::QpFailure;
                    break;
                }
            }
        }
        let d = qp_sol.x.clone();

        // KKT residual at the current iterate with the subproblem's
        // multipliers: stationarity plus complementarity.
        let mut stationarity = gradient.clone();
        stationarity += ce.eq_jac.transpose() * &qp_sol.eq_multipliers;
        stationarity += ce.ineq_jac.transpose() * &qp_sol.ineq_multipliers;
        let complementarity = qp_sol
            .ineq_multipliers
            .iter()
            .zip(ce.ineq.iter())
            .fold(0.0_f64, |m, (mu, g)| m.max((mu * g).abs()));
        let kkt = stationarity.amax().max(complementarity);

        let current = Iterate {
            w: w.clone(),
            violation,
            objective,
            kkt,
        };
        if best
            .as_ref()
            .map(|b| better(&current, b, cfg.constraint_tol))
            .unwrap_or(true)
        {
            best = Some(current);
        }

        if !relaxed && violation <= cfg.constraint_tol && kkt <= cfg.kkt_tol {
            status = SolveStatus::Converged;
            best = Some(Iterate {
                w: w.clone(),
                violation,
                objective,
                kkt,
            });
            break;
        }

        let multiplier_scale = qp_sol
            .eq_multipliers
            .amax()
            .max(qp_sol.ineq_multipliers.amax());
        penalty = penalty.max(1.5 * multiplier_scale + 1e-6);

        if d.amax() <= 1e-12 * (1.0 + w.amax()) {
            // No usable step; an infeasible stationary point of the merit
            // function. Sharpen the penalty a few times, then give up.
            penalty *= cfg.penalty_growth;
            stall += 1;
            if stall >= 4 {
                break;
            }
            continue;
        }

        let merit = objective + penalty * ce.l1_violation();
        let descent = gradient.dot(&d) - penalty * ce.l1_violation();
        let mut alpha = 1.0_f64;
        let mut accepted = false;
        while alpha >= cfg.ls_min_step {
            let trial = &w + &d * alpha;
            let (trial_obj, _) = nlp.eval_objective(&trial)?;
            let (trial_eq, trial_ineq) = nlp.eval_constraint_values(&trial)?;
            let trial_l1 = trial_eq.iter().map(|r| r.abs()).sum::<f64>()
                + trial_ineq.iter().map(|g| g.max(0.0)).sum::<f64>();
            let trial_merit = trial_obj + penalty * trial_l1;
            if trial_merit <= merit + 1e-4 * alpha * descent.min(0.0) {
                let trial_max = trial_eq
                    .iter()
                    .map(|r| r.abs())
                    .chain(trial_ineq.iter().copied())
                    .fold(0.0_f64, f64::max);
                if trial_max > violation + 1e-12 {
                    penalty *= cfg.penalty_growth;
                }
                w = trial;
                accepted = true;
                break;
            }
            alpha *= cfg.ls_shrink;
        }
        if accepted {
            stall = 0;
            active_seed = qp_sol.active_set;
        } else {
            penalty *= cfg.penalty_growth;
            stall += 1;
            if stall >= 4 {
                break;
            }
        }
    }

    let final_iterate = match best {
        Some(b) => b,
        None => {
            let (objective, _) = nlp.eval_objective(&w)?;
            let violation = nlp.eval_constraints(&w)?.max_violation();
            Iterate {
                w,
                violation,
                objective,
                kkt: f64::INFINITY,
            }
        }
    };

    let (u_seq, v_seq, states, coarse_states) = nlp.reconstruct(&final_iterate.w)?;
    Ok(OcpSolution {
        u_seq,
        v_seq,
        states,
        coarse_states,
        w: final_iterate.w,
        objective: final_iterate.objective,
        max_violation: final_iterate.violation,
        kkt_residual: final_iterate.kkt,
        sqp_iterations: iterations,
        wall_time: start.elapsed(),
        status,
        elastic_used,
    })
}
