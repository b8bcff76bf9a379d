//! Condensed optimal control problems and the solver that handles them.
//!
//! Because every model in a plan is linear, all predicted states are affine
//! functions of the input decisions. Condensing eliminates the states by
//! forward substitution, leaving a small dense program over the inputs:
//! a convex quadratic objective, linear equalities (velocity-zeroing rows of
//! control-invariant sets), linear inequalities (boxes pushed through the
//! dynamics), and one concave quadratic inequality per obstacle/position
//! pair. The boundary input of a two-segment plan stays a decision variable,
//! while the first coarse input is pinned by the projection and substituted
//! out.

mod qp;
mod sqp;

pub use qp::{solve_qp, QpProblem, QpSolution, QpStatus};
pub use sqp::solve;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Duration;

use crate::dynamics::EllipsoidObstacle;
use crate::error::{Error, Result};
use crate::horizon::HorizonPlan;

/// Tuning knobs of the sequential quadratic programming solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stationarity/complementarity tolerance for declaring convergence.
    pub kkt_tol: f64,
    /// Largest admissible constraint violation at a converged point.
    pub constraint_tol: f64,
    pub max_sqp_iters: usize,
    pub max_qp_iters: usize,
    /// Multiplier applied to the merit penalty when violation grows.
    pub penalty_growth: f64,
    /// Backtracking factor of the line search.
    pub ls_shrink: f64,
    /// Smallest step length tried before the line search gives up.
    pub ls_min_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tol: 1e-6,
            constraint_tol: 1e-6,
            max_sqp_iters: 100,
            max_qp_iters: 200,
            penalty_growth: 10.0,
            ls_shrink: 0.5,
            ls_min_step: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.kkt_tol", self.kkt_tol),
            ("solver.constraint_tol", self.constraint_tol),
            ("solver.penalty_growth", self.penalty_growth),
            ("solver.ls_shrink", self.ls_shrink),
            ("solver.ls_min_step", self.ls_min_step),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation {
                    key: key.into(),
                    reason: format!("must be positive, got {value}"),
                });
            }
        }
        if self.kkt_tol >= 1.0 || self.constraint_tol >= 1.0 {
            return Err(Error::Validation {
                key: "solver.kkt_tol".into(),
                reason: "tolerances must be below 1".into(),
            });
        }
        if self.ls_shrink >= 1.0 {
            return Err(Error::Validation {
                key: "solver.ls_shrink".into(),
                reason: "line-search shrink factor must be below 1".into(),
            });
        }
        if self.max_sqp_iters == 0 || self.max_qp_iters == 0 {
            return Err(Error::Validation {
                key: "solver.max_sqp_iters".into(),
                reason: "iteration limits must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Affine function `w ↦ M w + c` of the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn eval(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.linear * w + &self.offset
    }

    fn rows(&self, indices: &[usize]) -> AffineMap {
        let linear = DMatrix::from_fn(indices.len(), self.linear.ncols(), |i, j| {
            self.linear[(indices[i], j)]
        });
        let offset = DVector::from_fn(indices.len(), |i, _| self.offset[indices[i]]);
        AffineMap { linear, offset }
    }
}

/// How the decision vector is laid out: all detailed input slots first,
/// then the free coarse input slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub n: usize,
    pub n_u: usize,
    pub n_v: usize,
    /// Detailed slots, `k_s + 1` for two-segment plans (boundary input
    /// included), `N` for single-segment plans.
    pub detailed_slots: usize,
    /// Free coarse slots; the first coarse input is projection-pinned and
    /// not part of the decision vector.
    pub coarse_slots: usize,
}

impl DecisionLayout {
    pub fn detailed_offset(&self, slot: usize) -> usize {
        slot * self.n_u
    }

    pub fn coarse_offset(&self, slot: usize) -> usize {
        self.detailed_slots * self.n_u + slot * self.n_v
    }
}

/// A quadratic obstacle constraint acting on one predicted position, which
/// itself is an affine function of the decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleRow {
    pub obstacle: EllipsoidObstacle,
    pub position: AffineMap,
}

impl ObstacleRow {
    /// Constraint value in `g(w) ≤ 0` form: the negated clearance margin.
    pub fn value(&self, w: &DVector<f64>) -> f64 {
        let p = self.position.eval(w);
        -self.obstacle.margin(p[0], p[1])
    }

    /// Gradient row of `value` with respect to the decisions.
    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let p = self.position.eval(w);
        let obs = &self.obstacle;
        let dx = -2.0 * (p[0] - obs.cx) / (obs.a * obs.a);
        let dy = -2.0 * (p[1] - obs.cy) / (obs.b * obs.b);
        self.position.linear.row(0).transpose() * dx + self.position.linear.row(1).transpose() * dy
    }
}

/// Constraint values and derivatives at one decision vector. Inequalities
/// follow the `g(w) ≤ 0` convention, linear rows first, obstacle rows after.
#[derive(Debug, Clone)]
pub struct ConstraintEval {
    pub eq: DVector<f64>,
    pub eq_jac: DMatrix<f64>,
    pub ineq: DVector<f64>,
    pub ineq_jac: DMatrix<f64>,
}

impl ConstraintEval {
    /// Largest violation across equalities and inequalities (zero when
    /// feasible).
    pub fn max_violation(&self) -> f64 {
        let eq = self.eq.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        let ineq = self.ineq.iter().fold(0.0_f64, |m, g| m.max(*g));
        eq.max(ineq).max(0.0)
    }

    /// Sum of absolute equality residuals and positive inequality parts;
    /// the measure the merit function penalizes.
    pub fn l1_violation(&self) -> f64 {
        self.eq.iter().map(|r| r.abs()).sum::<f64>()
            + self.ineq.iter().map(|g| g.max(0.0)).sum::<f64>()
    }
}

/// The condensed program: objective `½ wᵀ H w + gᵀ w + c`, equalities
/// `A_eq w = b_eq`, linear inequalities `A_in w ≤ b_in`, and quadratic
/// obstacle rows, plus the affine maps needed to reconstruct trajectories.
#[derive(Debug, Clone)]
pub struct CondensedNlp {
    pub layout: DecisionLayout,
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub constant: f64,
    pub eq_a: DMatrix<f64>,
    pub eq_b: DVector<f64>,
    pub ineq_a: DMatrix<f64>,
    pub ineq_b: DVector<f64>,
    pub obstacle_rows: Vec<ObstacleRow>,
    /// Predicted detailed states `x_0 ..= x_{k_s}` (or `x_N`).
    pub state_maps: Vec<AffineMap>,
    /// Predicted coarse states `z_{k_s} ..= z_{k_f}`; empty for
    /// single-segment plans.
    pub coarse_maps: Vec<AffineMap>,
    /// The projection-pinned first coarse input.
    pub pinned_input: Option<AffineMap>,
}

impl CondensedNlp {
    pub fn dim(&self) -> usize {
        self.layout.n
    }

    pub fn n_eq(&self) -> usize {
        self.eq_a.nrows()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_a.nrows() + self.obstacle_rows.len()
    }

    /// Objective value and its exact gradient.
    pub fn eval_objective(&self, w: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_dim(w)?;
        let hw = &self.hessian * w;
        let value = 0.5 * w.dot(&hw) + self.gradient.dot(w) + self.constant;
        Ok((value, hw + &self.gradient))
    }

    /// Constraint values only, skipping the Jacobians; enough for merit
    /// evaluations in a line search.
    pub fn eval_constraint_values(
        &self,
        w: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_dim(w)?;
        let eq = &self.eq_a * w - &self.eq_b;
        let n_lin = self.ineq_a.nrows();
        let mut ineq = DVector::zeros(n_lin + self.obstacle_rows.len());
        ineq
            .rows_mut(0, n_lin)
            .copy_from(&(&self.ineq_a * w - &self.ineq_b));
        for (i, row) in self.obstacle_rows.iter().enumerate() {
            ineq[n_lin + i] = row.value(w);
        }
        Ok((eq, ineq))
    }

    /// Equality residuals, inequality values, and their Jacobians.
    pub fn eval_constraints(&self, w: &DVector<f64>) -> Result<ConstraintEval> {
        self.check_dim(w)?;
        let eq = &self.eq_a * w - &self.eq_b;
        let n_lin = self.ineq_a.nrows();
        let n_quad = self.obstacle_rows.len();
        let mut ineq = DVector::zeros(n_lin + n_quad);
        ineq
            .rows_mut(0, n_lin)
            .copy_from(&(&self.ineq_a * w - &self.ineq_b));
        let mut ineq_jac = DMatrix::zeros(n_lin + n_quad, self.layout.n);
        ineq_jac.rows_mut(0, n_lin).copy_from(&self.ineq_a);
        for (i, row) in self.obstacle_rows.iter().enumerate() {
            ineq[n_lin + i] = row.value(w);
            ineq_jac
                .row_mut(n_lin + i)
                .copy_from(&row.gradient(w).transpose());
        }
        Ok(ConstraintEval {
            eq,
            eq_jac: self.eq_a.clone(),
            ineq,
            ineq_jac,
        })
    }

    /// Input sequences and predicted trajectories encoded by a decision
    /// vector: `(u_seq, v_seq, states, coarse_states)`. The pinned first
    /// coarse input is reconstructed and included in `v_seq`.
    #[allow(clippy::type_complexity)]
    pub fn reconstruct(
        &self,
        w: &DVector<f64>,
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        self.check_dim(w)?;
        let lay = &self.layout;
        let mut u_seq = Vec::with_capacity(lay.detailed_slots);
        for k in 0..lay.detailed_slots {
            u_seq.push(w.rows(lay.detailed_offset(k), lay.n_u).into_owned());
        }
        let mut v_seq = Vec::with_capacity(lay.coarse_slots + 1);
        if let Some(pinned) = &self.pinned_input {
            v_seq.push(pinned.eval(w));
        }
        for j in 0..lay.coarse_slots {
            v_seq.push(w.rows(lay.coarse_offset(j), lay.n_v).into_owned());
        }
        let states = self.state_maps.iter().map(|m| m.eval(w)).collect();
        let coarse = self.coarse_maps.iter().map(|m| m.eval(w)).collect();
        Ok((u_seq, v_seq, states, coarse))
    }

    fn check_dim(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.layout.n {
            return Err(Error::DimensionMismatch {
                context: "decision vector",
                expected: self.layout.n,
                actual: w.len(),
            });
        }
        Ok(())
    }

    /// Negate the y component of every input slot. Used as a multi-start
    /// heuristic: for the planar models this reflects the predicted path
    /// about the x axis, biasing the solve toward the opposite side of an
    /// obstacle.
    pub fn reflect_y(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(w)?;
        let lay = &self.layout;
        let mut out = w.clone();
        for k in 0..lay.detailed_slots {
            let at = lay.detailed_offset(k) + lay.n_u - 1;
            out[at] = -out[at];
        }
        for j in 0..lay.coarse_slots {
            let at = lay.coarse_offset(j) + lay.n_v - 1;
            out[at] = -out[at];
        }
        Ok(out)
    }
}

/// Progress report of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    QpFailure,
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolveStatus::Converged)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Converged => write!(f, "converged"),
            SolveStatus::MaxIterations => write!(f, "max_iters"),
            SolveStatus::QpFailure => write!(f, "qp_failure"),
        }
    }
}

/// Solution of one optimal control problem.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    /// Detailed inputs, one per detailed slot.
    pub u_seq: Vec<DVector<f64>>,
    /// Coarse inputs including the projection-pinned first one; empty for
    /// single-segment plans.
    pub v_seq: Vec<DVector<f64>>,
    /// Predicted detailed states `x_0 ..= x_{k_s}` (or `x_N`).
    pub states: Vec<DVector<f64>>,
    /// Predicted coarse states `z_{k_s} ..= z_{k_f}`.
    pub coarse_states: Vec<DVector<f64>>,
    /// Raw decision vector.
    pub w: DVector<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub kkt_residual: f64,
    pub sqp_iterations: usize,
    pub wall_time: Duration,
    pub status: SolveStatus,
    pub elastic_used: bool,
}

impl OcpSolution {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

fn slot_selector(n: usize, offset: usize, width: usize) -> AffineMap {
    let mut linear = DMatrix::zeros(width, n);
    for i in 0..width {
        linear[(i, offset + i)] = 1.0;
    }
    AffineMap {
        linear,
        offset: DVector::zeros(width),
    }
}

struct ObjectiveAccumulator {
    h: DMatrix<f64>,
    g: DVector<f64>,
    c: f64,
}

impl ObjectiveAccumulator {
    fn new(n: usize) -> Self {
        Self {
            h: DMatrix::zeros(n, n),
            g: DVector::zeros(n),
            c: 0.0,
        }
    }

    /// Add `(M w + c − target)ᵀ W (M w + c − target)` to the quadratic form.
    fn add(&mut self, map: &AffineMap, weight: &DMatrix<f64>, target: &DVector<f64>) {
        let d = &map.offset - target;
        let wm = weight * &map.linear;
        self.h += 2.0 * map.linear.transpose() * &wm;
        self.g += 2.0 * map.linear.transpose() * (weight * &d);
        self.c += d.dot(&(weight * &d));
    }
}

struct ConstraintAccumulator {
    n: usize,
    eq_rows: Vec<(DVector<f64>, f64)>,
    ineq_rows: Vec<(DVector<f64>, f64)>,
    obstacles: Vec<ObstacleRow>,
}

impl ConstraintAccumulator {
    fn new(n: usize) -> Self {
        Self {
            n,
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            obstacles: Vec::new(),
        }
    }

    /// Pin one component of an affine map to zero: `row·w = −offset`.
    fn add_zero_equality(&mut self, map: &AffineMap, component: usize) {
        let row = map.linear.row(component).transpose();
        self.eq_rows.push((row, -map.offset[component]));
    }

    /// Box rows `lo ≤ (M w + c)_i ≤ hi` as one or two inequalities each.
    fn add_box(&mut self, map: &AffineMap, lower: &[Option<f64>], upper: &[Option<f64>]) {
        for i in 0..lower.len() {
            if let Some(hi) = upper[i] {
                let row = map.linear.row(i).transpose();
                self.ineq_rows.push((row, hi - map.offset[i]));
            }
            if let Some(lo) = lower[i] {
                let row = -map.linear.row(i).transpose();
                self.ineq_rows.push((row, map.offset[i] - lo));
            }
        }
    }

    fn add_obstacles(&mut self, position: &AffineMap, obstacles: &[EllipsoidObstacle]) {
        for obs in obstacles {
            self.obstacles.push(ObstacleRow {
                obstacle: *obs,
                position: position.clone(),
            });
        }
    }

    fn finish(self) -> ConstraintBlocks {
        let eq_a = DMatrix::from_fn(self.eq_rows.len(), self.n, |i, j| self.eq_rows[i].0[j]);
        let eq_b = DVector::from_fn(self.eq_rows.len(), |i, _| self.eq_rows[i].1);
        let ineq_a = DMatrix::from_fn(self.ineq_rows.len(), self.n, |i, j| self.ineq_rows[i].0[j]);
        let ineq_b = DVector::from_fn(self.ineq_rows.len(), |i, _| self.ineq_rows[i].1);
        (eq_a, eq_b, ineq_a, ineq_b, self.obstacles)
    }
}

/// Assembled constraint data: equalities, linear inequalities, obstacles.
type ConstraintBlocks = (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>, Vec<ObstacleRow>);

fn vstack_maps(top: &AffineMap, bottom: &AffineMap) -> AffineMap {
    let n = top.linear.ncols();
    let rows = top.linear.nrows() + bottom.linear.nrows();
    let mut linear = DMatrix::zeros(rows, n);
    linear.rows_mut(0, top.linear.nrows()).copy_from(&top.linear);
    linear
        .rows_mut(top.linear.nrows(), bottom.linear.nrows())
        .copy_from(&bottom.linear);
    let mut offset = DVector::zeros(rows);
    offset.rows_mut(0, top.offset.len()).copy_from(&top.offset);
    offset
        .rows_mut(top.offset.len(), bottom.offset.len())
        .copy_from(&bottom.offset);
    AffineMap { linear, offset }
}

fn compose(matrix: &DMatrix<f64>, map: &AffineMap) -> AffineMap {
    AffineMap {
        linear: matrix * &map.linear,
        offset: matrix * &map.offset,
    }
}

/// Condense a horizon plan at the current state into a dense program over
/// the input decisions.
pub fn condense(plan: &HorizonPlan, x0: &DVector<f64>) -> Result<CondensedNlp> {
    plan.validate()?;
    let seg1 = &plan.segments[0];
    let n_x = seg1.model.state_dim();
    let n_u = seg1.model.input_dim();
    if x0.len() != n_x {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: n_x,
            actual: x0.len(),
        });
    }
    if !x0.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "x0",
            reason: "initial state must be finite".into(),
        });
    }

    let two_seg = plan.segments.len() == 2;
    let k_s = seg1.steps;
    let (n_v, coarse_slots) = if two_seg {
        let seg2 = &plan.segments[1];
        (seg2.model.input_dim(), seg2.steps - 1)
    } else {
        (0, 0)
    };
    let detailed_slots = if two_seg { k_s + 1 } else { k_s };
    let layout = DecisionLayout {
        n: detailed_slots * n_u + coarse_slots * n_v,
        n_u,
        n_v,
        detailed_slots,
        coarse_slots,
    };
    let n = layout.n;

    // Forward substitution of the detailed dynamics.
    let mut state_maps = Vec::with_capacity(k_s + 1);
    state_maps.push(AffineMap {
        linear: DMatrix::zeros(n_x, n),
        offset: x0.clone(),
    });
    for k in 0..k_s {
        let prev: &AffineMap = &state_maps[k];
        let mut linear = &seg1.model.a * &prev.linear;
        let offset = &seg1.model.a * &prev.offset;
        let col0 = layout.detailed_offset(k);
        for i in 0..n_x {
            for j in 0..n_u {
                linear[(i, col0 + j)] += seg1.model.b[(i, j)];
            }
        }
        state_maps.push(AffineMap { linear, offset });
    }

    let mut objective = ObjectiveAccumulator::new(n);
    let mut constraints = ConstraintAccumulator::new(n);
    let zero_u = DVector::zeros(n_u);

    // Stage costs of the first segment; the boundary input slot carries no
    // cost of its own.
    #[allow(clippy::needless_range_loop)]
    for k in 0..k_s {
        objective.add(&state_maps[k], &seg1.cost.q, &seg1.cost.x_ref);
        let u_map = slot_selector(n, layout.detailed_offset(k), n_u);
        objective.add(&u_map, &seg1.cost.r, &zero_u);
    }
    if let Some(term) = &seg1.terminal {
        if let Some(cost) = &term.cost {
            objective.add(&state_maps[k_s], &cost.q, &cost.x_ref);
        }
    }

    // Interior state boxes and obstacle clearances of the first segment.
    // The boundary/terminal state at k_s is constrained separately below.
    let seg1_positions = seg1.model.kind.position_indices();
    #[allow(clippy::needless_range_loop)]
    for k in 1..k_s {
        constraints.add_box(&state_maps[k], &seg1.state_box.lower, &seg1.state_box.upper);
        let pos = state_maps[k].rows(&seg1_positions);
        constraints.add_obstacles(&pos, &seg1.obstacles);
    }
    for k in 0..detailed_slots {
        let u_map = slot_selector(n, layout.detailed_offset(k), n_u);
        constraints.add_box(&u_map, &seg1.input_box.lower, &seg1.input_box.upper);
    }

    let mut coarse_maps = Vec::new();
    let mut pinned_input = None;

    if two_seg {
        let seg2 = &plan.segments[1];
        let proj = plan.projection.as_ref().expect("validated");
        let n_z = seg2.model.state_dim();

        // Constraints at the segment boundary.
        if let Some(ci) = &plan.boundary_ci {
            if ci.zero_velocity {
                for &i in seg1.model.kind.velocity_indices() {
                    constraints.add_zero_equality(&state_maps[k_s], i);
                }
            }
            constraints.add_box(
                &state_maps[k_s],
                &ci.position_box.lower,
                &ci.position_box.upper,
            );
        }

        // Project the boundary state/input pair into the coarse model; the
        // pinned input is substituted, not kept as a decision.
        let boundary_u = slot_selector(n, layout.detailed_offset(k_s), n_u);
        let stacked = vstack_maps(&state_maps[k_s], &boundary_u);
        let projected = compose(&proj.matrix, &stacked);
        let z_indices: Vec<usize> = (0..n_z).collect();
        let v_indices: Vec<usize> = (n_z..n_z + n_v).collect();
        let z0_map = projected.rows(&z_indices);
        let v0_map = projected.rows(&v_indices);

        constraints.add_box(&z0_map, &seg2.state_box.lower, &seg2.state_box.upper);
        constraints.add_box(&v0_map, &seg2.input_box.lower, &seg2.input_box.upper);

        // Forward substitution of the coarse dynamics.
        coarse_maps.push(z0_map);
        for j in 0..seg2.steps {
            let v_map = if j == 0 {
                v0_map.clone()
            } else {
                slot_selector(n, layout.coarse_offset(j - 1), n_v)
            };
            let prev = &coarse_maps[j];
            let linear = &seg2.model.a * &prev.linear + &seg2.model.b * &v_map.linear;
            let offset = &seg2.model.a * &prev.offset + &seg2.model.b * &v_map.offset;
            coarse_maps.push(AffineMap { linear, offset });
        }

        // Coarse stage costs, including the pinned input's.
        let zero_v = DVector::zeros(n_v);
        #[allow(clippy::needless_range_loop)]
        for j in 0..seg2.steps {
            objective.add(&coarse_maps[j], &seg2.cost.q, &seg2.cost.x_ref);
            let v_map = if j == 0 {
                v0_map.clone()
            } else {
                slot_selector(n, layout.coarse_offset(j - 1), n_v)
            };
            objective.add(&v_map, &seg2.cost.r, &zero_v);
        }

        // Interior coarse boxes and obstacles; the boundary coarse state was
        // already constrained through the projection.
        let seg2_positions = seg2.model.kind.position_indices();
        let pos0 = coarse_maps[0].rows(&seg2_positions);
        constraints.add_obstacles(&pos0, &seg2.obstacles);
        #[allow(clippy::needless_range_loop)]
        for j in 1..seg2.steps {
            constraints.add_box(&coarse_maps[j], &seg2.state_box.lower, &seg2.state_box.upper);
            let pos = coarse_maps[j].rows(&seg2_positions);
            constraints.add_obstacles(&pos, &seg2.obstacles);
        }
        for j in 0..coarse_slots {
            let v_map = slot_selector(n, layout.coarse_offset(j), n_v);
            constraints.add_box(&v_map, &seg2.input_box.lower, &seg2.input_box.upper);
        }

        // Terminal cost, terminal set, and the terminal state box.
        let last = &coarse_maps[seg2.steps];
        let terminal_pos = last.rows(&seg2_positions);
        constraints.add_obstacles(&terminal_pos, &seg2.obstacles);
        let mut terminal_box = seg2.state_box.clone();
        if let Some(term) = &seg2.terminal {
            if let Some(cost) = &term.cost {
                objective.add(last, &cost.q, &cost.x_ref);
            }
            if let Some(ci) = &term.ci {
                if ci.zero_velocity {
                    for &i in seg2.model.kind.velocity_indices() {
                        constraints.add_zero_equality(last, i);
                    }
                }
                terminal_box = terminal_box.intersect(&ci.position_box)?;
            }
        }
        constraints.add_box(last, &terminal_box.lower, &terminal_box.upper);

        pinned_input = Some(v0_map);
    } else {
        // Single segment: terminal set and box at the final state.
        let last = &state_maps[k_s];
        let terminal_pos = last.rows(&seg1_positions);
        constraints.add_obstacles(&terminal_pos, &seg1.obstacles);
        let mut terminal_box = seg1.state_box.clone();
        if let Some(term) = &seg1.terminal {
            if let Some(ci) = &term.ci {
                if ci.zero_velocity {
                    for &i in seg1.model.kind.velocity_indices() {
                        constraints.add_zero_equality(last, i);
                    }
                }
                terminal_box = terminal_box.intersect(&ci.position_box)?;
            }
        }
        constraints.add_box(last, &terminal_box.lower, &terminal_box.upper);
    }

    let (eq_a, eq_b, ineq_a, ineq_b, obstacle_rows) = constraints.finish();
    // Symmetrize against accumulation round-off.
    let hessian = (&objective.h + objective.h.transpose()) * 0.5;

    Ok(CondensedNlp {
        layout,
        hessian,
        gradient: objective.g,
        constant: objective.c,
        eq_a,
        eq_b,
        ineq_a,
        ineq_b,
        obstacle_rows,
        state_maps,
        coarse_maps,
        pinned_input,
    })
}
