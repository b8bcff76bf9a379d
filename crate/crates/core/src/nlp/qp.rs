//! Dense primal active-set solver for convex quadratic programs
//!
//! ```text
//!     minimize    ½ xᵀ H x + gᵀ x
//!     subject to  A_eq x  = b_eq
//!                 A_in x ≤ b_in
//! ```
//!
//! The working set is handled with a null-space method: at every iteration
//! the step solves the equality-constrained subproblem on the working set,
//! a ratio test adds the blocking row, and a negative multiplier drops one.
//! A starting point is produced internally (least-squares equality solve
//! plus, when needed, a single-slack phase-1 run of the same iteration), so
//! callers never have to supply a feasible point.

use nalgebra::{DMatrix, DVector};

/// Feasibility tolerance used for start construction and activity tests.
const FEAS_TOL: f64 = 1e-9;
/// A constraint is dropped from the working set below this multiplier.
const MULT_TOL: f64 = 1e-9;
/// Regularization added to the reduced Hessian when its factorization fails.
const REG_EPS: f64 = 1e-9;

/// Borrowed view of one QP.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub gradient: &'a DVector<f64>,
    pub eq_a: &'a DMatrix<f64>,
    pub eq_b: &'a DVector<f64>,
    pub ineq_a: &'a DMatrix<f64>,
    pub ineq_b: &'a DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the equality rows (free sign).
    pub eq_multipliers: DVector<f64>,
    /// Multipliers of the inequality rows (nonnegative, zero off the active set).
    pub ineq_multipliers: DVector<f64>,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub status: QpStatus,
}

/// Insert a row into an orthonormal basis via modified Gram-Schmidt with
/// re-orthogonalization. Returns false when the row is dependent.
fn mgs_insert(basis: &mut Vec<DVector<f64>>, row: &DVector<f64>) -> bool {
    let mut v = row.clone();
    for _ in 0..2 {
        for b in basis.iter() {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let norm = v.norm();
    if norm <= 1e-10 * (1.0 + row.norm()) {
        return false;
    }
    basis.push(v / norm);
    true
}

/// Extend a row-space basis to a full orthonormal basis; the added vectors
/// span the null space of the working set.
fn null_extension(basis: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let mut full: Vec<DVector<f64>> = basis.to_vec();
    let mut columns = Vec::new();
    for j in 0..n {
        if full.len() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        if mgs_insert(&mut full, &e) {
            columns.push(full.last().expect("just pushed").clone());
        }
    }
    columns
}

/// Working set with incrementally maintained orthonormal bases of its row
/// space and null space. Adding a row is cheap; dropping one rebuilds.
struct WorkingSet<'a> {
    p: &'a QpProblem<'a>,
    rows: Vec<usize>,
    mask: Vec<bool>,
    basis: Vec<DVector<f64>>,
    null: Vec<DVector<f64>>,
}

impl<'a> WorkingSet<'a> {
    fn new(p: &'a QpProblem<'a>, x: &DVector<f64>, seed: &[usize]) -> Self {
        let n = p.gradient.len();
        let mut ws = Self {
            p,
            rows: Vec::new(),
            mask: vec![false; p.ineq_a.nrows()],
            basis: Vec::new(),
            null: Vec::new(),
        };
        for i in 0..p.eq_a.nrows() {
            let row = p.eq_a.row(i).transpose();
            mgs_insert(&mut ws.basis, &row);
        }
        // Adopt seed rows that are active at the start and independent.
        for &i in seed {
            if i >= p.ineq_a.nrows() || ws.mask[i] {
                continue;
            }
            let residual = (p.ineq_a.row(i) * x)[0] - p.ineq_b[i];
            if residual.abs() <= FEAS_TOL * (1.0 + p.ineq_b[i].abs()) {
                let row = p.ineq_a.row(i).transpose();
                if mgs_insert(&mut ws.basis, &row) {
                    ws.rows.push(i);
                    ws.mask[i] = true;
                }
            }
        }
        ws.null = null_extension(&ws.basis, n);
        ws
    }

    /// Add an independent row: one basis insertion plus a rank-one null
    /// downdate. Returns false when the row is dependent on the working set.
    fn add(&mut self, i: usize) -> bool {
        let row = self.p.ineq_a.row(i).transpose();
        if !mgs_insert(&mut self.basis, &row) {
            return false;
        }
        self.rows.push(i);
        self.mask[i] = true;
        let b = self.basis.last().expect("just inserted").clone();
        let mut next = Vec::with_capacity(self.null.len().saturating_sub(1));
        for v in &self.null {
            let mut w = v - &b * v.dot(&b);
            for _ in 0..2 {
                for kept in &next {
                    let c = w.dot(kept);
                    w.axpy(-c, kept, 1.0);
                }
            }
            let norm = w.norm();
            if norm > 1e-10 {
                next.push(w / norm);
            }
        }
        self.null = next;
        true
    }

    /// Drop the j-th working row and rebuild both bases.
    fn drop(&mut self, j: usize) {
        let i = self.rows.remove(j);
        self.mask[i] = false;
        self.basis.clear();
        for r in 0..self.p.eq_a.nrows() {
            let row = self.p.eq_a.row(r).transpose();
            mgs_insert(&mut self.basis, &row);
        }
        let rows = self.rows.clone();
        self.rows.clear();
        for &r in &rows {
            let row = self.p.ineq_a.row(r).transpose();
            if mgs_insert(&mut self.basis, &row) {
                self.rows.push(r);
            } else {
                self.mask[r] = false;
            }
        }
        self.null = null_extension(&self.basis, self.p.gradient.len());
    }

    fn z_matrix(&self) -> DMatrix<f64> {
        let n = self.p.gradient.len();
        let mut z = DMatrix::zeros(n, self.null.len());
        for (j, col) in self.null.iter().enumerate() {
            z.column_mut(j).copy_from(col);
        }
        z
    }
}

/// Solve the reduced Newton system, regularizing when the reduced Hessian
/// is singular.
fn reduced_step(z: &DMatrix<f64>, hessian: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    if z.ncols() == 0 {
        return DVector::zeros(grad.len());
    }
    let reduced_h = z.transpose() * hessian * z;
    let reduced_g = z.transpose() * grad;
    let scale = reduced_h.diagonal().amax().max(1.0);
    let mut eps = 0.0;
    for _ in 0..6 {
        let mut m = reduced_h.clone();
        if eps > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += eps;
            }
        }
        if let Some(chol) = m.cholesky() {
            let q = chol.solve(&(-&reduced_g));
            return z * q;
        }
        eps = if eps == 0.0 { REG_EPS * scale } else { eps * 100.0 };
    }
    DVector::zeros(grad.len())
}

/// Least-squares multipliers of the stationarity condition
/// `H x + g + A_eqᵀ λ + A_Wᵀ μ = 0`.
fn multipliers(p: &QpProblem, working: &[usize], grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    let m = p.eq_a.nrows() + working.len();
    if m == 0 {
        return DVector::zeros(0);
    }
    let mut ct = DMatrix::zeros(n, m);
    for i in 0..p.eq_a.nrows() {
        ct.column_mut(i).copy_from(&p.eq_a.row(i).transpose());
    }
    for (j, &i) in working.iter().enumerate() {
        ct.column_mut(p.eq_a.nrows() + j)
            .copy_from(&p.ineq_a.row(i).transpose());
    }
    let svd = ct.svd(true, true);
    svd.solve(&(-grad), 1e-12).unwrap_or_else(|_| DVector::zeros(m))
}

fn assemble(
    p: &QpProblem,
    x: DVector<f64>,
    working: Vec<usize>,
    iterations: usize,
    status: QpStatus,
) -> QpSolution {
    let grad = p.hessian * &x + p.gradient;
    let lambda = multipliers(p, &working, &grad);
    let n_eq = p.eq_a.nrows();
    let eq_multipliers = if lambda.len() >= n_eq {
        lambda.rows(0, n_eq).into_owned()
    } else {
        DVector::zeros(n_eq)
    };
    let mut ineq_multipliers = DVector::zeros(p.ineq_a.nrows());
    for (j, &i) in working.iter().enumerate() {
        ineq_multipliers[i] = lambda[n_eq + j].max(0.0);
    }
    QpSolution {
        x,
        eq_multipliers,
        ineq_multipliers,
        active_set: working,
        iterations,
        status,
    }
}

/// Core primal active-set iteration from a feasible starting point.
fn iterate(
    p: &QpProblem,
    mut x: DVector<f64>,
    seed: &[usize],
    max_iters: usize,
) -> QpSolution {
    let mut ws = WorkingSet::new(p, &x, seed);

    for iteration in 0..max_iters {
        let z = ws.z_matrix();
        let grad = p.hessian * &x + p.gradient;
        let step = reduced_step(&z, p.hessian, &grad);

        if step.amax() <= 1e-11 * (1.0 + x.amax()) {
            let lambda = multipliers(p, &ws.rows, &grad);
            let n_eq = p.eq_a.nrows();
            let mut drop_at = None;
            let mut most_negative = -MULT_TOL;
            for j in 0..ws.rows.len() {
                let mu = lambda[n_eq + j];
                if mu < most_negative {
                    most_negative = mu;
                    drop_at = Some(j);
                }
            }
            match drop_at {
                Some(j) => {
                    ws.drop(j);
                    continue;
                }
                None => return assemble(p, x, ws.rows, iteration, QpStatus::Optimal),
            }
        }

        // Ratio test against the rows outside the working set.
        let mut alpha = 1.0_f64;
        let mut blocker = None;
        let step_scale = 1e-13 * (1.0 + step.amax());
        for i in 0..p.ineq_a.nrows() {
            if ws.mask[i] {
                continue;
            }
            let direction = (p.ineq_a.row(i) * &step)[0];
            if direction <= step_scale {
                continue;
            }
            let slack = (p.ineq_b[i] - (p.ineq_a.row(i) * &x)[0]).max(0.0);
            let ratio = slack / direction;
            if ratio < alpha {
                alpha = ratio;
                blocker = Some(i);
            }
        }

        x.axpy(alpha, &step, 1.0);
        if let Some(i) = blocker {
            ws.add(i);
        }
    }

    assemble(p, x, ws.rows, max_iters, QpStatus::MaxIterations)
}

/// Minimum-norm solution of the equality system, or None when inconsistent.
fn equality_start(p: &QpProblem) -> Option<DVector<f64>> {
    let n = p.gradient.len();
    if p.eq_a.nrows() == 0 {
        return Some(DVector::zeros(n));
    }
    let svd = p.eq_a.clone().svd(true, true);
    let x = svd.solve(p.eq_b, 1e-12).ok()?;
    let residual = (p.eq_a * &x - p.eq_b).amax();
    if residual > 1e-8 * (1.0 + p.eq_b.amax()) {
        return None;
    }
    Some(x)
}

fn max_ineq_violation(p: &QpProblem, x: &DVector<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..p.ineq_a.nrows() {
        worst = worst.max((p.ineq_a.row(i) * x)[0] - p.ineq_b[i]);
    }
    worst
}

/// Phase 1: minimize a single slack bounding all inequality violations.
/// Returns a point with violations at most the achievable minimum.
fn phase1(p: &QpProblem, x0: &DVector<f64>, max_iters: usize) -> Option<DVector<f64>> {
    let n = x0.len();
    let m_in = p.ineq_a.nrows();
    let mut hessian = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        hessian[(i, i)] = 1e-8;
    }
    hessian[(n, n)] = 1.0;
    let mut gradient = DVector::zeros(n + 1);
    for i in 0..n {
        gradient[i] = -1e-8 * x0[i];
    }
    gradient[n] = 1.0;

    let mut eq_a = DMatrix::zeros(p.eq_a.nrows(), n + 1);
    eq_a.view_mut((0, 0), (p.eq_a.nrows(), n)).copy_from(p.eq_a);

    let mut ineq_a = DMatrix::zeros(m_in + 1, n + 1);
    ineq_a.view_mut((0, 0), (m_in, n)).copy_from(p.ineq_a);
    for i in 0..m_in {
        ineq_a[(i, n)] = -1.0;
    }
    ineq_a[(m_in, n)] = -1.0;
    let mut ineq_b = DVector::zeros(m_in + 1);
    ineq_b.rows_mut(0, m_in).copy_from(p.ineq_b);

    let t0 = max_ineq_violation(p, x0) * (1.0 + 1e-9) + 1e-9;
    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(x0);
    start[n] = t0;

    let expanded = QpProblem {
        hessian: &hessian,
        gradient: &gradient,
        eq_a: &eq_a,
        eq_b: p.eq_b,
        ineq_a: &ineq_a,
        ineq_b: &ineq_b,
    };
    let solution = iterate(&expanded, start, &[], max_iters);
    let t = solution.x[n];
    if t > 100.0 * FEAS_TOL {
        return None;
    }
    Some(solution.x.rows(0, n).into_owned())
}

/// Solve the QP. `start` and `active_seed` warm-start the iteration; both
/// may be empty. The solver finds its own feasible point when the provided
/// start violates constraints.
pub fn solve_qp(
    p: &QpProblem,
    start: Option<&DVector<f64>>,
    active_seed: &[usize],
    max_iters: usize,
) -> QpSolution {
    let n = p.gradient.len();
    let infeasible = |x: DVector<f64>| QpSolution {
        x,
        eq_multipliers: DVector::zeros(p.eq_a.nrows()),
        ineq_multipliers: DVector::zeros(p.ineq_a.nrows()),
        active_set: Vec::new(),
        iterations: 0,
        status: QpStatus::Infeasible,
    };

    // Pick a start that satisfies the equalities.
    let x0 = match start {
        Some(s)
            if s.len() == n
                && (p.eq_a.nrows() == 0
                    || (p.eq_a * s - p.eq_b).amax() <= FEAS_TOL * (1.0 + p.eq_b.amax())) =>
        {
            s.clone()
        }
        _ => match equality_start(p) {
            Some(x) => x,
            None => return infeasible(DVector::zeros(n)),
        },
    };

    // Repair inequality feasibility when necessary.
    let feasible_start = if max_ineq_violation(p, &x0) > FEAS_TOL {
        match phase1(p, &x0, max_iters) {
            Some(x) => x,
            None => return infeasible(x0),
        }
    } else {
        x0
    };

    iterate(p, feasible_start, active_seed, max_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty_rows(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    }

    #[test]
    fn unconstrained_newton_step() {
        // minimize ½‖x‖² − 1ᵀx  →  x = 1
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_element(2, -1.0);
        let (eq_a, eq_b) = empty_rows(2);
        let (in_a, in_b) = empty_rows(2);
        let p = QpProblem {
            hessian: &h,
            gradient: &g,
            eq_a: &eq_a,
            eq_b: &eq_b,
            ineq_a: &in_a,
            ineq_b: &in_b,
        };
        let sol = solve_qp(&p, None, &[], 50);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x, DVector::from_element(2, 1.0), epsilon = 1e-10);
    }

    #[test]
    fn equality_constrained_symmetry() {
        // minimize ‖w‖² subject to w₁ + w₂ = 2  →  (1, 1)
        let h = DMatrix::identity(2, 2) * 2.0;
        let g = DVector::zeros(2);
        let eq_a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let eq_b = DVector::from_element(1, 2.0);
        let (in_a, in_b) = empty_rows(2);
        let p = QpProblem {
            hessian: &h,
            gradient: &g,
            eq_a: &eq_a,
            eq_b: &eq_b,
            ineq_a: &in_a,
            ineq_b: &in_b,
        };
        let sol = solve_qp(&p, None, &[], 50);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x, DVector::from_element(2, 1.0), epsilon = 1e-10);
    }

    #[test]
    fn halfspace_projection() {
        // minimize ½‖w‖² subject to w₁ ≤ −1 → w = (−1, 0), constraint active
        let h = DMatrix::identity(2, 2);
        let g = DVector::zeros(2);
        let (eq_a, eq_b) = empty_rows(2);
        let in_a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let in_b = DVector::from_element(1, -1.0);
        let p = QpProblem {
            hessian: &h,
            gradient: &g,
            eq_a: &eq_a,
            eq_b: &eq_b,
            ineq_a: &in_a,
            ineq_b: &in_b,
        };
        let sol = solve_qp(&p, None, &[], 50);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x, DVector::from_column_slice(&[-1.0, 0.0]), epsilon = 1e-9);
        assert_eq!(sol.active_set, vec![0]);
        assert!(sol.ineq_multipliers[0] > 0.0);
    }

    #[test]
    fn detects_inconsistent_equalities() {
        let h = DMatrix::identity(2, 2);
        let g = DVector::zeros(2);
        let eq_a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let eq_b = DVector::from_column_slice(&[0.0, 1.0]);
        let (in_a, in_b) = empty_rows(2);
        let p = QpProblem {
            hessian: &h,
            gradient: &g,
            eq_a: &eq_a,
            eq_b: &eq_b,
            ineq_a: &in_a,
            ineq_b: &in_b,
        };
        let sol = solve_qp(&p, None, &[], 50);
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn detects_contradictory_inequalities() {
        let h = DMatrix::identity(1, 1);
        let g = DVector::zeros(1);
        let (eq_a, eq_b) = empty_rows(1);
        let in_a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let in_b = DVector::from_column_slice(&[-1.0, -1.0]); // x ≤ −1 and x ≥ 1
        let p = QpProblem {
            hessian: &h,
            gradient: &g,
            eq_a: &eq_a,
            eq_b: &eq_b,
            ineq_a: &in_a,
            ineq_b: &in_b,
        };
        let sol = solve_qp(&p, None, &[], 100);
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn duplicate_rows_are_tolerated() {
        // same bound twice; the duplicate must not confuse the working set
        let h = DMatrix::identity(2, 2);
        let g = DVector::from_column_slice(&[-10.0, 0.0]);
        let (eq_a, eq_b) = empty_rows(2);
        let in_a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let in_b = DVector::from_column_slice(&[2.0, 2.0]);
        let p = QpProblem {
            hessian: &h,
            gradient: &g,
            eq_a: &eq_a,
            eq_b: &eq_b,
            ineq_a: &in_a,
            ineq_b: &in_b,
        };
        let sol = solve_qp(&p, None, &[], 50);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.x, DVector::from_column_slice(&[2.0, 0.0]), epsilon = 1e-9);
    }

    /// Exhaustive oracle: try every subset of inequality rows as an active
    /// set, solve the equality-constrained KKT system, and keep the best
    /// feasible candidate with nonnegative multipliers.
    fn brute_force(p: &QpProblem) -> Option<DVector<f64>> {
        let n = p.gradient.len();
        let m = p.ineq_a.nrows();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0..(1_u32 << m) {
            let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let rows = p.eq_a.nrows() + active.len();
            if rows > n {
                continue;
            }
            let mut kkt = DMatrix::zeros(n + rows, n + rows);
            kkt.view_mut((0, 0), (n, n)).copy_from(p.hessian);
            let mut rhs = DVector::zeros(n + rows);
            rhs.rows_mut(0, n).copy_from(&(-p.gradient));
            for (r, row) in (0..p.eq_a.nrows()).enumerate() {
                for c in 0..n {
                    kkt[(n + r, c)] = p.eq_a[(row, c)];
                    kkt[(c, n + r)] = p.eq_a[(row, c)];
                }
                rhs[n + r] = p.eq_b[row];
            }
            for (k, &row) in active.iter().enumerate() {
                let r = p.eq_a.nrows() + k;
                for c in 0..n {
                    kkt[(n + r, c)] = p.ineq_a[(row, c)];
                    kkt[(c, n + r)] = p.ineq_a[(row, c)];
                }
                rhs[n + r] = p.ineq_b[row];
            }
            let Some(solution) = kkt.lu().solve(&rhs) else {
                continue;
            };
            let x = solution.rows(0, n).into_owned();
            // multipliers of the stationarity written as Hx + g + Aᵀλ = 0
            let mu = solution.rows(n + p.eq_a.nrows(), active.len()).into_owned();
            if mu.iter().any(|m| *m < -1e-8) {
                continue;
            }
            let viol = max_ineq_violation(p, &x);
            if viol > 1e-8 {
                continue;
            }
            let value = 0.5 * x.dot(&(p.hessian * &x)) + p.gradient.dot(&x);
            if best.as_ref().map(|(v, _)| value < v - 1e-12).unwrap_or(true) {
                best = Some((value, x));
            }
        }
        best.map(|(_, x)| x)
    }

    #[test]
    fn matches_exhaustive_enumeration_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for case in 0..100 {
            let n = rng.gen_range(2..=5);
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
            let g = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            // two random box rows
            let mut in_a = DMatrix::zeros(2, n);
            let mut in_b = DVector::zeros(2);
            for r in 0..2 {
                let comp = rng.gen_range(0..n);
                let sign: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                in_a[(r, comp)] = sign;
                in_b[r] = rng.gen_range(-0.5..0.5);
            }
            let (eq_a, eq_b) = empty_rows(n);
            let p = QpProblem {
                hessian: &h,
                gradient: &g,
                eq_a: &eq_a,
                eq_b: &eq_b,
                ineq_a: &in_a,
                ineq_b: &in_b,
            };
            let Some(expected) = brute_force(&p) else {
                continue;
            };
            let sol = solve_qp(&p, None, &[], 100);
            assert_eq!(sol.status, QpStatus::Optimal, "case {case}");
            assert_relative_eq!(sol.x, expected, epsilon = 1e-7);
        }
    }

    #[test]
    fn kkt_conditions_hold_on_random_constrained_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..50 {
            let n = rng.gen_range(2..=6);
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &m * m.transpose() + DMatrix::identity(n, n);
            let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
            // anchor the constraints on a random interior point so the
            // problem is feasible by construction
            let anchor = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let eq_a = DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
            let eq_b = DVector::from_element(1, (eq_a.row(0) * &anchor)[0]);
            let in_a = DMatrix::from_fn(3, n, |_, _| rng.gen_range(-1.0..1.0));
            let in_b = DVector::from_fn(3, |i, _| {
                (in_a.row(i) * &anchor)[0] + rng.gen_range(0.1..1.0)
            });
            let p = QpProblem {
                hessian: &h,
                gradient: &g,
                eq_a: &eq_a,
                eq_b: &eq_b,
                ineq_a: &in_a,
                ineq_b: &in_b,
            };
            let sol = solve_qp(&p, None, &[], 200);
            assert_eq!(sol.status, QpStatus::Optimal);
            // stationarity
            let grad = &h * &sol.x + &g;
            let mut residual = grad.clone();
            residual += eq_a.transpose() * &sol.eq_multipliers;
            residual += in_a.transpose() * &sol.ineq_multipliers;
            assert!(residual.amax() < 1e-7, "stationarity {}", residual.amax());
            // primal feasibility
            assert!((&eq_a * &sol.x - &eq_b).amax() < 1e-8);
            assert!(max_ineq_violation(&p, &sol.x) < 1e-8);
            // complementarity
            for i in 0..3 {
                let slack = in_b[i] - (in_a.row(i) * &sol.x)[0];
                assert!(sol.ineq_multipliers[i] * slack < 1e-7);
            }
        }
    }
}

