//! System models, the projection linking them, and constraint-set predicates.
//!
//! Two linear discrete-time models describe the same planar robot at
//! different levels of detail. The detailed model is a force-driven double
//! integrator with state `[p_x, v_x, p_y, v_y]`; the coarse model is a
//! velocity-driven single integrator with state `[p_x, p_y]`. A projection
//! matrix maps detailed state/input pairs onto coarse ones, which is what
//! lets a prediction horizon switch models midway.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default membership tolerance for control-invariant sets. Solver equality
/// constraints are only satisfied to tolerance, so exact comparisons would
/// reject states produced by a converged solve.
pub const CI_TOLERANCE: f64 = 1e-6;

/// State of the detailed model: positions and velocities in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailedState {
    pub p_x: f64,
    pub v_x: f64,
    pub p_y: f64,
    pub v_y: f64,
}

impl DetailedState {
    pub fn new(p_x: f64, v_x: f64, p_y: f64, v_y: f64) -> Result<Self> {
        let s = Self { p_x, v_x, p_y, v_y };
        if !s.as_vector().iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "detailed_state",
                reason: "all components must be finite".into(),
            });
        }
        Ok(s)
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.p_x, self.v_x, self.p_y, self.v_y])
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != 4 {
            return Err(Error::DimensionMismatch {
                context: "detailed state",
                expected: 4,
                actual: v.len(),
            });
        }
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Input of the detailed model: forces in x and y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailedInput {
    pub f_x: f64,
    pub f_y: f64,
}

impl DetailedInput {
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.f_x, self.f_y])
    }
}

/// State of the coarse model: positions only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseState {
    pub p_x: f64,
    pub p_y: f64,
}

impl CoarseState {
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.p_x, self.p_y])
    }
}

/// Input of the coarse model: velocities in x and y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseInput {
    pub v_x: f64,
    pub v_y: f64,
}

impl CoarseInput {
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.v_x, self.v_y])
    }
}

/// Which of the two model families a `LinearModel` belongs to. Decides how
/// positions and velocities are read out of a state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Detailed,
    Coarse,
}

impl ModelKind {
    /// Indices of the planar position (x, y) inside a state vector.
    pub fn position_indices(&self) -> [usize; 2] {
        match self {
            ModelKind::Detailed => [0, 2],
            ModelKind::Coarse => [0, 1],
        }
    }

    /// Indices of velocity components inside a state vector. Empty for the
    /// coarse model, whose velocities are inputs.
    pub fn velocity_indices(&self) -> &'static [usize] {
        match self {
            ModelKind::Detailed => &[1, 3],
            ModelKind::Coarse => &[],
        }
    }
}

/// Discrete-time linear dynamics `x⁺ = A x + B u` with its sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub dt: f64,
    pub kind: ModelKind,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, dt: f64, kind: ModelKind) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("sampling time must be positive, got {dt}"),
            });
        }
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "state matrix A",
                expected: a.nrows(),
                actual: a.ncols(),
            });
        }
        if b.nrows() != a.nrows() {
            return Err(Error::DimensionMismatch {
                context: "input matrix B rows",
                expected: a.nrows(),
                actual: b.nrows(),
            });
        }
        Ok(Self { a, b, dt, kind })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Build the detailed point-mass model for a sampling time and mass:
/// positions integrate velocities, velocities integrate force over mass.
pub fn make_detailed_model(dt: f64, mass: f64) -> Result<LinearModel> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("sampling time must be positive, got {dt}"),
        });
    }
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mass",
            reason: format!("mass must be positive, got {mass}"),
        });
    }
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, dt, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, dt, //
            0.0, 0.0, 0.0, 1.0,
        ],
    );
    let g = dt / mass;
    let b = DMatrix::from_row_slice(
        4,
        2,
        &[
            0.0, 0.0, //
            g, 0.0, //
            0.0, 0.0, //
            0.0, g,
        ],
    );
    LinearModel::new(a, b, dt, ModelKind::Detailed)
}

/// Build the coarse single-integrator model: positions integrate the
/// commanded velocities.
pub fn make_coarse_model(dt: f64) -> Result<LinearModel> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("sampling time must be positive, got {dt}"),
        });
    }
    let a = DMatrix::identity(2, 2);
    let b = DMatrix::from_diagonal(&DVector::from_element(2, dt));
    LinearModel::new(a, b, dt, ModelKind::Coarse)
}

/// One step of the dynamics: `A x + B u`.
pub fn step(model: &LinearModel, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "step state",
            expected: model.state_dim(),
            actual: x.len(),
        });
    }
    if u.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "step input",
            expected: model.input_dim(),
            actual: u.len(),
        });
    }
    Ok(&model.a * x + &model.b * u)
}

/// Surjective linear map from stacked detailed `(x, u)` to stacked coarse
/// `(z, v)`. The first `n_z` rows produce the coarse state, the remaining
/// `n_v` rows the coarse input.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMap {
    pub matrix: DMatrix<f64>,
    pub n_z: usize,
    pub n_v: usize,
}

impl ProjectionMap {
    pub fn new(matrix: DMatrix<f64>, n_z: usize, n_v: usize) -> Result<Self> {
        if matrix.nrows() != n_z + n_v {
            return Err(Error::DimensionMismatch {
                context: "projection rows",
                expected: n_z + n_v,
                actual: matrix.nrows(),
            });
        }
        let rank = matrix.clone().svd(false, false).rank(1e-10);
        if rank != n_z + n_v {
            return Err(Error::InvalidParameter {
                name: "projection",
                reason: format!("matrix must be surjective (rank {}), got rank {rank}", n_z + n_v),
            });
        }
        Ok(Self { matrix, n_z, n_v })
    }

    /// The built-in map between the two point-mass models: the coarse state
    /// takes the detailed positions, the coarse input takes the detailed
    /// velocities. Detailed forces are not selected.
    pub fn position_velocity() -> Self {
        let matrix = DMatrix::from_row_slice(
            4,
            6,
            &[
                1.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
            ],
        );
        Self { matrix, n_z: 2, n_v: 2 }
    }

    /// Identity link for plans whose long segment keeps the detailed model:
    /// the "coarse" state and input are the detailed ones unchanged.
    pub fn identity(n_x: usize, n_u: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n_x + n_u, n_x + n_u),
            n_z: n_x,
            n_v: n_u,
        }
    }

    pub fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Apply the map to raw vectors, splitting the image into (z, v).
    pub fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if x.len() + u.len() != self.domain_dim() {
            return Err(Error::DimensionMismatch {
                context: "projection domain",
                expected: self.domain_dim(),
                actual: x.len() + u.len(),
            });
        }
        let mut stacked = DVector::zeros(self.domain_dim());
        stacked.rows_mut(0, x.len()).copy_from(x);
        stacked.rows_mut(x.len(), u.len()).copy_from(u);
        let image = &self.matrix * stacked;
        let z = image.rows(0, self.n_z).into_owned();
        let v = image.rows(self.n_z, self.n_v).into_owned();
        Ok((z, v))
    }
}

/// Project a detailed state/input pair through the built-in map.
pub fn project(
    map: &ProjectionMap,
    x: &DetailedState,
    u: &DetailedInput,
) -> Result<(CoarseState, CoarseInput)> {
    let (z, v) = map.apply(&x.as_vector(), &u.as_vector())?;
    if z.len() != 2 || v.len() != 2 {
        return Err(Error::DimensionMismatch {
            context: "projection image",
            expected: 2,
            actual: z.len(),
        });
    }
    Ok((
        CoarseState { p_x: z[0], p_y: z[1] },
        CoarseInput { v_x: v[0], v_y: v[1] },
    ))
}

/// Axis-aligned box with optionally unbounded components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl BoxSet {
    pub fn new(lower: Vec<Option<f64>>, upper: Vec<Option<f64>>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if let (Some(l), Some(h)) = (lo, hi) {
                if l > h {
                    return Err(Error::InvalidParameter {
                        name: "box",
                        reason: format!("component {i} has lower {l} > upper {h}"),
                    });
                }
            }
        }
        Ok(Self { lower, upper })
    }

    /// Fully unbounded box of the given dimension.
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![None; dim],
            upper: vec![None; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Positive overshoots per component; empty iff the vector is inside.
    pub fn violations(&self, vec: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
        if vec.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "box membership",
                expected: self.dim(),
                actual: vec.len(),
            });
        }
        let mut out = Vec::new();
        for i in 0..self.dim() {
            if let Some(l) = self.lower[i] {
                if vec[i] < l {
                    out.push((i, l - vec[i]));
                }
            }
            if let Some(h) = self.upper[i] {
                if vec[i] > h {
                    out.push((i, vec[i] - h));
                }
            }
        }
        Ok(out)
    }

    pub fn contains(&self, vec: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.violations(vec)?.iter().all(|(_, amount)| *amount <= tol))
    }

    /// Componentwise intersection with another box of the same dimension.
    pub fn intersect(&self, other: &BoxSet) -> Result<BoxSet> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "box intersection",
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let merge_lo = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        };
        let merge_hi = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) => x,
            (None, y) => y,
        };
        BoxSet::new(
            self.lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| merge_lo(*a, *b))
                .collect(),
            self.upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| merge_hi(*a, *b))
                .collect(),
        )
    }
}

/// Convenience: list of per-component positive overshoots outside a box.
pub fn box_violations(set: &BoxSet, vec: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
    set.violations(vec)
}

/// Elliptical obstacle; points must stay on or outside its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidObstacle {
    /// Semi-axis along x.
    pub a: f64,
    /// Semi-axis along y.
    pub b: f64,
    /// Center x.
    pub cx: f64,
    /// Center y.
    pub cy: f64,
}

impl EllipsoidObstacle {
    pub fn new(a: f64, b: f64, cx: f64, cy: f64) -> Result<Self> {
        if a <= 0.0 || b <= 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter {
                name: "obstacle",
                reason: format!("semi-axes must be positive, got a={a}, b={b}"),
            });
        }
        Ok(Self { a, b, cx, cy })
    }

    /// Signed clearance: negative inside the ellipse, zero on the boundary,
    /// positive outside. Avoidance requires `margin ≥ 0`.
    pub fn margin(&self, px: f64, py: f64) -> f64 {
        let dx = (px - self.cx) / self.a;
        let dy = (py - self.cy) / self.b;
        dx * dx + dy * dy - 1.0
    }
}

/// Signed obstacle clearance at a planar point.
pub fn ellipse_margin(obs: &EllipsoidObstacle, px: f64, py: f64) -> f64 {
    obs.margin(px, py)
}

/// Control-invariant set: require zero velocity (a standstill, which the
/// zero input holds forever) together with a position box.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInvariantSet {
    pub kind: ModelKind,
    /// Enforce equality-to-zero on the model's velocity components.
    pub zero_velocity: bool,
    /// Box over the full state vector; non-position components are normally
    /// left unbounded.
    pub position_box: BoxSet,
}

impl ControlInvariantSet {
    pub fn new(kind: ModelKind, zero_velocity: bool, position_box: BoxSet) -> Result<Self> {
        for (lo, hi) in position_box.lower.iter().zip(&position_box.upper) {
            if let (Some(l), Some(h)) = (lo, hi) {
                if l > h {
                    return Err(Error::InvalidParameter {
                        name: "control_invariant_set",
                        reason: "position box is empty".into(),
                    });
                }
            }
        }
        Ok(Self {
            kind,
            zero_velocity,
            position_box,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.position_box.dim()
    }
}

/// Membership test with tolerance on both the velocity equalities and the
/// position box.
pub fn in_ci_set(ci: &ControlInvariantSet, state: &DVector<f64>, tol: f64) -> Result<bool> {
    if state.len() != ci.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "CI membership",
            expected: ci.state_dim(),
            actual: state.len(),
        });
    }
    if tol < 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "tolerance must be nonnegative".into(),
        });
    }
    if ci.zero_velocity {
        for &i in ci.kind.velocity_indices() {
            if state[i].abs() > tol {
                return Ok(false);
            }
        }
    }
    ci.position_box.contains(state, tol)
}

/// An input that keeps a CI-set member inside the set for one more step.
/// For the standstill sets used here that input is zero: the detailed model
/// holds a zero-velocity state exactly, and the coarse model holds any state
/// under zero commanded velocity.
pub fn ci_holding_input(
    ci: &ControlInvariantSet,
    model: &LinearModel,
    state: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !in_ci_set(ci, state, CI_TOLERANCE)? {
        return Err(Error::Infeasible(format!(
            "state {:?} is not in the control-invariant set",
            state.as_slice()
        )));
    }
    Ok(DVector::zeros(model.input_dim()))
}
