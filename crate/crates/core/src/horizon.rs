//! Horizon plans: how the prediction horizon is segmented, which model and
//! sampling time each segment uses, and how cost weights are adapted when
//! the sampling time grows.
//!
//! Four schemes are encoded as plans over one or two segments:
//!
//! * `standard`  — one detailed segment.
//! * `granular`  — detailed segment followed by a coarse segment at the
//!   same sampling time, linked by the projection.
//! * `nush`      — detailed model in both segments, larger sampling time in
//!   the second, weights scaled by the sampling-time ratio.
//! * `proposed`  — detailed segment ending in a control-invariant set,
//!   then a coarse segment at a larger sampling time with adapted weights.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{
    make_coarse_model, make_detailed_model, BoxSet, ControlInvariantSet, EllipsoidObstacle,
    LinearModel, ModelKind, ProjectionMap,
};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Quadratic stage/terminal cost `(x − x_ref)ᵀ Q (x − x_ref) + uᵀ R u`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x_ref: DVector<f64>,
}

fn check_psd(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: name,
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let sym_err = (m - m.transpose()).abs().max();
    if sym_err > 1e-10 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("matrix must be symmetric (asymmetry {sym_err:.2e})"),
        });
    }
    let eigs = m.clone().symmetric_eigen().eigenvalues;
    if eigs.iter().any(|e| *e < -1e-10) {
        return Err(Error::InvalidParameter {
            name,
            reason: "matrix must be positive semidefinite".into(),
        });
    }
    Ok(())
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, x_ref: DVector<f64>) -> Result<Self> {
        check_psd(&q, "Q")?;
        check_psd(&r, "R")?;
        if x_ref.len() != q.nrows() {
            return Err(Error::DimensionMismatch {
                context: "cost reference",
                expected: q.nrows(),
                actual: x_ref.len(),
            });
        }
        Ok(Self { q, r, x_ref })
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r.nrows()
    }
}

/// Scale weights by the ratio of a segment's sampling time to the base
/// sampling time, so sparser segments are penalized as heavily per unit of
/// covered time as dense ones.
pub fn adapt_weights(
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    dt_j: f64,
    dt_1: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if dt_j <= 0.0 || !dt_j.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt_j",
            reason: format!("sampling time must be positive, got {dt_j}"),
        });
    }
    if dt_1 <= 0.0 || !dt_1.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt_1",
            reason: format!("sampling time must be positive, got {dt_1}"),
        });
    }
    let ratio = dt_j / dt_1;
    Ok((q * ratio, r * ratio))
}

/// Evaluate the stage cost of a state/input pair.
pub fn stage_cost(cost: &QuadraticCost, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    if x.len() != cost.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "stage cost state",
            expected: cost.state_dim(),
            actual: x.len(),
        });
    }
    if u.len() != cost.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "stage cost input",
            expected: cost.input_dim(),
            actual: u.len(),
        });
    }
    let dx = x - &cost.x_ref;
    Ok((dx.transpose() * &cost.q * &dx)[(0, 0)] + (u.transpose() * &cost.r * u)[(0, 0)])
}

/// Evaluate the terminal cost of a state (the stage cost with no input term).
pub fn terminal_cost(cost: &QuadraticCost, x: &DVector<f64>) -> Result<f64> {
    if x.len() != cost.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "terminal cost state",
            expected: cost.state_dim(),
            actual: x.len(),
        });
    }
    let dx = x - &cost.x_ref;
    Ok((dx.transpose() * &cost.q * &dx)[(0, 0)])
}

/// Constraint and cost applied at the final state of a segment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TerminalSpec {
    pub ci: Option<ControlInvariantSet>,
    pub cost: Option<QuadraticCost>,
}

/// One horizon segment: a model run for `steps` steps under box, obstacle
/// and cost definitions, optionally closed off by a terminal set/cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub model: LinearModel,
    pub steps: usize,
    pub state_box: BoxSet,
    pub input_box: BoxSet,
    pub obstacles: Vec<EllipsoidObstacle>,
    pub cost: QuadraticCost,
    pub terminal: Option<TerminalSpec>,
}

impl Segment {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter {
                name: "segment_steps",
                reason: "a segment needs at least one step".into(),
            });
        }
        let n_x = self.model.state_dim();
        let n_u = self.model.input_dim();
        if self.cost.state_dim() != n_x || self.cost.input_dim() != n_u {
            return Err(Error::DimensionMismatch {
                context: "segment cost",
                expected: n_x,
                actual: self.cost.state_dim(),
            });
        }
        if self.state_box.dim() != n_x {
            return Err(Error::DimensionMismatch {
                context: "segment state box",
                expected: n_x,
                actual: self.state_box.dim(),
            });
        }
        if self.input_box.dim() != n_u {
            return Err(Error::DimensionMismatch {
                context: "segment input box",
                expected: n_u,
                actual: self.input_box.dim(),
            });
        }
        if let Some(term) = &self.terminal {
            if let Some(ci) = &term.ci {
                if ci.state_dim() != n_x {
                    return Err(Error::DimensionMismatch {
                        context: "terminal CI set",
                        expected: n_x,
                        actual: ci.state_dim(),
                    });
                }
            }
            if let Some(cost) = &term.cost {
                if cost.state_dim() != n_x {
                    return Err(Error::DimensionMismatch {
                        context: "terminal cost",
                        expected: n_x,
                        actual: cost.state_dim(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Scheme family tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Standard,
    Granular,
    Nush,
    Proposed,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeKind::Standard => write!(f, "standard"),
            SchemeKind::Granular => write!(f, "granular"),
            SchemeKind::Nush => write!(f, "nush"),
            SchemeKind::Proposed => write!(f, "proposed"),
        }
    }
}

/// A scheme identifier, optionally carrying per-scheme horizon overrides:
/// `standard`, `standard-13`, `standard-8@0.4`, `granular`, `nush`,
/// `proposed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    /// Step-count override for the standard scheme.
    pub horizon: Option<usize>,
    /// Sampling-time override for the standard scheme.
    pub dt: Option<f64>,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            horizon: None,
            dt: None,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::Validation {
            key: "scheme".into(),
            reason,
        };
        match s {
            "granular" => return Ok(Self::new(SchemeKind::Granular)),
            "nush" => return Ok(Self::new(SchemeKind::Nush)),
            "proposed" => return Ok(Self::new(SchemeKind::Proposed)),
            "standard" => return Ok(Self::new(SchemeKind::Standard)),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("standard-") {
            let (steps_str, dt) = match rest.split_once('@') {
                Some((steps, dt_str)) => {
                    let dt: f64 = dt_str
                        .parse()
                        .map_err(|_| bad(format!("invalid sampling time in `{s}`")))?;
                    if dt <= 0.0 {
                        return Err(bad(format!("sampling time must be positive in `{s}`")));
                    }
                    (steps, Some(dt))
                }
                None => (rest, None),
            };
            let horizon: usize = steps_str
                .parse()
                .map_err(|_| bad(format!("invalid horizon length in `{s}`")))?;
            if horizon == 0 {
                return Err(bad(format!("horizon must be at least 1 in `{s}`")));
            }
            return Ok(Self {
                kind: SchemeKind::Standard,
                horizon: Some(horizon),
                dt,
            });
        }
        Err(bad(format!(
            "unknown scheme tag `{s}` (expected standard[-N[@dt]], granular, nush, or proposed)"
        )))
    }

    /// Canonical identifier once resolved against a scenario.
    pub fn id(&self, scenario: &Scenario) -> String {
        match self.kind {
            SchemeKind::Standard => {
                let n = self.horizon.unwrap_or(scenario.n_standard);
                match self.dt {
                    Some(dt) if dt != scenario.dt1 => format!("standard-{n}@{dt}"),
                    _ => format!("standard-{n}"),
                }
            }
            other => other.to_string(),
        }
    }
}

/// A full horizon description: one or two segments, the projection linking
/// them, and the control-invariant set enforced at the end of the first
/// segment when the scheme requires it. The plant the closed loop steps is
/// carried alongside: predictions may run at a coarser sampling time than
/// the simulated system.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonPlan {
    pub scheme: SchemeKind,
    pub label: String,
    pub segments: Vec<Segment>,
    pub projection: Option<ProjectionMap>,
    pub boundary_ci: Option<ControlInvariantSet>,
    /// The simulated system: the detailed model at the base sampling time.
    pub plant: LinearModel,
}

impl HorizonPlan {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() || self.segments.len() > 2 {
            return Err(Error::InvalidParameter {
                name: "segments",
                reason: format!("a plan has 1 or 2 segments, got {}", self.segments.len()),
            });
        }
        for seg in &self.segments {
            seg.validate()?;
        }
        if self.segments.len() == 2 {
            let proj = self.projection.as_ref().ok_or(Error::InvalidParameter {
                name: "projection",
                reason: "a two-segment plan needs a projection map".into(),
            })?;
            let first = &self.segments[0];
            let second = &self.segments[1];
            let expected_domain = first.model.state_dim() + first.model.input_dim();
            if proj.domain_dim() != expected_domain {
                return Err(Error::DimensionMismatch {
                    context: "projection domain",
                    expected: expected_domain,
                    actual: proj.domain_dim(),
                });
            }
            if proj.n_z != second.model.state_dim() || proj.n_v != second.model.input_dim() {
                return Err(Error::DimensionMismatch {
                    context: "projection image",
                    expected: second.model.state_dim() + second.model.input_dim(),
                    actual: proj.n_z + proj.n_v,
                });
            }
            if let Some(ci) = &self.boundary_ci {
                if ci.state_dim() != first.model.state_dim() {
                    return Err(Error::DimensionMismatch {
                        context: "boundary CI set",
                        expected: first.model.state_dim(),
                        actual: ci.state_dim(),
                    });
                }
            }
        }
        if self.plant.state_dim() != self.segments[0].model.state_dim()
            || self.plant.input_dim() != self.segments[0].model.input_dim()
        {
            return Err(Error::DimensionMismatch {
                context: "plant model",
                expected: self.segments[0].model.state_dim(),
                actual: self.plant.state_dim(),
            });
        }
        if self.scheme == SchemeKind::Proposed && self.boundary_ci.is_none() {
            return Err(Error::InvalidParameter {
                name: "boundary_ci",
                reason: "the proposed scheme requires a control-invariant set at the segment boundary"
                    .into(),
            });
        }
        Ok(())
    }

    /// Number of scalar input decisions in the optimal control problem. For
    /// two-segment plans the boundary input counts even though it carries no
    /// cost: it is needed to evaluate the projection.
    pub fn count_decision_variables(&self) -> usize {
        let first = &self.segments[0];
        let n_u = first.model.input_dim();
        match self.segments.len() {
            1 => first.steps * n_u,
            _ => {
                let second = &self.segments[1];
                (first.steps + 1) * n_u + second.steps * second.model.input_dim()
            }
        }
    }

    /// Total time covered by the horizon.
    pub fn horizon_span(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.steps as f64 * s.model.dt)
            .sum()
    }
}

fn detailed_ci(scenario: &Scenario) -> Result<ControlInvariantSet> {
    ControlInvariantSet::new(
        ModelKind::Detailed,
        true,
        BoxSet::new(
            vec![None, None, Some(scenario.ci_p_y[0]), None],
            vec![None, None, Some(scenario.ci_p_y[1]), None],
        )?,
    )
}

fn coarse_ci(scenario: &Scenario) -> Result<ControlInvariantSet> {
    ControlInvariantSet::new(
        ModelKind::Coarse,
        true,
        BoxSet::new(
            vec![None, Some(scenario.ci_p_y[0])],
            vec![None, Some(scenario.ci_p_y[1])],
        )?,
    )
}

fn detailed_cost(scenario: &Scenario) -> Result<QuadraticCost> {
    QuadraticCost::new(
        DMatrix::from_diagonal(&DVector::from_column_slice(&scenario.q_s)),
        DMatrix::from_diagonal(&DVector::from_column_slice(&scenario.r_s)),
        DVector::from_column_slice(&scenario.x_ref),
    )
}

fn coarse_cost(scenario: &Scenario) -> Result<QuadraticCost> {
    QuadraticCost::new(
        DMatrix::from_diagonal(&DVector::from_column_slice(&scenario.q_f)),
        DMatrix::from_diagonal(&DVector::from_column_slice(&scenario.r_f)),
        DVector::from_column_slice(&[scenario.x_ref[0], scenario.x_ref[2]]),
    )
}

/// Assemble the horizon plan for a scheme from scenario data.
pub fn build_plan(spec: &SchemeSpec, scenario: &Scenario) -> Result<HorizonPlan> {
    scenario.validate()?;
    let obstacles = scenario.obstacle_set()?;
    let x_box = scenario.detailed_state_box()?;
    let u_box = scenario.detailed_input_box()?;
    let z_box = scenario.coarse_state_box()?;
    let v_box = scenario.coarse_input_box()?;
    let l_s = detailed_cost(scenario)?;
    let v_s = QuadraticCost::new(l_s.q.clone(), DMatrix::zeros(2, 2), l_s.x_ref.clone())?;
    let plant = make_detailed_model(scenario.dt1, scenario.mass)?;

    let plan = match spec.kind {
        SchemeKind::Standard => {
            let steps = spec.horizon.unwrap_or(scenario.n_standard);
            let dt = spec.dt.unwrap_or(scenario.dt1);
            let model = make_detailed_model(dt, scenario.mass)?;
            HorizonPlan {
                scheme: SchemeKind::Standard,
                label: spec.id(scenario),
                segments: vec![Segment {
                    model,
                    steps,
                    state_box: x_box,
                    input_box: u_box,
                    obstacles,
                    cost: l_s,
                    terminal: Some(TerminalSpec {
                        ci: Some(detailed_ci(scenario)?),
                        cost: Some(v_s),
                    }),
                }],
                projection: None,
                boundary_ci: None,
                plant: plant.clone(),
            }
        }
        SchemeKind::Granular => {
            let model1 = make_detailed_model(scenario.dt1, scenario.mass)?;
            let model2 = make_coarse_model(scenario.dt1)?;
            let l_f = coarse_cost(scenario)?;
            let v_f = QuadraticCost::new(l_f.q.clone(), DMatrix::zeros(2, 2), l_f.x_ref.clone())?;
            HorizonPlan {
                scheme: SchemeKind::Granular,
                label: spec.id(scenario),
                segments: vec![
                    Segment {
                        model: model1,
                        steps: scenario.k_s,
                        state_box: x_box,
                        input_box: u_box,
                        obstacles: obstacles.clone(),
                        cost: l_s,
                        terminal: Some(TerminalSpec {
                            ci: None,
                            cost: Some(v_s),
                        }),
                    },
                    Segment {
                        model: model2,
                        steps: scenario.granular_coarse_steps,
                        state_box: z_box,
                        input_box: v_box,
                        obstacles,
                        cost: l_f,
                        terminal: Some(TerminalSpec {
                            ci: Some(coarse_ci(scenario)?),
                            cost: Some(v_f),
                        }),
                    },
                ],
                projection: Some(ProjectionMap::position_velocity()),
                boundary_ci: None,
                plant: plant.clone(),
            }
        }
        SchemeKind::Nush => {
            let model1 = make_detailed_model(scenario.dt1, scenario.mass)?;
            let model2 = make_detailed_model(scenario.dt2, scenario.mass)?;
            let (q2, r2) = adapt_weights(&l_s.q, &l_s.r, scenario.dt2, scenario.dt1)?;
            let l2 = QuadraticCost::new(q2, r2, l_s.x_ref.clone())?;
            HorizonPlan {
                scheme: SchemeKind::Nush,
                label: spec.id(scenario),
                segments: vec![
                    Segment {
                        model: model1,
                        steps: scenario.k_s,
                        state_box: x_box.clone(),
                        input_box: u_box.clone(),
                        obstacles: obstacles.clone(),
                        cost: l_s,
                        terminal: None,
                    },
                    Segment {
                        model: model2,
                        steps: scenario.coarse_steps,
                        state_box: x_box,
                        input_box: u_box,
                        obstacles,
                        cost: l2,
                        terminal: Some(TerminalSpec {
                            ci: Some(detailed_ci(scenario)?),
                            cost: Some(v_s),
                        }),
                    },
                ],
                projection: Some(ProjectionMap::identity(4, 2)),
                boundary_ci: None,
                plant: plant.clone(),
            }
        }
        SchemeKind::Proposed => {
            let model1 = make_detailed_model(scenario.dt1, scenario.mass)?;
            let model2 = make_coarse_model(scenario.dt2)?;
            let l_f = coarse_cost(scenario)?;
            let (q2, r2) = adapt_weights(&l_f.q, &l_f.r, scenario.dt2, scenario.dt1)?;
            let l2 = QuadraticCost::new(q2, r2, l_f.x_ref.clone())?;
            let v_f = QuadraticCost::new(l_f.q.clone(), DMatrix::zeros(2, 2), l_f.x_ref.clone())?;
            HorizonPlan {
                scheme: SchemeKind::Proposed,
                label: spec.id(scenario),
                segments: vec![
                    Segment {
                        model: model1,
                        steps: scenario.k_s,
                        state_box: x_box,
                        input_box: u_box,
                        obstacles: obstacles.clone(),
                        cost: l_s,
                        terminal: Some(TerminalSpec {
                            ci: None,
                            cost: Some(v_s),
                        }),
                    },
                    Segment {
                        model: model2,
                        steps: scenario.coarse_steps,
                        state_box: z_box,
                        input_box: v_box,
                        obstacles,
                        cost: l2,
                        terminal: Some(TerminalSpec {
                            ci: Some(coarse_ci(scenario)?),
                            cost: Some(v_f),
                        }),
                    },
                ],
                projection: Some(ProjectionMap::position_velocity()),
                boundary_ci: Some(detailed_ci(scenario)?),
                plant: plant.clone(),
            }
        }
    };
    plan.validate()?;
    Ok(plan)
}
