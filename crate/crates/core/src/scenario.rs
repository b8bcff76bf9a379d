//! Benchmark scenario description: models, horizons, constraint bounds,
//! obstacles, cost weights, and solver settings in one serializable record.
//!
//! The default value reproduces the built-in obstacle-avoidance study: a
//! 0.5 kg planar point mass driven from the origin to (20, 0) past two
//! overlapping elliptical obstacles, with a 10-step detailed horizon at
//! 0.2 s and, for the two-segment schemes, a coarse extension. All
//! quantities are SI.

use serde::{Deserialize, Serialize};

use crate::dynamics::{BoxSet, EllipsoidObstacle};
use crate::error::{Error, Result};
use crate::horizon::SchemeSpec;
use crate::nlp::SolverConfig;

/// Bounds written as `[lower, upper]` pairs with `null` for unbounded ends.
pub type Bound = [Option<f64>; 2];

fn bounded(lo: f64, hi: f64) -> Bound {
    [Some(lo), Some(hi)]
}

const UNBOUNDED: Bound = [None, None];

/// Per-component bounds of the detailed state `[p_x, v_x, p_y, v_y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailedBounds {
    pub p_x: Bound,
    pub v_x: Bound,
    pub p_y: Bound,
    pub v_y: Bound,
}

impl Default for DetailedBounds {
    fn default() -> Self {
        Self {
            p_x: UNBOUNDED,
            v_x: bounded(-3.0, 3.0),
            p_y: bounded(-5.0, 5.0),
            v_y: bounded(-3.0, 3.0),
        }
    }
}

/// Per-component bounds of the detailed input `[F_x, F_y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub f_x: Bound,
    pub f_y: Bound,
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            f_x: bounded(-3.0, 3.0),
            f_y: bounded(-0.5, 0.5),
        }
    }
}

/// Per-component bounds of the coarse state `[p_x, p_y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseBounds {
    pub p_x: Bound,
    pub p_y: Bound,
}

impl Default for CoarseBounds {
    fn default() -> Self {
        Self {
            p_x: UNBOUNDED,
            p_y: bounded(-5.0, 5.0),
        }
    }
}

/// Per-component bounds of the coarse input `[v_x, v_y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseInputBounds {
    pub v_x: Bound,
    pub v_y: Bound,
}

impl Default for CoarseInputBounds {
    fn default() -> Self {
        Self {
            v_x: bounded(-3.0, 3.0),
            v_y: bounded(-3.0, 3.0),
        }
    }
}

/// Which warm-start candidates the closed loop hands to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedPolicy {
    /// Shifted previous solution only.
    #[serde(rename = "warm")]
    Warm,
    /// Shifted previous solution plus its y-reflection, so the solver can
    /// switch between passing above or below an obstacle when that lowers
    /// the objective.
    #[serde(rename = "warm+reflect")]
    WarmReflect,
}

impl std::fmt::Display for SeedPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeedPolicy::Warm => write!(f, "warm"),
            SeedPolicy::WarmReflect => write!(f, "warm+reflect"),
        }
    }
}

impl std::str::FromStr for SeedPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warm" => Ok(SeedPolicy::Warm),
            "warm+reflect" => Ok(SeedPolicy::WarmReflect),
            other => Err(Error::Validation {
                key: "seed_policy".into(),
                reason: format!("unknown seed policy `{other}` (expected `warm` or `warm+reflect`)"),
            }),
        }
    }
}

fn default_version() -> u32 {
    1
}
fn default_mass() -> f64 {
    0.5
}
fn default_dt1() -> f64 {
    0.2
}
fn default_dt2() -> f64 {
    0.4
}
fn default_n_standard() -> usize {
    10
}
fn default_k_s() -> usize {
    10
}
fn default_coarse_steps() -> usize {
    3
}
fn default_granular_coarse_steps() -> usize {
    6
}
fn default_obstacles() -> Vec<EllipsoidObstacle> {
    vec![
        EllipsoidObstacle {
            a: 1.5,
            b: 1.5,
            cx: 10.0,
            cy: -0.1,
        },
        EllipsoidObstacle {
            a: 5.0,
            b: 1.4,
            cx: 15.2,
            cy: 1.3,
        },
    ]
}
fn default_ci_p_y() -> [f64; 2] {
    [-5.0, 5.0]
}
fn default_q_s() -> [f64; 4] {
    [1.0, 0.0, 5.0, 0.0]
}
fn default_r_s() -> [f64; 2] {
    [0.1, 0.1]
}
fn default_q_f() -> [f64; 2] {
    [1.0, 5.0]
}
fn default_r_f() -> [f64; 2] {
    [0.01, 0.01]
}
fn default_x_ref() -> [f64; 4] {
    [20.0, 0.0, 0.0, 0.0]
}
fn default_x0() -> [f64; 4] {
    [0.0, 0.0, 0.0, 0.0]
}
fn default_steps() -> usize {
    50
}
fn default_schemes() -> Vec<String> {
    vec![
        "standard-10".into(),
        "standard-13".into(),
        "standard-16".into(),
        "standard-8@0.4".into(),
        "nush".into(),
        "granular".into(),
        "proposed".into(),
    ]
}
fn default_seed_policy() -> SeedPolicy {
    SeedPolicy::WarmReflect
}

/// Complete benchmark configuration. Every field has a default, so an empty
/// JSON object parses to the built-in study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_dt1")]
    pub dt1: f64,
    #[serde(default = "default_dt2")]
    pub dt2: f64,
    /// Horizon of the standard scheme when no override is given.
    #[serde(default = "default_n_standard")]
    pub n_standard: usize,
    /// Detailed (short-term) segment length of the two-segment schemes.
    #[serde(default = "default_k_s")]
    pub k_s: usize,
    /// Second-segment length for the proposed and nush schemes.
    #[serde(default = "default_coarse_steps")]
    pub coarse_steps: usize,
    /// Second-segment length for the granular scheme.
    #[serde(default = "default_granular_coarse_steps")]
    pub granular_coarse_steps: usize,
    #[serde(default)]
    pub detailed_state_bounds: DetailedBounds,
    #[serde(default)]
    pub input_bounds: InputBounds,
    #[serde(default)]
    pub coarse_state_bounds: CoarseBounds,
    #[serde(default)]
    pub coarse_input_bounds: CoarseInputBounds,
    #[serde(default = "default_obstacles")]
    pub obstacles: Vec<EllipsoidObstacle>,
    /// Position band of the control-invariant sets (bounds on p_y).
    #[serde(default = "default_ci_p_y")]
    pub ci_p_y: [f64; 2],
    /// Diagonal of the detailed state weight.
    #[serde(default = "default_q_s")]
    pub q_s: [f64; 4],
    /// Diagonal of the detailed input weight.
    #[serde(default = "default_r_s")]
    pub r_s: [f64; 2],
    /// Diagonal of the coarse state weight.
    #[serde(default = "default_q_f")]
    pub q_f: [f64; 2],
    /// Diagonal of the coarse input weight.
    #[serde(default = "default_r_f")]
    pub r_f: [f64; 2],
    #[serde(default = "default_x_ref")]
    pub x_ref: [f64; 4],
    #[serde(default = "default_x0")]
    pub x0: [f64; 4],
    /// Closed-loop simulation length.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Schemes run by the comparison when none are requested explicitly.
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seed_policy")]
    pub seed_policy: SeedPolicy,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            version: default_version(),
            mass: default_mass(),
            dt1: default_dt1(),
            dt2: default_dt2(),
            n_standard: default_n_standard(),
            k_s: default_k_s(),
            coarse_steps: default_coarse_steps(),
            granular_coarse_steps: default_granular_coarse_steps(),
            detailed_state_bounds: DetailedBounds::default(),
            input_bounds: InputBounds::default(),
            coarse_state_bounds: CoarseBounds::default(),
            coarse_input_bounds: CoarseInputBounds::default(),
            obstacles: default_obstacles(),
            ci_p_y: default_ci_p_y(),
            q_s: default_q_s(),
            r_s: default_r_s(),
            q_f: default_q_f(),
            r_f: default_r_f(),
            x_ref: default_x_ref(),
            x0: default_x0(),
            steps: default_steps(),
            schemes: default_schemes(),
            solver: SolverConfig::default(),
            seed_policy: default_seed_policy(),
        }
    }
}

fn check_bound(key: &str, bound: &Bound) -> Result<()> {
    if let [Some(lo), Some(hi)] = bound {
        if lo > hi {
            return Err(Error::Validation {
                key: key.into(),
                reason: format!("lower bound {lo} exceeds upper bound {hi}"),
            });
        }
    }
    for end in bound.iter().flatten() {
        if !end.is_finite() {
            return Err(Error::Validation {
                key: key.into(),
                reason: "bounds must be finite or null".into(),
            });
        }
    }
    Ok(())
}

fn check_positive(key: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Validation {
            key: key.into(),
            reason: format!("must be positive, got {value}"),
        });
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::Validation {
                key: "version".into(),
                reason: format!("unsupported version {}", self.version),
            });
        }
        check_positive("mass", self.mass)?;
        check_positive("dt1", self.dt1)?;
        check_positive("dt2", self.dt2)?;
        for (key, steps) in [
            ("n_standard", self.n_standard),
            ("k_s", self.k_s),
            ("coarse_steps", self.coarse_steps),
            ("granular_coarse_steps", self.granular_coarse_steps),
            ("steps", self.steps),
        ] {
            if steps == 0 {
                return Err(Error::Validation {
                    key: key.into(),
                    reason: "must be at least 1".into(),
                });
            }
        }
        check_bound("detailed_state_bounds.p_x", &self.detailed_state_bounds.p_x)?;
        check_bound("detailed_state_bounds.v_x", &self.detailed_state_bounds.v_x)?;
        check_bound("detailed_state_bounds.p_y", &self.detailed_state_bounds.p_y)?;
        check_bound("detailed_state_bounds.v_y", &self.detailed_state_bounds.v_y)?;
        check_bound("input_bounds.f_x", &self.input_bounds.f_x)?;
        check_bound("input_bounds.f_y", &self.input_bounds.f_y)?;
        check_bound("coarse_state_bounds.p_x", &self.coarse_state_bounds.p_x)?;
        check_bound("coarse_state_bounds.p_y", &self.coarse_state_bounds.p_y)?;
        check_bound("coarse_input_bounds.v_x", &self.coarse_input_bounds.v_x)?;
        check_bound("coarse_input_bounds.v_y", &self.coarse_input_bounds.v_y)?;
        for (i, obs) in self.obstacles.iter().enumerate() {
            if obs.a <= 0.0 || obs.b <= 0.0 {
                return Err(Error::Validation {
                    key: format!("obstacles[{i}]"),
                    reason: format!("semi-axes must be positive, got a={}, b={}", obs.a, obs.b),
                });
            }
        }
        if self.ci_p_y[0] > self.ci_p_y[1] {
            return Err(Error::Validation {
                key: "ci_p_y".into(),
                reason: format!(
                    "band is empty: lower {} exceeds upper {}",
                    self.ci_p_y[0], self.ci_p_y[1]
                ),
            });
        }
        for (key, diag) in [
            ("q_s", &self.q_s[..]),
            ("r_s", &self.r_s[..]),
            ("q_f", &self.q_f[..]),
            ("r_f", &self.r_f[..]),
        ] {
            if diag.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::Validation {
                    key: key.into(),
                    reason: "weight diagonals must be finite and nonnegative".into(),
                });
            }
        }
        for (key, vec) in [("x_ref", &self.x_ref), ("x0", &self.x0)] {
            if vec.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation {
                    key: key.into(),
                    reason: "components must be finite".into(),
                });
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::Validation {
                key: "schemes".into(),
                reason: "at least one scheme is required".into(),
            });
        }
        for (i, scheme) in self.schemes.iter().enumerate() {
            SchemeSpec::parse(scheme).map_err(|e| Error::Validation {
                key: format!("schemes[{i}]"),
                reason: e.to_string(),
            })?;
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn detailed_state_box(&self) -> Result<BoxSet> {
        let b = &self.detailed_state_bounds;
        BoxSet::new(
            vec![b.p_x[0], b.v_x[0], b.p_y[0], b.v_y[0]],
            vec![b.p_x[1], b.v_x[1], b.p_y[1], b.v_y[1]],
        )
    }

    pub fn detailed_input_box(&self) -> Result<BoxSet> {
        let b = &self.input_bounds;
        BoxSet::new(vec![b.f_x[0], b.f_y[0]], vec![b.f_x[1], b.f_y[1]])
    }

    pub fn coarse_state_box(&self) -> Result<BoxSet> {
        let b = &self.coarse_state_bounds;
        BoxSet::new(vec![b.p_x[0], b.p_y[0]], vec![b.p_x[1], b.p_y[1]])
    }

    pub fn coarse_input_box(&self) -> Result<BoxSet> {
        let b = &self.coarse_input_bounds;
        BoxSet::new(vec![b.v_x[0], b.v_y[0]], vec![b.v_x[1], b.v_y[1]])
    }

    pub fn obstacle_set(&self) -> Result<Vec<EllipsoidObstacle>> {
        self.obstacles
            .iter()
            .map(|o| EllipsoidObstacle::new(o.a, o.b, o.cx, o.cy))
            .collect()
    }

    /// Scheme specs parsed from the scenario's scheme list.
    pub fn scheme_specs(&self) -> Result<Vec<SchemeSpec>> {
        self.schemes.iter().map(|s| SchemeSpec::parse(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_parses_to_defaults() {
        let scenario: Scenario = serde_json::from_str("{}").unwrap();
        assert_eq!(scenario, Scenario::default());
        assert_eq!(scenario.mass, 0.5);
        assert_eq!(scenario.dt1, 0.2);
        assert_eq!(scenario.dt2, 0.4);
        assert_eq!(scenario.k_s, 10);
        assert_eq!(scenario.coarse_steps, 3);
        assert_eq!(scenario.granular_coarse_steps, 6);
        assert_eq!(scenario.obstacles.len(), 2);
        assert_eq!(scenario.x_ref, [20.0, 0.0, 0.0, 0.0]);
        assert_eq!(scenario.x0, [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(scenario.steps, 50);
        assert_eq!(scenario.schemes.len(), 7);
        scenario.validate().unwrap();
    }

    #[test]
    fn validation_names_offending_keys() {
        let scenario = Scenario {
            dt1: -0.2,
            ..Scenario::default()
        };
        let err = scenario.validate().unwrap_err().to_string();
        assert!(err.contains("dt1"), "{err}");

        let scenario = Scenario {
            ci_p_y: [1.0, -1.0],
            ..Scenario::default()
        };
        let err = scenario.validate().unwrap_err().to_string();
        assert!(err.contains("ci_p_y"), "{err}");

        let scenario = Scenario {
            schemes: vec!["warp".into()],
            ..Scenario::default()
        };
        let err = scenario.validate().unwrap_err().to_string();
        assert!(err.contains("schemes[0]"), "{err}");
    }

    #[test]
    fn obstacles_can_be_cleared() {
        let scenario: Scenario = serde_json::from_str(r#"{"obstacles": []}"#).unwrap();
        assert!(scenario.obstacles.is_empty());
        scenario.validate().unwrap();
    }

    #[test]
    fn json_round_trip_is_exact() {
        let scenario = Scenario::default();
        let text = serde_json::to_string_pretty(&scenario).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(scenario, back);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<Scenario>(r#"{"masss": 1.0}"#);
        assert!(err.is_err());
    }

    #[test]
    fn seed_policy_parses() {
        assert_eq!("warm".parse::<SeedPolicy>().unwrap(), SeedPolicy::Warm);
        assert_eq!(
            "warm+reflect".parse::<SeedPolicy>().unwrap(),
            SeedPolicy::WarmReflect
        );
        assert!("cold".parse::<SeedPolicy>().is_err());
    }
}
