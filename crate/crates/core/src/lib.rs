//! Split-horizon model predictive control.
//!
//! This crate implements a receding-horizon controller whose prediction
//! horizon can switch model granularity and sampling time midway: a
//! detailed model covers the short-term segment at a small sampling time,
//! and a coarse, projection-linked model covers the long-term segment at a
//! larger one. The long tail buys the foresight of a long horizon at a
//! fraction of the decision variables; a control-invariant standstill set
//! at the segment boundary keeps the loop recursively feasible.
//!
//! The pieces:
//!
//! * [`dynamics`] — the two linear models, the projection between them,
//!   boxes, elliptical obstacles, and control-invariant sets.
//! * [`horizon`]  — the four benchmark schemes expressed as segment plans,
//!   plus sampling-time weight adaptation.
//! * [`nlp`]      — exact condensing onto the input decisions and an SQP
//!   solver with a dense active-set QP underneath.
//! * [`sim`]      — the closed loop, shift-based warm starts, feasibility
//!   certificates, and realized-cost accounting.
//! * [`scenario`] — the serializable benchmark description with built-in
//!   defaults.
//!
//! ```
//! use nalgebra::DVector;
//! use splitmpc::horizon::{build_plan, SchemeSpec};
//! use splitmpc::scenario::Scenario;
//! use splitmpc::nlp::{condense, solve, SolverConfig};
//!
//! let scenario = Scenario::default();
//! let plan = build_plan(&SchemeSpec::parse("proposed")?, &scenario)?;
//! let nlp = condense(&plan, &DVector::from_column_slice(&scenario.x0))?;
//! let sol = solve(&nlp, &DVector::zeros(nlp.dim()), &SolverConfig::default())?;
//! assert!(sol.status.is_converged());
//! # Ok::<(), splitmpc::Error>(())
//! ```

pub mod dynamics;
pub mod error;
pub mod horizon;
pub mod nlp;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/horizons.md")]
    mod horizons {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/closed-loop.md")]
    mod closed_loop {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
}
