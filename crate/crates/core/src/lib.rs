//! Sliced unbalanced optimal transport between discrete positive measures.
//!
//! Two sliced relaxations of unbalanced OT with `ρ·KL` marginal penalties
//! are computed by Frank-Wolfe ascent on their dual:
//!
//! * [`suot`] relaxes the marginals independently on every slice and averages
//!   the 1D unbalanced costs;
//! * [`usot`] relaxes the marginals once, globally, and computes sliced OT
//!   between the relaxed measures.
//!
//! Each Frank-Wolfe step only needs balanced 1D OT duals, which [`ot1d`]
//! provides in closed form. [`barycenter`] builds fixed-support barycenters
//! on top of the USOT gradient, [`docclass`] runs k-NN classification from
//! pairwise distances, and [`oracle`] holds slow, independent reference
//! solvers used for validation.

pub mod barycenter;
pub mod divergences;
pub mod docclass;
pub mod error;
pub mod fw;
pub mod io;
pub mod measures;
mod numeric;
pub mod oracle;
pub mod ot1d;
pub mod slicing;
pub mod suot;
pub mod usot;

pub use barycenter::{barycenter, usot_gradient_wrt_beta, BarycenterProblem, GridMeasure};
pub use divergences::{DivergenceKind, DivergenceSpec, UnbalancedParams};
pub use error::{Error, Result};
pub use fw::{FwState, Potentials};
pub use measures::{DiscreteMeasure, Measure1D};
pub use numeric::EXP_CLAMP;
pub use ot1d::DualPotentials;
pub use slicing::{sample_directions, ProjectionSet};
pub use suot::suot;
pub use usot::{usot, usot_stochastic};
