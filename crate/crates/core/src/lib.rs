//! Closed curves of prescribed geodesic curvature on the 2-sphere.
//!
//! The sphere carries a conformal metric `g = e^φ g_can` and a positive
//! curvature prescription `k`. A closed constant-speed curve `γ` solves
//!
//! ```text
//! D_t γ' = |γ'|_g k(γ) J γ'
//! ```
//!
//! exactly when its geodesic curvature equals `k` along the curve. Such curves
//! are, after rescaling, periodic magnetic geodesics on a fixed energy level.
//! This crate discretizes loops spectrally, solves the equation with a
//! gauge-fixed Newton method, continues solutions from the round sphere with a
//! homotopy in the fields, and certifies the results against the geometric
//! identities they must satisfy (length bound, Gauss-Bonnet, isoperimetry,
//! rotation index, primality).

pub mod cyclic;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod loops;
pub mod operators;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{FieldPair, SphericalField};
pub use geometry::{ConformalMetric, SpherePoint, TangentVector};
pub use loops::DiscreteLoop;
pub use solver::{OrbitSolution, SolverOptions};
pub use verify::{Alexandrov, VerificationReport};

pub type Vec3 = nalgebra::Vector3<f64>;
