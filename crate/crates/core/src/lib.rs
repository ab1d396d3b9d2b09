//! Numerical certification of chaos in three-dimensional autonomous flows.
//!
//! The pipeline runs from a hyperbolic periodic orbit to a symbolic conjugacy:
//!
//! * [`flow`] integrates vector fields with dense output, variational
//!   equations, cross-section events and quotient-chart gluing.
//! * [`orbits`] refines periodic orbits by Newton shooting, computes Floquet
//!   data, local invariant manifolds, cross-section frames and fixed-time
//!   half-period maps between frames.
//! * [`horseshoe`] implements horizontal/vertical strip calculus, checks the
//!   two strip-mapping assumptions, emits certificates of conjugacy to a
//!   subshift of finite type and shadows finite itineraries.
//! * [`symbolic`] holds transition matrices, words, admissibility, periodic
//!   point counts and topological entropy.
//! * [`models`] ships the reference systems used throughout the tests.
//!
//! Certificates are tolerance based: every threshold used is recorded in the
//! emitted report. They are not interval-arithmetic proofs.

pub mod exec;
pub mod flow;
pub mod horseshoe;
pub mod linalg;
pub mod models;
pub mod orbits;
pub mod symbolic;

pub use exec::Exec;
