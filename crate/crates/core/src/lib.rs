//! Penalty coupling of geometrically exact beams to the surfaces of
//! nonlinear solids.
//!
//! A [`model::Model`] describes a solid mesh, beams and the coupling; a
//! [`problem::Problem`] assembles energies, residuals and tangents, and
//! [`solver`] drives load-stepped Newton iterations. The three coupling
//! variants ([`model::Variant`]) differ in how the initial beam-to-surface
//! offset enters the positional constraint.
// Index loops mirror the tensor notation of the kernels; NaN-rejecting
// `!(a > b)` comparisons are deliberate.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod beam_fem;
pub mod generators;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod model_io;
pub mod mortar;
pub mod problem;
pub mod quadrature;
pub mod shapes;
pub mod so3;
pub mod solid_fem;
pub mod solver;
pub mod surface;
pub mod verify;
