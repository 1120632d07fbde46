//! First-order averaging for radial-cylindrical piecewise-smooth
//! perturbations of the linear rotation `(x, y, z) -> (-y, x, h(x, y))`.
//!
//! The crate computes the averaged function `psi_n(r, z0)` of a two-sided
//! polynomial perturbation switching on the plane `y = 0`, locates and
//! classifies the zero locus whose revolution is the predicted invariant
//! manifold of periodic orbits, solves the inverse problem (construct a
//! perturbation realizing a given averaged polynomial), and verifies the
//! predictions by direct simulation of the piecewise-smooth flow through
//! Poincare return maps on the section `theta = 0`.

pub mod averaging;
pub mod error;
pub mod io;
pub mod locus;
pub mod profile;
pub mod quad;
pub mod realize;
pub mod rk45;
pub mod sim;

pub use averaging::{averaged_closed_form, averaged_generic, AveragedPoly, PerturbationSpec};
pub use error::{Error, Result};
pub use locus::{
    classify, revolve, roots_at_slice, trace_locus, ConicKind, LocusCurve, LocusParams,
    LocusPoint, ManifoldClass,
};
pub use profile::{CConstantTable, CircleProfile, Half};
pub use realize::{realize, roundtrip_check, RealizationReport};
pub use sim::{
    cartesian_flow, find_fixed_point, poincare_map, reduced_flow, verify_prediction, CartState,
    CrossingEvent, CylState, Side, SimParams, SystemSpec, Trajectory, VerificationReport,
};
