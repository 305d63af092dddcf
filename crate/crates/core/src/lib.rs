//! Topology optimization of planar antennas on a fixed RWG discretization.
//!
//! The crate is organised bottom-up:
//!
//! * [`operators`] meshes a rectangular plate and assembles the dense MoM
//!   operators (impedance, stored energy, radiation factorizations).
//! * [`shapes`] encodes shapes as binary genes over the optimizable DOFs.
//! * [`reanalysis`] evaluates single-DOF removals and additions with rank-1
//!   updates of the admittance matrix instead of re-factorizing.
//! * [`metrics`] turns currents into Q-factors, powers and composite objectives.
//! * [`bounds`] computes the lower bound on Q over all currents on the plate.
//! * [`optimizer`] runs greedy local descent inside a genetic global loop.

pub mod bounds;
pub mod metrics;
pub mod operators;
pub mod optimizer;
pub mod reanalysis;
pub mod shapes;

pub use num_complex::Complex64 as C64;

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Free-space impedance (ohm).
pub const ETA0: f64 = MU0 * C0;
