//! Simulation and control synthesis for a driven pair of coupled two-level
//! systems in a common Ohmic reservoir.
//!
//! The dynamics follows a Lindblad master equation whose jump operators
//! connect eigenstates of a Lewis-Riesenfeld invariant of the driven
//! Hamiltonian. Control fields are obtained by inverse engineering the
//! invariant coefficients.

pub mod algebra;
pub mod bath;
pub mod checks;
pub mod cli;
pub mod config;
pub mod controls;
pub mod dynamics;
pub mod experiments;
pub mod invariant;
pub mod ode;
