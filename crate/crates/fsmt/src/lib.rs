//! Continuous local search for SMT over linear real arithmetic.
//!
//! Mixed Boolean/real constraints are relaxed into a smooth surrogate
//! objective (the circuit-output probability of decision diagrams compiled
//! from each constraint), minimized by projected gradient descent under an
//! annealing schedule with adaptive constraint weights, and any satisfying
//! assignment found is certified by exact evaluation.

pub mod benchgen;
pub mod cli;
pub mod model;
pub mod optimizer;
pub mod smoothing;
pub mod spectral;
pub mod xbdd;
