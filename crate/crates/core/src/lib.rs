//! Robust event-triggered control of uncertain discrete-time linear systems.
//!
//! The crate synthesizes a state-feedback gain for
//! `x(k+1) = (A + dA(p)) x(k) + B u(k)` where `dA(p)` may leave the range of
//! `B`, derives a state-dependent transmission rule
//! `|e(k)|^2 >= mu |x(k)|^2`, audits every matrix inequality the stability
//! argument depends on, and simulates periodic and event-triggered loops
//! with a zero-order hold.
//!
//! Modules:
//! - [`matrix`]: dense linear algebra used throughout.
//! - [`synthesis`]: Riccati solver, gains, trigger coefficient, feasibility audit.
//! - [`sim`]: closed-loop simulation and policy comparison.
//! - [`verify`]: independent numerical checkers for the supporting inequalities.
//! - [`config`] and [`cli`]: JSON experiment files and the command-line front end.

// `!(a > b)` is used on purpose so NaN lands on the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod matrix;
pub mod sim;
pub mod synthesis;
pub mod verify;

pub use matrix::Matrix;
