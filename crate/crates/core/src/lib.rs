//! # genmakespan
//!
//! Non-adaptive stochastic makespan minimization over structured set systems.
//!
//! Given `n` tasks with independent discrete random sizes, `m` resources and an
//! incidence relation (task `j` loads every resource in `U_j`), select `t` tasks
//! minimizing the expected maximum resource load.
//!
//! The solver pipeline:
//!
//!  1. [`stochastic`] splits every size into a truncated part (mass at values
//!     `<= 1`) and an exceptional part, and computes effective sizes
//!     `beta_k(X) = log_k E[k^X]`.
//!  2. [`lp`] solves the exponential-size effective-size LP with a cutting-plane
//!     loop whose separation oracle is greedy maximum coverage.
//!  3. [`rounding`] decomposes the fractional solution into doubly-exponential
//!     scale classes, extends each class with a `lambda`-safe construction from
//!     [`setsystem`], and rounds the resulting deterministic packing problem
//!     with a rounder from [`packing`].
//!  4. The outer driver guesses the optimum on a geometric grid and keeps the
//!     best solution as measured by [`eval`].
//!
//! Concrete set-system families live in [`setsystem`]: intervals on a line,
//! paths in a tree, axis-aligned rectangles and disks in the plane, plus
//! explicit incidence lists. [`instances`] generates the integrality-gap
//! constructions and random instances, and defines the on-disk formats.
//!
//! ## Example
//! ```
//! use genmakespan::instances::gen_line_gap;
//! use genmakespan::rounding::{solve_end_to_end, SolverConfig};
//!
//! let file = gen_line_gap(2).unwrap();
//! let problem = file.to_problem().unwrap();
//! let mut config = SolverConfig::default();
//! config.inner_samples = 2_000;
//! config.final_samples = 2_000;
//! let solution = solve_end_to_end(&problem, &config).unwrap();
//! assert_eq!(solution.chosen.len(), problem.t);
//! ```

pub mod error;
pub mod eval;
pub mod instances;
pub mod lp;
pub mod packing;
pub mod rounding;
pub mod seeds;
pub mod setsystem;
pub mod stochastic;

pub use error::{Error, Result};
pub use setsystem::{GeometryFamily, SetSystemInstance};
pub use stochastic::DiscreteDistribution;

/// `e / (e - 1)`, the loss factor of greedy maximum coverage. Constraints
/// certified by the separation oracle hold with their right-hand side
/// inflated by this factor.
pub const COVERAGE_SLACK: f64 = std::f64::consts::E / (std::f64::consts::E - 1.0);

/// Absolute tolerance for LP constraint residuals.
pub const LP_TOLERANCE: f64 = 1e-7;
