//! Sparse regression with all pairwise interactions under strong hierarchy.
//!
//! The model is `y = b0 + X beta + sum_{i<j} theta_ij (X_i * X_j) + noise`, fitted by
//! minimizing least squares plus the convex hierarchical penalty
//!
//! ```text
//! lambda1 * sum_i max(|beta_i|, max_j |theta_ij|) + lambda2 * sum_{i<j} |theta_ij|
//! ```
//!
//! Solutions satisfy strong hierarchy (`theta_ij != 0` implies `beta_i != 0` and
//! `beta_j != 0`) for continuous responses. The solver is proximal gradient
//! descent on an active set; its prox step is screened, split into independent
//! connected components and solved by dual block coordinate ascent, and its
//! optimality checks only evaluate the interaction gradients that a stored
//! gradient snapshot cannot rule out.

pub mod coef;
pub mod data;
pub mod datagen;
pub mod error;
pub mod gradient;
pub mod io;
pub mod metrics;
pub mod path;
pub mod prox;
pub mod solver;
pub mod step;

pub use coef::{loss, objective, Coefficients, PenaltyConfig, Support, SUPPORT_EPS};
pub use data::{all_pairs, pair_count, DesignData, FeatureTransform, Pair};
pub use datagen::{generate, Setting, Synthetic, TruthSpec};
pub use error::{Error, Result};
pub use gradient::{full_gradient, partial_gradient, FullGradient, PartialGradient};
pub use metrics::{audit_strong_hierarchy, fdr, interaction_fdr, prediction_error, ErrorKind};
pub use path::{fit_path, lambda_grid, lambda_max, FitPath, PathConfig, PathEntry};
pub use step::{estimate_step, StepEstimate, StepMode};
pub use solver::{fit_single, ActiveSet, Fit, FitDiagnostics, Solver, SolverOptions};
