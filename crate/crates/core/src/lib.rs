//! Most probable transition paths for SDEs with time-varying additive noise
//!
//! ```text
//! dX_t = f(t, X_t) dt + g(t) dW_t,    t in [0, 1]
//! ```
//!
//! The crate evaluates the Onsager-Machlup functional
//!
//! ```text
//! OM(phi) = int_0^1 |g(t)^-1 (phi'(t) - f(t, phi(t)))|^2 dt + int_0^1 Tr(g^-1 grad f g) dt
//! ```
//!
//! on discretized paths, minimizes it with pinned endpoints, cross-checks
//! minimizers against Euler-Lagrange shooting, and estimates Hölder-norm tube
//! probabilities `P(||X - phi||_alpha <= eps)` by Monte Carlo so that the ratio
//! law `log(P1 / P2) ~ -(OM(phi1) - OM(phi2)) / 2` can be checked empirically.

pub mod error;
pub mod holder;
pub mod io;
pub mod model;
pub mod om;
pub mod optimize;
pub mod simulate;
pub mod tube;

pub use error::{Error, Result};
pub use holder::{holder_norm, holder_seminorm, sup_norm, HolderParams};
pub use model::{builtin_model, DiscretePath, ModelParams, SdeModel};
pub use om::{om_functional, om_path_gradient, Discretization, OmEvaluation, SquareMatrix};
pub use optimize::{minimize_om, solve_el_bvp, stationary_path, OptimizeResult, OptimizerConfig};
pub use simulate::{euler_maruyama, simulate_ensemble, SimulationSpec};
pub use tube::{om_ratio_check, tube_probability, RatioCheck, TubeEstimate, TubeQuery};
