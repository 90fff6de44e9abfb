//! Exact discrete optimal transport and the Wasserstein-ROF problem
//!
//! ```text
//! min_rho  W2^2(mu, rho) / 2 + lambda * W1(rho, nu)
//! ```
//!
//! solved in closed form from an optimal plan for the Huber cost, together
//! with the iterative-regularization and multiscale schemes built on it and
//! an independent linear-programming oracle.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod geom;

pub mod flows;
pub mod measures;
pub mod oracle;
pub mod transport;
pub mod wrof;

pub use error::{Error, Result};
pub use flows::{
    check_energy_identity, iterate_regularization, multiscale, EnergyLedger, FlowOptions,
    IterationTrace, ScaleSchedule,
};
pub use measures::{diameter, from_grayscale_grid, BoxDomain, DiscreteMeasure, PointCloud};
pub use transport::{
    c_transform, cost, cost_matrix, lipschitz_ratio, solve_transport, w1, w2_squared, CTransform,
    CostKind, PlanEntry, TransportPlan,
};
pub use wrof::{
    decompose, in_ball, restore_point, sandwich_bounds, soft_threshold, solve_wrof, split_masses,
    threshold_displacement, SandwichBounds, SplitMasses, WrofSolution,
};
