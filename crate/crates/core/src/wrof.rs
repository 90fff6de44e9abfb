//! The Wasserstein-ROF problem
//!
//! ```text
//! min_rho  W2^2(mu, rho) / 2 + lambda * W1(rho, nu)
//! ```
//!
//! The minimal value equals the optimal transport cost between `mu` and `nu`
//! for the Huber cost, because that cost is the infimal convolution
//! `inf_z |x - z|^2 / 2 + lambda |z - y|`, attained at the point a distance
//! `min(lambda, |x - y|)` from `x` towards `y`. A minimizer is obtained by
//! moving every entry of an optimal Huber plan to that point.
//!
//! Discrete measures are not absolutely continuous, so the maps of the
//! continuous theory become plan-level operations here: an entry `(i, j, m)`
//! is displaced as a unit and atoms may split. Value identities are exact;
//! uniqueness of the minimizer is not claimed.

use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{distance, squared_distance};
use crate::measures::{DiscreteMeasure, PointCloud};
use crate::transport::{
    c_transform, check_lambda, solve_transport, w1, w2_squared, CostKind, PlanEntry, TransportPlan,
};

/// `sign(t) * max(|t| - lambda, 0)`
pub fn soft_threshold(t: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let shrunk = (t.abs() - lambda).max(0.0);
    Ok(if t < 0.0 { -shrunk } else { shrunk })
}

/// Moves `x` towards `y` by `min(lambda, |x - y|)`.
///
/// Returns `y` itself when it is within reach, otherwise the point at
/// distance `lambda` from `x` on the segment `[x, y]`.
pub fn threshold_displacement(x: &[f64], y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(step_towards(x, y, lambda))
}

/// Relative margin inside the lambda-sphere for steps that rounding could not
/// place exactly on it.
const INWARD: f64 = 1.0 / (1u64 << 40) as f64;

fn step_towards(x: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
    let r = distance(x, y);
    if r <= lambda {
        return y.to_vec();
    }
    let along = |t: f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect() };
    let mut t = lambda / r;
    let mut z = along(t);
    if exactly_on_sphere(x, &z, lambda) {
        return z;
    }
    // Pull the point strictly inside so that sums of quadratic costs over
    // these steps cannot round above lambda^2. Shrink steps double since a
    // small change of t may not move z at all.
    let limit = lambda * lambda * (1.0 - INWARD);
    let check_square = lambda * lambda > f64::MIN_POSITIVE;
    let mut shrink = f64::EPSILON;
    for _ in 0..64 {
        if distance(x, &z) <= lambda && (!check_square || squared_distance(x, &z) <= limit) {
            break;
        }
        t *= 1.0 - shrink;
        shrink = (2.0 * shrink).min(0.5);
        z = along(t);
    }
    z
}

/// Whether `|x - z|^2 == lambda^2` holds with every operation exact.
fn exactly_on_sphere(x: &[f64], z: &[f64], lambda: f64) -> bool {
    fn two_sum_exact(a: f64, b: f64, s: f64) -> bool {
        let bb = s - a;
        (a - (s - bb)) + (b - bb) == 0.0
    }
    let mut sum = 0.0;
    for (a, b) in x.iter().zip(z) {
        let d = b - a;
        if !two_sum_exact(*b, -a, d) {
            return false;
        }
        let p = d * d;
        if libm::fma(d, d, -p) != 0.0 {
            return false;
        }
        let next = sum + p;
        if !two_sum_exact(sum, p, next) {
            return false;
        }
        sum = next;
    }
    let l2 = lambda * lambda;
    sum == l2 && libm::fma(lambda, lambda, -l2) == 0.0
}

/// How one entry of the Huber plan was displaced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Displacement {
    pub source: usize,
    pub target: usize,
    pub rho_atom: usize,
    pub mass: f64,
    /// `|x - y|` for the paired atoms.
    pub distance: f64,
    /// `|x - T(x)|`, at most lambda.
    pub step: f64,
}

/// A minimizer of the WROF problem with its certificates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WrofSolution {
    pub lambda: f64,
    pub rho: DiscreteMeasure,
    pub huber_plan: TransportPlan,
    /// Objective evaluated at `rho`.
    pub value: f64,
    pub w2sq_mu_rho: f64,
    pub w1_rho_nu: f64,
    /// `W2^2(nu, mu)`, the reference energy for the divergence.
    pub w2sq_nu_mu: f64,
    /// `W2^2(nu, mu) / 2 - value`
    pub divergence: f64,
    pub max_displacement: f64,
    pub displacements: Vec<Displacement>,
}

impl WrofSolution {
    /// True when no plan entry needed more than lambda, so `rho == nu`.
    pub fn within_ball(&self) -> bool {
        self.displacements.iter().all(|d| d.distance <= self.lambda)
    }
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

/// Solves WROF through an optimal plan for the Huber cost.
pub fn solve_wrof(mu: &DiscreteMeasure, nu: &DiscreteMeasure, lambda: f64) -> Result<WrofSolution> {
    check_lambda(lambda)?;
    check_pair(mu, nu)?;
    let huber_plan = solve_transport(mu, nu, CostKind::Huber(lambda))?;

    let mut targets: Vec<Vec<f64>> = Vec::with_capacity(huber_plan.entries.len());
    let mut all_near = true;
    for e in &huber_plan.entries {
        let (x, y) = (mu.point(e.source), nu.point(e.target));
        all_near &= distance(x, y) <= lambda;
        targets.push(step_towards(x, y, lambda));
    }

    let rho = if all_near {
        nu.clone()
    } else {
        let masses = huber_plan.entries.iter().map(|e| e.mass).collect();
        DiscreteMeasure::new(targets.clone(), masses)?
    };

    let mut displacements = Vec::with_capacity(targets.len());
    let mut max_displacement = 0.0f64;
    for (e, z) in huber_plan.entries.iter().zip(&targets) {
        let x = mu.point(e.source);
        let step = distance(x, z);
        max_displacement = max_displacement.max(step);
        displacements.push(Displacement {
            source: e.source,
            target: e.target,
            rho_atom: rho
                .find(z)
                .ok_or(Error::SolverFailure("displaced atom missing from rho"))?,
            mass: e.mass,
            distance: distance(x, nu.point(e.target)),
            step,
        });
    }

    let w2sq_mu_rho = w2_squared(mu, &rho)?;
    let w1_rho_nu = w1(&rho, nu)?;
    let w2sq_nu_mu = w2_squared(nu, mu)?;
    let value = 0.5 * w2sq_mu_rho + lambda * w1_rho_nu;
    let divergence = 0.5 * w2sq_nu_mu - value;

    Ok(WrofSolution {
        lambda,
        rho,
        huber_plan,
        value,
        w2sq_mu_rho,
        w1_rho_nu,
        w2sq_nu_mu,
        divergence,
        max_displacement,
        displacements,
    })
}

/// Optimal transport cost between `mu` and `nu` for the Huber cost.
pub fn huber_transport_value(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(solve_transport(mu, nu, CostKind::Huber(lambda))?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichBounds {
    pub upper: f64,
    pub lower: f64,
}

/// Bounds on the divergence from `(|x - y| - lambda)_+^2 / 2` integrated
/// against the Huber plan (upper) and a fresh quadratic plan (lower).
pub fn sandwich_bounds(
    solution: &WrofSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<SandwichBounds> {
    let lambda = solution.lambda;
    let excess = |r: f64| {
        let e = (r - lambda).max(0.0);
        0.5 * e * e
    };
    let upper = solution.huber_plan.integrate_distance(mu, nu, excess);
    let quadratic = solve_transport(mu, nu, CostKind::Quadratic)?;
    let lower = quadratic.integrate_distance(mu, nu, excess);
    Ok(SandwichBounds { upper, lower })
}

/// Whether `rho` lies in the ball reachable from `mu` at scale `lambda`:
/// the quadratic and Huber transport costs between them coincide.
pub fn in_ball(mu: &DiscreteMeasure, rho: &DiscreteMeasure, lambda: f64, tol: f64) -> Result<bool> {
    check_lambda(lambda)?;
    let quadratic = solve_transport(mu, rho, CostKind::Quadratic)?.value;
    let huber = solve_transport(mu, rho, CostKind::Huber(lambda))?.value;
    Ok((quadratic - huber).abs() <= tol * (1.0 + huber.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitMasses {
    /// Plan mass moved at most lambda.
    pub mass_small: f64,
    /// Plan mass moved more than lambda.
    pub mass_large: f64,
}

pub fn split_masses(
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: f64,
) -> Result<SplitMasses> {
    check_lambda(lambda)?;
    if plan.cost != CostKind::Huber(lambda) {
        return Err(Error::CostMismatch);
    }
    let mut out = SplitMasses {
        mass_small: 0.0,
        mass_large: 0.0,
    };
    for e in &plan.entries {
        if distance(mu.point(e.source), nu.point(e.target)) <= lambda {
            out.mass_small += e.mass;
        } else {
            out.mass_large += e.mass;
        }
    }
    Ok(out)
}

/// The Huber plan from `nu` to `mu` factored through the minimizer `rho`:
/// `s0 = t_inv o s_lambda`. The three entry lists are aligned index by index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub lambda: f64,
    pub rho: DiscreteMeasure,
    /// nu atom -> mu atom.
    pub s0: Vec<PlanEntry>,
    /// nu atom -> rho atom.
    pub s_lambda: Vec<PlanEntry>,
    /// rho atom -> mu atom.
    pub t_inv: Vec<PlanEntry>,
    /// `y + s_lambda(|S0(y) - y|) (S0(y) - y) / |S0(y) - y|` per entry.
    pub s_lambda_images: Vec<Vec<f64>>,
}

impl Decomposition {
    /// Composing `s_lambda` with `t_inv` entry by entry gives back `s0`.
    pub fn composes(&self) -> bool {
        self.s0.len() == self.s_lambda.len()
            && self.s0.len() == self.t_inv.len()
            && self
                .s0
                .iter()
                .zip(&self.s_lambda)
                .zip(&self.t_inv)
                .all(|((s0, sl), ti)| {
                    sl.source == s0.source
                        && ti.source == sl.target
                        && ti.target == s0.target
                        && sl.mass == s0.mass
                        && ti.mass == s0.mass
                })
    }
}

pub fn decompose(mu: &DiscreteMeasure, nu: &DiscreteMeasure, lambda: f64) -> Result<Decomposition> {
    let solution = solve_wrof(mu, nu, lambda)?;
    let mut rows: Vec<&Displacement> = solution.displacements.iter().collect();
    rows.sort_by_key(|d| (d.target, d.source));

    let mut s0 = Vec::with_capacity(rows.len());
    let mut s_lambda = Vec::with_capacity(rows.len());
    let mut t_inv = Vec::with_capacity(rows.len());
    let mut images = Vec::with_capacity(rows.len());
    for d in rows {
        let (y, x) = (nu.point(d.target), mu.point(d.source));
        let r = distance(x, y);
        let shrink = soft_threshold(r, lambda)?;
        let image: Vec<f64> = if r > 0.0 {
            y.iter()
                .zip(x)
                .map(|(b, a)| b + shrink * (a - b) / r)
                .collect()
        } else {
            y.to_vec()
        };
        images.push(image);
        s0.push(PlanEntry {
            source: d.target,
            target: d.source,
            mass: d.mass,
        });
        s_lambda.push(PlanEntry {
            source: d.target,
            target: d.rho_atom,
            mass: d.mass,
        });
        t_inv.push(PlanEntry {
            source: d.rho_atom,
            target: d.source,
            mass: d.mass,
        });
    }
    Ok(Decomposition {
        lambda,
        rho: solution.rho,
        s0,
        s_lambda,
        t_inv,
        s_lambda_images: images,
    })
}

/// `argmin_z |z - x0|^2 / 2 - phi(z)` over a finite grid; ties go to the
/// lowest index.
pub fn restore_point(x0: &[f64], phi: &[f64], grid: &PointCloud) -> Result<(usize, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.dim() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: x0.len(),
        });
    }
    if phi.len() != grid.len() {
        return Err(Error::LengthMismatch {
            points: grid.len(),
            weights: phi.len(),
        });
    }
    let mut best = f64::INFINITY;
    let mut best_k = 0;
    for (k, z) in grid.iter().enumerate() {
        let v = CostKind::Quadratic.eval(z, x0) - phi[k];
        if v < best {
            best = v;
            best_k = k;
        }
    }
    Ok((best_k, grid.point(best_k).to_vec()))
}

/// Huber potential on the supports of `nu` and `rho`, extended from the plan
/// duals by a double c-transform through the support of `mu`.
pub fn extended_potential(
    solution: &WrofSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let kind = CostKind::Huber(solution.lambda);
    let on_mu = c_transform(
        &solution.huber_plan.target_potential,
        kind,
        mu.points(),
        nu.points(),
    )?;
    let on_nu = c_transform(&on_mu.values, kind, nu.points(), mu.points())?;
    let on_rho = c_transform(&on_mu.values, kind, solution.rho.points(), mu.points())?;
    Ok((on_nu.values, on_rho.values))
}

/// `|<phi, nu - rho> - lambda W1(rho, nu)|` for the extended Huber potential.
pub fn extremality_gap(
    solution: &WrofSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    let (on_nu, on_rho) = extended_potential(solution, mu, nu)?;
    let pairing = nu.integrate(&on_nu) - solution.rho.integrate(&on_rho);
    Ok((pairing - solution.lambda * solution.w1_rho_nu).abs())
}

/// Pushes `mu` a step of length `lambda` along each pairing of an optimal
/// W1 plan (completing pairs shorter than `lambda`).
pub fn explicit_step(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: f64,
) -> Result<DiscreteMeasure> {
    check_lambda(lambda)?;
    check_pair(mu, nu)?;
    let plan = solve_transport(mu, nu, CostKind::Euclidean)?;
    let points = plan
        .entries
        .iter()
        .map(|e| step_towards(mu.point(e.source), nu.point(e.target), lambda))
        .collect();
    DiscreteMeasure::new(points, plan.entries.iter().map(|e| e.mass).collect())
}
