//! Brute-force certification of transport and WROF values.
//!
//! Nothing in this module calls into the network simplex of
//! [`crate::transport`]. WROF values are certified by one joint linear program
//! over a finite candidate support for the intermediate measure, solved with
//! the general revised simplex in [`lp`]; small transport problems are
//! certified by enumerating permutations or spanning-tree bases.
//!
//! Candidate support: for every pair `(x, y)` the infimum of
//! `|x - z|^2 / 2 + lambda |z - y|` over `z` is attained at the point a
//! distance `min(lambda, |x - y|)` from `x` along the segment towards `y`.
//! Collecting those points (plus both supports) therefore loses nothing.

pub mod lp;

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::float::FloatCore;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{distance, lex_cmp, squared_distance};
use crate::measures::{DiscreteMeasure, PointCloud};
use crate::transport::{check_lambda, CostKind};

/// Largest `n * m` accepted by [`brute_force_wrof`].
pub const PAIR_BUDGET: usize = 10_000;
/// Largest number of equality rows in the joint program.
pub const ROW_BUDGET: usize = 1_500;
/// Largest `n * m` for spanning-tree enumeration.
pub const ENUMERATION_BUDGET: usize = 12;
/// Largest atom count for permutation enumeration.
pub const PERMUTATION_BUDGET: usize = 5;
/// Relative gap below which a report certifies the main value.
pub const CERTIFY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub instance: usize,
    pub oracle_value: f64,
    pub main_value: f64,
    /// `|oracle - main| / (1 + |oracle|)`
    pub gap: f64,
    pub candidate_support_size: usize,
    pub passed: bool,
}

impl OracleReport {
    pub fn new(instance: usize, oracle: &OracleValue, main_value: f64) -> Self {
        let gap = (oracle.value - main_value).abs() / (1.0 + oracle.value.abs());
        Self {
            instance,
            oracle_value: oracle.value,
            main_value,
            gap,
            candidate_support_size: oracle.support_size,
            passed: gap <= CERTIFY_TOL,
        }
    }
}

/// Minimum of `W2^2(mu, rho) / 2 + lambda W1(rho, nu)` over measures `rho`
/// supported on the candidate set.
pub fn brute_force_wrof(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: f64,
) -> Result<OracleValue> {
    brute_force_wrof_with(mu, nu, lambda, None)
}

/// As [`brute_force_wrof`], with extra candidate points added to the support.
pub fn brute_force_wrof_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: f64,
    extra: Option<&PointCloud>,
) -> Result<OracleValue> {
    check_lambda(lambda)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if let Some(e) = extra {
        if e.dim() != mu.dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.dim(),
                found: e.dim(),
            });
        }
    }
    let (n, m) = (mu.len(), nu.len());
    if n * m > PAIR_BUDGET {
        return Err(Error::BudgetExceeded {
            size: n * m,
            limit: PAIR_BUDGET,
        });
    }

    let support = candidate_support(mu, nu, lambda, extra);
    let k = support.len();
    let rows = n + (m - 1) + k;
    if rows > ROW_BUDGET {
        return Err(Error::BudgetExceeded {
            size: rows,
            limit: ROW_BUDGET,
        });
    }

    // Rows: mu marginals, nu marginals except the last (implied by mass
    // balance), then flow conservation at each candidate.
    let mut rhs = Vec::with_capacity(rows);
    rhs.extend_from_slice(mu.weights());
    rhs.extend_from_slice(&nu.weights()[..m - 1]);
    rhs.extend(core::iter::repeat_n(0.0, k));
    let mut program = lp::LinearProgram::new(rhs);
    let middle = n + m - 1;
    for i in 0..n {
        for (c, z) in support.iter().enumerate() {
            let cost = 0.5 * squared_distance(mu.point(i), z);
            program.add_variable(cost, vec![(i, 1.0), (middle + c, 1.0)]);
        }
    }
    for (c, z) in support.iter().enumerate() {
        for j in 0..m {
            let cost = lambda * distance(z, nu.point(j));
            let mut col = vec![(middle + c, -1.0)];
            if j + 1 < m {
                col.push((n + j, 1.0));
            }
            program.add_variable(cost, col);
        }
    }

    let solution = lp::solve(&program)?;
    Ok(OracleValue {
        value: solution.objective,
        support_size: k,
    })
}

/// Threshold points of every pair, both supports and any extra points,
/// deduplicated and sorted.
fn candidate_support(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    lambda: f64,
    extra: Option<&PointCloud>,
) -> PointCloud {
    let dim = mu.dim();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (x, _) in mu.iter() {
        for (y, _) in nu.iter() {
            let r = distance(x, y);
            if r > lambda {
                let t = lambda / r;
                points.push(x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect());
            }
        }
    }
    points.extend(mu.iter().map(|(p, _)| p.to_vec()));
    points.extend(nu.iter().map(|(p, _)| p.to_vec()));
    if let Some(e) = extra {
        points.extend(e.iter().map(<[f64]>::to_vec));
    }
    points.sort_by(|a, b| lex_cmp(a, b));
    points.dedup_by(|a, b| a == b);
    let coords = points.into_iter().flatten().collect();
    PointCloud::new(dim, coords).expect("candidate points are finite")
}

/// For every pair `(x_i, y_j)` and each fraction `t` drawn from `fraction`,
/// the point `x_i + t (y_j - x_i)`.
pub fn segment_candidates(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    per_pair: usize,
    mut fraction: impl FnMut() -> f64,
) -> Result<PointCloud> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let mut coords = Vec::with_capacity(mu.len() * nu.len() * per_pair * mu.dim());
    for (x, _) in mu.iter() {
        for (y, _) in nu.iter() {
            for _ in 0..per_pair {
                let t = fraction().clamp(0.0, 1.0);
                coords.extend(x.iter().zip(y).map(|(a, b)| a + t * (b - a)));
            }
        }
    }
    PointCloud::new(mu.dim(), coords)
}

/// Exact optimal transport value by exhaustive enumeration.
///
/// Uniform measures with equal atom counts up to [`PERMUTATION_BUDGET`] are
/// handled by enumerating permutations (the vertices of the Birkhoff
/// polytope). Otherwise, problems with `n * m <= ENUMERATION_BUDGET` are
/// handled by enumerating every spanning tree of the bipartite graph, solving
/// its flows exactly in integer arithmetic, and keeping the feasible ones.
pub fn enumerate_transport(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kind: CostKind,
) -> Result<f64> {
    if let CostKind::Huber(l) = kind {
        check_lambda(l)?;
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let (n, m) = (mu.len(), nu.len());
    let cost: Vec<f64> = (0..n * m)
        .map(|c| kind.eval(mu.point(c / m), nu.point(c % m)))
        .collect();

    if n == m && n <= PERMUTATION_BUDGET && is_uniform(mu) && is_uniform(nu) {
        return Ok(min_over_permutations(n, &cost));
    }
    if n * m <= ENUMERATION_BUDGET {
        return min_over_trees(mu.weights(), nu.weights(), &cost)
            .ok_or(Error::SolverFailure("no feasible spanning-tree basis"));
    }
    Err(Error::BudgetExceeded {
        size: n * m,
        limit: ENUMERATION_BUDGET,
    })
}

fn is_uniform(m: &DiscreteMeasure) -> bool {
    let w = m.weights();
    w.iter().all(|&x| x == w[0])
}

fn min_over_permutations(n: usize, cost: &[f64]) -> f64 {
    // Heap's algorithm.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let eval = |p: &[usize]| {
        p.iter()
            .enumerate()
            .map(|(i, &j)| cost[i * n + j])
            .sum::<f64>()
            / n as f64
    };
    let mut best = eval(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Weights as integers in units of a common power of two.
fn exact_weights(weights: &[f64]) -> (Vec<BigInt>, i32) {
    let decoded: Vec<(u64, i16, i8)> = weights.iter().map(|w| w.integer_decode()).collect();
    let min_exp = decoded.iter().map(|d| d.1 as i32).min().unwrap_or(0);
    let ints = decoded
        .iter()
        .map(|&(mant, exp, sign)| {
            let v = BigInt::from(mant) << ((exp as i32 - min_exp) as usize);
            if sign < 0 {
                -v
            } else {
                v
            }
        })
        .collect();
    (ints, min_exp)
}

fn min_over_trees(supply: &[f64], demand: &[f64], cost: &[f64]) -> Option<f64> {
    let (n, m) = (supply.len(), demand.len());
    let (residual_init, exp) = exact_weights(&[supply, demand].concat());
    let edges = n + m - 1;
    let cells = n * m;
    let mut best: Option<f64> = None;

    let mut pick: Vec<usize> = (0..edges).collect();
    loop {
        if let Some(flows) = tree_flows(&pick, n, m, &residual_init) {
            if flows.iter().all(|f| !f.is_negative()) {
                let value: f64 = pick
                    .iter()
                    .zip(&flows)
                    .map(|(&c, f)| libm::ldexp(f.to_f64().unwrap_or(f64::INFINITY), exp) * cost[c])
                    .sum();
                best = Some(best.map_or(value, |b: f64| b.min(value)));
            }
        }
        // Next combination of `edges` cells out of `cells`.
        let mut k = edges;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if pick[k] < cells - edges + k {
                break;
            }
        }
        pick[k] += 1;
        for t in k + 1..edges {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

/// Flows on a spanning tree by leaf elimination, or `None` if the cells do
/// not form a spanning tree. The equation of the last remaining node is the
/// one left implied.
fn tree_flows(pick: &[usize], n: usize, m: usize, residual_init: &[BigInt]) -> Option<Vec<BigInt>> {
    let nodes = n + m;
    let ends = |c: usize| (c / m, n + c % m);

    // Acyclic + n+m-1 edges on n+m nodes <=> spanning tree.
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for &c in pick {
        let (a, b) = ends(c);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return None;
        }
        parent[ra] = rb;
    }

    let mut degree = vec![0usize; nodes];
    for &c in pick {
        let (a, b) = ends(c);
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut residual = residual_init.to_vec();
    let mut flows = vec![BigInt::zero(); pick.len()];
    let mut used = vec![false; pick.len()];
    let mut remaining = pick.len();
    while remaining > 0 {
        let (leaf, e) = (0..nodes).find_map(|v| {
            if degree[v] != 1 {
                return None;
            }
            pick.iter()
                .enumerate()
                .find(|&(e, &c)| {
                    let (a, b) = ends(c);
                    !used[e] && (a == v || b == v)
                })
                .map(|(e, _)| (v, e))
        })?;
        let (a, b) = ends(pick[e]);
        let other = if a == leaf { b } else { a };
        let f = core::mem::take(&mut residual[leaf]);
        residual[other] -= &f;
        flows[e] = f;
        used[e] = true;
        degree[leaf] -= 1;
        degree[other] -= 1;
        remaining -= 1;
    }
    Some(flows)
}
