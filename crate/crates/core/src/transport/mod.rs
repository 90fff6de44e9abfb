//! Exact Kantorovich transport between discrete measures.
//!
//! [`solve_transport`] runs a network simplex on the dense bipartite graph and
//! returns a sparse optimal plan together with dual potentials satisfying
//! complementary slackness. Potentials are pinned by `target_potential[0] = 0`.

mod cost;
mod simplex;

use alloc::vec::Vec;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub(crate) use cost::check_lambda;
pub use cost::{cost, CostKind};

use crate::error::{Error, Result};
use crate::geom::distance;
use crate::measures::{DiscreteMeasure, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// An optimal coupling with its primal value and dual potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: CostKind,
    pub entries: Vec<PlanEntry>,
    pub value: f64,
    pub source_potential: Vec<f64>,
    pub target_potential: Vec<f64>,
}

impl TransportPlan {
    /// `sum phi_i mu_i + sum psi_j nu_j`.
    pub fn dual_value(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> f64 {
        source.integrate(&self.source_potential) + target.integrate(&self.target_potential)
    }

    /// `|primal - dual| / (1 + |primal|)`.
    pub fn duality_gap(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> f64 {
        (self.value - self.dual_value(source, target)).abs() / (1.0 + self.value.abs())
    }

    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; n];
        for e in &self.entries {
            out[e.source] += e.mass;
        }
        out
    }

    pub fn column_sums(&self, m: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; m];
        for e in &self.entries {
            out[e.target] += e.mass;
        }
        out
    }

    /// Largest deviation of the plan marginals from the measure weights.
    pub fn marginal_error(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> f64 {
        let rows = self.row_sums(source.len());
        let cols = self.column_sums(target.len());
        rows.iter()
            .zip(source.weights())
            .chain(cols.iter().zip(target.weights()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation of `phi_i + psi_j <= c_ij` over all pairs, and of
    /// equality over the plan support.
    pub fn slackness_error(&self, source: &DiscreteMeasure, target: &DiscreteMeasure) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..source.len() {
            for j in 0..target.len() {
                let c = self.cost.eval(source.point(i), target.point(j));
                worst = worst.max(self.source_potential[i] + self.target_potential[j] - c);
            }
        }
        for e in &self.entries {
            let c = self
                .cost
                .eval(source.point(e.source), target.point(e.target));
            worst = worst
                .max((self.source_potential[e.source] + self.target_potential[e.target] - c).abs());
        }
        worst
    }

    /// Sum of `mass * f(|x - y|)` over the plan.
    pub fn integrate_distance(
        &self,
        source: &DiscreteMeasure,
        target: &DiscreteMeasure,
        f: impl Fn(f64) -> f64,
    ) -> f64 {
        self.entries
            .iter()
            .map(|e| e.mass * f(distance(source.point(e.source), target.point(e.target))))
            .sum()
    }

    /// The same coupling read in the opposite direction.
    pub fn transpose(&self) -> TransportPlan {
        let mut entries: Vec<PlanEntry> = self
            .entries
            .iter()
            .map(|e| PlanEntry {
                source: e.target,
                target: e.source,
                mass: e.mass,
            })
            .collect();
        entries.sort_by_key(|e| (e.source, e.target));
        TransportPlan {
            cost: self.cost,
            entries,
            value: self.value,
            source_potential: self.target_potential.clone(),
            target_potential: self.source_potential.clone(),
        }
    }
}

impl Serialize for TransportPlan {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("TransportPlan", 6)?;
        s.serialize_field("cost", self.cost.tag())?;
        s.serialize_field("lambda", &self.cost.lambda())?;
        s.serialize_field("value", &self.value)?;
        s.serialize_field("entries", &self.entries)?;
        s.serialize_field("source_potential", &self.source_potential)?;
        s.serialize_field("target_potential", &self.target_potential)?;
        s.end()
    }
}

fn check_dims(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Dense row-major cost matrix between the supports of two measures.
pub fn cost_matrix(kind: CostKind, source: &PointCloud, target: &PointCloud) -> Vec<f64> {
    let mut out = Vec::with_capacity(source.len() * target.len());
    for x in source.iter() {
        out.extend(target.iter().map(|y| kind.eval(x, y)));
    }
    out
}

/// Exact optimal transport between `source` and `target` for the given cost.
pub fn solve_transport(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    kind: CostKind,
) -> Result<TransportPlan> {
    kind.validate()?;
    check_dims(source, target)?;
    let m = target.len();
    let costs = cost_matrix(kind, source.points(), target.points());
    let basis = simplex::solve(source.weights(), target.weights(), &costs)?;

    let mut entries: Vec<PlanEntry> = basis
        .cells
        .iter()
        .filter(|&&(_, _, f)| f > 0.0)
        .map(|&(i, j, f)| PlanEntry {
            source: i,
            target: j,
            mass: f,
        })
        .collect();
    entries.sort_by_key(|e| (e.source, e.target));
    let value = entries
        .iter()
        .map(|e| e.mass * costs[e.source * m + e.target])
        .sum();

    Ok(TransportPlan {
        cost: kind,
        entries,
        value,
        source_potential: basis.row_potential,
        target_potential: basis.col_potential,
    })
}

/// Wasserstein-1 distance.
pub fn w1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(solve_transport(a, b, CostKind::Euclidean)?.value)
}

/// Squared Wasserstein-2 distance (twice the optimal `|x - y|^2 / 2` cost).
pub fn w2_squared(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(2.0 * solve_transport(a, b, CostKind::Quadratic)?.value)
}

/// Result of a c-transform: values and the attaining candidate per point.
#[derive(Debug, Clone, PartialEq)]
pub struct CTransform {
    pub values: Vec<f64>,
    pub argmin: Vec<usize>,
}

/// `phi^c(x) = min_j c(x, y_j) - phi(y_j)` at every `x` in `at`, where `phi`
/// is given on the points `over`. Ties go to the lowest candidate index.
pub fn c_transform(
    phi: &[f64],
    kind: CostKind,
    at: &PointCloud,
    over: &PointCloud,
) -> Result<CTransform> {
    kind.validate()?;
    if at.dim() != over.dim() {
        return Err(Error::DimensionMismatch {
            expected: at.dim(),
            found: over.dim(),
        });
    }
    if phi.len() != over.len() {
        return Err(Error::LengthMismatch {
            points: over.len(),
            weights: phi.len(),
        });
    }
    if over.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut values = Vec::with_capacity(at.len());
    let mut argmin = Vec::with_capacity(at.len());
    for x in at.iter() {
        let mut best = f64::INFINITY;
        let mut best_j = 0;
        for (j, y) in over.iter().enumerate() {
            let v = kind.eval(x, y) - phi[j];
            if v < best {
                best = v;
                best_j = j;
            }
        }
        values.push(best);
        argmin.push(best_j);
    }
    Ok(CTransform { values, argmin })
}

/// Largest `|phi(p) - phi(q)| / |p - q|` over pairs of distinct points.
pub fn lipschitz_ratio(phi: &[f64], points: &PointCloud) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::FewerThanTwoPoints);
    }
    if phi.len() != points.len() {
        return Err(Error::LengthMismatch {
            points: points.len(),
            weights: phi.len(),
        });
    }
    let mut worst = 0.0f64;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let d = distance(points.point(a), points.point(b));
            if d > 0.0 {
                worst = worst.max((phi[a] - phi[b]).abs() / d);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cloud(points: &[f64]) -> PointCloud {
        PointCloud::new(1, points.to_vec()).unwrap()
    }

    #[test]
    fn single_pair_huber() {
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(&[3.0]).unwrap();
        let plan = solve_transport(&mu, &nu, CostKind::Huber(1.0)).unwrap();
        assert_eq!(
            plan.entries,
            vec![PlanEntry {
                source: 0,
                target: 0,
                mass: 1.0
            }]
        );
        assert_eq!(plan.value, 2.5);
        assert_eq!(plan.target_potential[0], 0.0);
        assert_eq!(plan.source_potential[0], 2.5);
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let m = DiscreteMeasure::new(
            vec![vec![0.1, 0.2], vec![0.7, 0.3], vec![0.5, 0.9]],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        for kind in [
            CostKind::Quadratic,
            CostKind::Euclidean,
            CostKind::Huber(0.3),
        ] {
            let plan = solve_transport(&m, &m, kind).unwrap();
            assert_eq!(plan.value, 0.0);
            assert!(plan.entries.iter().all(|e| e.source == e.target));
        }
    }

    #[test]
    fn shifted_pair_euclidean() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!((w1(&mu, &nu).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn w1_w2_single_pair() {
        let a = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[3.0]).unwrap();
        assert_eq!(w1(&a, &b).unwrap(), 3.0);
        assert_eq!(w2_squared(&a, &b).unwrap(), 9.0);
        assert_eq!(w1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[0.0, 1.0]).unwrap();
        assert_eq!(
            solve_transport(&a, &b, CostKind::Quadratic).unwrap_err(),
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn c_transform_examples() {
        let t = c_transform(
            &[0.0, 0.0],
            CostKind::Quadratic,
            &cloud(&[1.0]),
            &cloud(&[0.0, 2.0]),
        )
        .unwrap();
        assert_eq!(t.values, vec![0.5]);
        assert_eq!(t.argmin, vec![0]);

        let t = c_transform(&[0.0], CostKind::Huber(1.0), &cloud(&[0.0]), &cloud(&[3.0])).unwrap();
        assert_eq!(t.values, vec![2.5]);

        let t = c_transform(
            &[0.0, 1.0],
            CostKind::Quadratic,
            &cloud(&[0.0, 1.0]),
            &cloud(&[0.0, 1.0]),
        )
        .unwrap();
        assert_eq!(t.values, vec![-0.5, -1.0]);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(
            lipschitz_ratio(&[0.0, 3.0], &cloud(&[0.0, 1.0])).unwrap(),
            3.0
        );
        assert_eq!(
            lipschitz_ratio(&[2.0, 2.0, 2.0], &cloud(&[0.0, 1.0, 5.0])).unwrap(),
            0.0
        );
        assert_eq!(
            lipschitz_ratio(&[0.0, 1.0, 1.0], &cloud(&[0.0, 1.0, 3.0])).unwrap(),
            1.0
        );
        assert_eq!(
            lipschitz_ratio(&[0.0], &cloud(&[0.0])).unwrap_err(),
            Error::FewerThanTwoPoints
        );
    }

    #[test]
    fn transpose_swaps_roles() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![0.5], vec![3.0]], vec![0.3, 0.7]).unwrap();
        let plan = solve_transport(&mu, &nu, CostKind::Quadratic).unwrap();
        let t = plan.transpose();
        assert!(t.marginal_error(&nu, &mu) < 1e-15);
        assert!(t.slackness_error(&nu, &mu) < 1e-12);
    }
}
