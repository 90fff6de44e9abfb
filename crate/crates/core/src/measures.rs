//! Discrete probability measures on a box in R^d.
//!
//! A [`DiscreteMeasure`] is always kept in canonical form: atoms sorted
//! lexicographically by coordinates, bitwise-equal atoms merged, zero-weight
//! atoms dropped, and weights summing to one.
//!
//! Weights are integer multiples of `2^-52`. Any sum of such weights in
//! `[0, 1]` is exact in `f64`, so transport flows, plan marginals and
//! pushforward weights carry no rounding at all.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geom::{distance, lex_cmp};

/// Weights are stored as multiples of `1 / MASS_UNITS`.
const MASS_UNITS: f64 = (1u64 << 52) as f64;

/// A flat list of points in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index: pos / dim });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::EmptyGrid)?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index: self.len() });
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }
}

/// Splits `MASS_UNITS` among the atoms in proportion to `weights`: round to
/// nearest, then settle the leftover units on the atoms with the largest
/// rounding loss (lowest index first on ties).
fn quantize(weights: &[f64], total: f64) -> Vec<u64> {
    let scale = MASS_UNITS / total;
    let exact: Vec<f64> = weights.iter().map(|w| w * scale).collect();
    let mut units: Vec<u64> = exact.iter().map(|x| libm::round(*x) as u64).collect();
    let assigned: u64 = units.iter().sum();
    let target = MASS_UNITS as u64;
    if assigned == target {
        return units;
    }
    let mut order: Vec<usize> = (0..units.len()).collect();
    let loss = |k: usize| exact[k] - units[k] as f64;
    if assigned < target {
        order.sort_by(|&a, &b| loss(b).total_cmp(&loss(a)).then(a.cmp(&b)));
        let mut missing = target - assigned;
        for &k in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            units[k] += 1;
            missing -= 1;
        }
    } else {
        order.sort_by(|&a, &b| loss(a).total_cmp(&loss(b)).then(a.cmp(&b)));
        let mut extra = assigned - target;
        while extra > 0 {
            for &k in &order {
                if extra == 0 {
                    break;
                }
                if units[k] > 0 {
                    units[k] -= 1;
                    extra -= 1;
                }
            }
        }
    }
    units
}

/// A weighted finite point cloud representing a probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: PointCloud,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a canonical measure from nested coordinates and nonnegative masses.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let cloud = PointCloud::from_points(&points)?;
        Self::from_cloud(cloud, weights)
    }

    /// Same as [`DiscreteMeasure::new`] with coordinates stored row-major.
    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let cloud = PointCloud::new(dim, coords)?;
        Self::from_cloud(cloud, weights)
    }

    pub fn from_cloud(points: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { index });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { index, weight: w });
            }
        }

        let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        if order.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        // Secondary key on weight makes merged sums independent of input order.
        order.sort_by(|&a, &b| match lex_cmp(points.point(a), points.point(b)) {
            Ordering::Equal => weights[a].total_cmp(&weights[b]),
            o => o,
        });

        let dim = points.dim();
        let mut coords: Vec<f64> = Vec::with_capacity(order.len() * dim);
        let mut merged: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<usize> = None;
        for &i in &order {
            let p = points.point(i);
            match last {
                Some(l) if bitwise_eq(points.point(l), p) => {
                    *merged.last_mut().expect("nonempty") += weights[i];
                }
                _ => {
                    // -0.0 + 0.0 == +0.0, so signed zeros collapse.
                    coords.extend(p.iter().map(|c| c + 0.0));
                    merged.push(weights[i]);
                    last = Some(i);
                }
            }
        }

        let total: f64 = merged.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        let units = quantize(&merged, total);
        if units.contains(&0) {
            // Atoms lighter than one unit vanish.
            let mut kept = Vec::with_capacity(coords.len());
            let mut kept_units = Vec::with_capacity(units.len());
            for (k, &u) in units.iter().enumerate() {
                if u > 0 {
                    kept.extend_from_slice(&coords[k * dim..(k + 1) * dim]);
                    kept_units.push(u);
                }
            }
            let weights = kept_units.iter().map(|&u| u as f64 / MASS_UNITS).collect();
            return Ok(Self {
                points: PointCloud { dim, coords: kept },
                weights,
            });
        }
        let merged = units.iter().map(|&u| u as f64 / MASS_UNITS).collect();

        Ok(Self {
            points: PointCloud { dim, coords },
            weights: merged,
        })
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::from_flat(point.len(), point.to_vec(), alloc::vec![1.0])
    }

    /// Uniform weights over the given points (duplicates accumulate).
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, alloc::vec![1.0; n])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        self.points.point(i)
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Index of the atom located exactly at `point`.
    pub fn find(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match lex_cmp(self.point(mid), point) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Integral of a function given by its values on the atoms.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Checks the coordinates and weights against another measure bit for bit.
    pub fn same_atoms(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self.len() == other.len()
            && bitwise_eq(self.points.coords(), other.points.coords())
    }
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.to_bits() == y.to_bits() || (*x == 0.0 && *y == 0.0))
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        struct Points<'a>(&'a PointCloud);
        impl Serialize for Points<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> core::result::Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for p in self.0.iter() {
                    seq.serialize_element(p)?;
                }
                seq.end()
            }
        }
        let mut s = serializer.serialize_struct("DiscreteMeasure", 3)?;
        s.serialize_field("dim", &self.dim())?;
        s.serialize_field("points", &Points(&self.points))?;
        s.serialize_field("weights", &self.weights)?;
        s.end()
    }
}

/// An axis-aligned box `[lower, upper]` in R^d.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("box has dimension zero"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().chain(&upper).any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("non-finite bound"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidDomain("lower bound exceeds upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(alloc::vec![0.0; dim], alloc::vec![1.0; dim])
    }

    /// Smallest box containing the supports of all given measures.
    pub fn bounding(measures: &[&DiscreteMeasure]) -> Result<Self> {
        let first = measures.first().ok_or(Error::EmptyMeasure)?;
        let dim = first.dim();
        let mut lower = alloc::vec![f64::INFINITY; dim];
        let mut upper = alloc::vec![f64::NEG_INFINITY; dim];
        for m in measures {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
            for (p, _) in m.iter() {
                for k in 0..dim {
                    lower[k] = lower[k].min(p[k]);
                    upper[k] = upper[k].max(p[k]);
                }
            }
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        distance(&self.lower, &self.upper)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (l, u))| l <= c && c <= u)
    }
}

/// Euclidean diameter of a box domain.
pub fn diameter(domain: &BoxDomain) -> f64 {
    domain.diameter()
}

/// Turns a row-major `height x width` intensity grid into a measure with one
/// atom per positive pixel, placed at the pixel center inside a planar box.
///
/// Column index runs along the first axis, row index along the second.
pub fn from_grayscale_grid(
    values: &[f64],
    height: usize,
    width: usize,
    domain: &BoxDomain,
) -> Result<DiscreteMeasure> {
    if domain.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: domain.dim(),
        });
    }
    if height.checked_mul(width) != Some(values.len()) || values.is_empty() {
        return Err(Error::InvalidGrid {
            height,
            width,
            len: values.len(),
        });
    }
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for row in 0..height {
        for col in 0..width {
            let index = row * width + col;
            let v = values[index];
            if !v.is_finite() {
                return Err(Error::NonFiniteWeight { index });
            }
            if v < 0.0 {
                return Err(Error::NegativeWeight { index, weight: v });
            }
            if v > 0.0 {
                coords.push(lo[0] + (col as f64 + 0.5) / width as f64 * (hi[0] - lo[0]));
                coords.push(lo[1] + (row as f64 + 0.5) / height as f64 * (hi[1] - lo[1]));
                weights.push(v);
            }
        }
    }
    if weights.is_empty() {
        return Err(Error::AllZeroImage);
    }
    DiscreteMeasure::from_flat(2, coords, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalizes_weights() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![3.0]], vec![2.0, 2.0]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn merges_duplicates() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![0.0]], vec![0.3, 0.7]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.point(0), &[0.0]);
        assert!((m.weight(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sit_on_the_dyadic_grid() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 1.0, 1.0])
            .unwrap();
        let unit = 1.0 / MASS_UNITS;
        let mut total = 0.0;
        for &w in m.weights() {
            assert_eq!((w / unit).fract(), 0.0);
            assert!((w - 1.0 / 3.0).abs() <= unit);
            total += w;
        }
        assert_eq!(total, 1.0);
        // A weight below one unit vanishes.
        let tiny = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1e-20]).unwrap();
        assert_eq!(tiny.len(), 1);
    }

    #[test]
    fn rejects_negative_weight() {
        let err = DiscreteMeasure::new(vec![vec![1.0], vec![2.0]], vec![1.0, -1.0]).unwrap_err();
        assert_eq!(
            err,
            Error::NegativeWeight {
                index: 1,
                weight: -1.0
            }
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            DiscreteMeasure::new(vec![vec![1.0]], vec![0.0]).unwrap_err(),
            Error::EmptyMeasure
        );
        assert_eq!(
            DiscreteMeasure::new(vec![vec![f64::NAN]], vec![1.0]).unwrap_err(),
            Error::NonFiniteCoordinate { index: 0 }
        );
        assert_eq!(
            DiscreteMeasure::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0, 1.0]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn drops_zero_weights_and_sorts() {
        let m = DiscreteMeasure::new(
            vec![vec![2.0, 0.0], vec![1.0, 5.0], vec![1.0, 1.0]],
            vec![1.0, 0.0, 3.0],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.point(0), &[1.0, 1.0]);
        assert_eq!(m.weights(), &[0.75, 0.25]);
        assert_eq!(m.find(&[2.0, 0.0]), Some(1));
        assert_eq!(m.find(&[1.0, 5.0]), None);
    }

    #[test]
    fn signed_zero_merges() {
        let m = DiscreteMeasure::new(vec![vec![-0.0], vec![0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.point(0)[0].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn grayscale_examples() {
        let unit = BoxDomain::unit(2).unwrap();
        let m = from_grayscale_grid(&[1.0, 1.0], 1, 2, &unit).unwrap();
        assert_eq!(m.point(0), &[0.25, 0.5]);
        assert_eq!(m.point(1), &[0.75, 0.5]);
        assert_eq!(m.weights(), &[0.5, 0.5]);

        let m = from_grayscale_grid(&[1.0, 0.0, 0.0, 3.0], 2, 2, &unit).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);

        let m = from_grayscale_grid(&[5.0], 1, 1, &unit).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(0), 1.0);

        assert_eq!(
            from_grayscale_grid(&[0.0, 0.0], 1, 2, &unit).unwrap_err(),
            Error::AllZeroImage
        );
        assert!(matches!(
            from_grayscale_grid(&[1.0], 1, 2, &unit),
            Err(Error::InvalidGrid { .. })
        ));
    }

    #[test]
    fn diameters() {
        assert_eq!(diameter(&BoxDomain::unit(1).unwrap()), 1.0);
        assert!((diameter(&BoxDomain::unit(2).unwrap()) - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(
            diameter(&BoxDomain::new(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap()),
            5.0
        );
        assert!(BoxDomain::new(vec![1.0], vec![0.0]).is_err());
    }
}
