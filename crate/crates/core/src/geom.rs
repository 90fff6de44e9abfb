//! Small Euclidean helpers shared by every module.

use core::cmp::Ordering;

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    libm::sqrt(squared_distance(x, y))
}

/// Lexicographic order on coordinates using the IEEE total order.
pub fn lex_cmp(x: &[f64], y: &[f64]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        match a.total_cmp(b) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    x.len().cmp(&y.len())
}
