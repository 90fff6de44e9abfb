use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{distance, squared_distance};

/// Ground cost between two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "cost", content = "lambda", rename_all = "lowercase")]
pub enum CostKind {
    /// `|x - y|^2 / 2`
    Quadratic,
    /// `|x - y|`
    Euclidean,
    /// Quadratic up to distance `lambda`, affine with slope `lambda` beyond.
    Huber(f64),
}

impl CostKind {
    pub fn huber(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(CostKind::Huber(lambda))
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            CostKind::Huber(l) => Some(l),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CostKind::Quadratic => "quadratic",
            CostKind::Euclidean => "euclidean",
            CostKind::Huber(_) => "huber",
        }
    }

    /// Cost as a function of the distance `r = |x - y|`.
    #[inline]
    pub fn of_distance(&self, r: f64) -> f64 {
        match *self {
            CostKind::Quadratic => 0.5 * r * r,
            CostKind::Euclidean => r,
            CostKind::Huber(lambda) => huber(r, lambda),
        }
    }

    /// Cost between two points of equal dimension (unchecked).
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            CostKind::Quadratic => 0.5 * squared_distance(x, y),
            _ => self.of_distance(distance(x, y)),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            CostKind::Huber(l) => check_lambda(l),
            _ => Ok(()),
        }
    }
}

#[inline]
fn huber(r: f64, lambda: f64) -> f64 {
    if r <= lambda {
        0.5 * r * r
    } else {
        lambda * r - 0.5 * lambda * lambda
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveLambda(lambda))
    }
}

/// Ground cost between `x` and `y`.
pub fn cost(kind: CostKind, x: &[f64], y: &[f64]) -> Result<f64> {
    kind.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(kind.eval(x, y))
}
