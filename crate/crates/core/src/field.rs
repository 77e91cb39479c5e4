//! Extended-real scalar fields. `f64::INFINITY` is the `+inf` sentinel;
//! `-inf` and NaN never occur in a valid field.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::{CotangentVector, Manifold, Point};

/// `a - b` on `(-inf, +inf]`; `inf - inf` is an error.
pub fn ext_sub(a: f64, b: f64) -> Result<f64> {
    if a == f64::INFINITY && b == f64::INFINITY {
        return Err(Error::IndeterminateDifference);
    }
    Ok(a - b)
}

/// `a + b` on `(-inf, +inf]`; `+inf` absorbs.
pub fn ext_add(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY || b == f64::INFINITY {
        f64::INFINITY
    } else {
        a + b
    }
}

type Eval = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type Diff = Arc<dyn Fn(&Point) -> CotangentVector + Send + Sync>;

/// Closed-form field `f: M -> (-inf, +inf]` with an optional analytic
/// differential.
#[derive(Clone)]
pub struct ScalarField {
    eval: Eval,
    diff: Option<Diff>,
}

impl ScalarField {
    pub fn new<F: Fn(&Point) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self { eval: Arc::new(f), diff: None }
    }

    pub fn with_differential<D: Fn(&Point) -> CotangentVector + Send + Sync + 'static>(mut self, d: D) -> Self {
        self.diff = Some(Arc::new(d));
        self
    }

    pub fn eval(&self, p: &Point) -> f64 {
        (self.eval)(p)
    }

    pub fn differential(&self, p: &Point) -> Option<CotangentVector> {
        self.diff.as_ref().map(|d| d(p))
    }

    pub fn neg(&self) -> Self {
        let f = self.eval.clone();
        let mut out = Self::new(move |p| -f(p));
        if let Some(d) = self.diff.clone() {
            out.diff = Some(Arc::new(move |p| d(p).scaled(-1.0)));
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = self.eval.clone();
        Self::new(move |p| s * f(p))
    }

    pub fn sum(&self, other: &Self) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self::new(move |p| ext_add(f(p), g(p)))
    }

    pub fn product(&self, other: &Self) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self::new(move |p| f(p) * g(p))
    }

    /// Values at the given points.
    pub fn sample(&self, points: &[Point]) -> DiscreteField {
        DiscreteField::new(points.iter().map(|p| self.eval(p)).collect())
    }

    /// `d(., p0)` on `m`.
    pub fn distance_from(m: &Manifold, p0: &Point) -> Self {
        let (m, p0) = (m.clone(), p0.clone());
        Self::new(move |p| m.distance(p, &p0).value)
    }

    /// `d(., p0)^2` on `m`.
    pub fn squared_distance_from(m: &Manifold, p0: &Point) -> Self {
        let (m, p0) = (m.clone(), p0.clone());
        Self::new(move |p| m.distance(p, &p0).value.powi(2))
    }
}

/// Values on the vertices of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute finite value; `+inf` if any entry is infinite.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index attaining the minimum.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|b| *v < self.values[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::new(self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn pointwise_max(&self, other: &Self) -> Self {
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a.max(*b)).collect())
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_arithmetic() {
        assert_eq!(ext_add(1.0, f64::INFINITY), f64::INFINITY);
        assert_eq!(ext_sub(f64::INFINITY, 2.0).unwrap(), f64::INFINITY);
        assert!(matches!(ext_sub(f64::INFINITY, f64::INFINITY), Err(Error::IndeterminateDifference)));
    }

    #[test]
    fn argmin_breaks_ties_by_index() {
        let f = DiscreteField::new(vec![3.0, 1.0, f64::INFINITY, 1.0]);
        assert_eq!(f.argmin(), Some(1));
        assert_eq!(DiscreteField::new(vec![f64::INFINITY]).argmin(), None);
    }
}
