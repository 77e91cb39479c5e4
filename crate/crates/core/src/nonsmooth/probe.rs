use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{CotangentVector, Manifold, NormalChart, Point, TangentVector, Vector};

/// Radii and directions on which normalized increments are sampled.
///
/// A level `r` is violated by `zeta` when some direction `u` gives
/// `(f(exp_p(r u)) - f(p) - zeta(r u)) / r < -margin - curvature * r`.
/// The `curvature * r` allowance absorbs the second-order term of smooth
/// fields; it vanishes as the schedule deepens.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeSchedule {
    pub radii: Vec<f64>,
    pub directions: usize,
    pub margin: f64,
    pub curvature: f64,
}

impl ProbeSchedule {
    pub fn geometric(start: f64, levels: usize, factor: f64, dim: usize) -> Self {
        let radii = (0..levels).map(|i| start * factor.powi(i as i32)).collect();
        Self { radii, directions: default_directions(dim), margin: 1e-6, curvature: 1.0 }
    }

    /// Eight levels from `0.5 r_M(p)` halving each time.
    pub fn default_for(m: &Manifold, p: &Point) -> Self {
        Self::geometric(0.5 * m.working_radius_at(p), 8, 0.5, m.dim())
    }

    /// Appends `extra` further halvings.
    pub fn deepened(&self, extra: usize) -> Self {
        let mut s = self.clone();
        let last = *self.radii.last().expect("schedule has levels");
        s.radii.extend((1..=extra).map(|i| last * 0.5f64.powi(i as i32)));
        s
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_curvature(mut self, curvature: f64) -> Self {
        self.curvature = curvature;
        self
    }

    pub fn with_directions(mut self, directions: usize) -> Self {
        self.directions = directions;
        self
    }

    pub fn depth(&self) -> f64 {
        self.radii.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn validate(&self, m: &Manifold, p: &Point) -> Result<()> {
        let cap = 0.9 * m.working_radius_at(p);
        if self.radii.is_empty() {
            return Err(Error::InvalidInput("empty radii schedule".into()));
        }
        for w in self.radii.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidInput("radii schedule must be strictly decreasing".into()));
            }
        }
        if let Some(&r) = self.radii.iter().find(|&&r| !(r > 0.0 && r < cap)) {
            return Err(Error::OutOfRange { name: "probe radius", value: r, max: cap });
        }
        Ok(())
    }
}

pub fn default_directions(dim: usize) -> usize {
    if dim >= 3 {
        128
    } else {
        32
    }
}

/// Quasi-uniform unit vectors of `R^dim`: `+-1` in dimension one, equally
/// spaced angles in dimension two, a Fibonacci lattice in dimension three.
pub fn unit_directions(dim: usize, count: usize) -> Vec<Vector> {
    match dim {
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                Vector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    Vector::from_column_slice(&[r * a.cos(), r * a.sin(), z])
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Violated,
    Consistent,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubgradientVerdict {
    pub status: Status,
    /// Tangent offset `v` (representation components) with a negative
    /// normalized increment.
    pub witness: Option<Vec<f64>>,
    /// The normalized increment at the witness.
    pub margin: Option<f64>,
    /// Smallest radius probed.
    pub depth: Option<f64>,
}

impl SubgradientVerdict {
    pub fn is_consistent(&self) -> bool {
        self.status == Status::Consistent
    }

    pub fn is_violated(&self) -> bool {
        self.status == Status::Violated
    }

    pub fn witness_vector(&self, p: &Point) -> Option<TangentVector> {
        self.witness.as_ref().map(|w| TangentVector::new(p, Vector::from_column_slice(w)))
    }
}

struct Sample {
    r: f64,
    y: Vector,
    value: f64,
}

/// Field values on a probe schedule around `p`, reusable for many covectors.
pub struct Probe {
    pub chart: NormalChart,
    pub value: f64,
    samples: Vec<Sample>,
    margin: f64,
    curvature: f64,
    depth: f64,
}

impl Probe {
    pub fn new(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, schedule: &ProbeSchedule) -> Result<Self> {
        schedule.validate(m, p)?;
        let value = f(p);
        if !value.is_finite() {
            return Err(Error::InfiniteAtBase);
        }
        let chart = m.normal_chart(p);
        let dirs = unit_directions(m.dim(), schedule.directions);
        let mut samples = Vec::with_capacity(dirs.len() * schedule.radii.len());
        for &r in &schedule.radii {
            for u in &dirs {
                let y = u * r;
                let q = chart.from_chart(m, &y)?;
                samples.push(Sample { r, y, value: f(&q) });
            }
        }
        Ok(Self { chart, value, samples, margin: schedule.margin, curvature: schedule.curvature, depth: schedule.depth() })
    }

    /// Normalized increment of the covector with frame coefficients `a`
    /// along sample `s`.
    fn increment(&self, s: &Sample, a: &Vector) -> f64 {
        (s.value - self.value - a.dot(&s.y)) / s.r
    }

    /// Verdict for the covector with frame coefficients `a`; the first
    /// violation in schedule order is reported.
    pub fn verdict(&self, a: &Vector) -> SubgradientVerdict {
        for s in &self.samples {
            let q = self.increment(s, a);
            if q < -self.margin - self.curvature * s.r {
                return SubgradientVerdict {
                    status: Status::Violated,
                    witness: Some(self.chart.tangent(&s.y).components.iter().copied().collect()),
                    margin: Some(q),
                    depth: None,
                };
            }
        }
        SubgradientVerdict { status: Status::Consistent, witness: None, margin: None, depth: Some(self.depth) }
    }

    pub fn verdict_for(&self, zeta: &CotangentVector) -> SubgradientVerdict {
        self.verdict(&self.chart.covector_coords(zeta))
    }
}

/// Probes whether `zeta` can belong to `D^- f(p)`. A violation certifies
/// `zeta` is not a subgradient up to the margin; consistency is evidence
/// to the probed depth.
pub fn test_subgradient(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, zeta: &CotangentVector, schedule: &ProbeSchedule) -> Result<SubgradientVerdict> {
    Ok(Probe::new(m, f, p, schedule)?.verdict_for(zeta))
}

/// `D^+ f(p)` test through `D^+ f = -D^-(-f)`.
pub fn test_supergradient(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, zeta: &CotangentVector, schedule: &ProbeSchedule) -> Result<SubgradientVerdict> {
    let neg = |q: &Point| -f(q);
    test_subgradient(m, &neg, p, &zeta.scaled(-1.0), schedule)
}

/// `min_t (f(exp_p(t v)) - f(p)) / t` over the grid, for unit `v`.
pub fn dini_inf_quotient(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, v: &TangentVector, t_grid: &[f64]) -> Result<f64> {
    let f0 = f(p);
    if !f0.is_finite() {
        return Err(Error::InfiniteAtBase);
    }
    let cap = 0.9 * m.working_radius_at(p);
    let n = m.norm(v);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("direction must be a unit vector, has norm {n}")));
    }
    let mut best = f64::INFINITY;
    for &t in t_grid {
        if !(t > 0.0 && t < cap) {
            return Err(Error::OutOfRange { name: "t", value: t, max: cap });
        }
        let q = m.exp(p, &v.scaled(t))?;
        best = best.min((f(&q) - f0) / t);
    }
    Ok(best)
}

/// Largest geodesic difference quotient `(f(exp_q(t w)) - f(q)) / t` over
/// base points `q = exp_p(s u)` near `p` and steps `t`, where `w` is `v`
/// transported to `q`. Each shrink level `s` uses offsets up to `s` and
/// steps `s / 4`.
pub fn generalized_directional(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, v: &TangentVector, shrink: &[f64]) -> Result<f64> {
    let chart = m.normal_chart(p);
    let dirs = unit_directions(m.dim(), default_directions(m.dim()));
    let mut best = f64::NEG_INFINITY;
    for &s in shrink {
        let mut offsets = vec![Vector::zeros(m.dim())];
        for u in &dirs {
            for frac in [0.25, 0.5, 1.0] {
                offsets.push(u * (s * frac));
            }
        }
        for y in offsets {
            let q = chart.from_chart(m, &y)?;
            let w = if y.norm() == 0.0 { v.clone() } else { m.parallel_transport(v, &q)? };
            let fq = f(&q);
            if !fq.is_finite() {
                continue;
            }
            for t in [0.25 * s, 0.0625 * s] {
                let target = m.exp(&q, &w.scaled(t))?;
                best = best.max((f(&target) - fq) / t);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Manifold, Point) {
        (Manifold::euclidean(1), Point::from_slice(&[0.0]))
    }

    fn cov(p: &Point, a: f64) -> CotangentVector {
        CotangentVector::new(p, Vector::from_element(1, a))
    }

    #[test]
    fn abs_at_zero() {
        let (m, p) = line();
        let f = |q: &Point| q.coords[0].abs();
        let s = ProbeSchedule::default_for(&m, &p);
        assert!(test_subgradient(&m, &f, &p, &cov(&p, 0.5), &s).unwrap().is_consistent());
        let v = test_subgradient(&m, &f, &p, &cov(&p, 1.5), &s).unwrap();
        assert!(v.is_violated());
        // |v| - 1.5 v < 0 only for v > 0
        assert!(v.witness.unwrap()[0] > 0.0);
        assert!(test_supergradient(&m, &f, &p, &cov(&p, 0.0), &s).unwrap().is_violated());
    }

    #[test]
    fn negative_abs_has_no_subgradient() {
        let (m, p) = line();
        let f = |q: &Point| -q.coords[0].abs();
        let s = ProbeSchedule::default_for(&m, &p);
        for k in 0..=40 {
            let a = -2.0 + 0.1 * k as f64;
            assert!(test_subgradient(&m, &f, &p, &cov(&p, a), &s).unwrap().is_violated(), "{a}");
        }
        assert!(test_supergradient(&m, &f, &p, &cov(&p, 0.0), &s).unwrap().is_consistent());
    }

    #[test]
    fn witness_reproduces() {
        let (m, p) = line();
        let f = |q: &Point| q.coords[0].abs();
        let s = ProbeSchedule::default_for(&m, &p);
        let zeta = cov(&p, 1.5);
        let v = test_subgradient(&m, &f, &p, &zeta, &s).unwrap();
        let w = v.witness_vector(&p).unwrap();
        let r = m.norm(&w);
        let q = m.exp(&p, &w).unwrap();
        let inc = (f(&q) - f(&p) - zeta.apply(&w)) / r;
        assert_eq!(inc, v.margin.unwrap());
        assert!(inc < -s.margin);
    }

    #[test]
    fn dini_quotients() {
        let (m, p) = line();
        let grid = [1.0, 0.5, 0.25];
        let v = TangentVector::new(&p, Vector::from_element(1, 1.0));
        assert_eq!(dini_inf_quotient(&m, &|q: &Point| q.coords[0].abs(), &p, &v, &grid).unwrap(), 1.0);
        let m2 = Manifold::euclidean(2);
        let p2 = Point::from_slice(&[0.3, 0.1]);
        let v2 = TangentVector::new(&p2, Vector::from_column_slice(&[0.6, 0.8]));
        let lin = |q: &Point| 2.0 * q.coords[0] - q.coords[1];
        let d = dini_inf_quotient(&m2, &lin, &p2, &v2, &grid).unwrap();
        assert!((d - 0.4).abs() < 1e-12);
        assert!(dini_inf_quotient(&m, &|_: &Point| f64::INFINITY, &p, &v, &grid).is_err());
    }

    #[test]
    fn generalized_directional_of_negative_abs() {
        let (m, p) = line();
        let v = TangentVector::new(&p, Vector::from_element(1, 1.0));
        let shrink = [0.1, 0.01];
        let g = generalized_directional(&m, &|q: &Point| -q.coords[0].abs(), &p, &v, &shrink).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        let g = generalized_directional(&m, &|q: &Point| q.coords[0].abs(), &p, &v, &shrink).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
    }
}
