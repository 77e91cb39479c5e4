use serde_json::json;

use super::probe::{dini_inf_quotient, unit_directions, Probe, ProbeSchedule};
use crate::error::{Error, Result};
use crate::manifold::{CotangentVector, Manifold, Point, Vector};

const BOX: f64 = 1e6;

/// Convex polytope `{a : n . a <= c}` in normal-chart covector coordinates,
/// with its vertices (clipped to a large box so it is always bounded).
#[derive(Clone, Debug)]
pub struct Polytope {
    pub dim: usize,
    pub halfspaces: Vec<(Vector, f64)>,
    pub vertices: Vec<Vector>,
}

impl Polytope {
    pub fn from_halfspaces(dim: usize, halfspaces: Vec<(Vector, f64)>) -> Self {
        let vertices = match dim {
            1 => interval_vertices(&halfspaces),
            2 => polygon_vertices(&halfspaces),
            _ => enumerate_vertices(&halfspaces),
        };
        Self { dim, halfspaces, vertices }
    }

    /// Axis box `[lo, hi]^dim`, or the interval `[lo, hi]` in dimension one.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::from_halfspaces(1, vec![(Vector::from_element(1, 1.0), hi), (Vector::from_element(1, -1.0), -lo)])
    }

    /// Segment or polygon given by its vertices (dimension two, convex,
    /// any order).
    pub fn hull_2d(points: &[Vector]) -> Self {
        let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        let vertices: Vec<Vector> = hull.iter().map(|p| Vector::from_column_slice(&[p.0, p.1])).collect();
        let mut halfspaces = Vec::new();
        for i in 0..vertices.len() {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % vertices.len()];
            let e = b - a;
            if e.norm() == 0.0 {
                continue;
            }
            let n = Vector::from_column_slice(&[e[1], -e[0]]) / e.norm();
            halfspaces.push((n.clone(), n.dot(a)));
        }
        if vertices.len() == 2 {
            // a segment: add the two end caps
            let e = (&vertices[1] - &vertices[0]).normalize();
            halfspaces.push((e.clone(), e.dot(&vertices[1])));
            halfspaces.push((-&e, -e.dot(&vertices[0])));
        }
        Self { dim: 2, halfspaces, vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, a: &Vector, tol: f64) -> bool {
        !self.is_empty() && self.halfspaces.iter().all(|(n, c)| n.dot(a) <= c + tol)
    }

    pub fn centroid(&self) -> Option<Vector> {
        if self.is_empty() {
            return None;
        }
        let mut s = Vector::zeros(self.dim);
        for v in &self.vertices {
            s += v;
        }
        Some(s / self.vertices.len() as f64)
    }

    /// Euclidean distance from `x` to the polytope.
    pub fn distance_to(&self, x: &Vector) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        if self.contains(x, 0.0) {
            return 0.0;
        }
        match self.dim {
            1 => {
                let (lo, hi) = (self.vertices[0][0], self.vertices[1][0]);
                (lo - x[0]).max(x[0] - hi).max(0.0)
            }
            2 => {
                let n = self.vertices.len();
                (0..n).map(|i| segment_distance(x, &self.vertices[i], &self.vertices[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
            _ => hull_distance(x, &self.vertices),
        }
    }

    pub fn hausdorff(&self, other: &Polytope) -> f64 {
        let a = self.vertices.iter().map(|v| other.distance_to(v)).fold(0.0, f64::max);
        let b = other.vertices.iter().map(|v| self.distance_to(v)).fold(0.0, f64::max);
        a.max(b)
    }
}

fn interval_vertices(hs: &[(Vector, f64)]) -> Vec<Vector> {
    let (mut lo, mut hi) = (-BOX, BOX);
    for (n, c) in hs {
        if n[0] > 0.0 {
            hi = hi.min(c / n[0]);
        } else if n[0] < 0.0 {
            lo = lo.max(c / n[0]);
        } else if *c < 0.0 {
            return vec![];
        }
    }
    if lo <= hi {
        vec![Vector::from_element(1, lo), Vector::from_element(1, hi)]
    } else {
        vec![]
    }
}

fn polygon_vertices(hs: &[(Vector, f64)]) -> Vec<Vector> {
    let mut poly: Vec<(f64, f64)> = vec![(-BOX, -BOX), (BOX, -BOX), (BOX, BOX), (-BOX, BOX)];
    for (n, c) in hs {
        if poly.is_empty() {
            break;
        }
        let side = |p: (f64, f64)| n[0] * p.0 + n[1] * p.1 - c;
        let mut out = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let (sa, sb) = (side(a), side(b));
            if sa <= 0.0 {
                out.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        poly = out;
    }
    poly.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14 && (a.1 - b.1).abs() < 1e-14);
    poly.into_iter().map(|p| Vector::from_column_slice(&[p.0, p.1])).collect()
}

fn enumerate_vertices(hs: &[(Vector, f64)]) -> Vec<Vector> {
    let dim = hs.first().map_or(3, |h| h.0.len());
    let mut all: Vec<(Vector, f64)> = hs.to_vec();
    for i in 0..dim {
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        all.push((e.clone(), BOX));
        all.push((-e, BOX));
    }
    let feasible = |x: &Vector| all.iter().all(|(n, c)| n.dot(x) <= c + 1e-9 * (1.0 + c.abs()));
    let mut out: Vec<Vector> = Vec::new();
    let m = all.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let a = crate::manifold::Matrix::from_rows(&[all[i].0.transpose(), all[j].0.transpose(), all[k].0.transpose()]);
                let b = Vector::from_column_slice(&[all[i].1, all[j].1, all[k].1]);
                if a.determinant().abs() < 1e-12 {
                    continue;
                }
                if let Some(x) = a.lu().solve(&b) {
                    if feasible(&x) && !out.iter().any(|v| (v - &x).norm() < 1e-10) {
                        out.push(x);
                    }
                }
            }
        }
    }
    out
}

fn segment_distance(x: &Vector, a: &Vector, b: &Vector) -> f64 {
    let e = b - a;
    let l2 = e.norm_squared();
    let t = if l2 == 0.0 { 0.0 } else { ((x - a).dot(&e) / l2).clamp(0.0, 1.0) };
    (x - (a + e * t)).norm()
}

/// Distance to the convex hull of `pts` by Frank-Wolfe iterations.
fn hull_distance(x: &Vector, pts: &[Vector]) -> f64 {
    let mut y = pts[0].clone();
    for it in 0..2000 {
        let g = &y - x;
        let s = pts.iter().min_by(|a, b| g.dot(a).total_cmp(&g.dot(b))).expect("nonempty");
        let d = s - &y;
        let dd = d.norm_squared();
        if dd == 0.0 {
            break;
        }
        let step = (-(g.dot(&d)) / dd).clamp(0.0, 1.0);
        if step == 0.0 && it > 0 {
            break;
        }
        y += d * step;
    }
    (x - y).norm()
}

/// Covector grid around the finite-difference gradient, in normal-chart
/// frame coordinates.
#[derive(Clone, Copy, Debug)]
pub struct CovectorGrid {
    pub half_width: f64,
    pub per_axis: usize,
}

impl CovectorGrid {
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => Self { half_width: 2.0, per_axis: 41 },
            2 => Self { half_width: 1.0, per_axis: 21 },
            _ => Self { half_width: 0.5, per_axis: 11 },
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.per_axis <= 1 {
            0.0
        } else {
            2.0 * self.half_width / (self.per_axis - 1) as f64
        }
    }

    pub fn points(&self, center: &Vector) -> Vec<Vector> {
        let dim = center.len();
        let total = self.per_axis.pow(dim as u32);
        let s = self.spacing();
        (0..total)
            .map(|mut idx| {
                let mut a = center.clone();
                for d in 0..dim {
                    let k = idx % self.per_axis;
                    idx /= self.per_axis;
                    a[d] += -self.half_width + s * k as f64;
                }
                a
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Mode {
    /// Outer polytope from Dini quotients over the fan.
    Convex,
    /// Inner set from a covector grid filtered by the subgradient test.
    General(CovectorGrid),
}

#[derive(Clone, Debug)]
pub struct SubdifferentialEstimate {
    pub base: Point,
    /// Orthonormal frame of the normal chart; coordinates below refer to it.
    pub frame: Vec<Vector>,
    /// Certified-consistent covectors.
    pub inner: Vec<Vector>,
    pub outer: Polytope,
    pub convex: bool,
}

impl SubdifferentialEstimate {
    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn inner_covectors(&self, m: &Manifold) -> Vec<CotangentVector> {
        let chart = m.normal_chart(&self.base);
        self.inner.iter().map(|a| chart.covector(m, a)).collect()
    }

    /// Largest distance between two inner members.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.inner.iter().enumerate() {
            for b in &self.inner[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = |v: &[Vector]| v.iter().map(|a| a.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>();
        json!({
            "base": self.base.to_vec(),
            "convex": self.convex,
            "inner": rows(&self.inner),
            "outer_vertices": rows(&self.outer.vertices),
        })
    }
}

/// Estimate of `D^- f(p)` in normal-chart covector coordinates.
///
/// Convex mode: outer = `{a : a . u <= dini_inf_quotient(f, p, u)}` over
/// the fan, with the schedule radii as the `t` grid; inner = the outer
/// vertices and centroid that pass the subgradient test. General mode:
/// inner = consistent grid covectors; outer = the set of covectors
/// consistent with every probe sample, the exact acceptance region of the
/// test.
pub fn estimate_subdifferential(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, fan: &[Vector], mode: Mode, schedule: &ProbeSchedule) -> Result<SubdifferentialEstimate> {
    if fan.is_empty() {
        return Err(Error::InvalidInput("empty direction fan".into()));
    }
    let probe = Probe::new(m, f, p, schedule)?;
    let chart = probe.chart.clone();
    let dim = m.dim();
    match mode {
        Mode::Convex => {
            let mut hs = Vec::with_capacity(fan.len());
            for u in fan {
                let v = chart.tangent(u);
                hs.push((u.clone(), dini_inf_quotient(m, f, p, &v, &schedule.radii)?));
            }
            let outer = Polytope::from_halfspaces(dim, hs);
            let mut cands = outer.vertices.clone();
            cands.extend(outer.centroid());
            let inner = cands.into_iter().filter(|a| probe.verdict(a).is_consistent()).collect();
            Ok(SubdifferentialEstimate { base: p.clone(), frame: chart.frame, inner, outer, convex: true })
        }
        Mode::General(grid) => {
            let g = chart.covector_coords(&m.gradient_fd(f, p, 1e-6));
            let center = if g.iter().all(|x| x.is_finite()) { g } else { Vector::zeros(dim) };
            let inner: Vec<Vector> = grid.points(&center).into_iter().filter(|a| probe.verdict(a).is_consistent()).collect();
            let outer = acceptance_region(m, f, p, fan, schedule, probe.value)?;
            Ok(SubdifferentialEstimate { base: p.clone(), frame: chart.frame, inner, outer, convex: false })
        }
    }
}

/// `{a : a . u <= (f(exp(r u)) - f(p)) / r + margin + curvature * r}` over
/// the fan directions and schedule radii.
fn acceptance_region(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, fan: &[Vector], schedule: &ProbeSchedule, f0: f64) -> Result<Polytope> {
    let chart = m.normal_chart(p);
    let mut hs = Vec::with_capacity(fan.len());
    for u in fan {
        let mut bound = f64::INFINITY;
        for &r in &schedule.radii {
            let q = chart.from_chart(m, &(u * r))?;
            bound = bound.min((f(&q) - f0) / r + schedule.margin + schedule.curvature * r);
        }
        if bound.is_finite() {
            hs.push((u.clone(), bound));
        }
    }
    Ok(Polytope::from_halfspaces(m.dim(), hs))
}

/// Default fan: the probe directions of the schedule.
pub fn default_fan(m: &Manifold, schedule: &ProbeSchedule) -> Vec<Vector> {
    unit_directions(m.dim(), schedule.directions)
}

/// The gradient of `f` at `p` when both `D^-` and `D^+` estimates are
/// nonempty and lie within `tol` of a common point, which is returned.
pub fn differentiability_probe(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, tol: f64, schedule: &ProbeSchedule) -> Result<Option<CotangentVector>> {
    let fan = default_fan(m, schedule);
    let grid = CovectorGrid::default_for(m.dim());
    let lower = estimate_subdifferential(m, f, p, &fan, Mode::General(grid), schedule)?;
    let neg = |q: &Point| -f(q);
    let upper = estimate_subdifferential(m, &neg, p, &fan, Mode::General(grid), schedule)?;
    if lower.is_empty() || upper.is_empty() {
        return Ok(None);
    }
    let all: Vec<Vector> = lower.inner.iter().cloned().chain(upper.inner.iter().map(|a| -a)).collect();
    let dim = m.dim();
    let mut c = Vector::zeros(dim);
    for d in 0..dim {
        let lo = all.iter().map(|a| a[d]).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|a| a[d]).fold(f64::NEG_INFINITY, f64::max);
        c[d] = 0.5 * (lo + hi);
    }
    if all.iter().all(|a| (a - &c).norm() <= tol) {
        Ok(Some(m.normal_chart(p).covector(m, &c)))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_convex_estimate_is_unit_interval() {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.0]);
        let s = ProbeSchedule::default_for(&m, &p);
        let est = estimate_subdifferential(&m, &|q: &Point| q.coords[0].abs(), &p, &default_fan(&m, &s), Mode::Convex, &s).unwrap();
        assert!(est.outer.hausdorff(&Polytope::interval(-1.0, 1.0)) <= 0.02);
        assert_eq!(est.inner.len(), 3);
        for a in &est.inner {
            assert!(est.outer.contains(a, 1e-12));
        }
    }

    #[test]
    fn general_mode_inner_inside_outer() {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.0]);
        let s = ProbeSchedule::default_for(&m, &p);
        let est = estimate_subdifferential(&m, &|q: &Point| q.coords[0].abs(), &p, &default_fan(&m, &s), Mode::General(CovectorGrid::default_for(1)), &s).unwrap();
        assert_eq!(est.inner.len(), 21);
        for a in &est.inner {
            assert!(est.outer.contains(a, 1e-12));
            assert!(a[0].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn smooth_field_is_differentiable() {
        let m = Manifold::euclidean(2);
        let p = Point::from_slice(&[0.3, -0.2]);
        let f = |q: &Point| q.coords[0].sin() + q.coords[0] * q.coords[1];
        let s = ProbeSchedule::default_for(&m, &p);
        let g = differentiability_probe(&m, &f, &p, 0.05, &s).unwrap().expect("differentiable");
        let exact = [0.3f64.cos() - 0.2, 0.3];
        assert!((g.components[0] - exact[0]).abs() < 0.01 && (g.components[1] - exact[1]).abs() < 0.01);
    }

    #[test]
    fn abs_differentiability() {
        let m = Manifold::euclidean(1);
        let s = ProbeSchedule::default_for(&m, &Point::from_slice(&[0.0]));
        let f = |q: &Point| q.coords[0].abs();
        assert!(differentiability_probe(&m, &f, &Point::from_slice(&[0.0]), 0.05, &s).unwrap().is_none());
        let s1 = ProbeSchedule::geometric(0.5, 8, 0.5, 1);
        let g = differentiability_probe(&m, &f, &Point::from_slice(&[1.0]), 0.05, &s1).unwrap().unwrap();
        assert!((g.components[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn polygon_hausdorff_to_segment() {
        // |<a, x>| on R^2 at 0: support function |a . u|
        let m = Manifold::euclidean(2);
        let p = Point::from_slice(&[0.0, 0.0]);
        let a = Vector::from_column_slice(&[0.6, -0.3]);
        let a2 = a.clone();
        let f = move |q: &Point| a2.dot(&q.coords).abs();
        let segment = Polytope::hull_2d(&[a.clone(), -&a]);
        let mut last = f64::INFINITY;
        for count in [16, 64, 256] {
            let s = ProbeSchedule::default_for(&m, &p);
            let est = estimate_subdifferential(&m, &f, &p, &unit_directions(2, count), Mode::Convex, &s).unwrap();
            let h = est.outer.hausdorff(&segment);
            assert!(h <= last + 1e-12);
            last = h;
        }
        assert!(last <= 0.02, "{last}");
    }
}
