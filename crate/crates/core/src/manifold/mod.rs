//! Riemannian primitives for a fixed catalog of low-dimensional manifolds.
//!
//! Points and tangent vectors live in a *representation space*: the global
//! chart for flat spaces, the torus and the two surfaces of revolution, and
//! the ambient `R^3` for the round sphere and the hyperboloid model of the
//! hyperbolic plane. Covectors are stored in canonical lowered form `c`, so
//! that `zeta(v) = c . v` for every tangent `v` and `c = lower(w)` for a
//! unique tangent `w`.

mod chart;
mod kit;
mod ode;

pub use chart::NormalChart;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Vector,
}

impl Point {
    pub fn new(coords: Vector) -> Self {
        Self { coords }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        Self { coords: Vector::from_column_slice(xs) }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: Vector,
}

impl TangentVector {
    pub fn new(base: &Point, components: Vector) -> Self {
        Self { base: base.clone(), components }
    }

    pub fn zero(m: &Manifold, base: &Point) -> Self {
        Self::new(base, Vector::zeros(m.ambient_dim()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(&self.base, &self.components * s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CotangentVector {
    pub base: Point,
    pub components: Vector,
}

impl CotangentVector {
    pub fn new(base: &Point, components: Vector) -> Self {
        Self { base: base.clone(), components }
    }

    pub fn zero(m: &Manifold, base: &Point) -> Self {
        Self::new(base, Vector::zeros(m.ambient_dim()))
    }

    pub fn apply(&self, v: &TangentVector) -> f64 {
        self.components.dot(&v.components)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(&self.base, &self.components * s)
    }

    pub fn add(&self, other: &CotangentVector) -> Result<Self> {
        same_base(&self.base, &other.base)?;
        Ok(Self::new(&self.base, &self.components + &other.components))
    }
}

/// Unit-speed geodesic segment.
#[derive(Clone, Debug)]
pub struct Geodesic {
    pub base: Point,
    pub direction: TangentVector,
    pub length: f64,
}

/// A distance value; `exact == false` marks a path-length upper bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distance {
    pub value: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Euclidean { dim: usize },
    Sphere,
    Hyperbolic,
    /// Flat torus `(R / 2 pi Z)^dim`; `dim = 1` is the circle.
    Torus { dim: usize },
    /// Surface of revolution `z = 1 / (x^2 + y^2)`.
    Cusp,
    /// Surface of revolution `z = 1 / (x^2 + y^2 - 1)`, `z > 0`.
    Tube,
}

/// JSON description of a catalog manifold.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, rename = "r_M")]
    pub r_m: Option<f64>,
    #[serde(default, rename = "i_M")]
    pub i_m: Option<f64>,
    #[serde(default, rename = "c_M")]
    pub c_m: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Manifold {
    kind: Kind,
    name: String,
    r_m: f64,
    injectivity: Option<f64>,
    convexity: Option<f64>,
    /// Sampling box for Euclidean space, radial bounds `[(r_min, r_max)]`
    /// for the surfaces of revolution, empty otherwise.
    bounds: Vec<(f64, f64)>,
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1..=3");
        Self {
            kind: Kind::Euclidean { dim },
            name: "euclidean".into(),
            r_m: 10.0,
            injectivity: Some(f64::INFINITY),
            convexity: Some(f64::INFINITY),
            bounds: vec![(0.0, 1.0); dim],
        }
    }

    pub fn sphere() -> Self {
        Self {
            kind: Kind::Sphere,
            name: "sphere".into(),
            r_m: 1.4,
            injectivity: Some(std::f64::consts::PI),
            convexity: Some(std::f64::consts::FRAC_PI_2),
            bounds: vec![],
        }
    }

    pub fn hyperbolic() -> Self {
        Self {
            kind: Kind::Hyperbolic,
            name: "hyperbolic".into(),
            r_m: 5.0,
            injectivity: Some(f64::INFINITY),
            convexity: Some(f64::INFINITY),
            bounds: vec![],
        }
    }

    pub fn torus(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1..=3");
        Self {
            kind: Kind::Torus { dim },
            name: if dim == 1 { "circle".into() } else { "torus".into() },
            r_m: 1.5,
            injectivity: Some(std::f64::consts::PI),
            convexity: Some(std::f64::consts::FRAC_PI_2),
            bounds: vec![],
        }
    }

    pub fn circle() -> Self {
        Self::torus(1)
    }

    /// `z = 1/(x^2+y^2)` on the annulus `0.6 <= r <= 3`. Zero injectivity
    /// radius; the working radius is reported per point.
    pub fn cusp() -> Self {
        Self {
            kind: Kind::Cusp,
            name: "cusp".into(),
            r_m: 0.4 * 0.6,
            injectivity: Some(0.0),
            convexity: None,
            bounds: vec![(0.6, 3.0)],
        }
    }

    /// `z = 1/(x^2+y^2-1)` on the annulus `1.2 <= r <= 3`.
    pub fn tube() -> Self {
        Self {
            kind: Kind::Tube,
            name: "tube".into(),
            r_m: 0.5,
            injectivity: None,
            convexity: None,
            bounds: vec![(1.2, 3.0)],
        }
    }

    /// Replaces the sampling box (Euclidean) or radial bounds (surfaces).
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        match self.kind {
            Kind::Euclidean { dim } if bounds.len() == dim => {}
            Kind::Cusp if bounds.len() == 1 && bounds[0].0 > 0.0 => {
                self.r_m = 0.4 * bounds[0].0;
            }
            Kind::Tube if bounds.len() == 1 && bounds[0].0 > 1.0 => {}
            _ => return Err(Error::InvalidInput(format!("bounds {bounds:?} do not fit {}", self.name))),
        }
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidInput("empty bounds".into()));
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn from_spec(spec: &ManifoldSpec) -> Result<Self> {
        let mut m = match spec.name.as_str() {
            "euclidean" | "flat" => Self::euclidean(spec.dim.unwrap_or(2).clamp(1, 3)),
            "sphere" => Self::sphere(),
            "hyperbolic" => Self::hyperbolic(),
            "torus" => Self::torus(spec.dim.unwrap_or(2).clamp(1, 3)),
            "circle" => Self::circle(),
            "cusp" => Self::cusp(),
            "tube" => Self::tube(),
            other => return Err(Error::InvalidInput(format!("unknown manifold '{other}'"))),
        };
        if let Some(d) = spec.dim {
            if d != m.dim() {
                return Err(Error::InvalidInput(format!("{} has dimension {}, not {d}", m.name, m.dim())));
            }
        }
        let bounds_key = if matches!(m.kind, Kind::Euclidean { .. }) { "box" } else { "radial" };
        if let Some(b) = spec.params.get(bounds_key) {
            let raw: Vec<Vec<f64>> = match b {
                serde_json::Value::Array(a) if a.first().is_some_and(|x| x.is_number()) => {
                    vec![serde_json::from_value(b.clone())?]
                }
                _ => serde_json::from_value(b.clone())?,
            };
            let bounds = raw
                .iter()
                .map(|pair| match pair.as_slice() {
                    [lo, hi] => Ok((*lo, *hi)),
                    _ => Err(Error::InvalidInput("bounds must be [lo, hi] pairs".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            m = m.with_bounds(bounds)?;
        }
        if let Some(r) = spec.r_m {
            if !(r > 0.0) {
                return Err(Error::InvalidInput("r_M must be positive".into()));
            }
            let cap = m.radius_cap();
            if r > cap {
                return Err(Error::InvalidInput(format!("r_M = {r} exceeds min(i, c) = {cap}")));
            }
            m.r_m = r;
        }
        if spec.i_m.is_some() {
            m.injectivity = spec.i_m;
        }
        if spec.c_m.is_some() {
            m.convexity = spec.c_m;
        }
        Ok(m)
    }

    pub fn spec(&self) -> ManifoldSpec {
        let params = match self.kind {
            Kind::Euclidean { .. } => serde_json::json!({ "box": self.bounds.iter().map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>() }),
            Kind::Cusp | Kind::Tube => serde_json::json!({ "radial": [self.bounds[0].0, self.bounds[0].1] }),
            _ => serde_json::Value::Null,
        };
        ManifoldSpec {
            name: self.name.clone(),
            dim: Some(self.dim()),
            params,
            r_m: Some(self.r_m),
            i_m: self.injectivity.filter(|x| x.is_finite()),
            c_m: self.convexity.filter(|x| x.is_finite()),
        }
    }

    fn radius_cap(&self) -> f64 {
        match (self.injectivity, self.convexity) {
            (Some(i), Some(c)) if i > 0.0 && c > 0.0 => i.min(c),
            _ => f64::INFINITY,
        }
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Euclidean { dim } | Kind::Torus { dim } => dim,
            _ => 2,
        }
    }

    /// Length of coordinate vectors.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            Kind::Sphere | Kind::Hyperbolic => 3,
            _ => self.dim(),
        }
    }

    pub fn injectivity_radius(&self) -> Option<f64> {
        self.injectivity
    }

    pub fn convexity_radius(&self) -> Option<f64> {
        self.convexity
    }

    /// Nominal working radius (the minimum over the domain when it varies).
    pub fn working_radius(&self) -> f64 {
        self.r_m
    }

    /// Working radius at `p`; position dependent on the cusp surface.
    pub fn working_radius_at(&self, p: &Point) -> f64 {
        match self.kind {
            Kind::Cusp => (0.4 * radial(p)).min(1.0),
            _ => self.r_m,
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, Kind::Cusp | Kind::Tube)
    }

    pub(crate) fn is_chart(&self) -> bool {
        !matches!(self.kind, Kind::Sphere | Kind::Hyperbolic)
    }

    /// Whether `p` lies in the coordinate domain.
    pub fn contains(&self, p: &Point) -> bool {
        if p.coords.len() != self.ambient_dim() || p.coords.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.kind {
            Kind::Euclidean { .. } | Kind::Torus { .. } => true,
            Kind::Sphere => (p.coords.norm() - 1.0).abs() < 1e-8,
            Kind::Hyperbolic => (minkowski(&p.coords, &p.coords) + 1.0).abs() < 1e-8 * (1.0 + p.coords[2].powi(2)) && p.coords[2] > 0.0,
            Kind::Cusp | Kind::Tube => {
                let r = radial(p);
                let (lo, hi) = self.bounds[0];
                r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)
            }
        }
    }

    /// Maps representation coordinates back to the canonical form
    /// (wraps torus angles, renormalizes embedded points).
    pub fn canonicalize(&self, p: &Point) -> Point {
        match self.kind {
            Kind::Torus { .. } => Point::new(p.coords.map(wrap_angle)),
            Kind::Sphere => Point::new(&p.coords / p.coords.norm()),
            Kind::Hyperbolic => {
                let (x, y) = (p.coords[0], p.coords[1]);
                Point::from_slice(&[x, y, (1.0 + x * x + y * y).sqrt()])
            }
            _ => p.clone(),
        }
    }

    /// Orthogonal projection of an ambient vector onto `T_p`.
    pub fn project(&self, p: &Point, v: &Vector) -> Vector {
        match self.kind {
            Kind::Sphere => v - &p.coords * p.coords.dot(v),
            Kind::Hyperbolic => v + &p.coords * minkowski(&p.coords, v),
            _ => v.clone(),
        }
    }

    /// Metric matrix `g_p` in the chart (ambient Gram form for the
    /// embedded models).
    pub fn metric_matrix(&self, p: &Point) -> Matrix {
        match self.kind {
            Kind::Hyperbolic => Matrix::from_diagonal(&Vector::from_column_slice(&[1.0, 1.0, -1.0])),
            Kind::Cusp | Kind::Tube => {
                let g = self.height_gradient(p);
                Matrix::identity(2, 2) + &g * g.transpose()
            }
            _ => Matrix::identity(self.ambient_dim(), self.ambient_dim()),
        }
    }

    pub(crate) fn inner_raw(&self, p: &Point, u: &Vector, w: &Vector) -> f64 {
        match self.kind {
            Kind::Hyperbolic => minkowski(u, w),
            Kind::Cusp | Kind::Tube => {
                let g = self.height_gradient(p);
                u.dot(w) + g.dot(u) * g.dot(w)
            }
            _ => u.dot(w),
        }
    }

    pub(crate) fn norm_raw(&self, p: &Point, v: &Vector) -> f64 {
        self.inner_raw(p, v, v).max(0.0).sqrt()
    }

    /// `g_p(v, w)`.
    pub fn metric_eval(&self, p: &Point, v: &TangentVector, w: &TangentVector) -> Result<f64> {
        same_base(p, &v.base)?;
        same_base(p, &w.base)?;
        Ok(self.inner_raw(p, &v.components, &w.components))
    }

    pub fn norm(&self, v: &TangentVector) -> f64 {
        self.norm_raw(&v.base, &v.components)
    }

    pub(crate) fn lower_raw(&self, p: &Point, w: &Vector) -> Vector {
        match self.kind {
            Kind::Hyperbolic => Vector::from_column_slice(&[w[0], w[1], -w[2]]),
            Kind::Cusp | Kind::Tube => self.metric_matrix(p) * w,
            _ => w.clone(),
        }
    }

    pub(crate) fn raise_raw(&self, p: &Point, c: &Vector) -> Vector {
        match self.kind {
            Kind::Sphere => self.project(p, c),
            Kind::Hyperbolic => self.project(p, &Vector::from_column_slice(&[c[0], c[1], -c[2]])),
            Kind::Cusp | Kind::Tube => {
                // Sherman-Morrison on I + g g^T
                let g = self.height_gradient(p);
                c - &g * (g.dot(c) / (1.0 + g.norm_squared()))
            }
            _ => c.clone(),
        }
    }

    /// Musical isomorphism `v -> g_p(v, .)`.
    pub fn lower(&self, v: &TangentVector) -> CotangentVector {
        CotangentVector::new(&v.base, self.lower_raw(&v.base, &v.components))
    }

    pub fn raise(&self, c: &CotangentVector) -> TangentVector {
        TangentVector::new(&c.base, self.raise_raw(&c.base, &c.components))
    }

    /// Dual norm `sup { zeta(v) : |v| <= 1 }`.
    pub fn conorm(&self, c: &CotangentVector) -> f64 {
        let w = self.raise_raw(&c.base, &c.components);
        c.components.dot(&w).max(0.0).sqrt()
    }

    /// Canonical covector form of an arbitrary linear functional
    /// `v -> raw . v` restricted to `T_p`.
    pub fn covector_from_raw(&self, p: &Point, raw: &Vector) -> CotangentVector {
        let w = self.raise_raw(p, raw);
        CotangentVector::new(p, self.lower_raw(p, &w))
    }

    /// Christoffel contraction `Gamma_p(u, w)` in representation coordinates.
    pub fn christoffel(&self, p: &Point, u: &Vector, w: &Vector) -> Vector {
        match self.kind {
            Kind::Euclidean { .. } | Kind::Torus { .. } => Vector::zeros(u.len()),
            Kind::Sphere => &p.coords * u.dot(w),
            Kind::Hyperbolic => &p.coords * -minkowski(u, w),
            Kind::Cusp | Kind::Tube => {
                let (g, hess) = self.height_derivatives(p);
                let s = (u.transpose() * &hess * w)[(0, 0)];
                let scale = s / (1.0 + g.norm_squared());
                g * scale
            }
        }
    }

    /// Christoffel symbols from central differences of the metric
    /// (step `1e-5`); chart manifolds only.
    pub fn christoffel_fd(&self, p: &Point, u: &Vector, w: &Vector) -> Vector {
        assert!(self.is_chart(), "finite-difference Christoffel symbols need a chart");
        let n = self.dim();
        let h = 1e-5;
        let mut dg = Vec::with_capacity(n);
        for k in 0..n {
            let mut a = p.coords.clone();
            let mut b = p.coords.clone();
            a[k] += h;
            b[k] -= h;
            dg.push((self.metric_matrix(&Point::new(a)) - self.metric_matrix(&Point::new(b))) / (2.0 * h));
        }
        let ginv = self.metric_matrix(p).try_inverse().expect("metric is positive definite");
        let mut out = Vector::zeros(n);
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut gamma = 0.0;
                    for l in 0..n {
                        gamma += 0.5 * ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    acc += gamma * u[i] * w[j];
                }
            }
            out[k] = acc;
        }
        out
    }

    fn height_shift(&self) -> f64 {
        match self.kind {
            Kind::Tube => 1.0,
            _ => 0.0,
        }
    }

    /// Height `z` of a surface-of-revolution chart point.
    pub fn height(&self, p: &Point) -> f64 {
        let s = p.coords[0].powi(2) + p.coords[1].powi(2);
        1.0 / (s - self.height_shift())
    }

    fn height_gradient(&self, p: &Point) -> Vector {
        let s = p.coords[0].powi(2) + p.coords[1].powi(2) - self.height_shift();
        &p.coords * (-2.0 / (s * s))
    }

    fn height_derivatives(&self, p: &Point) -> (Vector, Matrix) {
        let s = p.coords[0].powi(2) + p.coords[1].powi(2) - self.height_shift();
        let d1 = -1.0 / (s * s);
        let d2 = 2.0 / (s * s * s);
        let x = &p.coords;
        let grad = x * (2.0 * d1);
        let hess = Matrix::identity(2, 2) * (2.0 * d1) + (x * x.transpose()) * (4.0 * d2);
        (grad, hess)
    }

    /// Point of the ambient embedding in `R^3` (surfaces) or the
    /// representation itself.
    pub fn embed(&self, p: &Point) -> Vector {
        match self.kind {
            Kind::Cusp | Kind::Tube => Vector::from_column_slice(&[p.coords[0], p.coords[1], self.height(p)]),
            _ => p.coords.clone(),
        }
    }

    pub fn geodesic(&self, base: &Point, direction: &TangentVector, length: f64) -> Result<Geodesic> {
        same_base(base, &direction.base)?;
        let n = self.norm(direction);
        if n == 0.0 {
            return Err(Error::InvalidInput("geodesic direction must be nonzero".into()));
        }
        Ok(Geodesic { base: base.clone(), direction: direction.scaled(1.0 / n), length })
    }

    /// Position and unit velocity at arc length `t`.
    pub fn geodesic_eval(&self, g: &Geodesic, t: f64) -> Result<(Point, TangentVector)> {
        if !(0.0..=g.length).contains(&t) {
            return Err(Error::OutOfRange { name: "t", value: t, max: g.length });
        }
        let (x, v) = self.flow(&g.base, &(&g.direction.components * t))?;
        let vel = if t > 0.0 { v / t } else { g.direction.components.clone() };
        Ok((x.clone(), TangentVector::new(&x, vel)))
    }
}

pub(crate) fn same_base(a: &Point, b: &Point) -> Result<()> {
    let scale = 1.0 + a.coords.amax();
    if a.coords.len() != b.coords.len() || (&a.coords - &b.coords).amax() > 1e-12 * scale {
        return Err(Error::MismatchedBase);
    }
    Ok(())
}

pub(crate) fn minkowski(u: &Vector, w: &Vector) -> f64 {
    u[0] * w[0] + u[1] * w[1] - u[2] * w[2]
}

pub(crate) fn radial(p: &Point) -> f64 {
    p.coords[0].hypot(p.coords[1])
}

pub(crate) fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(std::f64::consts::TAU)
}

/// Shortest signed representative of `x` modulo `2 pi`, in `(-pi, pi]`.
pub(crate) fn wrap_signed(x: f64) -> f64 {
    let y = (x + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if y == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests;
