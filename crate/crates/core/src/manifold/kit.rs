//! Closed-form exp/log/transport where the catalog has them, dispatching to
//! the geodesic ODE otherwise.

use super::{minkowski, same_base, wrap_signed, Distance, Kind, Manifold, Point, TangentVector, Vector};
use crate::error::{Error, Result};

impl Manifold {
    /// `(gamma_v(1), gamma_v'(1))`.
    pub(crate) fn flow(&self, p: &Point, v: &Vector) -> Result<(Point, Vector)> {
        match self.kind() {
            Kind::Euclidean { .. } => Ok((Point::new(&p.coords + v), v.clone())),
            Kind::Torus { .. } => Ok((self.canonicalize(&Point::new(&p.coords + v)), v.clone())),
            Kind::Sphere => {
                let n = v.norm();
                if n == 0.0 {
                    return Ok((p.clone(), v.clone()));
                }
                let x = &p.coords * n.cos() + v * (n.sin() / n);
                let vel = &p.coords * (-n * n.sin()) + v * n.cos();
                Ok((Point::new(x), vel))
            }
            Kind::Hyperbolic => {
                let n = minkowski(v, v).max(0.0).sqrt();
                if n == 0.0 {
                    return Ok((p.clone(), v.clone()));
                }
                let x = &p.coords * n.cosh() + v * (n.sinh() / n);
                let vel = &p.coords * (n * n.sinh()) + v * n.cosh();
                Ok((Point::new(x), vel))
            }
            Kind::Cusp | Kind::Tube => {
                let (x, vel, _) = self.integrate(p, v, None)?;
                Ok((Point::new(x), vel))
            }
        }
    }

    /// Exponential map `exp_p(v)`.
    pub fn exp(&self, p: &Point, v: &TangentVector) -> Result<Point> {
        same_base(p, &v.base)?;
        Ok(self.flow(p, &v.components)?.0)
    }

    /// Exponential map by geodesic-ODE integration, for every catalog entry
    /// (used to cross-check the closed forms).
    pub fn exp_ode(&self, p: &Point, v: &TangentVector) -> Result<Point> {
        same_base(p, &v.base)?;
        let (x, _, _) = self.integrate(p, &v.components, None)?;
        Ok(self.canonicalize(&Point::new(x)))
    }

    /// Parallel transport along `t -> exp_p(t v)` by ODE integration;
    /// returns the endpoint and the transported vector.
    pub fn transport_along_ode(&self, p: &Point, v: &Vector, w: &Vector) -> Result<(Point, Vector)> {
        let (x, _, tw) = self.integrate(p, v, Some(w))?;
        Ok((Point::new(x), tw.expect("transport requested")))
    }

    /// Logarithm without the working-radius check (closed-form kinds only).
    pub(crate) fn log_closed(&self, p: &Point, q: &Point) -> Option<Vector> {
        match self.kind() {
            Kind::Euclidean { .. } => Some(&q.coords - &p.coords),
            Kind::Torus { .. } => Some((&q.coords - &p.coords).map(wrap_signed)),
            Kind::Sphere => {
                let c = p.coords.dot(&q.coords);
                let w = &q.coords - &p.coords * c;
                let s = w.norm();
                if s == 0.0 {
                    return if c > 0.0 { Some(Vector::zeros(3)) } else { None };
                }
                Some(w * (s.atan2(c) / s))
            }
            Kind::Hyperbolic => {
                let c = -minkowski(&p.coords, &q.coords);
                let w = &q.coords - &p.coords * c;
                let s = minkowski(&w, &w).max(0.0).sqrt();
                if s == 0.0 {
                    return Some(Vector::zeros(3));
                }
                let d = if s < 1.0 { s.asinh() } else { c.max(1.0).acosh() };
                Some(w * (d / s))
            }
            Kind::Cusp | Kind::Tube => None,
        }
    }

    /// Inverse exponential map, restricted to `d(p, q) < r_M`.
    pub fn log(&self, p: &Point, q: &Point) -> Result<TangentVector> {
        self.log_within(p, q, self.working_radius_at(p))
    }

    /// Inverse exponential map restricted to `d(p, q) < radius`. Radii beyond
    /// `r_M` are only meaningful up to the injectivity radius.
    pub fn log_within(&self, p: &Point, q: &Point, radius: f64) -> Result<TangentVector> {
        let v = if self.has_closed_form() {
            self.log_closed(p, q).ok_or(Error::OutOfRadius { distance: std::f64::consts::PI, radius })?
        } else {
            self.shoot(p, q)?
        };
        let d = self.norm_raw(p, &v);
        if d >= radius {
            return Err(Error::OutOfRadius { distance: d, radius });
        }
        Ok(TangentVector::new(p, v))
    }

    /// Riemannian distance. Closed form when available, `|log_p q|` inside
    /// the working radius, otherwise the length of a broken geodesic along
    /// the chart segment (an upper bound, flagged `exact = false`).
    pub fn distance(&self, p: &Point, q: &Point) -> Distance {
        match self.kind() {
            Kind::Euclidean { .. } | Kind::Torus { .. } => {
                let v = self.log_closed(p, q).expect("flat log is total");
                Distance { value: v.norm(), exact: true }
            }
            Kind::Sphere => {
                let c = p.coords.dot(&q.coords);
                let s = (&q.coords - &p.coords * c).norm();
                Distance { value: s.atan2(c), exact: true }
            }
            Kind::Hyperbolic => {
                let v = self.log_closed(p, q).expect("hyperbolic log is total");
                Distance { value: minkowski(&v, &v).max(0.0).sqrt(), exact: true }
            }
            Kind::Cusp | Kind::Tube => match self.log(p, q) {
                Ok(v) => Distance { value: self.norm(&v), exact: true },
                Err(_) => Distance { value: self.broken_path_length(p, q), exact: false },
            },
        }
    }

    fn broken_path_length(&self, p: &Point, q: &Point) -> f64 {
        let mut pieces = 2usize;
        'refine: while pieces <= 1 << 12 {
            let mut total = 0.0;
            let mut prev = p.clone();
            for i in 1..=pieces {
                let t = i as f64 / pieces as f64;
                let next = Point::new(&p.coords * (1.0 - t) + &q.coords * t);
                match self.log(&prev, &next) {
                    Ok(v) => total += self.norm(&v),
                    Err(_) => {
                        pieces *= 2;
                        continue 'refine;
                    }
                }
                prev = next;
            }
            return total;
        }
        f64::INFINITY
    }

    /// Parallel transport of `v` along the minimal geodesic to `q`.
    pub fn parallel_transport(&self, v: &TangentVector, q: &Point) -> Result<TangentVector> {
        let p = &v.base;
        let w = self.log(p, q)?;
        let out = match self.kind() {
            Kind::Euclidean { .. } | Kind::Torus { .. } => v.components.clone(),
            Kind::Sphere | Kind::Hyperbolic => {
                let d2 = self.inner_raw(p, &w.components, &w.components);
                if d2 == 0.0 {
                    v.components.clone()
                } else {
                    let back = self.log_closed(q, p).expect("inside working radius");
                    let coef = self.inner_raw(p, &w.components, &v.components) / d2;
                    &v.components - (&w.components + back) * coef
                }
            }
            Kind::Cusp | Kind::Tube => self.integrate(p, &w.components, Some(&v.components))?.2.expect("transport requested"),
        };
        Ok(TangentVector::new(q, out))
    }
}
