use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::manifold::{Manifold, Point};

/// `sup |theta'|` for [`theta`]: the smooth step has slope 2 at its
/// midpoint and the profile compresses it by 3/2.
pub const PROFILE_LIPSCHITZ: f64 = 3.0;

fn flat(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 on `(-inf, 0]`, 1 on `[1, inf)`, increasing between.
pub fn smooth_step(t: f64) -> f64 {
    let (a, b) = (flat(t), flat(1.0 - t));
    a / (a + b)
}

/// Bump profile: 1 on `(-inf, 1/3]`, 0 on `[1, inf)`, smooth and
/// nonincreasing.
pub fn theta(s: f64) -> f64 {
    smooth_step(1.5 * (1.0 - s))
}

pub fn theta_derivative(s: f64) -> f64 {
    let t = 1.5 * (1.0 - s);
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = (flat(t), flat(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    // d/dt a/(a+b) = (da b + a db) / (a+b)^2, chain factor -3/2
    -1.5 * (da * b + a * db) / ((a + b) * (a + b))
}

/// `b(y) = theta(d(y, p) / delta)`.
#[derive(Clone, Debug)]
pub struct BumpField {
    pub manifold: Manifold,
    pub center: Point,
    pub radius: f64,
}

impl BumpField {
    pub fn new(m: &Manifold, center: &Point, radius: f64) -> Result<Self> {
        let cap = m.working_radius_at(center);
        if !(radius > 0.0) || radius >= cap {
            return Err(Error::OutOfRange { name: "bump radius", value: radius, max: cap });
        }
        Ok(Self { manifold: m.clone(), center: center.clone(), radius })
    }

    pub fn eval(&self, y: &Point) -> f64 {
        let d = self.manifold.distance(&self.center, y);
        // an inexact distance means the log failed within r_M > delta
        if !d.exact || d.value >= self.radius {
            return 0.0;
        }
        theta(d.value / self.radius)
    }

    /// `R / delta`.
    pub fn lipschitz_bound(&self) -> f64 {
        PROFILE_LIPSCHITZ / self.radius
    }

    pub fn to_field(&self) -> ScalarField {
        let b = self.clone();
        ScalarField::new(move |y| b.eval(y))
    }
}

/// Bump of radius `delta` about `p`; `delta` must stay below `r_M(p)`.
pub fn bump(m: &Manifold, p: &Point, delta: f64) -> Result<BumpField> {
    BumpField::new(m, p, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shape() {
        assert_eq!(theta(-1.0), 1.0);
        assert_eq!(theta(1.0 / 3.0), 1.0);
        assert_eq!(theta(1.0), 0.0);
        assert_eq!(theta(2.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let t = theta(i as f64 / 1000.0);
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn lipschitz_constant_is_sharp() {
        // independent check: max of central differences over a fine grid
        let h = 1e-6;
        let sup = (0..=20000).map(|i| 1.0 / 3.0 + (2.0 / 3.0) * i as f64 / 20000.0).map(|s| ((theta(s + h) - theta(s - h)) / (2.0 * h)).abs()).fold(0.0, f64::max);
        assert!((sup - PROFILE_LIPSCHITZ).abs() < 1e-6, "{sup}");
        assert!((theta_derivative(2.0 / 3.0) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn bump_support() {
        let m = Manifold::sphere();
        let p = Point::from_slice(&[0.0, 0.0, 1.0]);
        let b = bump(&m, &p, 0.5).unwrap();
        assert_eq!(b.eval(&p), 1.0);
        let a: f64 = 0.55;
        assert_eq!(b.eval(&Point::from_slice(&[a.sin(), 0.0, a.cos()])), 0.0);
        assert!(bump(&m, &p, 2.0).is_err());
    }
}
