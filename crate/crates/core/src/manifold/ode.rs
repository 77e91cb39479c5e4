//! Geodesic and parallel-transport ODEs, classical RK4 with global step
//! doubling, and shooting for the inverse exponential map.

use nalgebra::{DMatrix, DVector};

use super::{Kind, Manifold, Point, Vector};
use crate::error::{Error, Result};

const LOCAL_TOL: f64 = 1e-10;
const MAX_STEPS: usize = 1 << 15;

impl Manifold {
    fn rhs(&self, y: &Vector, m: usize, with_transport: bool) -> Vector {
        let x = Point::new(y.rows(0, m).into_owned());
        let v = y.rows(m, m).into_owned();
        let mut out = Vector::zeros(y.len());
        out.rows_mut(0, m).copy_from(&v);
        out.rows_mut(m, m).copy_from(&(-self.christoffel(&x, &v, &v)));
        if with_transport {
            let w = y.rows(2 * m, m).into_owned();
            out.rows_mut(2 * m, m).copy_from(&(-self.christoffel(&x, &v, &w)));
        }
        out
    }

    fn inside(&self, y: &Vector) -> bool {
        match self.kind() {
            Kind::Cusp | Kind::Tube => {
                let r = y[0].hypot(y[1]);
                let (lo, hi) = self.bounds()[0];
                r.is_finite() && r >= lo * (1.0 - 1e-9) && r <= hi * (1.0 + 1e-9)
            }
            _ => y.iter().all(|x| x.is_finite()),
        }
    }

    fn rk4(&self, y0: &Vector, m: usize, with_transport: bool, steps: usize) -> Result<Vector> {
        let h = 1.0 / steps as f64;
        let mut y = y0.clone();
        for i in 0..steps {
            let k1 = self.rhs(&y, m, with_transport);
            let k2 = self.rhs(&(&y + &k1 * (0.5 * h)), m, with_transport);
            let k3 = self.rhs(&(&y + &k2 * (0.5 * h)), m, with_transport);
            let k4 = self.rhs(&(&y + &k3 * h), m, with_transport);
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if !self.inside(&y) {
                return Err(Error::DomainExit { t: (i + 1) as f64 * h });
            }
        }
        Ok(y)
    }

    /// Integrates the geodesic (and optionally a parallel field) over
    /// `t in [0, 1]`. The step count doubles until successive solutions
    /// agree to `15 * 1e-10`, then the Richardson-extrapolated value is
    /// returned; for a fixed count the result is a smooth function of the
    /// inputs.
    pub(crate) fn integrate(&self, p: &Point, v: &Vector, transport: Option<&Vector>) -> Result<(Vector, Vector, Option<Vector>)> {
        let m = self.ambient_dim();
        let with_t = transport.is_some();
        let mut y0 = Vector::zeros(if with_t { 3 * m } else { 2 * m });
        y0.rows_mut(0, m).copy_from(&p.coords);
        y0.rows_mut(m, m).copy_from(v);
        if let Some(w) = transport {
            y0.rows_mut(2 * m, m).copy_from(w);
        }
        let speed = self.norm_raw(p, v);
        let mut steps = 8usize.max((32.0 * speed).ceil() as usize).next_power_of_two();
        let mut coarse = self.rk4(&y0, m, with_t, steps)?;
        let y = loop {
            steps *= 2;
            let fine = self.rk4(&y0, m, with_t, steps)?;
            let err = (&fine - &coarse).amax();
            if err <= 15.0 * LOCAL_TOL || steps >= MAX_STEPS {
                break &fine + (&fine - &coarse) / 15.0;
            }
            coarse = fine;
        };
        let x = y.rows(0, m).into_owned();
        let vel = y.rows(m, m).into_owned();
        let tw = with_t.then(|| y.rows(2 * m, m).into_owned());
        Ok((x, vel, tw))
    }

    /// Damped Newton shooting on `v -> exp_p(v) - q` in chart coordinates,
    /// Jacobian by central differences.
    pub(crate) fn shoot(&self, p: &Point, q: &Point) -> Result<Vector> {
        let radius = self.working_radius_at(p);
        let delta = &q.coords - &p.coords;
        let mid = Point::new((&p.coords + &q.coords) * 0.5);
        let rough = self.norm_raw(&mid, &delta);
        if rough > 2.0 * radius {
            return Err(Error::OutOfRadius { distance: rough, radius });
        }
        let n = self.dim();
        let scale = 1.0 + q.coords.amax();
        let residual = |v: &Vector| -> Result<Vector> { Ok(self.integrate(p, v, None)?.0 - &q.coords) };
        let mut v = delta;
        let mut r = residual(&v)?;
        for it in 0..100 {
            let rn = r.norm();
            if rn <= 1e-13 * scale {
                return Ok(v);
            }
            let h = 1e-7 * (1.0 + v.norm());
            let mut jac = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut a = v.clone();
                let mut b = v.clone();
                a[j] += h;
                b[j] -= h;
                let col = (residual(&a)? - residual(&b)?) / (2.0 * h);
                jac.set_column(j, &col);
            }
            let step: DVector<f64> = jac.lu().solve(&(-&r)).ok_or(Error::ShootingFailed { iterations: it, residual: rn })?;
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-4 {
                let cand = &v + &step * alpha;
                if let Ok(rc) = residual(&cand) {
                    if rc.norm() < rn {
                        v = cand;
                        r = rc;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no further decrease possible: accept if already at round-off level
                if rn <= 1e-10 * scale {
                    return Ok(v);
                }
                return Err(Error::ShootingFailed { iterations: it, residual: rn });
            }
        }
        let rn = r.norm();
        if rn <= 1e-10 * scale {
            Ok(v)
        } else {
            Err(Error::ShootingFailed { iterations: 100, residual: rn })
        }
    }
}
