use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{same_base, CotangentVector, Manifold, Point, TangentVector, Vector};
use crate::error::{Error, Result};

/// Normal coordinates `h = exp_p^{-1}` on `B(p, rho)`, expressed in a
/// `g_p`-orthonormal frame so that the chart metric at the origin is the
/// identity.
#[derive(Clone, Debug)]
pub struct NormalChart {
    pub base: Point,
    pub frame: Vec<Vector>,
    pub radius: f64,
}

impl NormalChart {
    /// `h(q)` in frame coordinates.
    pub fn to_chart(&self, m: &Manifold, q: &Point) -> Result<Vector> {
        let v = m.log(&self.base, q)?;
        Ok(self.coords_of(m, &v.components))
    }

    /// `h^{-1}(y) = exp_p(sum y_i E_i)`.
    pub fn from_chart(&self, m: &Manifold, y: &Vector) -> Result<Point> {
        m.exp(&self.base, &self.tangent(y))
    }

    pub fn tangent(&self, y: &Vector) -> TangentVector {
        let mut v = Vector::zeros(self.frame[0].len());
        for (e, yi) in self.frame.iter().zip(y.iter()) {
            v += e * *yi;
        }
        TangentVector::new(&self.base, v)
    }

    pub fn coords_of(&self, m: &Manifold, v: &Vector) -> Vector {
        Vector::from_iterator(self.frame.len(), self.frame.iter().map(|e| m.inner_raw(&self.base, e, v)))
    }

    /// Frame coefficients `zeta(E_i)` of a covector at the base point.
    pub fn covector_coords(&self, c: &CotangentVector) -> Vector {
        Vector::from_iterator(self.frame.len(), self.frame.iter().map(|e| c.components.dot(e)))
    }

    pub fn covector(&self, m: &Manifold, a: &Vector) -> CotangentVector {
        m.lower(&self.tangent(a))
    }

    /// Largest observed distortion `eps` such that both chart maps are
    /// `(1 + eps)`-Lipschitz on sampled pairs in the ball.
    pub fn lipschitz_epsilon(&self, m: &Manifold, pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.frame.len();
        let mut eps: f64 = 0.0;
        for _ in 0..pairs {
            let ya = random_in_ball(&mut rng, n, self.radius);
            let yb = random_in_ball(&mut rng, n, self.radius);
            let (pa, pb) = (self.from_chart(m, &ya)?, self.from_chart(m, &yb)?);
            let d = m.distance(&pa, &pb).value;
            let e = (&ya - &yb).norm();
            if d > 1e-9 && e > 1e-9 {
                eps = eps.max(d / e - 1.0).max(e / d - 1.0);
            }
        }
        Ok(eps)
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vector {
    loop {
        let y = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if y.norm() < 1.0 {
            return y * radius;
        }
    }
}

impl Manifold {
    /// `g_p`-orthonormal basis of `T_p` in representation coordinates.
    pub fn frame(&self, p: &Point) -> Vec<Vector> {
        let m = self.ambient_dim();
        let mut basis: Vec<Vector> = Vec::with_capacity(self.dim());
        for i in 0..m {
            let mut e = Vector::zeros(m);
            e[i] = 1.0;
            let mut v = self.project(p, &e);
            for b in &basis {
                v -= b * self.inner_raw(p, b, &v);
            }
            let n = self.norm_raw(p, &v);
            if n > 1e-6 {
                basis.push(v / n);
            }
            if basis.len() == self.dim() {
                break;
            }
        }
        basis
    }

    pub fn normal_chart(&self, p: &Point) -> NormalChart {
        NormalChart { base: p.clone(), frame: self.frame(p), radius: 0.9 * self.working_radius_at(p) }
    }

    /// Central-difference differential of `f` at `p` (step `h`), as a
    /// covector.
    pub fn gradient_fd<F: Fn(&Point) -> f64>(&self, f: F, p: &Point, h: f64) -> CotangentVector {
        if self.is_chart() {
            let n = self.dim();
            let mut c = Vector::zeros(n);
            for i in 0..n {
                let mut a = p.coords.clone();
                let mut b = p.coords.clone();
                a[i] += h;
                b[i] -= h;
                c[i] = (f(&self.canonicalize(&Point::new(a))) - f(&self.canonicalize(&Point::new(b)))) / (2.0 * h);
            }
            CotangentVector::new(p, c)
        } else {
            let frame = self.frame(p);
            let mut w = Vector::zeros(self.ambient_dim());
            for e in &frame {
                let (a, _) = self.flow(p, &(e * h)).expect("closed-form flow");
                let (b, _) = self.flow(p, &(e * -h)).expect("closed-form flow");
                w += e * ((f(&a) - f(&b)) / (2.0 * h));
            }
            CotangentVector::new(p, self.lower_raw(p, &w))
        }
    }

    /// `(d/dx d(x, y), d/dy d(x, y))` by central differences of the
    /// distance (step `1e-6`).
    pub fn distance_partials(&self, x: &Point, y: &Point) -> Result<(CotangentVector, CotangentVector)> {
        let d = self.log(x, y)?;
        if self.norm(&d) == 0.0 {
            return Err(Error::Precondition("distance is not differentiable at x = y".into()));
        }
        self.log(y, x)?;
        let h = 1e-6;
        let dx = self.gradient_fd(|p| self.distance(p, y).value, x, h);
        let dy = self.gradient_fd(|q| self.distance(x, q).value, y, h);
        Ok((dx, dy))
    }

    /// `L_{yx}`: transports a covector at `y` to `x`.
    pub fn covector_transport(&self, xi: &CotangentVector, x: &Point) -> Result<CotangentVector> {
        let v = self.raise(xi);
        let moved = self.parallel_transport(&v, x)?;
        Ok(self.lower(&moved))
    }

    /// `|| zeta - L_{yx}(xi) ||_x`.
    pub fn covector_gap(&self, zeta: &CotangentVector, xi: &CotangentVector) -> Result<f64> {
        let moved = self.covector_transport(xi, &zeta.base)?;
        let diff = CotangentVector::new(&zeta.base, &zeta.components - &moved.components);
        Ok(self.conorm(&diff))
    }

    /// Random unit tangent vector at `p`.
    pub fn random_unit<R: Rng>(&self, p: &Point, rng: &mut R) -> TangentVector {
        let frame = self.frame(p);
        loop {
            let a: Vec<f64> = (0..frame.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 && n <= 1.0 {
                let mut v = Vector::zeros(self.ambient_dim());
                for (e, ai) in frame.iter().zip(&a) {
                    v += e * (ai / n);
                }
                return TangentVector::new(p, v);
            }
        }
    }

    pub fn tangent_at(&self, p: &Point, v: &TangentVector) -> Result<()> {
        same_base(p, &v.base)
    }
}
