//! Hamiltonians on the cotangent bundle, discrete viscosity verification,
//! monotone solvers for `u + H(|du|) = f`, the eikonal equation,
//! comparison and doubling checks, Perron lifting and pullbacks.
//!
//! Discrete viscosity semantics: a grid field has no derivatives, so the
//! sub- and superdifferential at a vertex are replaced by candidate
//! covectors (one-sided edge slopes, exact fits through well-spread
//! neighbor tuples, and the least-squares fit in the normal chart) that
//! survive a discrete touching test against the neighbor values.

mod compare;
mod solve;
mod viscosity;

pub use compare::{
    comparison_check, doubling_pair, doubling_profile, perron_improve, perron_iterate, sup_subsolution_check, ComparisonReport, DoublingReport, PerronOutcome,
    SupReport,
};
pub use solve::{eikonal_solve, local_solve, stationary_solve, SolveOptions, SolveReport, SweepOrder};
pub use viscosity::{
    intrinsic_modulus_probe, local_candidates, regularity_check, verify_viscosity, CandidateSource, Candidates, EquationForm, ModulusRow, RegularityReport,
    ScreenParams, ViscosityReport,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::manifold::{CotangentVector, Kind, Manifold, Matrix, Point};

/// Slack constant `C` in the `C h` allowances of verification and
/// comparison checks, `h` the longest graph edge.
pub const H_SLACK: f64 = 3.0;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Eval = Arc<dyn Fn(&Point, &CotangentVector) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Structure {
    General,
    /// `F(x, zeta) = H(|zeta|_x) - f(x)` with `H` nondecreasing.
    NormBased { h: Profile, f: ScalarField },
}

/// `F: T*M -> R` with its structural tag and zero-section bound `A`,
/// `-A <= F(x, 0) <= A`.
#[derive(Clone)]
pub struct Hamiltonian {
    pub manifold: Manifold,
    eval: Eval,
    pub structure: Structure,
    pub zero_bound: f64,
    pub modulus: Option<Profile>,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.structure {
            Structure::General => "general",
            Structure::NormBased { .. } => "norm_based",
        };
        f.debug_struct("Hamiltonian").field("manifold", &self.manifold.name()).field("tag", &tag).field("zero_bound", &self.zero_bound).finish()
    }
}

impl Hamiltonian {
    pub fn general<F: Fn(&Point, &CotangentVector) -> f64 + Send + Sync + 'static>(m: &Manifold, eval: F, zero_bound: f64) -> Self {
        Self { manifold: m.clone(), eval: Arc::new(eval), structure: Structure::General, zero_bound, modulus: None }
    }

    pub fn norm_based(m: &Manifold, h: Profile, f: ScalarField, zero_bound: f64) -> Self {
        let (mm, hh, ff) = (m.clone(), h.clone(), f.clone());
        let eval: Eval = Arc::new(move |x: &Point, z: &CotangentVector| hh(mm.conorm(z)) - ff.eval(x));
        Self { manifold: m.clone(), eval, structure: Structure::NormBased { h, f }, zero_bound, modulus: None }
    }

    /// `F(x, zeta) = |zeta|_x - 1`.
    pub fn eikonal(m: &Manifold) -> Self {
        Self::norm_based(m, Arc::new(|s| s), ScalarField::new(|_| 1.0), 1.0)
    }

    pub fn with_modulus(mut self, omega: Profile) -> Self {
        self.modulus = Some(omega);
        self
    }

    pub fn eval(&self, x: &Point, zeta: &CotangentVector) -> f64 {
        (self.eval)(x, zeta)
    }

    pub fn is_norm_based(&self) -> bool {
        matches!(self.structure, Structure::NormBased { .. })
    }

    /// `H` and `f` of a norm-based Hamiltonian.
    pub fn parts(&self) -> Result<(&Profile, &ScalarField)> {
        match &self.structure {
            Structure::NormBased { h, f } => Ok((h, f)),
            Structure::General => Err(Error::Precondition("the monotone solver needs a norm-based Hamiltonian".into())),
        }
    }

    /// `H` nondecreasing on `0, step, ..., count * step`.
    pub fn profile_is_monotone(&self, step: f64, count: usize) -> bool {
        match &self.structure {
            Structure::NormBased { h, .. } => (0..count).all(|i| h(i as f64 * step) <= h((i + 1) as f64 * step)),
            Structure::General => false,
        }
    }

    /// Largest `|F(x, 0)|` over the given points.
    pub fn zero_section_sup(&self, points: &[Point]) -> f64 {
        points.iter().map(|x| self.eval(x, &CotangentVector::zero(&self.manifold, x)).abs()).fold(0.0, f64::max)
    }
}

/// Diffeomorphism between chart manifolds, with its inverse.
#[derive(Clone)]
pub struct Diffeo {
    pub source: Manifold,
    pub target: Manifold,
    map: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    inverse: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    /// Exact Jacobians of the map and its inverse; central differences
    /// stand in when absent.
    jacobians: Option<(JacobianFn, JacobianFn)>,
}

type JacobianFn = Arc<dyn Fn(&Point) -> Matrix + Send + Sync>;

/// Jacobian of `p -> s(|p|) p`: `s I + (s'(rho) / rho) p p^T`.
fn radial_jacobian(p: &Point, s: f64, ds: f64) -> Matrix {
    let rho = p.coords.norm();
    Matrix::identity(p.coords.len(), p.coords.len()) * s + &p.coords * p.coords.transpose() * (ds / rho)
}

impl Diffeo {
    pub fn new<F, G>(source: &Manifold, target: &Manifold, map: F, inverse: G) -> Result<Self>
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
        G: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        for m in [source, target] {
            if matches!(m.kind(), Kind::Sphere | Kind::Hyperbolic) {
                return Err(Error::InvalidInput(format!("pullbacks need chart coordinates, {} is embedded", m.name())));
            }
        }
        if source.dim() != target.dim() {
            return Err(Error::InvalidInput("source and target dimensions differ".into()));
        }
        Ok(Self { source: source.clone(), target: target.clone(), map: Arc::new(map), inverse: Arc::new(inverse), jacobians: None })
    }

    /// Supplies exact Jacobians for the map and its inverse.
    pub fn with_jacobians<J, K>(mut self, map: J, inverse: K) -> Self
    where
        J: Fn(&Point) -> Matrix + Send + Sync + 'static,
        K: Fn(&Point) -> Matrix + Send + Sync + 'static,
    {
        self.jacobians = Some((Arc::new(map), Arc::new(inverse)));
        self
    }

    pub fn identity(m: &Manifold) -> Result<Self> {
        let eye = |p: &Point| Matrix::identity(p.coords.len(), p.coords.len());
        Ok(Self::new(m, m, |p: &Point| p.clone(), |p: &Point| p.clone())?.with_jacobians(eye, eye))
    }

    /// `(x, y) -> s (x, y)` with `s = sqrt(rho^2 - 1) / rho`, `rho = |(x, y)|`,
    /// carrying the tube chart (any radial band of it) onto the cusp chart.
    pub fn tube_to_cusp(tube: &Manifold) -> Result<Self> {
        if *tube.kind() != Kind::Tube {
            return Err(Error::InvalidInput(format!("source must be the tube, got {}", tube.name())));
        }
        Self::new(
            tube,
            &Manifold::cusp(),
            |p: &Point| {
                let rho = p.coords[0].hypot(p.coords[1]);
                Point::new(&p.coords * ((rho * rho - 1.0).sqrt() / rho))
            },
            |p: &Point| {
                let r = p.coords[0].hypot(p.coords[1]);
                Point::new(&p.coords * ((r * r + 1.0).sqrt() / r))
            },
        )
        .map(|d| {
            d.with_jacobians(
                |p: &Point| {
                    let rho = p.coords.norm();
                    let root = (rho * rho - 1.0).sqrt();
                    radial_jacobian(p, root / rho, 1.0 / (rho * rho * root))
                },
                |p: &Point| {
                    let r = p.coords.norm();
                    let root = (r * r + 1.0).sqrt();
                    radial_jacobian(p, root / r, -1.0 / (r * r * root))
                },
            )
        })
    }

    pub fn apply(&self, p: &Point) -> Point {
        (self.map)(p)
    }

    pub fn apply_inverse(&self, q: &Point) -> Point {
        (self.inverse)(q)
    }

    pub fn inverse(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            map: self.inverse.clone(),
            inverse: self.map.clone(),
            jacobians: self.jacobians.as_ref().map(|(a, b)| (b.clone(), a.clone())),
        }
    }

    /// Chart Jacobian of the map at `p`: exact when supplied, otherwise
    /// central differences with step `1e-6`.
    pub fn jacobian(&self, p: &Point) -> Matrix {
        if let Some((j, _)) = &self.jacobians {
            return j(p);
        }
        let n = p.coords.len();
        let h = 1e-6;
        let mut j = Matrix::zeros(n, n);
        for c in 0..n {
            let mut a = p.coords.clone();
            let mut b = p.coords.clone();
            a[c] += h;
            b[c] -= h;
            let col = (&(self.map)(&Point::new(a)).coords - &(self.map)(&Point::new(b)).coords) / (2.0 * h);
            j.set_column(c, &col);
        }
        j
    }
}

/// `G(x, eta) = F(psi(x), eta o dpsi(x)^{-1})` for `psi: N -> M` and `F`
/// on `T*M`.
pub fn pullback(f: &Hamiltonian, psi: &Diffeo) -> Result<Hamiltonian> {
    if f.manifold.name() != psi.target.name() {
        return Err(Error::InvalidInput(format!("Hamiltonian lives on {}, map lands in {}", f.manifold.name(), psi.target.name())));
    }
    let (ff, pp) = (f.clone(), psi.clone());
    let eval = move |x: &Point, eta: &CotangentVector| -> f64 {
        let j = pp.jacobian(x);
        let y = pp.apply(x);
        // (eta o J^{-1}) has components J^{-T} eta
        match j.transpose().lu().solve(&eta.components) {
            Some(c) if j.determinant().abs() > 1e-12 => ff.eval(&y, &CotangentVector::new(&y, c)),
            _ => f64::NAN,
        }
    };
    Ok(Hamiltonian::general(&psi.source, eval, f.zero_bound))
}

/// Checks that the Jacobian is invertible at every sample.
pub fn check_invertible(psi: &Diffeo, samples: &[Point]) -> Result<()> {
    for p in samples {
        if psi.jacobian(p).determinant().abs() <= 1e-12 {
            return Err(Error::Precondition(format!("dpsi is not invertible at {:?}", p.to_vec())));
        }
    }
    Ok(())
}

/// Values of `v o psi^{-1}` at the points `psi(x_i)`: the same numbers,
/// now read on the image cloud.
pub fn transfer_points(psi: &Diffeo, points: &[Point]) -> Vec<Point> {
    points.iter().map(|p| psi.apply(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Vector;

    #[test]
    fn identity_pullback_is_pointwise_equal() {
        let m = Manifold::euclidean(2);
        let f = Hamiltonian::general(&m, |x: &Point, z: &CotangentVector| z.components.norm_squared() + x.coords[0], 1.0);
        let g = pullback(&f, &Diffeo::identity(&m).unwrap()).unwrap();
        let x = Point::from_slice(&[0.3, 0.8]);
        let z = CotangentVector::new(&x, Vector::from_column_slice(&[1.5, -0.5]));
        assert_eq!(g.eval(&x, &z), f.eval(&x, &z));
    }

    #[test]
    fn exact_jacobian_matches_differences() {
        let psi = Diffeo::tube_to_cusp(&Manifold::tube()).unwrap();
        let map = psi.clone();
        let fd = Diffeo::new(&psi.source, &psi.target, move |p: &Point| map.apply(p), |q: &Point| q.clone()).unwrap();
        for xy in [[1.1, 1.3], [-2.0, 0.4], [0.2, -2.9]] {
            let p = Point::from_slice(&xy);
            assert!((psi.jacobian(&p) - fd.jacobian(&p)).amax() < 1e-7);
        }
    }

    #[test]
    fn tube_cusp_round_trip() {
        let psi = Diffeo::tube_to_cusp(&Manifold::tube()).unwrap();
        let p = Point::from_slice(&[1.1, 1.3]);
        let q = psi.apply(&p);
        assert!(psi.target.contains(&q));
        assert!((&psi.apply_inverse(&q).coords - &p.coords).norm() < 1e-12);
        let jinv = psi.inverse().jacobian(&q);
        assert!((psi.jacobian(&p) * jinv - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn norm_based_matches_formula() {
        let m = Manifold::sphere();
        let h: Profile = Arc::new(|s| 2.0 * s + s * s);
        let f = ScalarField::new(|p: &Point| p.coords[2]);
        let ham = Hamiltonian::norm_based(&m, h, f, 3.0);
        let x = Point::from_slice(&[0.6, 0.0, 0.8]);
        let z = m.lower(&crate::manifold::TangentVector::new(&x, Vector::from_column_slice(&[0.0, 0.5, 0.0])));
        assert!((ham.eval(&x, &z) - (2.0 * 0.5 + 0.25 - 0.8)).abs() < 1e-10);
        assert!(ham.profile_is_monotone(0.1, 100));
    }
}
