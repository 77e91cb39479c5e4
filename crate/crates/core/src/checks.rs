//! Property suites over catalog fixtures, shared by the `check` and
//! `pullback-demo` commands.
//!
//! Geometric bounds are pinned at `DEFAULT_TOL` and scale linearly with the
//! requested `tol`; the Hamilton-Jacobi checks use `tol` as the
//! verification tolerance and `tol + 3h`-type allowances on top.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::discretize::{build_graph, from_points, grid, partition, sample, BoundarySet, Graph};
use crate::error::{Error, Result};
use crate::field::{DiscreteField, ScalarField};
use crate::hj::{
    comparison_check, doubling_pair, eikonal_solve, pullback, regularity_check, stationary_solve, sup_subsolution_check, transfer_points, verify_viscosity, Diffeo,
    EquationForm, Hamiltonian, ScreenParams, SolveOptions, SweepOrder, H_SLACK,
};
use crate::manifold::{CotangentVector, Kind, Manifold, Point, TangentVector, Vector};
use crate::nonsmooth::{
    bump, calculus_suite, convexity_check, default_fan, deville_lipschitz_check, dgz_perturb, differentiability_probe, ekeland_search, estimate_subdifferential,
    fuzzy_sum_search, rolle_search, test_subgradient, verify_ekeland, CovectorGrid, DevilleOutcome, FuzzyOutcome, Mode, Polytope, ProbeSchedule, RolleParams,
};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const SUITES: [&str; 5] = ["transport", "calculus", "variational", "convexity", "hj"];

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub tol: f64,
    pub pass: bool,
    pub first_failure: Option<String>,
    /// Largest residual-type value among the assertions.
    pub max_residual: f64,
    pub assertions: Vec<Assertion>,
    pub details: serde_json::Map<String, Value>,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, tol: f64) -> Self {
        Self { suite: suite.into(), seed, tol, pass: true, first_failure: None, max_residual: 0.0, assertions: Vec::new(), details: Default::default() }
    }

    fn push(&mut self, name: String, value: f64, bound: f64, pass: bool) {
        if !pass && self.first_failure.is_none() {
            self.first_failure = Some(format!("{name}: {value:e} against {bound:e}"));
        }
        self.pass &= pass;
        self.assertions.push(Assertion { name, value, bound, pass });
    }

    /// Residual `value <= bound`.
    fn le(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        if value.is_finite() {
            self.max_residual = self.max_residual.max(value);
        }
        self.push(name.into(), value, bound, value <= bound);
    }

    /// Non-residual upper bound `value <= bound`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name.into(), value, bound, value <= bound);
    }

    /// Margin `value >= bound`.
    fn ge(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name.into(), value, bound, value >= bound);
    }

    fn truth(&mut self, name: impl Into<String>, ok: bool) {
        self.push(name.into(), if ok { 1.0 } else { 0.0 }, 1.0, ok);
    }

    fn detail(&mut self, key: &str, value: Value) {
        self.details.insert(key.into(), value);
    }

    fn absorb(&mut self, other: SuiteReport) {
        for a in other.assertions {
            let name = format!("{}.{}", other.suite, a.name);
            if a.pass {
                self.assertions.push(Assertion { name, ..a });
            } else {
                self.push(name, a.value, a.bound, false);
            }
        }
        self.max_residual = self.max_residual.max(other.max_residual);
        self.details.insert(other.suite, Value::Object(other.details));
    }
}

/// Runs a named suite, or every suite for `all`.
pub fn run_suite(name: &str, seed: u64, tol: f64) -> Result<SuiteReport> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tol must be nonnegative, got {tol}")));
    }
    match name {
        "transport" => transport_suite(seed, tol),
        "calculus" => calculus_suite_run(seed, tol),
        "variational" => variational_suite(seed, tol),
        "convexity" => convexity_suite(seed, tol),
        "hj" => hj_suite(seed, tol),
        "all" => {
            let mut all = SuiteReport::new("all", seed, tol);
            for s in SUITES {
                all.absorb(run_suite(s, seed, tol)?);
            }
            Ok(all)
        }
        other => Err(Error::InvalidInput(format!("unknown suite {other:?}; expected one of {SUITES:?} or all"))),
    }
}

/// Every catalog manifold at its default parameters.
pub fn catalog() -> Vec<Manifold> {
    vec![
        Manifold::euclidean(2),
        Manifold::euclidean(3),
        Manifold::sphere(),
        Manifold::hyperbolic(),
        Manifold::torus(2),
        Manifold::circle(),
        Manifold::cusp(),
        Manifold::tube(),
    ]
}

/// Random point whose working ball stays inside the chart domain.
pub fn fixture_point<R: Rng>(m: &Manifold, rng: &mut R) -> Point {
    match m.kind() {
        Kind::Sphere => loop {
            let v = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break Point::new(v / n);
            }
        },
        Kind::Hyperbolic => {
            let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            m.canonicalize(&Point::from_slice(&[x, y, 0.0]))
        }
        Kind::Cusp | Kind::Tube => {
            let (lo, hi) = if *m.kind() == Kind::Cusp { (1.0, 2.0) } else { (1.7, 2.5) };
            let r = rng.random_range(lo..hi);
            let a = rng.random_range(0.0..TAU);
            Point::from_slice(&[r * a.cos(), r * a.sin()])
        }
        _ => Point::new(Vector::from_fn(m.dim(), |_, _| rng.random_range(0.0..3.0))),
    }
}

/// `exp_p(v)` with `|v| = t r_M(p)`, `t` uniform in `[lo, hi)`, redrawn
/// until `|v| < hi r_M(q)` too, so the pair is admissible from either end.
pub fn admissible_partner<R: Rng>(m: &Manifold, p: &Point, lo: f64, hi: f64, rng: &mut R) -> Result<Point> {
    for _ in 0..1000 {
        let len = rng.random_range(lo..hi) * m.working_radius_at(p);
        let q = m.exp(p, &m.random_unit(p, rng).scaled(len))?;
        if len < hi * m.working_radius_at(&q) {
            return Ok(q);
        }
    }
    Err(Error::Precondition(format!("no admissible partner found near {:?}", p.to_vec())))
}

/// Largest round-trip, isometry, inverse-transport and antisymmetry
/// residuals over `samples` random cases on `m`.
pub fn transport_residuals(m: &Manifold, samples: usize, rng: &mut ChaCha8Rng) -> Result<[f64; 4]> {
    let mut worst = [0.0f64; 4];
    for _ in 0..samples {
        let p = fixture_point(m, rng);
        let len = rng.random_range(0.0..0.9) * m.working_radius_at(&p);
        let v = m.random_unit(&p, rng).scaled(len);
        let q = m.exp(&p, &v)?;
        let back = m.log(&p, &q)?;
        worst[0] = worst[0].max(m.norm(&TangentVector::new(&p, &back.components - &v.components)));
        let q = admissible_partner(m, &p, 0.0, 0.9, rng)?;
        let w = m.random_unit(&p, rng).scaled(rng.random_range(0.1..2.0));
        let moved = m.parallel_transport(&w, &q)?;
        worst[1] = worst[1].max((m.norm(&moved) - m.norm(&w)).abs());
        let xi = m.lower(&w);
        let round = m.covector_transport(&m.covector_transport(&xi, &q)?, &p)?;
        worst[2] = worst[2].max(m.conorm(&CotangentVector::new(&p, &round.components - &xi.components)));
        let y = admissible_partner(m, &p, 0.2, 0.6, rng)?;
        let (dx, dy) = m.distance_partials(&p, &y)?;
        worst[3] = worst[3].max(m.covector_gap(&dx.scaled(-1.0), &dy)?);
    }
    Ok(worst)
}

/// Holonomy angle of the geodesic triangle through the north pole and two
/// equator points a quarter turn apart, by closed-form transport in
/// `pieces` steps per side and by the transport ODE.
pub fn octant_holonomy(pieces: usize) -> Result<(f64, f64)> {
    let m = Manifold::sphere();
    let corners = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]].map(|c| Point::from_slice(&c));
    let w0 = Vector::from_column_slice(&[1.0, 0.0, 0.0]);
    let mut closed = TangentVector::new(&corners[0], w0.clone());
    let mut ode = w0.clone();
    for s in 0..3 {
        let (a, b) = (&corners[s], &corners[(s + 1) % 3]);
        for k in 1..=pieces {
            let t = FRAC_PI_2 * k as f64 / pieces as f64;
            let next = Point::new(&a.coords * t.cos() + &b.coords * t.sin());
            closed = m.parallel_transport(&closed, &next)?;
        }
        // unit speed along the side: d/dt (a cos t + b sin t) at 0 is b
        let (_, moved) = m.transport_along_ode(a, &(&b.coords * FRAC_PI_2), &ode)?;
        ode = moved;
    }
    let angle = |v: &Vector| (v[1].atan2(v[0])).abs();
    Ok((angle(&closed.components), angle(&ode)))
}

fn transport_suite(seed: u64, tol: f64) -> Result<SuiteReport> {
    let s = tol / DEFAULT_TOL;
    let mut r = SuiteReport::new("transport", seed, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in catalog() {
        let name = format!("{}{}", m.name(), m.dim());
        let [rt, iso, inv, anti] = transport_residuals(&m, 40, &mut rng)?;
        r.le(format!("{name}.exp_log_round_trip"), rt, 1e-6 * s);
        r.le(format!("{name}.transport_isometry"), iso, 1e-8 * s);
        r.le(format!("{name}.transport_inverse"), inv, 1e-8 * s);
        r.le(format!("{name}.antisymmetry"), anti, 1e-5 * s);
    }
    let (closed, ode) = octant_holonomy(8)?;
    r.le("sphere.octant_holonomy", (closed - FRAC_PI_2).abs(), 1e-3 * s);
    r.le("sphere.octant_holonomy_ode", (ode - closed).abs(), 1e-3 * s);
    r.detail("holonomy", json!({ "closed_form": closed, "ode": ode }));
    Ok(r)
}

/// `|x|` at `0` in one dimension: Hausdorff distance of the convex-mode
/// estimate to `[-1, 1]`, and how many of the 41 grid covectors in `[-2, 2]`
/// are certified violated for `-|x|`.
pub fn abs_fixture() -> Result<(f64, usize)> {
    let m = Manifold::euclidean(1);
    let p = Point::from_slice(&[0.0]);
    let s = ProbeSchedule::default_for(&m, &p);
    let abs = |q: &Point| q.coords[0].abs();
    let est = estimate_subdifferential(&m, &abs, &p, &default_fan(&m, &s), Mode::Convex, &s)?;
    let h = est.outer.hausdorff(&Polytope::interval(-1.0, 1.0));
    let neg = |q: &Point| -q.coords[0].abs();
    let mut violated = 0;
    for i in 0..41 {
        let a = -2.0 + 0.1 * i as f64;
        let zeta = CotangentVector::new(&p, Vector::from_element(1, a));
        if test_subgradient(&m, &neg, &p, &zeta, &s)?.is_violated() {
            violated += 1;
        }
    }
    Ok((h, violated))
}

fn calculus_suite_run(seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("calculus", seed, tol);
    let (h, violated) = abs_fixture()?;
    r.le("abs.hausdorff", h, 0.02);
    r.ge("neg_abs.violated", violated as f64, 41.0);
    let m = Manifold::euclidean(1);
    let p = Point::from_slice(&[0.0]);
    let s = ProbeSchedule::default_for(&m, &p);
    let abs = |q: &Point| q.coords[0].abs();
    let rules = calculus_suite(&m, &abs, &abs, None, &p, &s, true)?;
    r.at_most("abs_abs.rule_violations", rules.violations as f64, 0.0);
    let neg = |q: &Point| -q.coords[0].abs();
    let fuzzy = fuzzy_sum_search(&m, &abs, &neg, &p, &CotangentVector::zero(&m, &p), 0.1)?;
    r.truth("fuzzy_sum.found", matches!(fuzzy, FuzzyOutcome::Found { .. }));
    // a smooth field on the sphere is probe-differentiable at random points
    let sphere = Manifold::sphere();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x = fixture_point(&sphere, &mut rng);
        let f = |q: &Point| q.coords[2];
        let sched = ProbeSchedule::default_for(&sphere, &x);
        match differentiability_probe(&sphere, &f, &x, 0.05, &sched)? {
            Some(d) => {
                let exact = sphere.covector_from_raw(&x, &Vector::from_column_slice(&[0.0, 0.0, 1.0]));
                worst = worst.max(sphere.conorm(&CotangentVector::new(&x, &d.components - &exact.components)));
            }
            None => worst = f64::INFINITY,
        }
    }
    r.le("sphere_height.differential", worst, 0.05);
    r.detail("rules", serde_json::to_value(&rules)?);
    Ok(r)
}

/// Ekeland instance `i` of a seeded family on a sphere graph: smooth
/// field plus noise, random start, `eps` just above the start's gap to the
/// supremum.
pub fn ekeland_instance(graph: &Graph, rng: &mut ChaCha8Rng) -> (DiscreteField, usize, f64, f64) {
    let (a, b) = (rng.random_range(0.5..3.0), rng.random_range(0.0..TAU));
    let values: Vec<f64> = graph.points.iter().map(|p| (a * p.coords[0] + b).sin() + p.coords[2] + 0.1 * rng.random_range(-1.0..1.0)).collect();
    let f = DiscreteField::new(values);
    let x0 = rng.random_range(0..graph.len());
    let eps = f.max() - f.values[x0] + rng.random_range(0.01..0.5);
    let lambda = rng.random_range(0.1..3.0);
    (f, x0, eps, lambda)
}

/// Bounded lsc fixture: random smooth field with a few vertices outside
/// the domain.
pub fn dgz_fixture(graph: &Graph, rng: &mut ChaCha8Rng) -> DiscreteField {
    let c = Vector::from_fn(graph.manifold.ambient_dim(), |_, _| rng.random_range(-1.0..1.0));
    let mut values: Vec<f64> = graph.points.iter().map(|p| c.dot(&p.coords) + 0.05 * rng.random_range(-1.0..1.0)).collect();
    for _ in 0..3 {
        let i = rng.random_range(0..values.len());
        values[i] = f64::INFINITY;
    }
    DiscreteField::new(values)
}

/// The identity on `(-1, 1)` with `eps = R = 1`: located gradient norm.
pub fn rolle_sharp() -> Result<f64> {
    let m = Manifold::euclidean(1).with_bounds(vec![(-1.0, 1.0)])?;
    let g = build_graph(&grid(&m, 201)?, 2)?;
    let region = partition(&g, |p| p.coords[0].abs() < 1.0 - 1e-12)?;
    let f = ScalarField::new(|p: &Point| p.coords[0]).with_differential(|p: &Point| CotangentVector::new(p, Vector::from_element(1, 1.0)));
    Ok(rolle_search(&g, &f, &region, RolleParams { r: 0.1, bounded: Some((1.0, 1.0, 100)) })?.grad_norm)
}

/// Bump checks at a sphere point: value at the center, largest value
/// outside the ball, and the largest finite-difference gradient relative to
/// `R / delta`, over `samples` random points.
pub fn bump_fixture(delta: f64, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let m = Manifold::sphere();
    let p = Point::from_slice(&[0.0, 0.6, 0.8]);
    let b = bump(&m, &p, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut outside, mut ratio): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let u = m.random_unit(&p, &mut rng);
        let y = m.exp(&p, &u.scaled(rng.random_range(0.0..2.0 * delta)))?;
        if m.distance(&p, &y).value >= delta {
            outside = outside.max(b.eval(&y).abs());
        }
        let g = m.gradient_fd(|q: &Point| b.eval(q), &y, 1e-7);
        ratio = ratio.max(m.conorm(&g) / b.lipschitz_bound());
    }
    Ok((b.eval(&p), outside, ratio))
}

fn variational_suite(seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("variational", seed, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = build_graph(&sample(&Manifold::sphere(), 300, seed)?, 8)?;
    let mut failures = 0;
    for _ in 0..10 {
        let (f, x0, eps, lambda) = ekeland_instance(&g, &mut rng);
        let out = ekeland_search(&g, &f, x0, eps, lambda)?;
        if !verify_ekeland(&g, &f, x0, eps, lambda, out.z)?.holds() {
            failures += 1;
        }
    }
    r.at_most("ekeland.failed_instances", failures as f64, 0.0);
    let delta = 0.3;
    let (mut phi, mut dphi, mut margin) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..5 {
        let f = dgz_fixture(&g, &mut rng);
        let out = dgz_perturb(&g, &f, delta)?;
        phi = phi.max(out.sup_phi);
        dphi = dphi.max(out.sup_dphi);
        margin = margin.min(out.margin);
    }
    r.at_most("dgz.sup_phi", phi, delta);
    r.at_most("dgz.sup_dphi", dphi, delta);
    r.ge("dgz.margin", margin, f64::MIN_POSITIVE);
    let grad = rolle_sharp()?;
    r.ge("rolle.grad_norm_low", grad, 0.99);
    r.at_most("rolle.grad_norm_high", grad, 1.0);
    let (center, outside, ratio) = bump_fixture(0.3, 500, seed)?;
    r.truth("bump.center_is_one", center == 1.0);
    r.le("bump.outside", outside, 0.0);
    r.at_most("bump.gradient_ratio", ratio, 1.05);
    Ok(r)
}

fn convexity_suite(seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("convexity", seed, tol);
    let m = Manifold::hyperbolic();
    let p0 = m.canonicalize(&Point::from_slice(&[0.3, -0.2, 0.0]));
    let f = ScalarField::squared_distance_from(&m, &p0);
    let eval = |q: &Point| f.eval(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut empty, mut violated) = (0, 0);
    for _ in 0..20 {
        let x = fixture_point(&m, &mut rng);
        let s = ProbeSchedule::default_for(&m, &x);
        let est = estimate_subdifferential(&m, &eval, &x, &default_fan(&m, &s), Mode::General(CovectorGrid::default_for(2)), &s)?;
        if est.is_empty() {
            empty += 1;
        }
        // the exact differential 2 d(x, p0) (-log_x p0)^flat is a subgradient
        let v = m.log_within(&x, &p0, f64::INFINITY)?;
        let exact = m.lower(&v.scaled(-2.0));
        if test_subgradient(&m, &eval, &x, &exact, &s)?.is_violated() {
            violated += 1;
        }
    }
    r.at_most("hyperbolic_sq_dist.empty_estimates", empty as f64, 0.0);
    r.at_most("hyperbolic_sq_dist.violations", violated as f64, 0.0);
    let bases: Vec<Point> = (0..4).map(|_| fixture_point(&m, &mut rng)).collect();
    let conv = convexity_check(&m, &eval, &bases, 8, 7, &[0.25, 0.5, 0.75], seed)?;
    r.truth("hyperbolic_sq_dist.convex", conv.pass);
    let g = build_graph(&sample(&Manifold::sphere(), 300, seed)?, 8)?;
    let z = ScalarField::new(|p: &Point| p.coords[2]);
    let dev = deville_lipschitz_check(&g, &z, 1.0, 15, seed)?;
    r.truth("deville.height_is_1_lipschitz", matches!(dev.outcome, DevilleOutcome::Pass));
    r.detail("convexity", serde_json::to_value(&conv)?);
    Ok(r)
}

/// Solver tolerance used under a verification tolerance `tol`.
pub fn solver_tol(tol: f64) -> f64 {
    (1e-3 * tol).max(1e-13)
}

/// `u* = z` on the unit sphere solves `u + |du| = z + sqrt(1 - z^2)`.
pub fn manufactured_sphere() -> (Hamiltonian, ScalarField) {
    let m = Manifold::sphere();
    let f = ScalarField::new(|p: &Point| p.coords[2] + (1.0 - p.coords[2] * p.coords[2]).max(0.0).sqrt());
    (Hamiltonian::norm_based(&m, Arc::new(|s| s), f, 2.0), ScalarField::new(|p: &Point| p.coords[2]))
}

/// `f + c` for a norm-based Hamiltonian, same profile.
pub fn shifted(ham: &Hamiltonian, c: f64) -> Result<Hamiltonian> {
    let (h, f) = ham.parts()?;
    let f = f.clone();
    Ok(Hamiltonian::norm_based(&ham.manifold, h.clone(), ScalarField::new(move |p: &Point| f.eval(p) + c), ham.zero_bound + c.abs()))
}

/// Distance to the rim of the unit square.
pub fn square_rim_distance(p: &Point) -> f64 {
    p.coords.iter().map(|&x| x.min(1.0 - x)).fold(f64::INFINITY, f64::min)
}

pub fn open_square(p: &Point) -> bool {
    p.coords.iter().all(|&x| x > 1e-9 && x < 1.0 - 1e-9)
}

pub fn upper_hemisphere(p: &Point) -> bool {
    p.coords[2] > 0.0
}

/// Sup error of an eikonal field against an analytic distance over the
/// region's interior.
pub fn eikonal_error(graph: &Graph, region: &BoundarySet, u: &DiscreteField, exact: impl Fn(&Point) -> f64) -> f64 {
    region.interior.iter().map(|&i| (u.values[i] - exact(&graph.points[i])).abs()).fold(0.0, f64::max)
}

fn hj_suite(seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("hj", seed, tol);
    let screen = ScreenParams::default();

    let sq = build_graph(&grid(&Manifold::euclidean(2), 31)?, 8)?;
    let band = partition(&sq, open_square)?;
    let u = eikonal_solve(&sq, &band)?;
    r.le("eikonal_square.error", eikonal_error(&sq, &band, &u, square_rim_distance), 4.0 * sq.h);
    r.truth("eikonal_square.lipschitz", regularity_check(&u, 1.0, &sq).pass);
    let v = verify_viscosity(&u, &Hamiltonian::eikonal(&sq.manifold), &sq, Some(&band), EquationForm::Eikonal, screen)?;
    r.le("eikonal_square.residual", v.max_residual(), tol + H_SLACK * sq.h);

    let sphere = Manifold::sphere();
    let hs = build_graph(&sample(&sphere, 1500, seed)?, 8)?;
    let band = partition(&hs, upper_hemisphere)?;
    let u = eikonal_solve(&hs, &band)?;
    r.le("eikonal_hemisphere.error", eikonal_error(&hs, &band, &u, |p| p.coords[2].asin()), 3.0 * hs.h);
    r.truth("eikonal_hemisphere.lipschitz", regularity_check(&u, 1.0, &hs).pass);
    let v = verify_viscosity(&u, &Hamiltonian::eikonal(&sphere), &hs, Some(&band), EquationForm::Eikonal, screen)?;
    r.le("eikonal_hemisphere.residual", v.max_residual(), tol + H_SLACK * hs.h);

    let g = build_graph(&sample(&sphere, 1000, seed + 1)?, 8)?;
    let (ham, exact) = manufactured_sphere();
    let opts = SolveOptions { tol: solver_tol(tol), ..Default::default() };
    let (u, rep) = stationary_solve(&ham, &g, opts)?;
    r.truth("manufactured.converged", rep.converged);
    r.le("manufactured.error", u.sup_distance(&exact.sample(&g.points)), 3.0 * g.h);
    let v = verify_viscosity(&u, &ham, &g, None, EquationForm::Stationary, screen)?;
    r.le("manufactured.residual", v.max_residual(), tol + H_SLACK * g.h);

    let ham_g = shifted(&ham, 1.0)?;
    let (w, _) = stationary_solve(&ham_g, &g, opts)?;
    let cmp = comparison_check(&u, &ham, &w, &ham_g, &g, tol, screen)?;
    r.ge("comparison.margin", cmp.margin, cmp.bound);
    let (fwd, _) = stationary_solve(&ham, &g, SolveOptions { order: SweepOrder::Forward, ..opts })?;
    let (rev, _) = stationary_solve(&ham, &g, SolveOptions { order: SweepOrder::Reverse, ..opts })?;
    let replay = fwd.sup_distance(&rev);
    r.at_most("uniqueness_replay", replay, 2.0 * tol);
    let lowered = u.map(|x| x - 0.25);
    let shifted_copy = DiscreteField::new(u.values.iter().zip(&g.points).map(|(x, p)| x - 0.2 * (1.0 + p.coords[0])).collect());
    let sup = sup_subsolution_check(&lowered, &shifted_copy, &ham, &g, None, EquationForm::Stationary, tol, screen)?;
    r.le("sup_of_subsolutions", sup.max_sub_sup, sup.threshold);

    let small = build_graph(&sample(&sphere, 300, seed + 2)?, 8)?;
    let (us, _) = stationary_solve(&ham, &small, opts)?;
    let dbl = doubling_pair(&us, &us, 0.1, &small, screen)?;
    r.truth("doubling.i", dbl.i);
    r.truth("doubling.ii", dbl.ii);
    r.truth("doubling.iii", dbl.iii);

    let demo = pullback_demo(&PullbackConfig { n: 500, seed, tol, ..Default::default() })?;
    r.le("pullback.source_residual", demo.source.max_residual(), demo.source.threshold);
    r.le("pullback.target_residual", demo.target.max_residual(), demo.target.threshold);

    r.detail("comparison", serde_json::to_value(&cmp)?);
    r.detail("uniqueness_replay", json!({ "sup_difference": replay, "bound": 2.0 * tol, "sweeps": rep.sweeps }));
    r.detail("doubling", serde_json::to_value(&dbl)?);
    r.detail("pullback", serde_json::to_value(&demo)?);
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct PullbackConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    /// Use the identity of the tube band instead of the tube-to-cusp map.
    pub identity: bool,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        Self { n: 800, k: 8, seed: 1, tol: DEFAULT_TOL, identity: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SideResiduals {
    pub manifold: String,
    pub h: f64,
    pub checked: usize,
    pub max_sub: f64,
    pub max_super: f64,
    /// `tol + 3h`.
    pub threshold: f64,
}

impl SideResiduals {
    pub fn max_residual(&self) -> f64 {
        self.max_sub.max(self.max_super)
    }

    pub fn pass(&self) -> bool {
        self.max_residual() <= self.threshold
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PullbackReport {
    pub config: PullbackConfig,
    pub sweeps: usize,
    pub source: SideResiduals,
    pub target: SideResiduals,
    /// Smallest and largest condition number of the chart Jacobian of the
    /// map over the sample.
    pub jacobian_condition: (f64, f64),
    /// Identity mode: largest `|G - F|` over sampled covectors.
    pub hamiltonian_gap: Option<f64>,
    pub pass: bool,
}

/// Radial band of the tube used by the demo; its inner rim stays clear of
/// the steep neck so random samples connect.
pub const DEMO_BAND: (f64, f64) = (1.6, 3.0);
/// Vertices checked by the demo: tube radius strictly inside this band.
pub const DEMO_CHECKED: (f64, f64) = (1.7, 2.9);

/// Solve on the tube, transfer to the cusp, verify on both sides.
///
/// `G(x, eta) = |eta|_x - (1 + 0.2 x_1)` on the tube band is solved by the
/// monotone scheme. The cusp Hamiltonian is the pullback of `G` under the
/// inverse map, evaluated as a general Hamiltonian; the solution values are
/// read at the image points and verified there.
pub fn pullback_demo(cfg: &PullbackConfig) -> Result<PullbackReport> {
    let tube = Manifold::tube().with_bounds(vec![DEMO_BAND])?;
    let psi = if cfg.identity { Diffeo::identity(&tube)? } else { Diffeo::tube_to_cusp(&tube)? };
    let screen = ScreenParams::default();
    let gn = build_graph(&sample(&tube, cfg.n, cfg.seed)?, cfg.k)?;
    let g_ham = Hamiltonian::norm_based(&tube, Arc::new(|s| s), ScalarField::new(|p: &Point| 1.0 + 0.2 * p.coords[0]), 1.6);
    let (v, rep) = stationary_solve(&g_ham, &gn, SolveOptions { tol: solver_tol(cfg.tol), ..Default::default() })?;
    let checked = |r: f64| r > DEMO_CHECKED.0 && r < DEMO_CHECKED.1;
    let bn = partition(&gn, |p| checked(p.coords.norm()))?;
    let rn = verify_viscosity(&v, &g_ham, &gn, Some(&bn), EquationForm::Stationary, screen)?;

    let target = psi.target.clone();
    crate::hj::check_invertible(&psi, &gn.points)?;
    let gm = build_graph(&from_points(&target, transfer_points(&psi, &gn.points))?, cfg.k)?;
    let f_ham = pullback(&g_ham, &psi.inverse())?;
    let bm = partition(&gm, |q| checked(psi.apply_inverse(q).coords.norm()))?;
    let rm = verify_viscosity(&v, &f_ham, &gm, Some(&bm), EquationForm::Stationary, screen)?;

    let conds: Vec<f64> = gn
        .points
        .iter()
        .map(|p| {
            let sv = psi.jacobian(p).singular_values();
            sv.max() / sv.min()
        })
        .collect();
    let jacobian_condition = (conds.iter().copied().fold(f64::INFINITY, f64::min), conds.iter().copied().fold(0.0, f64::max));
    let hamiltonian_gap = cfg.identity.then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        gn.points
            .iter()
            .take(50)
            .map(|x| {
                let eta = CotangentVector::new(x, Vector::from_fn(2, |_, _| rng.random_range(-2.0..2.0)));
                (f_ham.eval(x, &eta) - g_ham.eval(x, &eta)).abs()
            })
            .fold(0.0, f64::max)
    });
    let side = |m: &Manifold, g: &Graph, rep: &crate::hj::ViscosityReport| SideResiduals {
        manifold: m.name().into(),
        h: g.h,
        checked: rep.checked.len(),
        max_sub: rep.max_sub,
        max_super: rep.max_super,
        threshold: cfg.tol + H_SLACK * g.h,
    };
    let source = side(&tube, &gn, &rn);
    let target = side(&target, &gm, &rm);
    let pass = source.pass() && target.pass() && hamiltonian_gap.is_none_or(|gap| gap <= 1e-6);
    Ok(PullbackReport { config: cfg.clone(), sweeps: rep.sweeps, source, target, jacobian_condition, hamiltonian_gap, pass })
}
