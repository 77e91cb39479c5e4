use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn catalog() -> Vec<Manifold> {
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

fn random_point(m: &Manifold, rng: &mut ChaCha8Rng) -> Point {
    match m.kind() {
        Kind::Sphere => {
            let v = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            Point::new(&v / v.norm())
        }
        Kind::Hyperbolic => {
            let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            m.canonicalize(&Point::from_slice(&[x, y, 0.0]))
        }
        Kind::Cusp | Kind::Tube => {
            // radii whose working ball stays inside the annulus
            let (lo, hi) = if *m.kind() == Kind::Cusp { (1.0, 2.0) } else { (1.7, 2.5) };
            let r = rng.random_range(lo..hi);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Point::from_slice(&[r * a.cos(), r * a.sin()])
        }
        _ => Point::new(Vector::from_fn(m.dim(), |_, _| rng.random_range(0.0..3.0))),
    }
}

#[test]
fn euclidean_basics() {
    let m = Manifold::euclidean(2);
    let p = Point::from_slice(&[0.0, 0.0]);
    let q = Point::from_slice(&[3.0, 4.0]);
    assert_eq!(m.distance(&p, &q).value, 5.0);
    let v = m.log(&p, &q).unwrap();
    assert_eq!(v.components, q.coords);
    let e1 = TangentVector::new(&p, Vector::from_column_slice(&[1.0, 0.0]));
    let e2 = TangentVector::new(&p, Vector::from_column_slice(&[0.0, 1.0]));
    assert_eq!(m.metric_eval(&p, &e1, &e2).unwrap(), 0.0);
    let other = TangentVector::new(&q, e1.components.clone());
    assert!(matches!(m.metric_eval(&p, &e1, &other), Err(Error::MismatchedBase)));
}

#[test]
fn sphere_quarter_turn_reaches_equator() {
    let m = Manifold::sphere();
    let north = Point::from_slice(&[0.0, 0.0, 1.0]);
    let v = TangentVector::new(&north, Vector::from_column_slice(&[FRAC_PI_2, 0.0, 0.0]));
    let q = m.exp(&north, &v).unwrap();
    assert_abs_diff_eq!(q.coords, Vector::from_column_slice(&[1.0, 0.0, 0.0]), epsilon = 1e-15);
    assert!(matches!(m.log(&north, &q), Err(Error::OutOfRadius { .. })));
    let v = m.log_within(&north, &q, PI).unwrap();
    assert_abs_diff_eq!(m.norm(&v), FRAC_PI_2, epsilon = 1e-14);
    let south = Point::from_slice(&[0.0, 0.0, -1.0]);
    assert!(matches!(m.log(&north, &south), Err(Error::OutOfRadius { .. })));
}

#[test]
fn sphere_metric_matches_round_metric_in_polar_chart() {
    // the polar-chart basis vector d/dtheta at (theta, phi) has squared length 1,
    // d/dphi has sin^2 theta
    let m = Manifold::sphere();
    let (theta, phi) = (0.7_f64, 1.9_f64);
    let p = Point::from_slice(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
    let dtheta = TangentVector::new(&p, Vector::from_column_slice(&[theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin()]));
    let dphi = TangentVector::new(&p, Vector::from_column_slice(&[-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0]));
    assert_abs_diff_eq!(m.metric_eval(&p, &dtheta, &dtheta).unwrap(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(m.metric_eval(&p, &dphi, &dphi).unwrap(), theta.sin().powi(2), epsilon = 1e-15);
    assert_abs_diff_eq!(m.metric_eval(&p, &dphi, &dtheta).unwrap(), 0.0, epsilon = 1e-15);
}

#[test]
fn geodesic_eval_along_meridian() {
    let m = Manifold::sphere();
    let north = Point::from_slice(&[0.0, 0.0, 1.0]);
    let dir = TangentVector::new(&north, Vector::from_column_slice(&[0.0, 2.0, 0.0]));
    let g = m.geodesic(&north, &dir, PI).unwrap();
    let (x0, v0) = m.geodesic_eval(&g, 0.0).unwrap();
    assert_eq!(x0, north);
    assert_abs_diff_eq!(v0.components, Vector::from_column_slice(&[0.0, 1.0, 0.0]), epsilon = 0.0);
    let (x, v) = m.geodesic_eval(&g, FRAC_PI_2).unwrap();
    assert_abs_diff_eq!(x.coords, Vector::from_column_slice(&[0.0, 1.0, 0.0]), epsilon = 1e-15);
    assert_abs_diff_eq!(v.components, Vector::from_column_slice(&[0.0, 0.0, -1.0]), epsilon = 1e-15);
    assert!(m.geodesic_eval(&g, 4.0).is_err());
}

#[test]
fn hyperbolic_distance_is_acosh_of_pairing() {
    let m = Manifold::hyperbolic();
    let p = m.canonicalize(&Point::from_slice(&[0.3, -0.2, 0.0]));
    let q = m.canonicalize(&Point::from_slice(&[-1.1, 0.8, 0.0]));
    let expected = (-minkowski(&p.coords, &q.coords)).acosh();
    assert_abs_diff_eq!(m.distance(&p, &q).value, expected, epsilon = 1e-12);
}

#[test]
fn christoffel_closed_forms_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in [Manifold::cusp(), Manifold::tube()] {
        for _ in 0..20 {
            let p = random_point(&m, &mut rng);
            let u = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let w = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let a = m.christoffel(&p, &u, &w);
            let b = m.christoffel_fd(&p, &u, &w);
            assert!((&a - &b).amax() < 1e-6 * (1.0 + a.amax()), "{} {a} {b}", m.name());
        }
    }
}

#[test]
fn closed_form_exp_matches_ode() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in [Manifold::sphere(), Manifold::hyperbolic(), Manifold::euclidean(2)] {
        for _ in 0..20 {
            let p = random_point(&m, &mut rng);
            let v = m.random_unit(&p, &mut rng).scaled(rng.random_range(0.0..0.9) * m.working_radius().min(3.0));
            let a = m.exp(&p, &v).unwrap();
            let b = m.exp_ode(&p, &v).unwrap();
            assert!((&a.coords - &b.coords).amax() < 1e-6, "{}", m.name());
        }
    }
}

#[test]
fn exp_log_round_trip_and_transport_isometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in catalog() {
        for _ in 0..15 {
            let p = random_point(&m, &mut rng);
            let len = rng.random_range(0.0..0.9) * m.working_radius_at(&p);
            let v = m.random_unit(&p, &mut rng).scaled(len);
            let q = m.exp(&p, &v).unwrap();
            let back = m.log(&p, &q).unwrap();
            assert!(m.norm_raw(&p, &(&back.components - &v.components)) < 1e-6, "{}", m.name());
            assert!((m.distance(&p, &q).value - len).abs() < 1e-6, "{}", m.name());
            let w = m.random_unit(&p, &mut rng).scaled(rng.random_range(0.1..2.0));
            let moved = m.parallel_transport(&w, &q).unwrap();
            assert!((m.norm(&moved) - m.norm(&w)).abs() < 1e-8, "{}", m.name());
        }
    }
}

#[test]
fn distance_partials_are_antisymmetric_unit_covectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for m in catalog() {
        for _ in 0..5 {
            let x = random_point(&m, &mut rng);
            let len = rng.random_range(0.2..0.6) * m.working_radius_at(&x);
            let y = m.exp(&x, &m.random_unit(&x, &mut rng).scaled(len)).unwrap();
            let (dx, dy) = m.distance_partials(&x, &y).unwrap();
            assert!((m.conorm(&dx) - 1.0).abs() < 1e-6, "{}", m.name());
            assert!((m.conorm(&dy) - 1.0).abs() < 1e-6, "{}", m.name());
            assert!(m.covector_gap(&dx.scaled(-1.0), &dy).unwrap() < 1e-5, "{}", m.name());
        }
    }
    let m = Manifold::euclidean(2);
    let x = Point::from_slice(&[1.0, 1.0]);
    assert!(m.distance_partials(&x, &x).is_err());
}

#[test]
fn normal_chart_is_identity_to_first_order() {
    let m = Manifold::sphere();
    let p = Point::from_slice(&[0.6, 0.0, 0.8]);
    let chart = m.normal_chart(&p);
    assert_abs_diff_eq!(chart.to_chart(&m, &p).unwrap().norm(), 0.0, epsilon = 1e-15);
    let h = 1e-6;
    for i in 0..2 {
        let mut y = Vector::zeros(2);
        y[i] = h;
        let a = chart.from_chart(&m, &y).unwrap();
        let b = chart.from_chart(&m, &(-&y)).unwrap();
        let d = (&a.coords - &b.coords) / (2.0 * h);
        assert!((d - &chart.frame[i]).norm() < 1e-5);
    }
    let eps = chart.lipschitz_epsilon(&m, 50, 1).unwrap();
    assert!(eps > 0.0 && eps < 0.5);
}
