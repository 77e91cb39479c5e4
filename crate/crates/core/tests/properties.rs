//! Property tests for the geometric, discrete and solver invariants.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhj::checks::{admissible_partner, catalog, fixture_point, open_square};
use rhj::discretize::{build_graph, graph_distance, grid, partition, sample};
use rhj::field::{ext_add, ext_sub, DiscreteField, ScalarField};
use rhj::hj::{eikonal_solve, local_candidates, local_solve, stationary_solve, Hamiltonian, Profile, ScreenParams, SolveOptions};
use rhj::manifold::{CotangentVector, Manifold, Point, TangentVector, Vector};
use rhj::nonsmooth::{ekeland_search, test_subgradient, test_supergradient, verify_ekeland, ProbeSchedule};

fn manifold_index() -> impl Strategy<Value = usize> {
    0..catalog().len()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn exp_log_round_trip(mi in manifold_index(), seed in any::<u64>(), t in 0.0..0.9f64) {
        let m = &catalog()[mi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = fixture_point(m, &mut rng);
        let v = m.random_unit(&p, &mut rng).scaled(t * m.working_radius_at(&p));
        let back = m.log(&p, &m.exp(&p, &v).unwrap()).unwrap();
        prop_assert!(m.norm(&TangentVector::new(&p, &back.components - &v.components)) <= 1e-6);
    }

    #[test]
    fn geodesics_realize_distance(mi in manifold_index(), seed in any::<u64>(), t in 0.01..0.9f64) {
        let m = &catalog()[mi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = fixture_point(m, &mut rng);
        let len = t * m.working_radius_at(&p);
        let q = m.exp(&p, &m.random_unit(&p, &mut rng).scaled(len)).unwrap();
        prop_assert!((m.distance(&p, &q).value - len).abs() <= 1e-6);
    }

    #[test]
    fn transport_is_an_isometry_with_inverse(mi in manifold_index(), seed in any::<u64>()) {
        let m = &catalog()[mi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = fixture_point(m, &mut rng);
        let q = admissible_partner(m, &p, 0.0, 0.9, &mut rng).unwrap();
        let w = m.random_unit(&p, &mut rng).scaled(rng.random_range(0.1..2.0));
        let moved = m.parallel_transport(&w, &q).unwrap();
        prop_assert!((m.norm(&moved) - m.norm(&w)).abs() <= 1e-8);
        let xi = m.lower(&w);
        let round = m.covector_transport(&m.covector_transport(&xi, &q).unwrap(), &p).unwrap();
        prop_assert!(m.conorm(&CotangentVector::new(&p, &round.components - &xi.components)) <= 1e-8);
    }

    #[test]
    fn distance_partials_are_antisymmetric(mi in manifold_index(), seed in any::<u64>()) {
        let m = &catalog()[mi];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = fixture_point(m, &mut rng);
        let y = admissible_partner(m, &x, 0.05, 0.9, &mut rng).unwrap();
        let (dx, dy) = m.distance_partials(&x, &y).unwrap();
        prop_assert!(m.covector_gap(&dx.scaled(-1.0), &dy).unwrap() <= 1e-5);
    }

    /// `z` on the sphere is 1-Lipschitz: increments never beat the distance,
    /// and finite-difference gradients stay within `1 + 1e-3`.
    #[test]
    fn mean_value_inequality_on_sphere(seed in any::<u64>()) {
        let m = Manifold::sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = fixture_point(&m, &mut rng);
        let q = fixture_point(&m, &mut rng);
        prop_assert!((p.coords[2] - q.coords[2]).abs() <= m.distance(&p, &q).value * (1.0 + 1e-6));
        let g = m.gradient_fd(|x: &Point| x.coords[2], &p, 1e-6);
        prop_assert!(m.conorm(&g) <= 1.0 + 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn graph_distance_dominates_manifold_distance(seed in any::<u64>(), src in 0usize..300) {
        let m = Manifold::sphere();
        let g = build_graph(&sample(&m, 300, seed).unwrap(), 8).unwrap();
        let d = graph_distance(&g, &[src]).unwrap();
        for (y, dg) in d.values.iter().enumerate() {
            prop_assert!(*dg >= m.distance(&g.points[src], &g.points[y]).value - 1e-9);
        }
        let r = m.working_radius();
        prop_assert!(g.edges.iter().all(|e| e.length < r));
    }

    #[test]
    fn eikonal_is_bit_identical_to_graph_distance(seed in any::<u64>()) {
        let g = build_graph(&sample(&Manifold::euclidean(2).with_bounds(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap(), 400, seed).unwrap(), 8).unwrap();
        let band = partition(&g, |p| p.coords.iter().all(|&x| x > 0.1 && x < 0.9)).unwrap();
        let u = eikonal_solve(&g, &band).unwrap();
        let d = graph_distance(&g, &band.boundary).unwrap();
        prop_assert!(u.values.iter().zip(&d.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    /// Discrete Ekeland conclusions hold exactly, checked by exhaustion.
    #[test]
    fn ekeland_conclusions_hold(seed in any::<u64>(), lambda in 0.05..4.0f64, pad in 0.0..0.5f64) {
        let g = build_graph(&sample(&Manifold::sphere(), 250, seed).unwrap(), 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let f = DiscreteField::new(g.points.iter().map(|p| p.coords[0] * p.coords[1] + 0.2 * rng.random_range(-1.0..1.0)).collect());
        let x0 = rng.random_range(0..g.len());
        let eps = f.max() - f.values[x0] + pad;
        let z = ekeland_search(&g, &f, x0, eps, lambda).unwrap().z;
        let check = verify_ekeland(&g, &f, x0, eps, lambda, z).unwrap();
        prop_assert!(check.holds(), "{:?}", check);
    }

    #[test]
    fn local_solve_is_monotone(seed in any::<u64>(), k in 0usize..4, bump in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Profile = Arc::new(|s| s + 0.3 * s * s);
        let nbrs: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.05..0.3))).collect();
        let f = rng.random_range(-1.0..2.0);
        let w = local_solve(&h, f, &nbrs);
        let mut raised = nbrs.clone();
        raised[k].0 += bump;
        prop_assert!(local_solve(&h, f, &raised) >= w);
    }

    #[test]
    fn stationary_output_is_bounded(seed in any::<u64>(), c in 0.1..3.0f64) {
        let m = Manifold::sphere();
        let g = build_graph(&sample(&m, 200, seed).unwrap(), 8).unwrap();
        let f = ScalarField::new(move |p: &Point| c * (p.coords[0] + p.coords[2]));
        let a = 0.5;
        let ham = Hamiltonian::norm_based(&m, Arc::new(move |s| s * s + a), f.clone(), a);
        let (u, _) = stationary_solve(&ham, &g, SolveOptions::default()).unwrap();
        let fmax = f.sample(&g.points).sup_norm();
        prop_assert!(u.sup_norm() <= fmax + a + 1e-12);
    }

    /// `D^+ f = -D^-(-f)`: both tests return the same status.
    #[test]
    fn sub_and_super_verdicts_mirror(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let m = Manifold::euclidean(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Point::from_slice(&[rng.random_range(0.5..2.5), rng.random_range(0.5..2.5)]);
        let f = |q: &Point| (q.coords[0] - 1.5).abs() + q.coords[1] * q.coords[1];
        let neg = |q: &Point| -f(q);
        let zeta = CotangentVector::new(&p, Vector::from_column_slice(&[a, b]));
        let s = ProbeSchedule::default_for(&m, &p);
        let sub = test_subgradient(&m, &f, &p, &zeta, &s).unwrap();
        let sup = test_supergradient(&m, &neg, &p, &zeta.scaled(-1.0), &s).unwrap();
        prop_assert_eq!(sub.status, sup.status);
    }

    /// Deeper schedules never turn a certified violation into consistency.
    #[test]
    fn deeper_probes_keep_violations(a in -2.0..2.0f64, extra in 1usize..6) {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.0]);
        let f = |q: &Point| q.coords[0].abs();
        let zeta = CotangentVector::new(&p, Vector::from_element(1, a));
        let s = ProbeSchedule::default_for(&m, &p);
        let shallow = test_subgradient(&m, &f, &p, &zeta, &s).unwrap();
        let deep = test_subgradient(&m, &f, &p, &zeta, &s.deepened(extra)).unwrap();
        prop_assert!(!(shallow.is_violated() && deep.is_consistent()));
    }

    /// At the exhaustive graph argmin of a distance field, `0` passes the
    /// subgradient test.
    #[test]
    fn zero_is_a_subgradient_at_minima(seed in any::<u64>(), c in 0usize..150) {
        let m = Manifold::sphere();
        let g = build_graph(&sample(&m, 150, seed).unwrap(), 8).unwrap();
        let field = ScalarField::distance_from(&m, &g.points[c]);
        let values = field.sample(&g.points);
        let x = values.argmin().unwrap();
        prop_assert_eq!(x, c);
        let f = |q: &Point| field.eval(q);
        let s = ProbeSchedule::default_for(&m, &g.points[x]);
        prop_assert!(test_subgradient(&m, &f, &g.points[x], &CotangentVector::zero(&m, &g.points[x]), &s).unwrap().is_consistent());
    }

    #[test]
    fn extended_reals(a in -1e6..1e6f64) {
        prop_assert_eq!(ext_add(a, f64::INFINITY), f64::INFINITY);
        prop_assert_eq!(ext_add(f64::INFINITY, a), f64::INFINITY);
        prop_assert_eq!(ext_sub(f64::INFINITY, a).unwrap(), f64::INFINITY);
        prop_assert!(ext_sub(f64::INFINITY, f64::INFINITY).is_err());
    }
}

proptest! {
    // graph construction on the curved surfaces integrates geodesics
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn graphs_are_deterministic(mi in manifold_index(), seed in any::<u64>()) {
        let m = &catalog()[mi];
        let build = || sample(m, 60, seed).and_then(|c| build_graph(&c, 6));
        match (build(), build()) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.points, &b.points);
                prop_assert_eq!(&a.edges, &b.edges);
                prop_assert_eq!(a.h.to_bits(), b.h.to_bits());
            }
            (a, b) => prop_assert_eq!(a.err().map(|e| e.to_string()), b.err().map(|e| e.to_string())),
        }
    }
}

/// `g = 1` on `[0, 1]` and `0` elsewhere fails lower semicontinuity at the
/// ends, so no covector survives there; the lsc step `f = 1 - g` keeps
/// the nonnegative ones at `x = 1`.
#[test]
fn subdifferentiable_points_are_lsc() {
    let m = Manifold::euclidean(1).with_bounds(vec![(-3.0, 3.0)]).unwrap();
    let g = |q: &Point| if (0.0..=1.0).contains(&q.coords[0]) { 1.0 } else { 0.0 };
    let f = |q: &Point| 1.0 - g(q);
    for x in [0.0, 1.0] {
        let p = Point::from_slice(&[x]);
        let s = ProbeSchedule::default_for(&m, &p);
        for i in 0..41 {
            let zeta = CotangentVector::new(&p, Vector::from_element(1, -2.0 + 0.1 * i as f64));
            assert!(test_subgradient(&m, &g, &p, &zeta, &s).unwrap().is_violated(), "x={x} zeta={}", zeta.components[0]);
        }
    }
    let p = Point::from_slice(&[1.0]);
    let s = ProbeSchedule::default_for(&m, &p);
    for a in [0.0, 0.5, 2.0] {
        assert!(test_subgradient(&m, &f, &p, &CotangentVector::new(&p, Vector::from_element(1, a)), &s).unwrap().is_consistent());
    }
}

/// On the flat square the distance to the rim has no classical solution:
/// its diagonal ridge vertices carry superdifferential candidates spread
/// wider than 0.5.
#[test]
fn eikonal_ridge_has_wide_superdifferential() {
    let n = 41;
    let g = build_graph(&grid(&Manifold::euclidean(2), n).unwrap(), 8).unwrap();
    let band = partition(&g, open_square).unwrap();
    let u = eikonal_solve(&g, &band).unwrap();
    let mut checked = 0;
    for i in 8..(n - 8) {
        if i == n / 2 {
            continue;
        }
        let v = i * n + i;
        let c = local_candidates(&g, &u.values, v, ScreenParams::default()).unwrap();
        let diam = c.upper.iter().flat_map(|(a, _)| c.upper.iter().map(move |(b, _)| (a - b).norm())).fold(0.0, f64::max);
        assert!(diam > 0.5, "vertex {v} at {:?}: diameter {diam}", g.points[v].to_vec());
        checked += 1;
    }
    assert!(checked > 0);
}
