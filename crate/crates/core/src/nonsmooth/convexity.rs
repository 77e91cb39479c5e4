use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::estimate::CovectorGrid;
use super::probe::{Probe, ProbeSchedule};
use crate::discretize::{graph_distance, Graph};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::manifold::{Geodesic, Manifold, Point, Vector};

/// Slack in the convexity inequality.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Slack in the Lipschitz conclusion `|f(p) - f(q)| <= K d(p, q)`.
pub const LIPSCHITZ_TOL: f64 = 1e-9;
/// A certified subgradient must beat `K` by this much to count as a
/// hypothesis violation.
pub const HYPOTHESIS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityWitness {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    pub t1: f64,
    pub t2: f64,
    pub lambda: f64,
    /// `f(mid) - (lambda f(t1) + (1 - lambda) f(t2))`.
    pub excess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub pass: bool,
    pub geodesics: usize,
    pub witness: Option<ConvexityWitness>,
}

/// Samples geodesic segments `t -> exp_b(t u)`, `|t| <= 0.45 r_M(b)`, through
/// the given base points in random unit directions and tests the convexity
/// inequality for every pair of the `n_points` nodes and every `lambda`.
pub fn convexity_check(m: &Manifold, f: &dyn Fn(&Point) -> f64, bases: &[Point], n_geodesics: usize, n_points: usize, lambdas: &[f64], seed: u64) -> Result<ConvexityReport> {
    if bases.is_empty() || n_points < 2 {
        return Err(Error::InvalidInput("need base points and at least two nodes per geodesic".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_geodesics {
        let b = &bases[k % bases.len()];
        let u = m.random_unit(b, &mut rng);
        let half = 0.45 * m.working_radius_at(b);
        let at = |t: f64| -> Result<f64> { Ok(f(&m.exp(b, &u.scaled(t))?)) };
        let ts: Vec<f64> = (0..n_points).map(|i| -half + 2.0 * half * i as f64 / (n_points - 1) as f64).collect();
        let vals = ts.iter().map(|&t| at(t)).collect::<Result<Vec<f64>>>()?;
        for i in 0..n_points {
            for j in i + 1..n_points {
                for &l in lambdas {
                    let mid = at(l * ts[i] + (1.0 - l) * ts[j])?;
                    let chord = l * vals[i] + (1.0 - l) * vals[j];
                    if mid > chord + CONVEXITY_TOL {
                        let witness = ConvexityWitness { base: b.to_vec(), direction: u.components.iter().copied().collect(), t1: ts[i], t2: ts[j], lambda: l, excess: mid - chord };
                        return Ok(ConvexityReport { pass: false, geodesics: k + 1, witness: Some(witness) });
                    }
                }
            }
        }
    }
    Ok(ConvexityReport { pass: true, geodesics: n_geodesics, witness: None })
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DevilleOutcome {
    Pass,
    /// A certified subgradient of norm above `K`.
    HypothesisViolated { vertex: usize, norm: f64 },
    /// A pair with `|f(i) - f(j)| > K d_graph(i, j)`.
    ConclusionViolated { i: usize, j: usize, quotient: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct DevilleReport {
    pub outcome: DevilleOutcome,
    pub hypothesis: Option<DevilleOutcome>,
    pub conclusion: Option<DevilleOutcome>,
    pub probes: usize,
}

/// Two-sided audit of the mean value inequality `|f(p) - f(q)| <= K d(p, q)`.
///
/// At `n_probes` random vertices the finite-difference gradient is tested
/// as a subgradient; a consistent one with norm above `K` breaks the
/// hypothesis. From the same vertices every pair is checked against the
/// graph distance. A conclusion violation takes priority in `outcome`.
pub fn deville_lipschitz_check(graph: &Graph, f: &ScalarField, k: f64, n_probes: usize, seed: u64) -> Result<DevilleReport> {
    use rand::seq::index::sample;
    let m = &graph.manifold;
    let n = graph.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<usize> = sample(&mut rng, n, n_probes.min(n)).into_iter().collect();
    let values = f.sample(&graph.points);
    let eval = |q: &Point| f.eval(q);
    let mut hypothesis = None;
    let mut conclusion = None;
    for &s in &probes {
        let p = &graph.points[s];
        if hypothesis.is_none() && values.values[s].is_finite() {
            let g = m.gradient_fd(eval, p, 1e-6);
            let norm = m.conorm(&g);
            if norm.is_finite() && norm > k + HYPOTHESIS_TOL {
                let schedule = local_schedule(graph, s);
                if Probe::new(m, &eval, p, &schedule)?.verdict_for(&g).is_consistent() {
                    hypothesis = Some(DevilleOutcome::HypothesisViolated { vertex: s, norm });
                }
            }
        }
        if conclusion.is_none() {
            let d = graph_distance(graph, &[s])?;
            for j in 0..n {
                let diff = (values.values[s] - values.values[j]).abs();
                if j != s && diff > k * d.values[j] + LIPSCHITZ_TOL {
                    conclusion = Some(DevilleOutcome::ConclusionViolated { i: s.min(j), j: s.max(j), quotient: diff / d.values[j] });
                    break;
                }
            }
        }
    }
    let outcome = conclusion.clone().or_else(|| hypothesis.clone()).unwrap_or(DevilleOutcome::Pass);
    Ok(DevilleReport { outcome, hypothesis, conclusion, probes: probes.len() })
}

/// Schedule at a vertex: eight halvings from half its shortest incident edge.
pub fn local_schedule(graph: &Graph, i: usize) -> ProbeSchedule {
    let m = &graph.manifold;
    let p = &graph.points[i];
    let shortest = graph.neighbors[i].iter().map(|&(_, l)| l).fold(f64::INFINITY, f64::min);
    let start = (0.5 * shortest).min(0.45 * m.working_radius_at(p));
    ProbeSchedule::geometric(start, 8, 0.5, m.dim())
}

/// Consistent covectors at `p` (frame coordinates): the finite-difference
/// gradient when it passes, otherwise the consistent members of covector
/// grids about that gradient and about zero. With `all` the grids are
/// scanned even when the gradient passes.
fn consistent_candidates(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, schedule: &ProbeSchedule, all: bool) -> Result<Vec<Vector>> {
    let probe = Probe::new(m, f, p, schedule)?;
    let g = probe.chart.covector_coords(&m.gradient_fd(f, p, 1e-6));
    let mut out = Vec::new();
    let finite = g.iter().all(|x| x.is_finite());
    if finite && probe.verdict(&g).is_consistent() {
        out.push(g.clone());
        if !all {
            return Ok(out);
        }
    }
    let grid = CovectorGrid::default_for(m.dim());
    let mut centers = vec![Vector::zeros(m.dim())];
    if finite && g.norm() > 0.0 {
        centers.insert(0, g);
    }
    for c in centers {
        for a in grid.points(&c) {
            if probe.verdict(&a).is_consistent() {
                out.push(a);
                if !all {
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GodefroyStatus {
    Pass,
    Fail,
    /// Some sample had no consistent sub- or supergradient.
    HypothesisGap,
}

#[derive(Clone, Debug, Serialize)]
pub struct GodefroyReport {
    pub status: GodefroyStatus,
    /// Measure of `f(gamma(I))`.
    pub measure: f64,
    /// Trapezoid integral of the minimal consistent gradient norm.
    pub integral: f64,
    pub gaps: Vec<usize>,
}

/// Mean value inequality `mu(f(gamma(I))) <= int Phi(gamma(t)) dt` along a
/// geodesic, with `Phi` the smallest norm among consistent sub- and
/// supergradients found at each of `n_samples` nodes.
pub fn godefroy_check(m: &Manifold, f: &dyn Fn(&Point) -> f64, gamma: &Geodesic, n_samples: usize, tol: f64) -> Result<GodefroyReport> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let ts: Vec<f64> = (0..n_samples).map(|i| gamma.length * i as f64 / (n_samples - 1) as f64).collect();
    let pts = ts.iter().map(|&t| m.geodesic_eval(gamma, t).map(|(x, _)| x)).collect::<Result<Vec<Point>>>()?;
    let vals: Vec<f64> = pts.iter().map(f).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("f is not finite along the path".into()));
    }
    let mut intervals: Vec<(f64, f64)> = vals.windows(2).map(|w| (w[0].min(w[1]), w[0].max(w[1]))).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut measure = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        cur = match cur {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                measure += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a, b)) = cur {
        measure += b - a;
    }
    let neg = |q: &Point| -f(q);
    let mut phi = Vec::with_capacity(n_samples);
    let mut gaps = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let s = ProbeSchedule::default_for(m, p);
        let mut cands = consistent_candidates(m, f, p, &s, true)?;
        cands.extend(consistent_candidates(m, &neg, p, &s, true)?);
        match cands.iter().map(|a| a.norm()).reduce(f64::min) {
            Some(v) => phi.push(v),
            None => {
                gaps.push(i);
                phi.push(0.0);
            }
        }
    }
    let integral: f64 = ts.windows(2).zip(phi.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum();
    let status = if !gaps.is_empty() {
        GodefroyStatus::HypothesisGap
    } else if measure <= integral + tol {
        GodefroyStatus::Pass
    } else {
        GodefroyStatus::Fail
    };
    Ok(GodefroyReport { status, measure, integral, gaps })
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub fraction: f64,
    pub checked: usize,
    /// Domain vertices whose estimate came out empty.
    pub empty: Vec<usize>,
}

/// Fraction of finite vertices with a nonempty consistent `D^-` estimate,
/// each probed on its [`local_schedule`].
pub fn density_probe(graph: &Graph, f: &ScalarField) -> Result<DensityReport> {
    let m = &graph.manifold;
    let eval = |q: &Point| f.eval(q);
    let dom: Vec<usize> = (0..graph.len()).filter(|&i| f.eval(&graph.points[i]).is_finite()).collect();
    if dom.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut empty = Vec::new();
    for &i in &dom {
        if consistent_candidates(m, &eval, &graph.points[i], &local_schedule(graph, i), false)?.is_empty() {
            empty.push(i);
        }
    }
    Ok(DensityReport { fraction: (dom.len() - empty.len()) as f64 / dom.len() as f64, checked: dom.len(), empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_graph, grid, sample};
    use crate::manifold::TangentVector;

    #[test]
    fn linear_is_convex() {
        let m = Manifold::euclidean(2);
        let f = |p: &Point| 2.0 * p.coords[0] - p.coords[1];
        let bases = [Point::from_slice(&[0.2, 0.3])];
        assert!(convexity_check(&m, &f, &bases, 5, 9, &[0.25, 0.5, 0.75], 1).unwrap().pass);
    }

    #[test]
    fn squared_distance_on_sphere_fails_far_away() {
        let m = Manifold::sphere();
        let p0 = Point::from_slice(&[0.0, 0.0, 1.0]);
        let f = |p: &Point| m.distance(&p0, p).value.powi(2);
        let far = [Point::from_slice(&[0.0, 0.0, -1.0])];
        let r = convexity_check(&m, &f, &far, 3, 7, &[0.5], 2).unwrap();
        assert!(!r.pass);
        assert!(r.witness.unwrap().excess > 0.0);
    }

    #[test]
    fn deville_cases() {
        let g = build_graph(&sample(&Manifold::sphere(), 400, 5).unwrap(), 8).unwrap();
        let z = ScalarField::new(|p: &Point| p.coords[2]);
        assert!(matches!(deville_lipschitz_check(&g, &z, 1.0, 20, 1).unwrap().outcome, DevilleOutcome::Pass));
        let c = ScalarField::new(|_: &Point| 3.0);
        assert!(matches!(deville_lipschitz_check(&g, &c, 0.0, 20, 1).unwrap().outcome, DevilleOutcome::Pass));
        let m = g.manifold.clone();
        let p0 = Point::from_slice(&[0.0, 0.0, 1.0]);
        let twice = ScalarField::new(move |p: &Point| 2.0 * m.distance(&p0, p).value);
        let r = deville_lipschitz_check(&g, &twice, 1.0, 20, 1).unwrap();
        assert!(matches!(r.outcome, DevilleOutcome::ConclusionViolated { .. }));
        assert!(matches!(r.hypothesis, Some(DevilleOutcome::HypothesisViolated { .. })));
    }

    #[test]
    fn godefroy_identity_and_constant() {
        let m = Manifold::euclidean(1);
        let o = Point::from_slice(&[0.0]);
        let gamma = m.geodesic(&o, &TangentVector::new(&o, Vector::from_element(1, 1.0)), 1.0).unwrap();
        let r = godefroy_check(&m, &|p: &Point| p.coords[0], &gamma, 11, 1e-6).unwrap();
        assert!(matches!(r.status, GodefroyStatus::Pass));
        assert!((r.measure - 1.0).abs() < 1e-12 && (r.integral - 1.0).abs() < 1e-6);
        let c = godefroy_check(&m, &|_: &Point| 4.0, &gamma, 11, 1e-6).unwrap();
        assert_eq!(c.measure, 0.0);
    }

    #[test]
    fn density_of_negative_abs() {
        let m = Manifold::euclidean(1).with_bounds(vec![(-1.0, 1.0)]).unwrap();
        let g = build_graph(&grid(&m, 41).unwrap(), 2).unwrap();
        let r = density_probe(&g, &ScalarField::new(|p: &Point| -p.coords[0].abs())).unwrap();
        assert_eq!(r.empty, vec![20]);
        assert!((r.fraction - 40.0 / 41.0).abs() < 1e-15);
    }
}
