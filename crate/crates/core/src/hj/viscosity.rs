use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Hamiltonian;
use crate::discretize::{BoundarySet, Graph};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::manifold::{CotangentVector, Matrix, NormalChart, Vector};

/// Windows whose unit directions have a smallest singular value below this
/// are too one-sided to fit.
const MIN_WINDOW_SPREAD: f64 = 0.5;
/// Fits skip neighbors closer than this fraction of the median neighbor
/// offset; a grid field carries no slope information below graph scale.
const MIN_FIT_SCALE: f64 = 0.25;

/// Touching slack `(margin + curvature |y|) |y|` at a neighbor offset `y`;
/// candidates are screened against the vertices within `rings` hops.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScreenParams {
    pub margin: f64,
    pub curvature: f64,
    pub rings: usize,
}

impl Default for ScreenParams {
    fn default() -> Self {
        Self { margin: 1e-6, curvature: 0.5, rings: 2 }
    }
}

/// Vertices `1..=rings` hops from `i`, sorted.
fn ring(graph: &Graph, i: usize, rings: usize) -> Vec<usize> {
    let mut seen = vec![i];
    let mut frontier = vec![i];
    for _ in 0..rings {
        let mut next = Vec::new();
        for &v in &frontier {
            for &(j, _) in &graph.neighbors[v] {
                if !seen.contains(&j) {
                    seen.push(j);
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    seen.retain(|&j| j != i);
    seen.sort_unstable();
    seen
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSource {
    Slope { neighbor: usize },
    Fit { neighbors: Vec<usize> },
    LeastSquares,
}

/// Screened candidate covectors at a vertex, in normal-chart frame
/// coordinates.
#[derive(Clone, Debug)]
pub struct Candidates {
    pub chart: NormalChart,
    pub lower: Vec<(Vector, CandidateSource)>,
    pub upper: Vec<(Vector, CandidateSource)>,
}

impl Candidates {
    /// Least-squares member of a side if it survived, else its first member.
    pub fn preferred(side: &[(Vector, CandidateSource)]) -> Option<&Vector> {
        side.iter().find(|(_, s)| *s == CandidateSource::LeastSquares).or(side.first()).map(|(a, _)| a)
    }
}

/// Candidate covectors of the grid field `u` at vertex `i`.
pub fn local_candidates(graph: &Graph, u: &[f64], i: usize, screen: ScreenParams) -> Result<Candidates> {
    let m = &graph.manifold;
    let dim = m.dim();
    let nb = &graph.neighbors[i];
    if nb.len() < dim + 1 {
        return Err(Error::Precondition(format!("vertex {i} has {} neighbors, needs at least {}", nb.len(), dim + 1)));
    }
    let chart = m.normal_chart(&graph.points[i]);
    let mut ys = Vec::with_capacity(nb.len());
    for &(j, _) in nb {
        ys.push(chart.to_chart(m, &graph.points[j])?);
    }
    let du: Vec<f64> = nb.iter().map(|&(j, _)| u[j] - u[i]).collect();
    let units: Vec<Vector> = ys.iter().map(|y| y / y.norm()).collect();

    let mut raw: Vec<(Vector, CandidateSource)> = Vec::new();
    for (k, &(j, _)) in nb.iter().enumerate() {
        raw.push((&units[k] * (du[k] / ys[k].norm()), CandidateSource::Slope { neighbor: j }));
    }
    // least-squares fits over angular windows: each usable neighbor with
    // the 2 dim usable neighbors nearest to it in direction
    let mut lens: Vec<f64> = ys.iter().map(|y| y.norm()).collect();
    lens.sort_by(f64::total_cmp);
    let floor = MIN_FIT_SCALE * lens[lens.len() / 2];
    let usable: Vec<usize> = (0..nb.len()).filter(|&k| ys[k].norm() >= floor).collect();
    let width = (2 * dim + 1).min(usable.len());
    let mut windows: Vec<Vec<usize>> = Vec::new();
    if dim > 1 {
        for &k in &usable {
            let mut w = usable.clone();
            w.sort_by(|&p, &q| units[k].dot(&units[q]).total_cmp(&units[k].dot(&units[p])).then(p.cmp(&q)));
            w.truncate(width);
            w.sort_unstable();
            if !windows.contains(&w) {
                windows.push(w);
            }
        }
    }
    for w in windows {
        let dirs = Matrix::from_fn(w.len(), dim, |r, c| units[w[r]][c]);
        if dirs.singular_values().min() < MIN_WINDOW_SPREAD {
            continue;
        }
        let a_mat = Matrix::from_fn(w.len(), dim, |r, c| ys[w[r]][c]);
        let rhs = Vector::from_iterator(w.len(), w.iter().map(|&k| du[k]));
        if let Ok(a) = a_mat.svd(true, true).solve(&rhs, 1e-12) {
            raw.push((a, CandidateSource::Fit { neighbors: w.iter().map(|&k| nb[k].0).collect() }));
        }
    }
    let a_mat = Matrix::from_fn(nb.len(), dim, |r, c| ys[r][c]);
    let rhs = Vector::from_column_slice(&du);
    if let Ok(a) = a_mat.clone().svd(true, true).solve(&rhs, 1e-12) {
        raw.push((a, CandidateSource::LeastSquares));
    }

    // one-ring offsets plus whatever of the outer rings the chart reaches
    let (mut zs, mut dz) = (ys.clone(), du.clone());
    if screen.rings > 1 {
        for j in ring(graph, i, screen.rings) {
            if nb.binary_search_by_key(&j, |&(k, _)| k).is_err() {
                if let Ok(y) = chart.to_chart(m, &graph.points[j]) {
                    zs.push(y);
                    dz.push(u[j] - u[i]);
                }
            }
        }
    }
    let slack: Vec<f64> = zs.iter().map(|y| (screen.margin + screen.curvature * y.norm()) * y.norm()).collect();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (a, src) in raw {
        if !a.iter().all(|x| x.is_finite()) {
            continue;
        }
        let gaps: Vec<f64> = zs.iter().zip(&dz).map(|(y, d)| d - a.dot(y)).collect();
        if gaps.iter().zip(&slack).all(|(g, s)| *g >= -s) {
            lower.push((a.clone(), src.clone()));
        }
        if gaps.iter().zip(&slack).all(|(g, s)| *g <= *s) {
            upper.push((a, src));
        }
    }
    Ok(Candidates { chart, lower, upper })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationForm {
    /// `u + F(x, du) = 0`.
    Stationary,
    /// `F(x, du) = 0`, no zeroth-order term.
    Eikonal,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViscosityReport {
    pub form: EquationForm,
    /// Vertices checked.
    pub checked: Vec<usize>,
    /// `max(0, u + F)` over upper candidates, per checked vertex.
    pub sub_residual: Vec<f64>,
    /// `max(0, -(u + F))` over lower candidates, per checked vertex.
    pub super_residual: Vec<f64>,
    pub max_sub: f64,
    pub max_super: f64,
    pub worst_sub: Option<(usize, CandidateSource)>,
    pub worst_super: Option<(usize, CandidateSource)>,
}

impl ViscosityReport {
    pub fn max_residual(&self) -> f64 {
        self.max_sub.max(self.max_super)
    }

    pub fn is_subsolution(&self, tol: f64) -> bool {
        self.max_sub <= tol
    }

    pub fn is_supersolution(&self, tol: f64) -> bool {
        self.max_super <= tol
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Viscosity residuals of the grid field `u` at the interior vertices of
/// `region` (every vertex when `None`).
pub fn verify_viscosity(u: &DiscreteField, f: &Hamiltonian, graph: &Graph, region: Option<&BoundarySet>, form: EquationForm, screen: ScreenParams) -> Result<ViscosityReport> {
    if u.len() != graph.len() {
        return Err(Error::InvalidInput("field length differs from vertex count".into()));
    }
    let checked: Vec<usize> = match region {
        Some(r) => r.interior.clone(),
        None => (0..graph.len()).collect(),
    };
    if let Some(&i) = checked.iter().find(|&&i| !u.values[i].is_finite()) {
        return Err(Error::Precondition(format!("u is not finite at vertex {i}")));
    }
    let m = &graph.manifold;
    let zeroth = |i: usize| if form == EquationForm::Stationary { u.values[i] } else { 0.0 };
    type Row = (f64, f64, Option<CandidateSource>, Option<CandidateSource>);
    let rows: Vec<Row> = checked
        .par_iter()
        .map(|&i| -> Result<Row> {
            let c = local_candidates(graph, &u.values, i, screen)?;
            let x = &graph.points[i];
            let val = |a: &Vector| zeroth(i) + f.eval(x, &c.chart.covector(m, a));
            let mut sub = (0.0, None);
            for (a, s) in &c.upper {
                let r = val(a);
                if r > sub.0 {
                    sub = (r, Some(s.clone()));
                }
            }
            let mut sup = (0.0, None);
            for (a, s) in &c.lower {
                let r = -val(a);
                if r > sup.0 {
                    sup = (r, Some(s.clone()));
                }
            }
            Ok((sub.0, sup.0, sub.1, sup.1))
        })
        .collect::<Result<Vec<Row>>>()?;
    let mut report = ViscosityReport { form, checked: checked.clone(), sub_residual: vec![], super_residual: vec![], max_sub: 0.0, max_super: 0.0, worst_sub: None, worst_super: None };
    for (k, (sub, sup, ssrc, psrc)) in rows.into_iter().enumerate() {
        if sub > report.max_sub {
            report.max_sub = sub;
            report.worst_sub = ssrc.map(|s| (checked[k], s));
        }
        if sup > report.max_super {
            report.max_super = sup;
            report.worst_super = psrc.map(|s| (checked[k], s));
        }
        report.sub_residual.push(sub);
        report.super_residual.push(sup);
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub omega: f64,
    pub pairs: usize,
}

/// Empirical modulus `omega(delta) = max |F(x, zeta) - F(y, xi)|` over
/// sampled pairs with `d(x, y) <= delta` and `|zeta - L_{yx} xi| <= delta`,
/// covector norms at most `cap`. Entries with `delta >= r_M` are skipped.
pub fn intrinsic_modulus_probe(f: &Hamiltonian, graph: &Graph, deltas: &[f64], cap: f64, samples: usize, seed: u64) -> Result<Vec<ModulusRow>> {
    let m = &graph.manifold;
    let dmax = deltas.iter().copied().filter(|&d| d < m.working_radius()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (distance, gap, |dF|)
    let mut table: Vec<(f64, f64, f64)> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let i = rng.random_range(0..graph.len());
        let x = &graph.points[i];
        let j = if graph.neighbors[i].is_empty() || rng.random_bool(0.25) { i } else { graph.neighbors[i][rng.random_range(0..graph.neighbors[i].len())].0 };
        let y = &graph.points[j];
        let d = m.distance(x, y).value;
        // zeta at x with norm <= cap; xi = transport of zeta to y, perturbed
        let zeta = m.lower(&m.random_unit(x, &mut rng).scaled(rng.random_range(0.0..=cap)));
        let moved = if i == j { zeta.clone() } else { m.covector_transport(&zeta, y)? };
        let push = m.lower(&m.random_unit(y, &mut rng).scaled(rng.random_range(0.0..=dmax.max(1e-12))));
        let mut xi = CotangentVector::new(y, &moved.components + &push.components);
        let n = m.conorm(&xi);
        if n > cap {
            xi = xi.scaled(cap / n);
        }
        let back = if i == j { xi.clone() } else { m.covector_transport(&xi, x)? };
        let gap = m.conorm(&CotangentVector::new(x, &zeta.components - &back.components));
        table.push((d, gap, (f.eval(x, &zeta) - f.eval(y, &xi)).abs()));
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        if delta >= m.working_radius() {
            continue;
        }
        let hits: Vec<f64> = table.iter().filter(|(d, g, _)| *d <= delta && *g <= delta).map(|t| t.2).collect();
        rows.push(ModulusRow { delta, omega: hits.iter().copied().fold(0.0, f64::max), pairs: hits.len() });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub pass: bool,
    /// Largest `|u(x) - u(y)| / l_xy` over edges.
    pub max_slope: f64,
    pub worst_edge: Option<(usize, usize)>,
}

/// `|u(x) - u(y)| <= K l_xy (1 + 1e-9)` on every edge.
pub fn regularity_check(u: &DiscreteField, k: f64, graph: &Graph) -> RegularityReport {
    let mut max_slope: f64 = 0.0;
    let mut worst = None;
    let mut pass = true;
    for e in &graph.edges {
        let diff = (u.values[e.i] - u.values[e.j]).abs();
        if diff > k * e.length * (1.0 + 1e-9) {
            pass = false;
        }
        let s = diff / e.length;
        if s > max_slope {
            max_slope = s;
            worst = Some((e.i, e.j));
        }
    }
    RegularityReport { pass, max_slope, worst_edge: worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_graph, grid};
    use crate::field::ScalarField;
    use crate::manifold::{Manifold, Point};
    use std::sync::Arc;

    #[test]
    fn constant_field_is_exact() {
        let g = build_graph(&grid(&Manifold::euclidean(2), 9).unwrap(), 8).unwrap();
        let u = DiscreteField::constant(g.len(), 0.7);
        let f = Hamiltonian::norm_based(&g.manifold, Arc::new(|s| s), ScalarField::new(|_| 0.7), 0.7);
        let r = verify_viscosity(&u, &f, &g, None, EquationForm::Stationary, ScreenParams::default()).unwrap();
        assert_eq!(r.max_residual(), 0.0);
    }

    #[test]
    fn linear_field_candidates() {
        let g = build_graph(&grid(&Manifold::euclidean(2), 9).unwrap(), 8).unwrap();
        let u: Vec<f64> = g.points.iter().map(|p| 0.3 * p.coords[0] - 0.4 * p.coords[1]).collect();
        let c = local_candidates(&g, &u, 40, ScreenParams::default()).unwrap();
        let a = Candidates::preferred(&c.lower).unwrap();
        let exact = c.chart.covector_coords(&CotangentVector::new(&g.points[40], Vector::from_column_slice(&[0.3, -0.4])));
        assert!((a - exact).norm() < 1e-9);
        assert!(c.upper.iter().any(|(_, s)| *s == CandidateSource::LeastSquares));
    }

    #[test]
    fn norm_modulus_is_linear() {
        let g = build_graph(&crate::discretize::sample(&Manifold::sphere(), 300, 4).unwrap(), 6).unwrap();
        let f = Hamiltonian::general(&g.manifold, |x: &Point, z: &CotangentVector| {
            let m = Manifold::sphere();
            let _ = x;
            m.conorm(z)
        }, 0.0);
        for row in intrinsic_modulus_probe(&f, &g, &[0.05, 0.1, 0.2, 0.4], 5.0, 2000, 1).unwrap() {
            assert!(row.omega <= row.delta + 1e-8, "{row:?}");
        }
    }

    #[test]
    fn regularity_of_distance() {
        let g = build_graph(&grid(&Manifold::euclidean(1), 11).unwrap(), 2).unwrap();
        let u = DiscreteField::new(g.points.iter().map(|p| p.coords[0]).collect());
        assert!(regularity_check(&u, 1.0, &g).pass);
        assert!(!regularity_check(&u, 0.9, &g).pass);
    }
}
