use serde::Serialize;

use super::bump::{bump, BumpField, PROFILE_LIPSCHITZ};
use crate::discretize::{graph_distance_within, BoundarySet, Graph};
use crate::error::{Error, Result};
use crate::field::{DiscreteField, ScalarField};
use crate::manifold::Point;

/// Rounding slack for the telescoped inequality (i).
const EKELAND_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct EkelandOutcome {
    pub z: usize,
    /// Visited vertices, starting at `x0` and ending at `z`.
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EkelandCheck {
    /// `lambda d(z, x0) <= f(z) - f(x0)`.
    pub i: bool,
    /// `lambda d(z, x0) <= eps`.
    pub ii: bool,
    /// No `x != z` with `f(x) - f(z) >= lambda d(x, z)`.
    pub iii: bool,
    pub counterexample: Option<usize>,
}

impl EkelandCheck {
    pub fn holds(&self) -> bool {
        self.i && self.ii && self.iii
    }
}

fn full_mask(n: usize) -> Vec<bool> {
    vec![true; n]
}

/// Lowest-index vertex `x != z` in the mask with `f(x) - f(z) >= lambda d(x, z)`.
fn improver(graph: &Graph, f: &DiscreteField, z: usize, lambda: f64, mask: &[bool]) -> Result<Option<usize>> {
    let d = graph_distance_within(graph, &[z], mask)?;
    Ok((0..graph.len()).find(|&x| x != z && mask[x] && f.values[x].is_finite() && d.values[x].is_finite() && f.values[x] - f.values[z] >= lambda * d.values[x]))
}

/// Discrete Ekeland principle in maximization form on the graph metric.
///
/// Non-finite values lie outside the domain. Starting from `x0` the search
/// moves to the lowest-index vertex `x` with `f(x) - f(z) >= lambda d(x, z)`
/// until none is left; `f` increases by a positive amount at every move, so
/// the walk terminates.
pub fn ekeland_search(graph: &Graph, f: &DiscreteField, x0: usize, eps: f64, lambda: f64) -> Result<EkelandOutcome> {
    ekeland_within(graph, f, x0, eps, lambda, &full_mask(graph.len()))
}

pub(crate) fn ekeland_within(graph: &Graph, f: &DiscreteField, x0: usize, eps: f64, lambda: f64, mask: &[bool]) -> Result<EkelandOutcome> {
    check_ekeland_inputs(graph, f, x0, eps, lambda, mask)?;
    let mut path = vec![x0];
    let mut z = x0;
    while let Some(x) = improver(graph, f, z, lambda, mask)? {
        z = x;
        path.push(z);
    }
    Ok(EkelandOutcome { z, path })
}

fn check_ekeland_inputs(graph: &Graph, f: &DiscreteField, x0: usize, eps: f64, lambda: f64, mask: &[bool]) -> Result<()> {
    if f.len() != graph.len() {
        return Err(Error::InvalidInput("field length differs from vertex count".into()));
    }
    if !(eps > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidInput("eps and lambda must be positive".into()));
    }
    if x0 >= graph.len() || !mask[x0] || !f.values[x0].is_finite() {
        return Err(Error::Precondition(format!("x0 = {x0} is not a finite vertex of the domain")));
    }
    let sup = (0..graph.len()).filter(|&i| mask[i] && f.values[i].is_finite()).map(|i| f.values[i]).fold(f64::NEG_INFINITY, f64::max);
    if !(f.values[x0] > sup - eps) {
        return Err(Error::Precondition(format!("f(x0) = {} is not above sup f - eps = {}", f.values[x0], sup - eps)));
    }
    Ok(())
}

/// Exhaustive check of the three Ekeland conclusions for `z`.
pub fn verify_ekeland(graph: &Graph, f: &DiscreteField, x0: usize, eps: f64, lambda: f64, z: usize) -> Result<EkelandCheck> {
    let mask = full_mask(graph.len());
    let from_x0 = graph_distance_within(graph, &[x0], &mask)?;
    let dz = from_x0.values[z];
    let gain = f.values[z] - f.values[x0];
    let i = lambda * dz <= gain + EKELAND_SLACK * (1.0 + f.values[z].abs().max(f.values[x0].abs()));
    let ii = lambda * dz <= eps;
    let counterexample = improver(graph, f, z, lambda, &mask)?;
    Ok(EkelandCheck { i, ii, iii: counterexample.is_none(), counterexample })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RolleCase {
    /// `sup f(U) > sup f(dU)`.
    InteriorMax,
    /// `inf f(U) < inf f(dU)`.
    InteriorMin,
    /// `|f| <= eps` on the closure with a ball `B(p0, R)` inside it.
    Bounded,
}

#[derive(Clone, Copy, Debug)]
pub struct RolleParams {
    /// Target gradient bound for the interior-extremum cases.
    pub r: f64,
    /// `(eps, R, p0)` for the bounded case.
    pub bounded: Option<(f64, f64, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RolleOutcome {
    pub q: usize,
    pub grad_norm: f64,
    pub case: RolleCase,
    pub lambda: f64,
}

fn grad_norm(graph: &Graph, f: &ScalarField, q: usize) -> f64 {
    let m = &graph.manifold;
    let p = &graph.points[q];
    let d = f.differential(p).unwrap_or_else(|| m.gradient_fd(|y: &Point| f.eval(y), p, 1e-6));
    m.conorm(&d)
}

/// Approximate Rolle search on the closure `interior + boundary band`.
///
/// With `bounded` set the bounded case runs; otherwise the interior
/// maximum case, then the interior minimum case, are tried. Ekeland runs
/// on the graph metric of the closure with the slope of the matching case.
pub fn rolle_search(graph: &Graph, f: &ScalarField, region: &BoundarySet, params: RolleParams) -> Result<RolleOutcome> {
    let n = graph.len();
    let mut mask = vec![false; n];
    for &i in region.interior.iter().chain(&region.boundary) {
        mask[i] = true;
    }
    let values = f.sample(&graph.points);
    if let Some(i) = (0..n).find(|&i| mask[i] && !values.values[i].is_finite()) {
        return Err(Error::Precondition(format!("f is not finite at vertex {i}")));
    }
    let ext = |idx: &[usize], v: &DiscreteField, pick: fn(f64, f64) -> f64, init: f64| idx.iter().map(|&i| v.values[i]).fold(init, pick);

    if let Some((eps, big_r, p0)) = params.bounded {
        return rolle_bounded(graph, f, &values, &mask, eps, big_r, p0);
    }
    let neg = values.map(|v| -v);
    for (case, v) in [(RolleCase::InteriorMax, &values), (RolleCase::InteriorMin, &neg)] {
        let eta = ext(&region.interior, v, f64::max, f64::NEG_INFINITY) - ext(&region.boundary, v, f64::max, f64::NEG_INFINITY);
        if !(eta > 0.0) {
            continue;
        }
        let x0 = region.interior.iter().copied().max_by(|&a, &b| v.values[a].total_cmp(&v.values[b]).then(b.cmp(&a))).expect("interior is nonempty");
        let ecc = graph_distance_within(graph, &[x0], &mask)?.values.iter().zip(&mask).filter(|(_, &m)| m).map(|(d, _)| *d).fold(0.0, f64::max);
        if !ecc.is_finite() {
            return Err(Error::Precondition("closure of the region is disconnected".into()));
        }
        let radius = ecc.max(1.0) + 1e-9;
        let lambda = (eta / (8.0 * radius)).min(params.r);
        let out = ekeland_within(graph, v, x0, eta / 4.0, lambda, &mask)?;
        if region.is_boundary(out.z) {
            return Err(Error::Precondition(format!("search ended on boundary vertex {}", out.z)));
        }
        return Ok(RolleOutcome { q: out.z, grad_norm: grad_norm(graph, f, out.z), case, lambda });
    }
    Err(Error::Precondition("no interior extremum beats the boundary and no bound was given".into()))
}

fn rolle_bounded(graph: &Graph, f: &ScalarField, values: &DiscreteField, mask: &[bool], eps: f64, big_r: f64, p0: usize) -> Result<RolleOutcome> {
    let m = &graph.manifold;
    if !(eps > 0.0) || !(big_r > 0.0) || p0 >= graph.len() || !mask[p0] {
        return Err(Error::InvalidInput("bounded case needs eps > 0, R > 0 and p0 in the region".into()));
    }
    if let Some(i) = (0..graph.len()).find(|&i| mask[i] && values.values[i].abs() > eps) {
        return Err(Error::Precondition(format!("|f| exceeds eps at vertex {i}")));
    }
    if let Some(i) = (0..graph.len()).find(|&i| !mask[i] && m.distance(&graph.points[p0], &graph.points[i]).value < big_r) {
        return Err(Error::Precondition(format!("vertex {i} lies in B(p0, R) but outside the region")));
    }
    let lambda = eps / big_r;
    let case = RolleCase::Bounded;
    let sup_over = |v: &DiscreteField| (0..graph.len()).filter(|&i| mask[i]).map(|i| v.values[i]).fold(f64::NEG_INFINITY, f64::max);
    let run = |v: &DiscreteField, x0: usize| -> Result<RolleOutcome> {
        let sup = sup_over(v);
        let slack = sup - v.values[x0] + 1e-12 * (1.0 + sup.abs());
        let out = ekeland_within(graph, v, x0, slack, lambda, mask)?;
        Ok(RolleOutcome { q: out.z, grad_norm: grad_norm(graph, f, out.z), case, lambda })
    };
    let f0 = values.values[p0];
    let neg = values.map(|v| -v);
    if f0 < 0.0 {
        return run(&neg, p0);
    }
    if f0 > 0.0 {
        return run(values, p0);
    }
    let g0 = grad_norm(graph, f, p0);
    if g0 <= lambda {
        return Ok(RolleOutcome { q: p0, grad_norm: g0, case, lambda });
    }
    // step off p0 along the steepest incident edge
    let nbrs: Vec<usize> = graph.neighbors[p0].iter().map(|&(j, _)| j).filter(|&j| mask[j]).collect();
    let down = nbrs.iter().copied().min_by(|&a, &b| values.values[a].total_cmp(&values.values[b]).then(a.cmp(&b)));
    let up = nbrs.iter().copied().max_by(|&a, &b| values.values[a].total_cmp(&values.values[b]).then(b.cmp(&a)));
    match (down, up) {
        (Some(x0), _) if values.values[x0] < 0.0 => run(&neg, x0),
        (_, Some(x0)) if values.values[x0] > 0.0 => run(values, x0),
        _ => Ok(RolleOutcome { q: p0, grad_norm: g0, case, lambda }),
    }
}

#[derive(Clone, Debug)]
pub struct DgzOutcome {
    pub x0: usize,
    pub bump: BumpField,
    /// Height of the perturbation: `phi = scale * bump`.
    pub scale: f64,
    pub phi: DiscreteField,
    pub minimizer: usize,
    /// `min (f - phi)(y) - (f - phi)(p)` over vertices `y` outside `B(p, delta_b)`;
    /// `+inf` when there are none.
    pub margin: f64,
    pub sup_phi: f64,
    /// Largest finite-difference norm of `d phi` over the vertices.
    pub sup_dphi: f64,
}

impl DgzOutcome {
    pub fn bump_radius(&self) -> f64 {
        self.bump.radius
    }
}

/// One smooth perturbation step: `phi = eps' b` with `b` a bump of radius
/// `delta_b = min(r_M(x0) / 2, delta / 2)` about the graph argmin `x0` and
/// `eps' = delta delta_b / (4 R)`, so `|phi| <= delta delta_b / (4R) < delta`
/// and `|d phi| <= delta / 4`.
pub fn dgz_perturb(graph: &Graph, f: &DiscreteField, delta: f64) -> Result<DgzOutcome> {
    if f.len() != graph.len() {
        return Err(Error::InvalidInput("field length differs from vertex count".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    let x0 = f.argmin().ok_or(Error::EmptyDomain)?;
    let m = &graph.manifold;
    let c = &graph.points[x0];
    let delta_b = (0.5 * m.working_radius_at(c)).min(0.5 * delta);
    let scale = delta * delta_b / (4.0 * PROFILE_LIPSCHITZ);
    let b = bump(m, c, delta_b)?;
    let phi = DiscreteField::new(graph.points.iter().map(|y| scale * b.eval(y)).collect());
    let g: Vec<f64> = f.values.iter().zip(&phi.values).map(|(a, b)| a - b).collect();
    let minimizer = DiscreteField::new(g.clone()).argmin().expect("x0 is finite");
    let pm = &graph.points[minimizer];
    let margin = (0..graph.len()).filter(|&y| m.distance(pm, &graph.points[y]).value >= delta_b).map(|y| g[y] - g[minimizer]).fold(f64::INFINITY, f64::min);
    let phi_fn = |y: &Point| scale * b.eval(y);
    let sup_dphi = graph.points.iter().map(|y| m.conorm(&m.gradient_fd(phi_fn, y, 1e-6))).fold(0.0, f64::max);
    Ok(DgzOutcome { x0, bump: b, scale, sup_phi: phi.sup_norm(), phi, minimizer, margin, sup_dphi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_graph, grid, partition, sample};
    use crate::manifold::{CotangentVector, Manifold, Vector};

    #[test]
    fn constant_field_stays_put() {
        let g = build_graph(&sample(&Manifold::sphere(), 200, 1).unwrap(), 6).unwrap();
        let f = DiscreteField::constant(200, 2.0);
        let out = ekeland_search(&g, &f, 17, 0.1, 0.5).unwrap();
        assert_eq!(out.z, 17);
        assert!(verify_ekeland(&g, &f, 17, 0.1, 0.5, 17).unwrap().holds());
    }

    #[test]
    fn unique_max_is_reached() {
        let g = build_graph(&grid(&Manifold::euclidean(1), 101).unwrap(), 2).unwrap();
        // tent with peak at vertex 30, slope 2 per unit length
        let f = DiscreteField::new((0..101).map(|i| -2.0 * (i as f64 / 100.0 - 0.3).abs()).collect());
        let out = ekeland_search(&g, &f, 80, 10.0, 1.0).unwrap();
        assert_eq!(out.z, 30);
        assert!(verify_ekeland(&g, &f, 80, 10.0, 1.0, out.z).unwrap().holds());
        assert!(ekeland_search(&g, &f, 80, 0.5, 1.0).is_err());
    }

    #[test]
    fn rolle_sharp_fixture() {
        let m = Manifold::euclidean(1).with_bounds(vec![(-1.0, 1.0)]).unwrap();
        let g = build_graph(&grid(&m, 201).unwrap(), 2).unwrap();
        let region = partition(&g, |p| p.coords[0].abs() < 1.0 - 1e-12).unwrap();
        let f = ScalarField::new(|p: &Point| p.coords[0]).with_differential(|p: &Point| CotangentVector::new(p, Vector::from_element(1, 1.0)));
        let out = rolle_search(&g, &f, &region, RolleParams { r: 0.1, bounded: Some((1.0, 1.0, 100)) }).unwrap();
        assert_eq!(out.q, 100);
        assert_eq!(out.grad_norm, 1.0);
    }

    #[test]
    fn rolle_interior_max() {
        let g = build_graph(&grid(&Manifold::euclidean(2), 21).unwrap(), 8).unwrap();
        let region = partition(&g, |p| p.coords.iter().all(|&x| x > 0.02 && x < 0.98)).unwrap();
        let f = ScalarField::new(|p: &Point| -((p.coords[0] - 0.4).powi(2) + (p.coords[1] - 0.55).powi(2)));
        let out = rolle_search(&g, &f, &region, RolleParams { r: 0.05, bounded: None }).unwrap();
        assert_eq!(out.case, RolleCase::InteriorMax);
        assert!(!region.is_boundary(out.q));
        // the nearest grid node to the peak has gradient norm <= sqrt(2) * 0.05
        assert!(out.grad_norm <= 0.15, "{}", out.grad_norm);
    }

    #[test]
    fn dgz_bounds() {
        let g = build_graph(&grid(&Manifold::euclidean(2), 15).unwrap(), 8).unwrap();
        let f = DiscreteField::new(g.points.iter().map(|p| p.coords[0] - 0.5 * p.coords[1]).collect());
        let out = dgz_perturb(&g, &f, 0.2).unwrap();
        assert!(out.sup_phi < 0.2 && out.sup_dphi < 0.2);
        assert!(out.margin > 0.0);
        let d = g.manifold.distance(&g.points[out.minimizer], &g.points[out.x0]).value;
        assert!(d < out.bump_radius());
        assert!(dgz_perturb(&g, &DiscreteField::constant(g.len(), f64::INFINITY), 0.2).is_err());
    }
}
