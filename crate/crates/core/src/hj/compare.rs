use serde::Serialize;

use super::viscosity::{local_candidates, verify_viscosity, Candidates, EquationForm, ScreenParams};
use super::{Hamiltonian, H_SLACK};
use crate::discretize::{all_pairs_distances, BoundarySet, Graph};
use crate::error::{Error, Result};
use crate::field::DiscreteField;
use crate::manifold::{CotangentVector, Vector};
use crate::nonsmooth::{smooth_step, theta};

#[derive(Clone, Debug, Serialize)]
pub struct SupReport {
    pub max_sub_first: f64,
    pub max_sub_second: f64,
    pub max_sub_sup: f64,
    /// `2 tol + C h`.
    pub threshold: f64,
    pub pass: bool,
}

/// Verifies `max(u1, u2)` as a subsolution at `2 tol + C h`, after checking
/// both inputs at `tol + C h`.
pub fn sup_subsolution_check(u1: &DiscreteField, u2: &DiscreteField, f: &Hamiltonian, graph: &Graph, region: Option<&BoundarySet>, form: EquationForm, tol: f64, screen: ScreenParams) -> Result<SupReport> {
    let pre = tol + H_SLACK * graph.h;
    let r1 = verify_viscosity(u1, f, graph, region, form, screen)?;
    let r2 = verify_viscosity(u2, f, graph, region, form, screen)?;
    if !r1.is_subsolution(pre) || !r2.is_subsolution(pre) {
        return Err(Error::Precondition(format!("inputs are not subsolutions at {pre:e}: residuals {:e}, {:e}", r1.max_sub, r2.max_sub)));
    }
    let sup = u1.pointwise_max(u2);
    let r = verify_viscosity(&sup, f, graph, region, form, screen)?;
    let threshold = 2.0 * tol + H_SLACK * graph.h;
    Ok(SupReport { max_sub_first: r1.max_sub, max_sub_second: r2.max_sub, max_sub_sup: r.max_sub, threshold, pass: r.max_sub <= threshold })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub min_difference: f64,
    pub inf_source_gap: f64,
    /// `min(v - u) - inf(g - f)`.
    pub margin: f64,
    /// `-(2 tol + C h)`.
    pub bound: f64,
    pub pass: bool,
    pub sub_residual: f64,
    pub super_residual: f64,
}

/// Maximum principle: `u` a subsolution of `u + H(|du|) = f`, `v` a
/// supersolution of `v + H(|dv|) = g`, then `min(v - u) >= inf(g - f)` up to
/// `2 tol + C h`.
pub fn comparison_check(u: &DiscreteField, fu: &Hamiltonian, v: &DiscreteField, fv: &Hamiltonian, graph: &Graph, tol: f64, screen: ScreenParams) -> Result<ComparisonReport> {
    let (_, f) = fu.parts()?;
    let (_, g) = fv.parts()?;
    let pre = tol + H_SLACK * graph.h;
    let ru = verify_viscosity(u, fu, graph, None, EquationForm::Stationary, screen)?;
    let rv = verify_viscosity(v, fv, graph, None, EquationForm::Stationary, screen)?;
    if !ru.is_subsolution(pre) || !rv.is_supersolution(pre) {
        return Err(Error::Precondition(format!("sub residual {:e} or super residual {:e} exceeds {pre:e}", ru.max_sub, rv.max_super)));
    }
    let min_difference = v.values.iter().zip(&u.values).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let inf_source_gap = graph.points.iter().map(|p| g.eval(p) - f.eval(p)).fold(f64::INFINITY, f64::min);
    let margin = min_difference - inf_source_gap;
    let bound = -(2.0 * tol + H_SLACK * graph.h);
    Ok(ComparisonReport { min_difference, inf_source_gap, margin, bound, pass: margin >= bound, sub_residual: ru.max_sub, super_residual: rv.max_super })
}

/// Nonincreasing smooth profile: `b0` on `[0, eps/4]`, `0` from `eps` on.
pub fn doubling_profile(eps: f64, b0: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| b0 * (1.0 - smooth_step((t - 0.25 * eps) / (0.75 * eps)))
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingReport {
    pub x0: usize,
    pub y0: usize,
    pub distance: f64,
    /// Frame coordinates at `x0` and `y0`.
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
    /// `screened` when both covectors are affine-fit candidates, `profile`
    /// when a side fell back to the derivative of `b o d`.
    pub covector_source: String,
    pub gap: f64,
    pub b0: f64,
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    /// `eps` exceeds the graph diameter.
    pub degenerate: bool,
}

impl DoublingReport {
    pub fn holds(&self) -> bool {
        self.i && self.ii && self.iii
    }
}

/// Exhaustive minimization of `w(x, y) = v(y) - u(x) - b(d_graph(x, y))`
/// over vertex pairs, then the three conclusions of the doubling argument.
pub fn doubling_pair(u: &DiscreteField, v: &DiscreteField, eps: f64, graph: &Graph, screen: ScreenParams) -> Result<DoublingReport> {
    let m = &graph.manifold;
    let n = graph.len();
    if u.len() != n || v.len() != n {
        return Err(Error::InvalidInput("field length differs from vertex count".into()));
    }
    if !(eps > 0.0) || eps >= m.working_radius() {
        return Err(Error::OutOfRange { name: "eps", value: eps, max: m.working_radius() });
    }
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::Precondition("u and v must be bounded".into()));
    }
    let d = all_pairs_distances(graph)?;
    let b0 = 2.0 * (u.sup_norm() + v.sup_norm()) + eps + 1.0;
    let b = doubling_profile(eps, b0);
    let (mut best, mut x0, mut y0) = (f64::INFINITY, 0, 0);
    for x in 0..n {
        for y in 0..n {
            let w = v.values[y] - u.values[x] - b(d[x][y]);
            if w < best {
                (best, x0, y0) = (w, x, y);
            }
        }
    }
    let distance = d[x0][y0];
    let diameter = d.iter().flatten().copied().fold(0.0, f64::max);
    let floor = v.values[y0] - u.values[x0] - eps;
    let iii = (0..n).all(|z| v.values[z] - u.values[z] >= floor);

    let cu = local_candidates(graph, &u.values, x0, screen)?;
    let cv = local_candidates(graph, &v.values, y0, screen)?;
    let (px, py) = (&graph.points[x0], &graph.points[y0]);
    // derivative of b o d along the proof's construction, as fallback
    let profile_pair = || -> Result<(CotangentVector, CotangentVector)> {
        if x0 == y0 {
            return Ok((CotangentVector::zero(m, px), CotangentVector::zero(m, py)));
        }
        let t = m.distance(px, py).value;
        let db = -b0 * slope_of_step(t, eps);
        let (dx, dy) = m.distance_partials(px, py)?;
        Ok((dx.scaled(-db), dy.scaled(db)))
    };
    let upper: Vec<CotangentVector> = cu.upper.iter().map(|(a, _)| cu.chart.covector(m, a)).collect();
    let lower: Vec<CotangentVector> = cv.lower.iter().map(|(a, _)| cv.chart.covector(m, a)).collect();
    let (zs, xs, source) = if !upper.is_empty() && !lower.is_empty() {
        (upper, lower, "screened")
    } else {
        let (z, x) = profile_pair()?;
        let zs = if upper.is_empty() { vec![z] } else { upper };
        let xs = if lower.is_empty() { vec![x] } else { lower };
        (zs, xs, "profile")
    };
    let mut pick: Option<(f64, &CotangentVector, &CotangentVector)> = None;
    for z in &zs {
        for x in &xs {
            let g = m.covector_gap(z, x)?;
            if pick.is_none_or(|(best, _, _)| g < best) {
                pick = Some((g, z, x));
            }
        }
    }
    let (gap, z, x) = pick.expect("both sides nonempty");
    let coords = |c: &Candidates, k: &CotangentVector| -> Vec<f64> { c.chart.covector_coords(k).iter().copied().collect() };
    Ok(DoublingReport {
        x0,
        y0,
        distance,
        zeta: coords(&cu, z),
        xi: coords(&cv, x),
        covector_source: source.into(),
        gap,
        b0,
        i: distance < eps,
        ii: gap < eps + H_SLACK * graph.h,
        iii,
        degenerate: eps > diameter,
    })
}

/// `d/dt smooth_step((t - eps/4) / (3 eps / 4))` by central differences.
fn slope_of_step(t: f64, eps: f64) -> f64 {
    let s = |t: f64| smooth_step((t - 0.25 * eps) / (0.75 * eps));
    let h = 1e-7 * eps;
    (s(t + h) - s(t - h)) / (2.0 * h)
}

#[derive(Clone, Debug, Serialize)]
pub struct PerronOutcome {
    #[serde(skip)]
    pub field: DiscreteField,
    pub lifted: Option<usize>,
    /// `-(u + F)` at the lifted vertex, minimized over lower candidates.
    pub deficit: f64,
    pub beta: f64,
    pub radius: f64,
    pub diagnostics: Vec<String>,
}

/// One Perron lift: at the first vertex where every lower candidate leaves
/// `u + F < -3 tol`, replaces `u` near it by `max(h + beta b, u)` with `h`
/// affine in the normal chart (slope the preferred candidate) and `b` a
/// bump, choosing the largest `beta` (halving from the deficit) that keeps
/// the local subsolution residual within its previous level or `tol`.
pub fn perron_improve(u: &DiscreteField, f: &Hamiltonian, graph: &Graph, region: Option<&BoundarySet>, form: EquationForm, tol: f64, screen: ScreenParams) -> Result<PerronOutcome> {
    let checked = verified_vertices(u, f, graph, region, form, tol, screen)?;
    improve_from(u, f, graph, region, form, tol, screen, &checked, 0)
}

/// Checks the subsolution precondition and returns the checked vertices.
fn verified_vertices(u: &DiscreteField, f: &Hamiltonian, graph: &Graph, region: Option<&BoundarySet>, form: EquationForm, tol: f64, screen: ScreenParams) -> Result<Vec<usize>> {
    let pre = tol + H_SLACK * graph.h;
    let base = verify_viscosity(u, f, graph, region, form, screen)?;
    if !base.is_subsolution(pre) {
        return Err(Error::Precondition(format!("u is not a subsolution at {pre:e} (residual {:e})", base.max_sub)));
    }
    Ok(base.checked)
}

/// Scans `checked` cyclically from position `start`.
#[allow(clippy::too_many_arguments)]
fn improve_from(u: &DiscreteField, f: &Hamiltonian, graph: &Graph, region: Option<&BoundarySet>, form: EquationForm, tol: f64, screen: ScreenParams, checked: &[usize], start: usize) -> Result<PerronOutcome> {
    let m = &graph.manifold;
    let zeroth = |w: &DiscreteField, i: usize| if form == EquationForm::Stationary { w.values[i] } else { 0.0 };
    let mut diagnostics = Vec::new();
    for k in 0..checked.len() {
        let p0 = checked[(start + k) % checked.len()];
        let c = local_candidates(graph, &u.values, p0, screen)?;
        if c.lower.is_empty() {
            continue;
        }
        let x = &graph.points[p0];
        let worst = c.lower.iter().map(|(a, _)| zeroth(u, p0) + f.eval(x, &c.chart.covector(m, a))).fold(f64::NEG_INFINITY, f64::max);
        if worst >= -3.0 * tol {
            continue;
        }
        let a0 = Candidates::preferred(&c.lower).expect("nonempty").clone();
        let shortest = graph.neighbors[p0].iter().map(|&(_, l)| l).fold(f64::INFINITY, f64::min);
        for radius in [4.0 * shortest, 2.5 * shortest, 1.5 * shortest, shortest * (1.0 + 1e-9)] {
            if radius >= m.working_radius_at(x) {
                continue;
            }
            if let Some((field, beta)) = try_lift(u, f, graph, region, form, screen, p0, &a0, radius, -worst, tol)? {
                return Ok(PerronOutcome { field, lifted: Some(p0), deficit: -worst, beta, radius, diagnostics });
            }
        }
        diagnostics.push(format!("vertex {p0}: no bump height kept the subsolution inequality at graph resolution"));
    }
    Ok(PerronOutcome { field: u.clone(), lifted: None, deficit: 0.0, beta: 0.0, radius: 0.0, diagnostics })
}

#[allow(clippy::too_many_arguments)]
fn try_lift(
    u: &DiscreteField,
    f: &Hamiltonian,
    graph: &Graph,
    region: Option<&BoundarySet>,
    form: EquationForm,
    screen: ScreenParams,
    p0: usize,
    a0: &Vector,
    radius: f64,
    deficit: f64,
    tol: f64,
) -> Result<Option<(DiscreteField, f64)>> {
    let m = &graph.manifold;
    let x = &graph.points[p0];
    let chart = m.normal_chart(x);
    let near: Vec<(usize, f64)> = (0..graph.len()).map(|y| (y, m.distance(x, &graph.points[y]).value)).filter(|&(_, d)| d < 2.0 * radius).collect();
    let checked: Vec<usize> = match region {
        Some(r) => near.iter().map(|&(y, _)| y).filter(|y| r.interior.binary_search(y).is_ok()).collect(),
        None => near.iter().map(|&(y, _)| y).collect(),
    };
    let local_sub = |w: &DiscreteField| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &y in &checked {
            let c = local_candidates(graph, &w.values, y, screen)?;
            let z0 = if form == EquationForm::Stationary { w.values[y] } else { 0.0 };
            for (a, _) in &c.upper {
                worst = worst.max(z0 + f.eval(&graph.points[y], &c.chart.covector(m, a)));
            }
        }
        Ok(worst)
    };
    let allowed = local_sub(u)?.max(tol);
    let mut offsets = Vec::new();
    for &(y, d) in &near {
        if d < radius {
            offsets.push((y, d, a0.dot(&chart.to_chart(m, &graph.points[y])?)));
        }
    }
    let mut beta = deficit;
    // lifts below tol are not worth taking
    while beta >= tol {
        let mut w = u.clone();
        for &(y, d, lin) in &offsets {
            let lifted = u.values[p0] + lin + beta * theta(d / radius);
            w.values[y] = w.values[y].max(lifted);
        }
        if w.values[p0] > u.values[p0] && local_sub(&w)? <= allowed {
            return Ok(Some((w, beta)));
        }
        beta *= 0.5;
    }
    Ok(None)
}

/// Repeats [`perron_improve`] until no vertex lifts or `max_lifts` is hit;
/// returns the field and the number of lifts.
pub fn perron_iterate(u: &DiscreteField, f: &Hamiltonian, graph: &Graph, region: Option<&BoundarySet>, form: EquationForm, tol: f64, screen: ScreenParams, max_lifts: usize) -> Result<(DiscreteField, usize)> {
    // each accepted lift keeps the subsolution inequality, so the
    // precondition is checked once
    let checked = verified_vertices(u, f, graph, region, form, tol, screen)?;
    let mut cur = u.clone();
    let mut start = 0;
    for k in 0..max_lifts {
        let out = improve_from(&cur, f, graph, region, form, tol, screen, &checked, start)?;
        let Some(p0) = out.lifted else {
            return Ok((cur, k));
        };
        start = checked.iter().position(|&i| i == p0).map_or(0, |i| i + 1);
        cur = out.field;
    }
    Ok((cur, max_lifts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{build_graph, grid, sample};
    use crate::field::ScalarField;
    use crate::hj::{stationary_solve, SolveOptions};
    use crate::manifold::{Manifold, Point};
    use std::sync::Arc;

    fn circle_problem(n: usize) -> (Graph, Hamiltonian) {
        let g = build_graph(&grid(&Manifold::circle(), n).unwrap(), 2).unwrap();
        let ham = Hamiltonian::norm_based(&g.manifold, Arc::new(|s| s), ScalarField::new(|p: &Point| p.coords[0].sin()), 1.0);
        (g, ham)
    }

    #[test]
    fn profile_shape() {
        let b = doubling_profile(0.1, 5.0);
        assert_eq!(b(0.0), 5.0);
        assert_eq!(b(0.025), 5.0);
        assert_eq!(b(0.1), 0.0);
        assert!(b(0.05) > b(0.07));
    }

    #[test]
    fn constant_subsolutions_sup() {
        let (g, ham) = circle_problem(60);
        let r = sup_subsolution_check(&DiscreteField::constant(60, -1.5), &DiscreteField::constant(60, -1.0), &ham, &g, None, EquationForm::Stationary, 1e-9, ScreenParams::default()).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn solver_output_does_not_lift() {
        let (g, ham) = circle_problem(60);
        let (u, _) = stationary_solve(&ham, &g, SolveOptions::default()).unwrap();
        let out = perron_improve(&u, &ham, &g, None, EquationForm::Stationary, 1e-9, ScreenParams::default()).unwrap();
        assert!(out.lifted.is_none());
    }

    #[test]
    fn low_constant_lifts() {
        let (g, ham) = circle_problem(60);
        let u = DiscreteField::constant(60, -2.0);
        let out = perron_improve(&u, &ham, &g, None, EquationForm::Stationary, 1e-9, ScreenParams::default()).unwrap();
        let p0 = out.lifted.expect("lift");
        assert!(out.field.values[p0] > -2.0);
        let r = verify_viscosity(&out.field, &ham, &g, None, EquationForm::Stationary, ScreenParams::default()).unwrap();
        assert!(r.is_subsolution(1e-9));
    }

    #[test]
    fn perron_iteration_reaches_solver_output() {
        let (g, ham) = circle_problem(24);
        let (u, _) = stationary_solve(&ham, &g, SolveOptions::default()).unwrap();
        let (p, lifts) = perron_iterate(&DiscreteField::constant(24, -2.0), &ham, &g, None, EquationForm::Stationary, 1e-9, ScreenParams::default(), 20000).unwrap();
        assert!(lifts > 0);
        let diff = p.sup_distance(&u);
        assert!(diff <= 5.0 * g.h, "{diff} vs {}", 5.0 * g.h);
    }

    #[test]
    fn doubling_on_equal_fields() {
        let g = build_graph(&sample(&Manifold::sphere(), 200, 3).unwrap(), 8).unwrap();
        let u = DiscreteField::new(g.points.iter().map(|p| p.coords[2]).collect());
        let r = doubling_pair(&u, &u, 0.1, &g, ScreenParams::default()).unwrap();
        assert!(r.holds(), "{r:?}");
    }
}
