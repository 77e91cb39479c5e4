use std::sync::Arc;

use serde::Serialize;

use super::estimate::{estimate_subdifferential, CovectorGrid, Mode};
use super::probe::{unit_directions, Probe, ProbeSchedule, Status};
use crate::error::{Error, Result};
use crate::manifold::{CotangentVector, Manifold, Point, Vector};

/// Inner members kept per factor; larger inner sets are thinned evenly.
const MAX_MEMBERS: usize = 9;

pub type PointMap = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type Field = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// `f o g` with `g: M -> N` differentiable and `f` on `N`.
#[derive(Clone)]
pub struct ChainSpec {
    pub target: Manifold,
    pub map: PointMap,
    pub outer: Field,
    /// Further covectors (frame coordinates at `p`) probed against `f o g`.
    pub extra: Vec<Vector>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RuleCheck {
    pub rule: &'static str,
    /// Frame coordinates of the combined covector.
    pub covector: Vec<f64>,
    pub status: Status,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CalculusReport {
    pub sum: Vec<RuleCheck>,
    pub product: Vec<RuleCheck>,
    pub chain: Vec<RuleCheck>,
    /// Probes of the extra chain covectors; not rule checks.
    pub chain_extra: Vec<RuleCheck>,
    /// Rule checks that came out violated.
    pub violations: usize,
}

fn thin(v: Vec<Vector>) -> Vec<Vector> {
    if v.len() <= MAX_MEMBERS {
        return v;
    }
    let step = (v.len() - 1) as f64 / (MAX_MEMBERS - 1) as f64;
    (0..MAX_MEMBERS).map(|i| v[(i as f64 * step).round() as usize].clone()).collect()
}

fn members(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, schedule: &ProbeSchedule) -> Result<Vec<Vector>> {
    let fan = unit_directions(m.dim(), schedule.directions);
    Ok(thin(estimate_subdifferential(m, f, p, &fan, Mode::General(CovectorGrid::default_for(m.dim())), schedule)?.inner))
}

fn check(probe: &Probe, rule: &'static str, a: Vector) -> RuleCheck {
    RuleCheck { rule, status: probe.verdict(&a).status, covector: a.iter().copied().collect() }
}

/// Checks the sum, product and chain inclusions for certified inner members
/// of the factors' subdifferentials at `p`; every combined covector must be
/// consistent for the combined function. The product branch needs
/// `f1, f2 >= 0` and is skipped when `product` is false.
pub fn calculus_suite(m: &Manifold, f1: &dyn Fn(&Point) -> f64, f2: &dyn Fn(&Point) -> f64, chain: Option<&ChainSpec>, p: &Point, schedule: &ProbeSchedule, product: bool) -> Result<CalculusReport> {
    let mut report = CalculusReport::default();
    let z1 = members(m, f1, p, schedule)?;
    let z2 = members(m, f2, p, schedule)?;
    let sum = |q: &Point| f1(q) + f2(q);
    let probe = Probe::new(m, &sum, p, schedule)?;
    for a in &z1 {
        for b in &z2 {
            report.sum.push(check(&probe, "sum", a + b));
        }
    }
    if product {
        let (v1, v2) = (f1(p), f2(p));
        if v1 < 0.0 || v2 < 0.0 {
            return Err(Error::Precondition(format!("product rule needs nonnegative factors, got f1(p) = {v1}, f2(p) = {v2}")));
        }
        let prod = |q: &Point| f1(q) * f2(q);
        let probe = Probe::new(m, &prod, p, schedule)?;
        for a in &z1 {
            for b in &z2 {
                report.product.push(check(&probe, "product", b * v1 + a * v2));
            }
        }
    }
    if let Some(spec) = chain {
        let gp = (spec.map)(p);
        let zs = members(&spec.target, &*spec.outer, &gp, schedule)?;
        let dg = differential(m, &spec.target, &*spec.map, p)?;
        let comp = |q: &Point| (spec.outer)(&(spec.map)(q));
        let probe = Probe::new(m, &comp, p, schedule)?;
        let chart_n = spec.target.normal_chart(&gp);
        for a in &zs {
            // zeta o dg in frame coordinates at p
            let zeta = chart_n.covector(&spec.target, a);
            let pulled = Vector::from_iterator(dg.len(), dg.iter().map(|w| zeta.components.dot(w)));
            report.chain.push(check(&probe, "chain", pulled));
        }
        for a in &spec.extra {
            report.chain_extra.push(check(&probe, "chain_extra", a.clone()));
        }
    }
    report.violations = report.sum.iter().chain(&report.product).chain(&report.chain).filter(|c| c.status == Status::Violated).count();
    Ok(report)
}

/// Raw-coordinate images `dg(p) E_j` of the normal frame at `p`, by central
/// differences along geodesics (step `1e-6`).
fn differential(m: &Manifold, n: &Manifold, g: &dyn Fn(&Point) -> Point, p: &Point) -> Result<Vec<Vector>> {
    let h = 1e-6;
    let chart = m.normal_chart(p);
    let gp = g(p);
    let mut out = Vec::with_capacity(m.dim());
    for e in &chart.frame {
        let a = g(&m.exp(p, &crate::manifold::TangentVector::new(p, e * h))?);
        let b = g(&m.exp(p, &crate::manifold::TangentVector::new(p, e * -h))?);
        out.push(n.project(&gp, &((&a.coords - &b.coords) / (2.0 * h))));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FuzzyOutcome {
    /// `x_i` within `eps` of `p`, `zeta_i` consistent for `f_i` at `x_i`,
    /// `|f_i(x_i) - f_i(p)| < eps`, and the transported sum within `eps`
    /// of `zeta`.
    Found { x1: Vec<f64>, x2: Vec<f64>, zeta1: Vec<f64>, zeta2: Vec<f64>, gap: f64 },
    Inconclusive { candidates: usize },
}

struct Candidate {
    x: Point,
    /// Transported to `p`, frame coordinates there.
    at_p: Vector,
    own: Vector,
}

fn candidates(m: &Manifold, f: &dyn Fn(&Point) -> f64, p: &Point, eps: f64) -> Result<Vec<Candidate>> {
    let chart = m.normal_chart(p);
    let f0 = f(p);
    let radius = 0.5 * eps.min(chart.radius);
    let mut pts = vec![p.clone()];
    for u in unit_directions(m.dim(), 8) {
        for frac in [0.5, 1.0] {
            pts.push(chart.from_chart(m, &(&u * (radius * frac)))?);
        }
    }
    let grid = CovectorGrid::default_for(m.dim());
    let mut out = Vec::new();
    for x in pts {
        let fx = f(&x);
        if !fx.is_finite() || (fx - f0).abs() >= eps {
            continue;
        }
        let s = ProbeSchedule::geometric(0.25 * radius, 8, 0.5, m.dim());
        let probe = Probe::new(m, f, &x, &s)?;
        let g = probe.chart.covector_coords(&m.gradient_fd(f, &x, 1e-6));
        let center = if g.iter().all(|v| v.is_finite()) { g } else { Vector::zeros(m.dim()) };
        for a in grid.points(&center) {
            if probe.verdict(&a).is_consistent() {
                let cov = probe.chart.covector(m, &a);
                let moved = if x == *p { cov } else { m.covector_transport(&cov, p)? };
                out.push(Candidate { x: x.clone(), at_p: chart.covector_coords(&moved), own: a });
            }
        }
    }
    Ok(out)
}

/// Search for the fuzzy sum decomposition of `zeta in D^-(f1 + f2)(p)`.
pub fn fuzzy_sum_search(m: &Manifold, f1: &dyn Fn(&Point) -> f64, f2: &dyn Fn(&Point) -> f64, p: &Point, zeta: &CotangentVector, eps: f64) -> Result<FuzzyOutcome> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let target = m.normal_chart(p).covector_coords(zeta);
    let c1 = candidates(m, f1, p, eps)?;
    let c2 = candidates(m, f2, p, eps)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            let gap = (&a.at_p + &b.at_p - &target).norm();
            if best.is_none_or(|(g, _, _)| gap < g) {
                best = Some((gap, i, j));
            }
        }
    }
    match best {
        Some((gap, i, j)) if gap < eps => Ok(FuzzyOutcome::Found {
            x1: c1[i].x.to_vec(),
            x2: c2[j].x.to_vec(),
            zeta1: c1[i].own.iter().copied().collect(),
            zeta2: c2[j].own.iter().copied().collect(),
            gap,
        }),
        _ => Ok(FuzzyOutcome::Inconclusive { candidates: c1.len() * c2.len() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(p: &Point) -> f64 {
        p.coords[0].abs()
    }

    #[test]
    fn abs_plus_abs() {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.0]);
        let s = ProbeSchedule::default_for(&m, &p);
        let r = calculus_suite(&m, &abs, &abs, None, &p, &s, true).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.sum.iter().any(|c| c.covector == vec![1.0]));
    }

    #[test]
    fn chain_example_is_strict() {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.0]);
        let s = ProbeSchedule::geometric(0.05, 10, 0.5, 1);
        let spec = ChainSpec {
            target: m.clone(),
            map: Arc::new(|x: &Point| Point::from_slice(&[x.coords[0].abs().powf(1.5)])),
            outer: Arc::new(|y: &Point| y.coords[0].abs().sqrt()),
            extra: vec![Vector::from_element(1, 2.0)],
        };
        let smooth = |x: &Point| x.coords[0] * x.coords[0];
        let r = calculus_suite(&m, &smooth, &smooth, Some(&spec), &p, &s, true).unwrap();
        assert_eq!(r.violations, 0);
        assert!(!r.chain.is_empty());
        assert!(r.chain.iter().all(|c| c.covector[0].abs() < 1e-6));
        assert_eq!(r.chain_extra[0].status, Status::Consistent);
    }

    #[test]
    fn negative_factor_rejected() {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.5]);
        let s = ProbeSchedule::default_for(&m, &p);
        let neg = |q: &Point| -abs(q);
        assert!(calculus_suite(&m, &abs, &neg, None, &p, &s, true).is_err());
    }

    #[test]
    fn fuzzy_sum_of_abs_and_negative_abs() {
        let m = Manifold::euclidean(1);
        let p = Point::from_slice(&[0.0]);
        let neg = |q: &Point| -abs(q);
        let zero = CotangentVector::zero(&m, &p);
        match fuzzy_sum_search(&m, &abs, &neg, &p, &zero, 0.1).unwrap() {
            FuzzyOutcome::Found { x2, gap, .. } => {
                assert!(x2[0] != 0.0);
                assert!(gap < 0.1);
            }
            other => panic!("{other:?}"),
        }
    }
}
