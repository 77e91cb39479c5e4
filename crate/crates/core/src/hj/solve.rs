use serde::{Deserialize, Serialize};

use super::{Hamiltonian, Profile};
use crate::discretize::{graph_distance, BoundarySet, Graph};
use crate::error::{Error, Result};
use crate::field::DiscreteField;

/// Distance to the boundary band: the eikonal solution on the graph.
pub fn eikonal_solve(graph: &Graph, boundary: &BoundarySet) -> Result<DiscreteField> {
    graph_distance(graph, &boundary.boundary)
}

/// Upwind slope `max_y (w - u_y)^+ / l_xy`.
fn slope(w: f64, nbrs: &[(f64, f64)]) -> f64 {
    nbrs.iter().map(|&(uy, l)| (w - uy).max(0.0) / l).fold(0.0, f64::max)
}

/// Solves `w + H(slope(w)) = f` for `w`; the left side is strictly
/// increasing, so bisection on `[min u_y, f - H(0)]` converges.
///
/// Bisection runs until the bracket ends are adjacent floats and returns
/// the smallest float `w` with `w + H(slope(w)) >= f`. Raising a neighbor
/// lowers the left side pointwise, so the result never decreases: the
/// scheme is monotone exactly, not just up to a tolerance.
pub fn local_solve(h: &Profile, f: f64, nbrs: &[(f64, f64)]) -> f64 {
    let hi0 = f - h(0.0);
    let umin = nbrs.iter().map(|n| n.0).fold(f64::INFINITY, f64::min);
    if hi0 <= umin {
        return hi0;
    }
    let below = |w: f64| w + h(slope(w, nbrs)) < f;
    let (mut lo, mut hi) = (umin, hi0);
    if !below(lo) {
        return lo;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    Forward,
    Reverse,
    /// Forward and reverse sweeps in turn.
    Alternating,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Stop once the sup-change of a sweep drops below this.
    pub tol: f64,
    /// Defaults to `10 n`.
    pub max_sweeps: Option<usize>,
    pub order: SweepOrder,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_sweeps: None, order: SweepOrder::Alternating }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub sweeps: usize,
    /// Sup-change of the last sweep.
    pub change: f64,
    /// `max |u + H(slope) - f|` of the returned field.
    pub residual: f64,
    pub converged: bool,
    pub order: SweepOrder,
    pub h: f64,
}

/// Monotone Gauss-Seidel sweeps of the upwind scheme for
/// `u + H(|du|) = f`, started from `u = f - H(0)`.
///
/// A run that exhausts `max_sweeps` returns the last iterate with
/// `converged = false` and its residual.
pub fn stationary_solve(ham: &Hamiltonian, graph: &Graph, opts: SolveOptions) -> Result<(DiscreteField, SolveReport)> {
    let (h, f) = ham.parts()?;
    if !h(0.0).is_finite() {
        return Err(Error::Precondition("H(0) is not finite".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let n = graph.len();
    let fv: Vec<f64> = graph.points.iter().map(|p| f.eval(p)).collect();
    if let Some(i) = fv.iter().position(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("f is not finite at vertex {i}")));
    }
    let max_sweeps = opts.max_sweeps.unwrap_or(10 * n);
    let mut u: Vec<f64> = fv.iter().map(|v| v - h(0.0)).collect();
    let mut sweeps = 0;
    let mut change = f64::INFINITY;
    let mut nbrs: Vec<(f64, f64)> = Vec::new();
    while sweeps < max_sweeps {
        let reverse = match opts.order {
            SweepOrder::Forward => false,
            SweepOrder::Reverse => true,
            SweepOrder::Alternating => sweeps % 2 == 1,
        };
        change = 0.0;
        for k in 0..n {
            let i = if reverse { n - 1 - k } else { k };
            nbrs.clear();
            nbrs.extend(graph.neighbors[i].iter().map(|&(j, l)| (u[j], l)));
            let w = local_solve(h, fv[i], &nbrs);
            change = f64::max(change, (w - u[i]).abs());
            u[i] = w;
        }
        sweeps += 1;
        if change < opts.tol {
            break;
        }
    }
    let residual = (0..n)
        .map(|i| {
            let nb: Vec<(f64, f64)> = graph.neighbors[i].iter().map(|&(j, l)| (u[j], l)).collect();
            (u[i] + h(slope(u[i], &nb)) - fv[i]).abs()
        })
        .fold(0.0, f64::max);
    let converged = change < opts.tol;
    if !converged {
        log::warn!("stationary solve stopped after {sweeps} sweeps with change {change:e}");
    }
    Ok((DiscreteField::new(u), SolveReport { sweeps, change, residual, converged, order: opts.order, h: graph.h }))
}
