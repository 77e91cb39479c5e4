use super::Graph;
use crate::error::{Error, Result};
use crate::manifold::Point;

/// Vertex band standing in for `dOmega`, and the interior it encloses.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySet {
    pub in_region: Vec<bool>,
    pub boundary: Vec<usize>,
    pub interior: Vec<usize>,
}

impl BoundarySet {
    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary.binary_search(&i).is_ok()
    }
}

/// Boundary = region vertices with a neighbor outside the region, plus
/// outside vertices with a neighbor inside. Interior = the remaining region
/// vertices.
pub fn partition<P: Fn(&Point) -> bool>(graph: &Graph, region: P) -> Result<BoundarySet> {
    let in_region: Vec<bool> = graph.points.iter().map(&region).collect();
    if !in_region.iter().any(|&b| b) {
        return Err(Error::Precondition("region contains no vertex".into()));
    }
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for i in 0..graph.len() {
        let crosses = graph.neighbors[i].iter().any(|&(j, _)| in_region[j] != in_region[i]);
        if crosses {
            boundary.push(i);
        } else if in_region[i] {
            interior.push(i);
        }
    }
    if boundary.is_empty() {
        return Err(Error::NoBoundary);
    }
    if interior.is_empty() {
        return Err(Error::NoInterior);
    }
    Ok(BoundarySet { in_region, boundary, interior })
}
