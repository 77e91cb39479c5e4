//! Point clouds, geodesic k-nearest-neighbor graphs, region partitions and
//! shortest-path fields.

mod graph;
pub mod io;
mod region;

pub use graph::{all_pairs_distances, build_graph, graph_distance, graph_distance_within, Edge, Graph};
pub use region::{partition, BoundarySet};

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::manifold::{Kind, Manifold, Point};

#[derive(Clone, Debug)]
pub struct PointCloud {
    pub manifold: Manifold,
    pub points: Vec<Point>,
    pub seed: u64,
    pub method: String,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Random cloud of `n` points, deterministic in `seed`.
///
/// Sphere: normalized Gaussians. Torus: uniform angles. Hyperbolic plane:
/// area-uniform in the geodesic disk of radius 3 about the vertex. Flat
/// space: uniform in the sampling box. Surfaces: uniform in the annulus of
/// the chart.
pub fn sample(m: &Manifold, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let p = match m.kind() {
            Kind::Sphere => loop {
                let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if r > 1e-12 {
                    break Point::from_slice(&[v[0] / r, v[1] / r, v[2] / r]);
                }
            },
            Kind::Hyperbolic => {
                // area element sinh(r) dr d(theta): invert cosh(r) - 1
                let u: f64 = rng.random();
                let r = (1.0 + u * (3.0_f64.cosh() - 1.0)).acosh();
                let a = rng.random_range(0.0..TAU);
                Point::from_slice(&[r.sinh() * a.cos(), r.sinh() * a.sin(), r.cosh()])
            }
            Kind::Torus { dim } => Point::new(crate::manifold::Vector::from_fn(*dim, |_, _| rng.random_range(0.0..TAU))),
            Kind::Euclidean { .. } => {
                let b = m.bounds();
                Point::new(crate::manifold::Vector::from_fn(b.len(), |i, _| rng.random_range(b[i].0..=b[i].1)))
            }
            Kind::Cusp | Kind::Tube => {
                let (lo, hi) = m.bounds()[0];
                loop {
                    let x = rng.random_range(-hi..=hi);
                    let y = rng.random_range(-hi..=hi);
                    let r = x.hypot(y);
                    if r >= lo && r <= hi {
                        break Point::from_slice(&[x, y]);
                    }
                }
            }
        };
        points.push(p);
    }
    Ok(PointCloud { manifold: m.clone(), points, seed, method: "random".into() })
}

/// Regular grid with `per_axis` nodes per coordinate: the closed sampling
/// box for flat space, `per_axis` equally spaced angles for the torus.
pub fn grid(m: &Manifold, per_axis: usize) -> Result<PointCloud> {
    if per_axis == 0 {
        return Err(Error::InvalidInput("grid needs at least one node per axis".into()));
    }
    let axes: Vec<Vec<f64>> = match m.kind() {
        Kind::Euclidean { .. } => m
            .bounds()
            .iter()
            .map(|(lo, hi)| {
                if per_axis == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..per_axis).map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64).collect()
                }
            })
            .collect(),
        Kind::Torus { dim } => vec![(0..per_axis).map(|i| TAU * i as f64 / per_axis as f64).collect(); *dim],
        _ => return Err(Error::InvalidInput(format!("no regular grid on {}", m.name()))),
    };
    let total = axes.iter().map(Vec::len).product();
    let mut points = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rest = idx;
        let mut c = vec![0.0; axes.len()];
        for (d, axis) in axes.iter().enumerate().rev() {
            c[d] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        points.push(Point::from_slice(&c));
    }
    Ok(PointCloud { manifold: m.clone(), points, seed: 0, method: "grid".into() })
}

/// Cloud made of explicit points.
pub fn from_points(m: &Manifold, points: Vec<Point>) -> Result<PointCloud> {
    if let Some(i) = points.iter().position(|p| !m.contains(p)) {
        return Err(Error::InvalidInput(format!("point {i} lies outside the coordinate domain")));
    }
    Ok(PointCloud { manifold: m.clone(), points, seed: 0, method: "explicit".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_in_domain() {
        for m in [Manifold::sphere(), Manifold::hyperbolic(), Manifold::torus(2), Manifold::euclidean(3), Manifold::cusp(), Manifold::tube()] {
            let c = sample(&m, 1, 4).unwrap();
            assert_eq!(c.len(), 1);
            assert!(m.contains(&c.points[0]), "{}", m.name());
        }
        assert!(sample(&Manifold::sphere(), 0, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let m = Manifold::hyperbolic();
        assert_eq!(sample(&m, 50, 9).unwrap().points, sample(&m, 50, 9).unwrap().points);
        assert_ne!(sample(&m, 50, 9).unwrap().points, sample(&m, 50, 10).unwrap().points);
    }

    #[test]
    fn sphere_hemisphere_fraction() {
        let c = sample(&Manifold::sphere(), 10_000, 21).unwrap();
        let north = c.points.iter().filter(|p| p.coords[2] > 0.0).count() as f64 / 1e4;
        assert!((north - 0.5).abs() <= 0.02, "{north}");
    }

    #[test]
    fn hyperbolic_radii_follow_area() {
        // P(r <= 1.5) = (cosh 1.5 - 1) / (cosh 3 - 1)
        let c = sample(&Manifold::hyperbolic(), 20_000, 2).unwrap();
        let inner = c.points.iter().filter(|p| p.coords[2] <= 1.5_f64.cosh()).count() as f64 / 2e4;
        let expected = (1.5_f64.cosh() - 1.0) / (3.0_f64.cosh() - 1.0);
        assert!((inner - expected).abs() < 0.01, "{inner} {expected}");
    }

    #[test]
    fn grid_layout() {
        let g = grid(&Manifold::euclidean(2), 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.points[1].coords.as_slice(), &[0.0, 0.5]);
        assert_eq!(g.points[8].coords.as_slice(), &[1.0, 1.0]);
        let t = grid(&Manifold::circle(), 4).unwrap();
        assert_eq!(t.points[2].coords[0], std::f64::consts::PI);
    }
}
