use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Graph, GraphBuilder};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Torus,
    Rectangle,
}

/// Compass direction on the grid. Row 0 is the northern side, column 0 the
/// western side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Self::North, Self::South, Self::East, Self::West];

    fn delta(self) -> (isize, isize) {
        match self {
            Self::North => (-1, 0),
            Self::South => (1, 0),
            Self::East => (0, 1),
            Self::West => (0, -1),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "north" | "n" => Ok(Self::North),
            "south" | "s" => Ok(Self::South),
            "east" | "e" => Ok(Self::East),
            "west" | "w" => Ok(Self::West),
            _ => Err(Error::InvalidArgument(format!("unknown direction '{s}'"))),
        }
    }
}

/// Grid shape; vertex `row * width + col`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub torus: bool,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, topology: Topology) -> Self {
        Self {
            width,
            height,
            torus: topology == Topology::Torus,
        }
    }

    pub fn n(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v / self.width, v % self.width)
    }

    /// Neighbour of `(row, col)` in direction `d`, if any and distinct.
    pub fn step(&self, row: usize, col: usize, d: Direction) -> Option<usize> {
        let (dr, dc) = d.delta();
        let (h, w) = (self.height as isize, self.width as isize);
        let (mut r, mut c) = (row as isize + dr, col as isize + dc);
        if self.torus {
            r = r.rem_euclid(h);
            c = c.rem_euclid(w);
        } else if r < 0 || r >= h || c < 0 || c >= w {
            return None;
        }
        let v = self.index(r as usize, c as usize);
        (v != self.index(row, col)).then_some(v)
    }
}

fn check_size(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Nearest-neighbour grid with unit rates, optionally with the rate toward
/// one direction replaced. Wrap-around duplicates on small tori are summed.
pub fn grid_graph(width: usize, height: usize, topology: Topology, drift: Option<(Direction, f64)>) -> Result<Graph> {
    check_size(width, height)?;
    let geo = GridGeometry::new(width, height, topology);
    let mut b = GraphBuilder::new(geo.n());
    for row in 0..height {
        for col in 0..width {
            let x = geo.index(row, col);
            for d in Direction::ALL {
                if let Some(y) = geo.step(row, col, d) {
                    let rate = match drift {
                        Some((dd, r)) if dd == d => r,
                        _ => 1.0,
                    };
                    b.add_rate(x, y, rate)?;
                }
            }
        }
    }
    b.build()
}

/// Cumulative-sum Gaussian field on the grid, zero on row 0 and column 0,
/// with increments scaled by `1/sqrt(width * height)`.
pub fn brownian_sheet_potential(width: usize, height: usize, seed: u64) -> Result<Vec<f64>> {
    check_size(width, height)?;
    let mut rng = RngStream::new(seed, 0);
    let scale = 1.0 / ((width * height) as f64).sqrt();
    let mut v = vec![0.0; width * height];
    for row in 1..height {
        for col in 1..width {
            let z: f64 = StandardNormal.sample(&mut rng);
            let i = row * width + col;
            v[i] = z * scale + v[i - width] + v[i - 1] - v[i - width - 1];
        }
    }
    Ok(v)
}

/// Metropolis rates `exp(-β [V(y) - V(x)]_+)` on the nearest-neighbour grid.
pub fn metropolis_grid(width: usize, height: usize, topology: Topology, potential: &[f64], beta: f64) -> Result<Graph> {
    check_size(width, height)?;
    if !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    let geo = GridGeometry::new(width, height, topology);
    if potential.len() != geo.n() {
        return Err(Error::GeometryMismatch {
            forest: potential.len(),
            geometry: geo.n(),
        });
    }
    let mut b = GraphBuilder::new(geo.n());
    for row in 0..height {
        for col in 0..width {
            let x = geo.index(row, col);
            for d in Direction::ALL {
                if let Some(y) = geo.step(row, col, d) {
                    let rise = (potential[y] - potential[x]).max(0.0);
                    b.add_rate(x, y, (-beta * rise).exp())?;
                }
            }
        }
    }
    b.build()
}

/// Rectangle grid with Metropolis rates in a Brownian-sheet potential.
pub fn brownian_sheet_metropolis(width: usize, height: usize, beta: f64, seed: u64) -> Result<Graph> {
    let v = brownian_sheet_potential(width, height, seed)?;
    metropolis_grid(width, height, Topology::Rectangle, &v, beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_torus_sums_wraparound() {
        let g = grid_graph(2, 2, Topology::Torus, None).unwrap();
        assert_eq!(g.n(), 4);
        for x in 0..4 {
            assert_eq!(g.out_rate(x), 4.0);
            assert_eq!(g.degree(x), 2);
        }
        assert_eq!(g.rate(0, 1), 2.0);
    }

    #[test]
    fn path_graph() {
        let g = grid_graph(3, 1, Topology::Rectangle, None).unwrap();
        assert_eq!(g.out_rates(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn drifted_torus() {
        let g = grid_graph(16, 16, Topology::Torus, Some((Direction::North, 1.2))).unwrap();
        assert!(g.out_rates().iter().all(|&r| (r - 4.2).abs() < 1e-12));
        let geo = GridGeometry::new(16, 16, Topology::Torus);
        let x = geo.index(5, 5);
        assert_eq!(g.rate(x, geo.index(4, 5)), 1.2);
        assert_eq!(g.rate(x, geo.index(6, 5)), 1.0);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(grid_graph(0, 3, Topology::Torus, None).is_err());
    }

    #[test]
    fn sheet_boundary_is_zero() {
        let v = brownian_sheet_potential(5, 4, 3).unwrap();
        for col in 0..5 {
            assert_eq!(v[col], 0.0);
        }
        for row in 0..4 {
            assert_eq!(v[row * 5], 0.0);
        }
        assert!(v[6] != 0.0);
    }

    #[test]
    fn metropolis_properties() {
        let g0 = brownian_sheet_metropolis(6, 5, 0.0, 11).unwrap();
        assert_eq!(g0, grid_graph(6, 5, Topology::Rectangle, None).unwrap());
        let beta = 3.0;
        let v = brownian_sheet_potential(6, 5, 11).unwrap();
        let g = metropolis_grid(6, 5, Topology::Rectangle, &v, beta).unwrap();
        for (x, y, r) in g.edges() {
            assert!(r > 0.0 && r <= 1.0);
            let prod = r * g.rate(y, x);
            assert!((prod - (-beta * (v[y] - v[x]).abs()).exp()).abs() < 1e-14);
        }
        assert!(g.check_reversible().is_some());
    }
}
