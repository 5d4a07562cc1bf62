//! Binary PPM (P6) pictures of forests on grids.
//!
//! Each vertex is a `cell × cell` block. Trees get a blue level from a hash
//! of their root index, so a picture depends only on the forest and the
//! render settings. Cyan segments separate neighbouring vertices in
//! different trees and roots are red diamonds. With a potential, each cell
//! is darkened where the potential is low.

use std::io::Write;
use std::path::Path;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::graph::{Forest, GridGeometry};
use crate::rng::splitmix64;

pub const CYAN: [u8; 3] = [0, 255, 255];
pub const RED: [u8; 3] = [220, 20, 30];

/// RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; 3 * width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn to_p6(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_p6(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_p6())?;
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RenderSpec {
    pub geometry: GridGeometry,
    /// Pixels per vertex side.
    pub cell: usize,
    /// Optional underlay, one value per vertex.
    pub potential: Option<Vec<f64>>,
}

impl RenderSpec {
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cell: default_cell(geometry),
            potential: None,
        }
    }
}

/// As large as possible while keeping the long side within 1024 pixels, and
/// between 1 and 8.
pub fn default_cell(geo: GridGeometry) -> usize {
    (1024 / geo.width.max(geo.height).max(1)).clamp(1, 8)
}

/// Blue level of the tree rooted at `root`.
pub fn tree_colour(root: usize) -> [u8; 3] {
    let l = (splitmix64(root as u64) >> 11) as f64 / (1u64 << 53) as f64;
    [
        (10.0 + 50.0 * l) as u8,
        (30.0 + 110.0 * l) as u8,
        (90.0 + 165.0 * l) as u8,
    ]
}

fn shade(c: [u8; 3], f: f64) -> [u8; 3] {
    c.map(|v| (v as f64 * f).round().clamp(0.0, 255.0) as u8)
}

pub fn render_forest(forest: &Forest, spec: &RenderSpec) -> Result<Image> {
    let geo = spec.geometry;
    if forest.n() != geo.n() {
        return Err(Error::GeometryMismatch {
            forest: forest.n(),
            geometry: geo.n(),
        });
    }
    let s = spec.cell.max(1);
    let shading: Option<Vec<f64>> = match &spec.potential {
        Some(v) if v.len() != geo.n() => {
            return Err(Error::GeometryMismatch {
                forest: v.len(),
                geometry: geo.n(),
            })
        }
        Some(v) => {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(f64::MIN_POSITIVE);
            Some(v.iter().map(|p| 0.3 + 0.7 * (p - lo) / span).collect())
        }
        None => None,
    };
    let mut img = Image::new(geo.width * s, geo.height * s);
    for v in 0..geo.n() {
        let (row, col) = geo.coords(v);
        let mut c = tree_colour(forest.root_of(v));
        if let Some(f) = &shading {
            c = shade(c, f[v]);
        }
        for dy in 0..s {
            for dx in 0..s {
                img.set(col * s + dx, row * s + dy, c);
            }
        }
    }
    // Borders along the east and south sides of each cell; wrap-around
    // neighbours of a torus have no shared side in the picture.
    if s > 1 {
        for v in 0..geo.n() {
            let (row, col) = geo.coords(v);
            let t = forest.tree_id(v);
            if col + 1 < geo.width && forest.tree_id(geo.index(row, col + 1)) != t {
                for dy in 0..s {
                    img.set(col * s + s - 1, row * s + dy, CYAN);
                }
            }
            if row + 1 < geo.height && forest.tree_id(geo.index(row + 1, col)) != t {
                for dx in 0..s {
                    img.set(col * s + dx, row * s + s - 1, CYAN);
                }
            }
        }
    }
    let half = (s - 1) / 2;
    for &r in forest.roots() {
        let (row, col) = geo.coords(r);
        let (cx, cy) = (col * s + half, row * s + half);
        for dy in 0..=2 * half {
            for dx in 0..=2 * half {
                if dx.abs_diff(half) + dy.abs_diff(half) <= half {
                    img.set(cx + dx - half, cy + dy - half, RED);
                }
            }
        }
    }
    Ok(img)
}

/// One picture per snapshot, in time order.
pub fn render_trajectory(snapshots: &[(f64, Forest)], spec: &RenderSpec) -> Result<Vec<Image>> {
    if snapshots.windows(2).any(|w| w[0].0 > w[1].0) {
        return Err(Error::InvalidArgument("snapshot times must be sorted".into()));
    }
    snapshots.iter().map(|(_, f)| render_forest(f, spec)).collect()
}

/// `t,n_trees` CSV of the trajectory's tree count.
pub fn tree_count_series(traj: &Trajectory) -> String {
    crate::dynamics::tree_count_csv(&traj.tree_counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Topology;

    fn spec(w: usize, h: usize, cell: usize) -> RenderSpec {
        RenderSpec {
            geometry: GridGeometry::new(w, h, Topology::Rectangle),
            cell,
            potential: None,
        }
    }

    #[test]
    fn all_roots_is_all_markers() {
        let img = render_forest(&Forest::all_roots(12), &spec(4, 3, 1)).unwrap();
        assert!(img.data.chunks(3).all(|p| p == RED));
    }

    #[test]
    fn single_tree_has_one_level_and_no_borders() {
        // A path 0 <- 1 <- 2 <- 3 on a 4x1 strip.
        let f = Forest::from_parents(vec![None, Some(0), Some(1), Some(2)]).unwrap();
        let img = render_forest(&f, &spec(4, 1, 5)).unwrap();
        let blue = tree_colour(0);
        let mut colours: Vec<[u8; 3]> = img.data.chunks(3).map(|p| [p[0], p[1], p[2]]).collect();
        colours.sort_unstable();
        colours.dedup();
        assert_eq!(colours.len(), 2);
        assert!(colours.contains(&blue) && colours.contains(&RED));
    }

    #[test]
    fn borders_between_trees() {
        let f = Forest::from_parents(vec![None, None]).unwrap();
        let img = render_forest(&f, &spec(2, 1, 4)).unwrap();
        assert_eq!(img.pixel(3, 0), CYAN);
        assert_ne!(img.pixel(7, 0), CYAN);
    }

    #[test]
    fn mismatch_and_header() {
        assert!(matches!(
            render_forest(&Forest::all_roots(5), &spec(2, 2, 1)),
            Err(Error::GeometryMismatch { forest: 5, geometry: 4 })
        ));
        let img = render_forest(&Forest::all_roots(4), &spec(2, 2, 1)).unwrap();
        assert!(img.to_p6().starts_with(b"P6\n2 2\n255\n"));
    }
}
