//! Latent-point lattices and their cached pairwise squared-distance tables.
//!
//! A map's latent space is a fixed rows x cols lattice, either planar
//! (coordinates regularly spaced over a real interval) or toroidal
//! (integer coordinates with wrap-around distances). Nodes are linearized
//! row-major: node index `i = r * cols + c`.

use crate::error::{Result, VdsomError};

/// Lattice topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Planar,
    Toroidal,
}

impl std::str::FromStr for Topology {
    type Err = VdsomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar" => Ok(Topology::Planar),
            "toroidal" => Ok(Topology::Toroidal),
            other => Err(VdsomError::InvalidArgument(format!(
                "unknown topology `{other}`, expected planar|toroidal"
            ))),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topology::Planar => write!(f, "planar"),
            Topology::Toroidal => write!(f, "toroidal"),
        }
    }
}

/// Parameters describing a lattice to build.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    /// Coordinate interval for planar placement; ignored by toroidal grids.
    pub coord_range: (f64, f64),
}

impl GridSpec {
    pub fn planar(rows: usize, cols: usize, lo: f64, hi: f64) -> Self {
        GridSpec {
            rows,
            cols,
            topology: Topology::Planar,
            coord_range: (lo, hi),
        }
    }

    pub fn toroidal(rows: usize, cols: usize) -> Self {
        GridSpec {
            rows,
            cols,
            topology: Topology::Toroidal,
            coord_range: (0.0, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(VdsomError::InvalidGrid(format!(
                "grid dimensions must be positive, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.topology == Topology::Planar && self.coord_range.0 >= self.coord_range.1 {
            return Err(VdsomError::InvalidGrid(format!(
                "coordinate range must satisfy lo < hi, got ({}, {})",
                self.coord_range.0, self.coord_range.1
            )));
        }
        Ok(())
    }
}

/// An immutable lattice: node coordinates plus the full table of pairwise
/// squared latent distances. Safe to share between concurrent runs.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    points: Vec<[f64; 2]>,
    dist2: Vec<Vec<f64>>,
}

/// Builds the lattice described by `spec`.
///
/// Planar node (r, c) sits at `(lo + r*(hi-lo)/(rows-1), lo + c*(hi-lo)/(cols-1))`;
/// a degenerate axis (rows == 1 or cols == 1) collapses to the midpoint.
/// Toroidal nodes carry their integer indices as coordinates and distances
/// wrap: `min(|dr|, rows-|dr|)^2 + min(|dc|, cols-|dc|)^2`.
pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;

    let points: Vec<[f64; 2]> = match spec.topology {
        Topology::Planar => {
            let (lo, hi) = spec.coord_range;
            let axis = |i: usize, len: usize| -> f64 {
                if len == 1 {
                    (lo + hi) / 2.0
                } else {
                    lo + i as f64 * (hi - lo) / (len - 1) as f64
                }
            };
            (0..n)
                .map(|i| [axis(i / cols, rows), axis(i % cols, cols)])
                .collect()
        }
        Topology::Toroidal => (0..n)
            .map(|i| [(i / cols) as f64, (i % cols) as f64])
            .collect(),
    };

    let mut dist2 = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = match spec.topology {
                Topology::Planar => {
                    let dr = points[i][0] - points[j][0];
                    let dc = points[i][1] - points[j][1];
                    dr * dr + dc * dc
                }
                Topology::Toroidal => {
                    let dr = (i / cols).abs_diff(j / cols);
                    let dc = (i % cols).abs_diff(j % cols);
                    let dr = dr.min(rows - dr) as f64;
                    let dc = dc.min(cols - dc) as f64;
                    dr * dr + dc * dc
                }
            };
            dist2[i][j] = d;
            dist2[j][i] = d;
        }
    }

    Ok(Grid {
        spec: spec.clone(),
        points,
        dist2,
    })
}

impl Grid {
    /// Node count (rows * cols).
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn rows(&self) -> usize {
        self.spec.rows
    }

    pub fn cols(&self) -> usize {
        self.spec.cols
    }

    pub fn topology(&self) -> Topology {
        self.spec.topology
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Latent coordinates of node `i`.
    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    /// Squared latent distance between nodes `i` and `j`.
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        self.dist2[i][j]
    }

    /// One row of the distance table: squared distances of every node to `i`.
    pub fn dist2_row(&self, i: usize) -> &[f64] {
        &self.dist2[i]
    }

    /// Lattice-adjacent nodes of `i` (4-neighborhood, wrapping on a torus).
    /// Wrap neighbors that fold onto the node itself or onto an already
    /// listed node (1- or 2-long axes) are dropped.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        let n = self.n();
        if i >= n {
            return Err(VdsomError::IndexOutOfRange { index: i, nodes: n });
        }
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        let (r, c) = (i / cols, i % cols);
        let mut out = Vec::with_capacity(4);
        let mut push = |rr: usize, cc: usize| {
            let j = rr * cols + cc;
            if j != i && !out.contains(&j) {
                out.push(j);
            }
        };
        match self.spec.topology {
            Topology::Planar => {
                if r > 0 {
                    push(r - 1, c);
                }
                if r + 1 < rows {
                    push(r + 1, c);
                }
                if c > 0 {
                    push(r, c - 1);
                }
                if c + 1 < cols {
                    push(r, c + 1);
                }
            }
            Topology::Toroidal => {
                push((r + rows - 1) % rows, c);
                push((r + 1) % rows, c);
                push(r, (c + cols - 1) % cols);
                push(r, (c + 1) % cols);
            }
        }
        Ok(out)
    }

    /// Every lattice-adjacent pair (i, j) with i < j, each edge listed once.
    /// On a torus the wrap pairs are included.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.n() {
            for j in self.neighbors(i).expect("valid index") {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Lattice-adjacent pairs excluding toroidal wrap edges, for rendering.
    pub fn edges_without_wrap(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols));
                }
            }
        }
        edges
    }
}
