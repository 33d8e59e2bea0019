//! One dimensional meshes and nodal second derivative stencils.
//!
//! A `Grid1D` is a strictly increasing list of nodes. Cells may vary freely
//! in width; the convolution weights absorb the nonuniformity, so no mesh
//! smoothness is assumed anywhere. The stencils built here approximate
//! `u''` at a node from its neighbors and are exact on quadratics (cubics
//! at the ends), which is what keeps the overall scheme second order.

use crate::{Error, Result};

/// Node distribution of the Chebyshev mesh builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChebKind {
    /// Quarter-circle map, nodes cluster toward the right endpoint.
    Half,
    /// Half-circle (Lobatto) map, nodes cluster toward both endpoints.
    Full,
}

/// Strictly increasing 1D mesh.
#[derive(Debug, Clone)]
pub struct Grid1D {
    nodes: Vec<f64>,
    widths: Vec<f64>,
}

impl Grid1D {
    /// Builds a grid from an already sorted node list.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "a grid needs at least 4 nodes, got {}",
                nodes.len()
            )));
        }
        if !nodes.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("grid nodes must be finite".into()));
        }
        let widths: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if widths.iter().any(|&h| h <= 0.0) {
            return Err(Error::InvalidInput(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        Ok(Self { nodes, widths })
    }

    /// Uniform mesh with `n` cells on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidInput(format!(
                "interval must satisfy a < b, got [{a}, {b}]"
            )));
        }
        let h = (b - a) / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|j| a + j as f64 * h).collect();
        *nodes.last_mut().unwrap() = b;
        Self::from_nodes(nodes)
    }

    /// Chebyshev mesh with `n` cells on `[a, b]`.
    pub fn chebyshev(a: f64, b: f64, n: usize, kind: ChebKind) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidInput(format!(
                "interval must satisfy a < b, got [{a}, {b}]"
            )));
        }
        let len = b - a;
        let mut nodes: Vec<f64> = (0..=n)
            .map(|j| {
                let t = j as f64 * std::f64::consts::PI / n as f64;
                match kind {
                    ChebKind::Half => a + len * (0.5 * t).cos(),
                    ChebKind::Full => a + len * 0.5 * (1.0 + t.cos()),
                }
            })
            .collect();
        nodes.reverse();
        nodes[0] = a;
        *nodes.last_mut().unwrap() = b;
        Self::from_nodes(nodes)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells, one less than the node count.
    pub fn n_cells(&self) -> usize {
        self.widths.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Cell widths; `widths()[c]` spans nodes `c` and `c + 1`.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn span(&self) -> f64 {
        self.b() - self.a()
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Nodal `u''` stencil, at most 4 points.
///
/// Indices address whatever value slice the caller hands to `apply`; for a
/// plain grid they are node indices, for subdomain solves they may point at
/// ghost slots appended past the owned range.
#[derive(Debug, Clone, Copy)]
pub struct D2Stencil {
    pub idx: [u32; 4],
    pub w: [f64; 4],
    pub len: u8,
}

impl D2Stencil {
    pub fn apply(&self, vals: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len as usize {
            acc += self.w[k] * vals[self.idx[k] as usize];
        }
        acc
    }
}

/// Second derivative of the quadratic through three nodes (constant in x).
fn d2_from3(x: [f64; 3]) -> [f64; 3] {
    let mut w = [0.0; 3];
    for i in 0..3 {
        let mut denom = 1.0;
        for k in 0..3 {
            if k != i {
                denom *= x[i] - x[k];
            }
        }
        w[i] = 2.0 / denom;
    }
    w
}

/// Second derivative at `at` of the cubic through four nodes.
fn d2_from4(x: [f64; 4], at: f64) -> [f64; 4] {
    let mut w = [0.0; 4];
    for i in 0..4 {
        let mut denom = 1.0;
        let mut others = 0.0;
        for k in 0..4 {
            if k != i {
                denom *= x[i] - x[k];
                others += x[k];
            }
        }
        w[i] = (6.0 * at - 2.0 * others) / denom;
    }
    w
}

/// Width ratio below which a neighbor is dropped from a centered stencil.
///
/// A cut cell can be arbitrarily short. Differencing across it amplifies
/// roundoff by the inverse width, and that noise would enter the integral
/// over the regular neighbor cell undamped. Falling back to a one-sided
/// stencil on the regular side keeps quadratic exactness and bounded weights.
const SHORT_CELL_RATIO: f64 = 1e-5;

/// Builds the `u''` stencil at node `j` of `grid`.
pub fn d2_row(grid: &Grid1D, j: usize) -> D2Stencil {
    let x = grid.nodes();
    let n = x.len() - 1;
    debug_assert!(n >= 3);
    if j == 0 {
        let w = d2_from4([x[0], x[1], x[2], x[3]], x[0]);
        return D2Stencil { idx: [0, 1, 2, 3], w, len: 4 };
    }
    if j == n {
        let w = d2_from4([x[n - 3], x[n - 2], x[n - 1], x[n]], x[n]);
        return D2Stencil {
            idx: [(n - 3) as u32, (n - 2) as u32, (n - 1) as u32, (n) as u32],
            w,
            len: 4,
        };
    }
    let hl = x[j] - x[j - 1];
    let hr = x[j + 1] - x[j];
    if hl < SHORT_CELL_RATIO * hr && j + 2 <= n {
        let w = d2_from3([x[j], x[j + 1], x[j + 2]]);
        return D2Stencil {
            idx: [j as u32, (j + 1) as u32, (j + 2) as u32, 0],
            w: [w[0], w[1], w[2], 0.0],
            len: 3,
        };
    }
    if hr < SHORT_CELL_RATIO * hl && j >= 2 {
        let w = d2_from3([x[j - 2], x[j - 1], x[j]]);
        return D2Stencil {
            idx: [(j - 2) as u32, (j - 1) as u32, j as u32, 0],
            w: [w[0], w[1], w[2], 0.0],
            len: 3,
        };
    }
    let w = d2_from3([x[j - 1], x[j], x[j + 1]]);
    D2Stencil {
        idx: [(j - 1) as u32, j as u32, (j + 1) as u32, 0],
        w: [w[0], w[1], w[2], 0.0],
        len: 3,
    }
}

/// Stencils for every node of the grid.
pub fn d2_rows(grid: &Grid1D) -> Vec<D2Stencil> {
    (0..grid.len()).map(|j| d2_row(grid, j)).collect()
}
