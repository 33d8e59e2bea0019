//! Fast O(N) convolution with the exponential kernel.
//!
//! The particular solution of the modified Helmholtz operator is
//! `I[u](x) = alpha * Integral_a^b u(y) exp(-alpha|x - y|) dy`. Splitting
//! the kernel at `x` gives a left and a right oriented integral, each of
//! which satisfies a one-cell recurrence: attenuate the running integral by
//! the cell's kernel decay and add the local contribution. The local
//! contribution integrates the compact quadratic interpolant exactly, which
//! is what the `ConvWeights` encode. Everything here is a plain sequential
//! scan, exact in the recurrence direction, so the cost is O(N) with no
//! linear algebra.

use crate::kernel::ConvWeights;
use crate::mesh::{d2_rows, D2Stencil, Grid1D};
use crate::{Error, Result};

/// Per-cell sweep coefficients with the curvature weight premultiplied by
/// the squared cell width, so a sweep touches nothing but this table.
#[derive(Debug, Clone, Copy)]
struct CellW {
    d: f64,
    p: f64,
    q: f64,
    rh2: f64,
}

/// Directed integrals of one convolution.
///
/// `i[j] = il[j] + ir[j]` always; `il[0] = 0` and `ir[last] = 0` since no
/// mass lies beyond the ends.
#[derive(Debug, Clone)]
pub struct ConvResult {
    pub i: Vec<f64>,
    pub il: Vec<f64>,
    pub ir: Vec<f64>,
}

impl ConvResult {
    pub fn zeros(n: usize) -> Self {
        Self { i: vec![0.0; n], il: vec![0.0; n], ir: vec![0.0; n] }
    }
}

/// Precomputed sweep data for one (node set, alpha) pair.
///
/// Plans are immutable after construction and shared freely across steps;
/// for a fixed time step `alpha` never changes, so all exponentials and
/// stencils are computed exactly once.
#[derive(Debug, Clone)]
pub struct ConvPlan {
    pub alpha: f64,
    nodes: Vec<f64>,
    cells: Vec<CellW>,
    d2: Vec<D2Stencil>,
    /// Expected length of the value slice handed to `convolve_into`;
    /// exceeds the node count when stencils address ghost slots.
    ext_len: usize,
    /// exp(-alpha (x_j - a)) per node.
    efold_l: Vec<f64>,
    /// exp(-alpha (b - x_j)) per node.
    efold_r: Vec<f64>,
}

impl ConvPlan {
    /// Plan for a self-contained grid; stencils come from the grid itself.
    pub fn new(grid: &Grid1D, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kernel rate must be positive and finite, got {alpha}"
            )));
        }
        Ok(Self::from_parts(
            grid.nodes().to_vec(),
            alpha,
            d2_rows(grid),
            grid.len(),
        ))
    }

    /// Plan whose curvature stencils are supplied by the caller and may
    /// address ghost slots appended past the owned nodes. Used by the
    /// domain decomposition to keep interface stencils identical to the
    /// undecomposed ones.
    pub fn with_stencils(
        nodes: Vec<f64>,
        alpha: f64,
        d2: Vec<D2Stencil>,
        ext_len: usize,
    ) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kernel rate must be positive and finite, got {alpha}"
            )));
        }
        if d2.len() != nodes.len() || ext_len < nodes.len() {
            return Err(Error::InvalidInput(
                "stencil table must cover exactly the owned nodes".into(),
            ));
        }
        Ok(Self::from_parts(nodes, alpha, d2, ext_len))
    }

    fn from_parts(nodes: Vec<f64>, alpha: f64, d2: Vec<D2Stencil>, ext_len: usize) -> Self {
        let a = nodes[0];
        let b = *nodes.last().unwrap();
        let cells: Vec<CellW> = nodes
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                let cw = ConvWeights::new(alpha * h);
                CellW { d: cw.d, p: cw.p, q: cw.q, rh2: cw.r * h * h }
            })
            .collect();
        let efold_l = nodes.iter().map(|&x| (-alpha * (x - a)).exp()).collect();
        let efold_r = nodes.iter().map(|&x| (-alpha * (b - x)).exp()).collect();
        Self { alpha, nodes, cells, d2, ext_len, efold_l, efold_r }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Length of the value slice `convolve_into` expects.
    pub fn ext_len(&self) -> usize {
        self.ext_len
    }

    /// Applies the curvature stencil of node `j` to a value slice.
    pub fn d2_apply(&self, j: usize, vals: &[f64]) -> f64 {
        self.d2[j].apply(vals)
    }

    /// Kernel attenuation across the whole span, `exp(-alpha (b - a))`.
    pub fn mu(&self) -> f64 {
        self.efold_l[self.nodes.len() - 1]
    }

    /// Local cell integrals of the interpolant through `vals`.
    ///
    /// `jl[j]` integrates over the cell left of node `j` (zero at `j = 0`),
    /// `jr[j]` over the cell right of node `j` (zero at the last node).
    /// `upp` is scratch for the nodal second derivatives.
    pub fn local_into(
        &self,
        vals: &[f64],
        jl: &mut [f64],
        jr: &mut [f64],
        upp: &mut [f64],
    ) {
        let n = self.nodes.len();
        debug_assert_eq!(vals.len(), self.ext_len);
        debug_assert!(jl.len() == n && jr.len() == n && upp.len() == n);
        for j in 0..n {
            upp[j] = self.d2[j].apply(vals);
        }
        jl[0] = 0.0;
        jr[n - 1] = 0.0;
        for j in 1..n {
            let c = &self.cells[j - 1];
            jl[j] = c.p * vals[j] + c.q * vals[j - 1] + c.rh2 * upp[j];
        }
        for j in 0..n - 1 {
            let c = &self.cells[j];
            jr[j] = c.p * vals[j] + c.q * vals[j + 1] + c.rh2 * upp[j];
        }
    }

    /// Runs both directed recurrences, writing into `out`.
    ///
    /// `scratch` must hold at least `len` slots; it carries the nodal
    /// second derivatives between the two loops.
    pub fn convolve_into(&self, vals: &[f64], out: &mut ConvResult, scratch: &mut Vec<f64>) {
        let n = self.nodes.len();
        scratch.resize(n, 0.0);
        // il and ir double as jl/jr storage: each recurrence consumes its
        // local term exactly at the position it was written.
        let (il, ir) = (&mut out.il, &mut out.ir);
        self.local_into(vals, il, ir, scratch);
        let mut acc = 0.0;
        for j in 1..n {
            acc = self.cells[j - 1].d * acc + il[j];
            il[j] = acc;
        }
        acc = 0.0;
        for j in (0..n - 1).rev() {
            acc = self.cells[j].d * acc + ir[j];
            ir[j] = acc;
        }
        for j in 0..n {
            out.i[j] = il[j] + ir[j];
        }
    }

    /// Convenience wrapper allocating the result.
    pub fn convolve(&self, vals: &[f64]) -> ConvResult {
        let mut out = ConvResult::zeros(self.nodes.len());
        let mut scratch = Vec::new();
        self.convolve_into(vals, &mut out, &mut scratch);
        out
    }

    /// `out[j] = i[j] + A exp(-alpha (x_j - a)) + B exp(-alpha (b - x_j))`.
    pub fn assemble_into(&self, i: &[f64], a_coef: f64, b_coef: f64, out: &mut [f64]) {
        for j in 0..self.nodes.len() {
            out[j] = i[j] + a_coef * self.efold_l[j] + b_coef * self.efold_r[j];
        }
    }
}

/// One-shot convolution of nodal values against the kernel.
pub fn fast_convolve(u: &[f64], grid: &Grid1D, alpha: f64) -> Result<ConvResult> {
    if u.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "value count {} does not match node count {}",
            u.len(),
            grid.len()
        )));
    }
    let plan = ConvPlan::new(grid, alpha)?;
    Ok(plan.convolve(u))
}

/// One-shot local cell integrals (the directed compact quadrature terms).
pub fn local_integrals(u: &[f64], grid: &Grid1D, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "value count {} does not match node count {}",
            u.len(),
            grid.len()
        )));
    }
    let plan = ConvPlan::new(grid, alpha)?;
    let n = grid.len();
    let mut jl = vec![0.0; n];
    let mut jr = vec![0.0; n];
    let mut upp = vec![0.0; n];
    plan.local_into(u, &mut jl, &mut jr, &mut upp);
    Ok((jl, jr))
}

/// Adds the homogeneous solutions to a particular integral.
pub fn assemble(
    conv: &ConvResult,
    a_coef: f64,
    b_coef: f64,
    grid: &Grid1D,
    alpha: f64,
) -> Result<Vec<f64>> {
    if conv.i.len() != grid.len() {
        return Err(Error::InvalidInput(
            "convolution result does not match the grid".into(),
        ));
    }
    let plan = ConvPlan::new(grid, alpha)?;
    let mut out = vec![0.0; grid.len()];
    plan.assemble_into(&conv.i, a_coef, b_coef, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Analytic `I[u]` for polynomial `u` via the antiderivative of
    /// `u(y) exp(-alpha (x - y))` (left part) and its mirror. For
    /// `u = c0 + c1 y + c2 y^2` each directed integral is available in
    /// closed form by repeated integration by parts.
    fn analytic_poly_conv(c: [f64; 3], a: f64, b: f64, alpha: f64, x: f64) -> f64 {
        // alpha Integral_a^x u(y) e^{-alpha(x-y)} dy with antiderivative
        // evaluation: Integral u(y) e^{alpha y} dy =
        // e^{alpha y} (u/alpha - u'/alpha^2 + u''/alpha^3).
        let g = |y: f64| {
            let u = c[0] + c[1] * y + c[2] * y * y;
            let up = c[1] + 2.0 * c[2] * y;
            let upp = 2.0 * c[2];
            u / alpha - up / (alpha * alpha) + upp / (alpha * alpha * alpha)
        };
        // Left: alpha e^{-alpha x}[e^{alpha y} g(y)]_a^x. Factor the
        // exponentials to avoid overflow for large alpha spans.
        let left = alpha * (g(x) - (-alpha * (x - a)).exp() * g(a));
        let gm = |y: f64| {
            let u = c[0] + c[1] * y + c[2] * y * y;
            let up = c[1] + 2.0 * c[2] * y;
            let upp = 2.0 * c[2];
            -u / alpha - up / (alpha * alpha) - upp / (alpha * alpha * alpha)
        };
        let right = alpha * ((-alpha * (b - x)).exp() * gm(b) - gm(x));
        left + right
    }

    #[test]
    fn constant_field_matches_closed_form() {
        let grid = Grid1D::uniform(-1.0, 2.0, 57).unwrap();
        let alpha = 3.7;
        let u = vec![1.0; grid.len()];
        let res = fast_convolve(&u, &grid, alpha).unwrap();
        for (j, &x) in grid.nodes().iter().enumerate() {
            let exact = 2.0 - (-alpha * (x + 1.0)).exp() - (-alpha * (2.0 - x)).exp();
            assert_relative_eq!(res.i[j], exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn split_identity_and_end_conditions() {
        let grid = Grid1D::chebyshev(0.0, 1.0, 24, crate::mesh::ChebKind::Full).unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|&x| (3.0 * x).sin()).collect();
        let res = fast_convolve(&u, &grid, 11.0).unwrap();
        assert_eq!(res.il[0], 0.0);
        assert_eq!(*res.ir.last().unwrap(), 0.0);
        for j in 0..grid.len() {
            assert_relative_eq!(res.i[j], res.il[j] + res.ir[j], max_relative = 1e-14);
        }
    }

    #[test]
    fn quadratics_convolve_exactly_on_nonuniform_mesh() {
        let nodes = vec![0.0, 0.07, 0.21, 0.3, 0.55, 0.6, 0.85, 1.0];
        let grid = Grid1D::from_nodes(nodes).unwrap();
        let c = [0.3, -1.1, 2.4];
        for alpha in [0.7, 5.0, 40.0] {
            let u: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| c[0] + c[1] * x + c[2] * x * x)
                .collect();
            let res = fast_convolve(&u, &grid, alpha).unwrap();
            for (j, &x) in grid.nodes().iter().enumerate() {
                let exact = analytic_poly_conv(c, 0.0, 1.0, alpha, x);
                assert_relative_eq!(res.i[j], exact, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn local_integrals_of_squares_match_antiderivative() {
        let grid = Grid1D::uniform(0.0, 1.0, 16).unwrap();
        let alpha = 9.0;
        let u: Vec<f64> = grid.nodes().iter().map(|&x| x * x).collect();
        let (_, jr) = local_integrals(&u, &grid, alpha).unwrap();
        // J^R_j = alpha Integral_{x_j}^{x_{j+1}} y^2 e^{-alpha(y - x_j)} dy.
        for j in 0..grid.len() - 1 {
            let xj = grid.node(j);
            let h = grid.widths()[j];
            let g = |y: f64| {
                -(y * y) / alpha - 2.0 * y / (alpha * alpha) - 2.0 / (alpha * alpha * alpha)
            };
            let exact = alpha * ((-alpha * h).exp() * g(xj + h) - g(xj));
            assert_relative_eq!(jr[j], exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn assemble_adds_homogeneous_decay() {
        let grid = Grid1D::uniform(-1.0, 1.0, 10).unwrap();
        let alpha = 2.0;
        let conv = ConvResult::zeros(grid.len());
        let w = assemble(&conv, 1.0, 0.5, &grid, alpha).unwrap();
        for (j, &x) in grid.nodes().iter().enumerate() {
            let exact = (-alpha * (x + 1.0)).exp() + 0.5 * (-alpha * (1.0 - x)).exp();
            assert_relative_eq!(w[j], exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn consistency_with_second_difference_at_large_alpha() {
        // alpha^2 (I - 2u)/2 approaches the centered second difference as
        // alpha grows on a fixed mesh.
        let grid = Grid1D::uniform(0.0, 1.0, 100).unwrap();
        let u: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| (2.0 * std::f64::consts::PI * x).sin())
            .collect();
        let dx = 0.01;
        let mut prev_gap = f64::INFINITY;
        for alpha in [1e2, 1e3, 1e4] {
            let res = fast_convolve(&u, &grid, alpha).unwrap();
            let mut gap: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for j in 40..=60 {
                let lap = alpha * alpha * (res.i[j] - 2.0 * u[j]) / 2.0;
                let fd = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (dx * dx);
                gap = gap.max((lap - fd).abs());
                scale = scale.max(fd.abs());
            }
            let rel = gap / scale;
            assert!(rel < prev_gap, "gap must shrink as alpha grows");
            prev_gap = rel;
            if alpha == 1e4 {
                assert!(rel <= 1e-6, "relative gap {rel} at alpha = 1e4");
            }
        }
    }

    proptest! {
        #[test]
        fn convolution_is_linear(
            seed in proptest::collection::vec(0.02f64..0.6, 6..20),
            au in -2.0f64..2.0,
            bv in -2.0f64..2.0,
        ) {
            let mut nodes = vec![0.0];
            for d in &seed {
                nodes.push(nodes.last().unwrap() + d);
            }
            let grid = Grid1D::from_nodes(nodes).unwrap();
            let u: Vec<f64> = grid.nodes().iter().map(|&x| (1.7 * x).sin()).collect();
            let v: Vec<f64> = grid.nodes().iter().map(|&x| (0.4 * x).cos()).collect();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| au * a + bv * b).collect();
            let alpha = 4.0;
            let ru = fast_convolve(&u, &grid, alpha).unwrap();
            let rv = fast_convolve(&v, &grid, alpha).unwrap();
            let rm = fast_convolve(&mix, &grid, alpha).unwrap();
            for j in 0..grid.len() {
                let lin = au * ru.i[j] + bv * rv.i[j];
                prop_assert!((rm.i[j] - lin).abs() <= 1e-11 * (1.0 + lin.abs()));
            }
        }

        #[test]
        fn convolution_stays_bounded_by_data(
            n in 8usize..48,
            alpha in 0.5f64..80.0,
        ) {
            // The kernel has unit mass, so |I| cannot exceed 2 max|u| by
            // more than the quadratic interpolation overshoot.
            let grid = Grid1D::uniform(0.0, 1.0, n).unwrap();
            let u: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| (std::f64::consts::PI * x).sin().powi(2))
                .collect();
            let res = fast_convolve(&u, &grid, alpha).unwrap();
            for &v in &res.i {
                prop_assert!(v.abs() <= 2.5);
            }
        }
    }
}
