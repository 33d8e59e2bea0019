//! Domain decomposition of the 1D solve.
//!
//! The directed convolution recurrences restart cleanly at any interior
//! point: the integral over everything left of a subdomain reaches it as a
//! single attenuated scalar. One step therefore needs only two scalars per
//! subdomain sent to a coordinator, a recurrence over the M coarse cells,
//! and two scalars back; the per-node work stays entirely local.
//!
//! Two ways to build a decomposition:
//!
//! * [`DdSolver::split`] cuts one global grid at chosen nodes. Interface
//!   curvature stencils still see across the cut through ghost values, so
//!   the decomposed run reproduces the monolithic run to roundoff.
//! * [`DdSolver::from_meshes`] joins independently meshed subdomains. Each
//!   subdomain is self-contained (one-sided stencils at its ends), which
//!   communicates nothing but the step scalars and introduces a second
//!   order interface error.

use crate::bc::{BcSpec, ClosureCtx, EndBc, OutflowState};
use crate::conv::{ConvPlan, ConvResult};
use crate::kernel::{OutflowWeights, SchemeParams};
use crate::mesh::{d2_row, Grid1D};
use crate::{Error, Result};
use rayon::prelude::*;

/// One subdomain: its plan, its two stored time levels, and the scalars it
/// exchanges with the coordinator each step.
pub struct Subdomain {
    pub grid: Grid1D,
    plan: ConvPlan,
    pub u_curr: Vec<f64>,
    pub u_prev: Vec<f64>,
    /// Working copy of the field with ghost slots appended.
    vals_ext: Vec<f64>,
    conv: ConvResult,
    scratch: Vec<f64>,
    w: Vec<f64>,
    /// Sent up: local convolution at the right end (left characteristic).
    jl_out: f64,
    /// Sent up: local convolution at the left end (right characteristic).
    jr_out: f64,
    /// Received: homogeneous coefficients for the local assembly.
    a_m: f64,
    b_m: f64,
}

impl Subdomain {
    fn new(grid: Grid1D, plan: ConvPlan) -> Self {
        let n = grid.len();
        let ext = plan.ext_len();
        Self {
            grid,
            plan,
            u_curr: vec![0.0; n],
            u_prev: vec![0.0; n],
            vals_ext: vec![0.0; ext],
            conv: ConvResult::zeros(n),
            scratch: Vec::new(),
            w: vec![0.0; n],
            jl_out: 0.0,
            jr_out: 0.0,
            a_m: 0.0,
            b_m: 0.0,
        }
    }

    fn len(&self) -> usize {
        self.grid.len()
    }
}

/// Where a ghost slot's value comes from: (subdomain, local node index).
#[derive(Debug, Clone, Copy)]
struct GhostSrc {
    sub: usize,
    local: usize,
    slot: usize,
}

/// Coarse-level data: one cell per subdomain.
struct Coarse {
    /// Kernel attenuation per coarse cell, exp(-alpha |subdomain m|).
    d: Vec<f64>,
    /// Attenuation from the global left end to interface m.
    prefix: Vec<f64>,
    /// Attenuation from interface m+1 to the global right end.
    suffix: Vec<f64>,
}

impl Coarse {
    fn new(spans: &[f64], alpha: f64) -> Self {
        let m = spans.len();
        let d: Vec<f64> = spans.iter().map(|&s| (-alpha * s).exp()).collect();
        let mut prefix = vec![1.0; m + 1];
        for k in 0..m {
            prefix[k + 1] = prefix[k] * d[k];
        }
        let mut suffix = vec![1.0; m + 1];
        for k in (0..m).rev() {
            suffix[k] = suffix[k + 1] * d[k];
        }
        Self { d, prefix, suffix }
    }

    fn mu_global(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }
}

/// Parallel multi-subdomain stepper presenting the same trajectory
/// semantics as a single `Stepper1D`.
pub struct DdSolver {
    pub params: SchemeParams,
    bc: BcSpec,
    ow: OutflowWeights,
    subs: Vec<Subdomain>,
    coarse: Coarse,
    ghosts: Vec<GhostSrc>,
    outflow: OutflowState,
    pub t: f64,
    pub n: u64,
}

impl DdSolver {
    /// Splits one global grid at the given interior node indices.
    ///
    /// Each cut node is carried by both neighbors. Curvature stencils near
    /// a cut keep their monolithic shape and read the missing neighbors as
    /// ghost values, so the decomposition is an exact regrouping of the
    /// monolithic sweep.
    pub fn split(
        grid: &Grid1D,
        cuts: &[usize],
        params: SchemeParams,
        bc: BcSpec,
    ) -> Result<Self> {
        let n_nodes = grid.len();
        let mut sorted = cuts.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.iter().any(|&c| c == 0 || c >= n_nodes - 1) {
            return Err(Error::InvalidInput(
                "cut indices must be strictly interior nodes".into(),
            ));
        }
        if bc.is_periodic() {
            return Err(Error::InvalidInput(
                "periodic conditions are not supported under decomposition".into(),
            ));
        }
        let mut bounds = vec![0usize];
        bounds.extend_from_slice(&sorted);
        bounds.push(n_nodes - 1);
        let mut subs = Vec::new();
        let mut ghosts = Vec::new();
        let owner = |g: usize| -> (usize, usize) {
            // Owner for ghost reads: the subdomain whose interior holds g.
            for m in 0..bounds.len() - 1 {
                if g >= bounds[m] && g < bounds[m + 1] {
                    return (m, g - bounds[m]);
                }
            }
            (bounds.len() - 2, g - bounds[bounds.len() - 2])
        };
        for m in 0..bounds.len() - 1 {
            let (s, e) = (bounds[m], bounds[m + 1]);
            let nodes = grid.nodes()[s..=e].to_vec();
            let n_local = nodes.len();
            if n_local < 4 {
                return Err(Error::InvalidInput(
                    "each subdomain needs at least 4 nodes".into(),
                ));
            }
            // Remap global stencils: owned nodes keep their offsets, and
            // up to two nodes past either end become ghost slots.
            let mut rows = Vec::with_capacity(n_local);
            for g in s..=e {
                let mut row = d2_row(grid, g);
                for k in 0..row.len as usize {
                    let gi = row.idx[k] as usize;
                    row.idx[k] = if (s..=e).contains(&gi) {
                        (gi - s) as u32
                    } else {
                        let slot = if gi + 1 == s {
                            0
                        } else if gi + 2 == s {
                            1
                        } else if gi == e + 1 {
                            2
                        } else if gi == e + 2 {
                            3
                        } else {
                            return Err(Error::InvalidInput(
                                "stencil reaches beyond ghost range".into(),
                            ));
                        };
                        let (src_sub, local) = owner(gi);
                        ghosts.push(GhostSrc { sub: src_sub, local, slot: m * 4 + slot });
                        (n_local + slot) as u32
                    };
                }
                rows.push(row);
            }
            let plan = ConvPlan::with_stencils(nodes.clone(), params.alpha, rows, n_local + 4)?;
            subs.push(Subdomain::new(Grid1D::from_nodes(nodes)?, plan));
        }
        ghosts.dedup_by_key(|g| g.slot);
        let spans: Vec<f64> = subs.iter().map(|s| s.grid.span()).collect();
        let coarse = Coarse::new(&spans, params.alpha);
        Ok(Self {
            ow: OutflowWeights::new(params.beta),
            params,
            bc,
            subs,
            coarse,
            ghosts,
            outflow: OutflowState::default(),
            t: 0.0,
            n: 0,
        })
    }

    /// Joins independently meshed subdomains whose ends abut.
    ///
    /// Every subdomain uses its own one-sided end stencils; nothing but
    /// the per-step scalars crosses an interface.
    pub fn from_meshes(grids: Vec<Grid1D>, params: SchemeParams, bc: BcSpec) -> Result<Self> {
        if grids.is_empty() {
            return Err(Error::InvalidInput("need at least one subdomain".into()));
        }
        if bc.is_periodic() {
            return Err(Error::InvalidInput(
                "periodic conditions are not supported under decomposition".into(),
            ));
        }
        for w in grids.windows(2) {
            let gap = (w[1].a() - w[0].b()).abs();
            if gap > 1e-12 * w[0].span().max(w[1].span()) {
                return Err(Error::InvalidInput(format!(
                    "subdomains must abut: {} vs {}",
                    w[0].b(),
                    w[1].a()
                )));
            }
        }
        let mut subs = Vec::new();
        for grid in grids {
            let plan = ConvPlan::new(&grid, params.alpha)?;
            subs.push(Subdomain::new(grid, plan));
        }
        let spans: Vec<f64> = subs.iter().map(|s| s.grid.span()).collect();
        let coarse = Coarse::new(&spans, params.alpha);
        Ok(Self {
            ow: OutflowWeights::new(params.beta),
            params,
            bc,
            subs,
            coarse,
            ghosts: Vec::new(),
            outflow: OutflowState::default(),
            t: 0.0,
            n: 0,
        })
    }

    pub fn n_subdomains(&self) -> usize {
        self.subs.len()
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subs
    }

    /// Samples initial displacement and velocity (and optionally an exact
    /// second derivative) to build the two starting levels.
    pub fn init<F, G>(&mut self, f: F, g: G, fpp: Option<&dyn Fn(f64) -> f64>) -> Result<()>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        for sub in &mut self.subs {
            for (j, &x) in sub.grid.nodes().iter().enumerate() {
                sub.u_curr[j] = f(x);
            }
        }
        // Ghost-extended samples give interface stencils their monolithic
        // values in split mode; from_meshes has no ghosts to fill.
        self.fill_ghosts();
        let dt = self.params.dt;
        let c2 = self.params.c * self.params.c;
        for sub in &mut self.subs {
            let n = sub.len();
            sub.vals_ext[..n].copy_from_slice(&sub.u_curr);
            for (j, &x) in sub.grid.nodes().iter().enumerate() {
                let upp = match fpp {
                    Some(h) => h(x),
                    None => sub.plan.d2_apply(j, &sub.vals_ext),
                };
                sub.u_prev[j] = f(x) - dt * g(x) + 0.5 * dt * dt * c2 * upp;
            }
        }
        self.t = 0.0;
        self.n = 0;
        self.outflow = OutflowState::default();
        Ok(())
    }

    fn fill_ghosts(&mut self) {
        if self.ghosts.is_empty() {
            return;
        }
        let vals: Vec<(usize, usize, f64)> = self
            .ghosts
            .iter()
            .map(|g| {
                let v = self.subs[g.sub].u_curr[g.local];
                (g.slot / 4, g.slot % 4, v)
            })
            .collect();
        for (m, slot, v) in vals {
            let n = self.subs[m].len();
            self.subs[m].vals_ext[n + slot] = v;
        }
    }

    /// Advances every subdomain one time level.
    pub fn step(&mut self) -> Result<()> {
        let p = self.params;
        let t_next = self.t + p.dt;
        self.fill_ghosts();

        // Phase 1: local sweeps, embarrassingly parallel.
        self.subs.par_iter_mut().for_each(|sub| {
            let n = sub.len();
            sub.vals_ext[..n].copy_from_slice(&sub.u_curr);
            let (vals, conv, scratch) = (&sub.vals_ext, &mut sub.conv, &mut sub.scratch);
            sub.plan.convolve_into(vals, conv, scratch);
            sub.jl_out = conv.i[n - 1];
            sub.jr_out = conv.i[0];
        });

        // Phase 2: coarse recurrences and the global closure, sequential
        // in index order for determinism.
        let m_subs = self.subs.len();
        let mut il = vec![0.0; m_subs + 1];
        for m in 1..=m_subs {
            il[m] = self.coarse.d[m - 1] * il[m - 1] + self.subs[m - 1].jl_out;
        }
        let mut ir = vec![0.0; m_subs + 1];
        for m in (0..m_subs).rev() {
            ir[m] = self.coarse.d[m] * ir[m + 1] + self.subs[m].jr_out;
        }
        let last = &self.subs[m_subs - 1];
        let ctx = ClosureCtx {
            i_a: ir[0],
            i_b: il[m_subs],
            mu: self.coarse.mu_global(),
            t_next,
            u_a: self.subs[0].u_curr[0],
            u_b: *last.u_curr.last().unwrap(),
            u_prev_a: self.subs[0].u_prev[0],
            u_prev_b: *last.u_prev.last().unwrap(),
            trans_a: 0.0,
            trans_b: 0.0,
        };
        let (a_glob, b_glob) =
            crate::bc::solve_closure(&self.bc, &ctx, &p, &self.ow, &mut self.outflow)?;
        for m in 0..m_subs {
            self.subs[m].a_m = il[m] + a_glob * self.coarse.prefix[m];
            self.subs[m].b_m = ir[m + 1] + b_glob * self.coarse.suffix[m + 1];
        }

        // Phase 3: local assembly and update, parallel again.
        let b2 = p.beta * p.beta;
        self.subs.par_iter_mut().for_each(|sub| {
            let n = sub.len();
            let (a_m, b_m) = (sub.a_m, sub.b_m);
            sub.plan.assemble_into(&sub.conv.i, a_m, b_m, &mut sub.w);
            for j in 0..n {
                sub.u_prev[j] =
                    -(b2 - 2.0) * sub.u_curr[j] - sub.u_prev[j] + 0.5 * b2 * sub.w[j];
            }
            std::mem::swap(&mut sub.u_prev, &mut sub.u_curr);
        });

        // Reconcile the duplicated interface nodes.
        for m in 0..m_subs - 1 {
            let left = *self.subs[m].u_curr.last().unwrap();
            let right = self.subs[m + 1].u_curr[0];
            let avg = 0.5 * (left + right);
            *self.subs[m].u_curr.last_mut().unwrap() = avg;
            self.subs[m + 1].u_curr[0] = avg;
        }
        if let EndBc::Dirichlet(f) = &self.bc.left {
            self.subs[0].u_curr[0] = f(t_next);
        }
        if let EndBc::Dirichlet(f) = &self.bc.right {
            *self.subs[m_subs - 1].u_curr.last_mut().unwrap() = f(t_next);
        }
        self.t = t_next;
        self.n += 1;
        Ok(())
    }

    /// Collects the global trajectory, keeping one copy of each interface
    /// node.
    pub fn gather(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for (m, sub) in self.subs.iter().enumerate() {
            let skip = usize::from(m > 0);
            xs.extend_from_slice(&sub.grid.nodes()[skip..]);
            us.extend_from_slice(&sub.u_curr[skip..]);
        }
        (xs, us)
    }

    pub fn check_finite(&self) -> Result<()> {
        for sub in &self.subs {
            if !sub.u_curr.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { step: self.n, t: self.t });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BcSpec;
    use crate::stepper::{SourceSpec, Stepper1D};

    fn gaussian(x: f64) -> f64 {
        (-36.0 * x * x).exp()
    }

    #[test]
    fn split_matches_monolithic_over_many_steps() {
        let grid = Grid1D::uniform(-1.0, 1.0, 80).unwrap();
        let params = SchemeParams::new(2.0, 1.0, 0.02).unwrap();
        let bc = || BcSpec::new(EndBc::Outflow, EndBc::Outflow).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|&x| gaussian(x)).collect();
        let zeros = vec![0.0; grid.len()];

        for cuts in [vec![40usize], vec![20, 40, 60]] {
            let mut dd = DdSolver::split(&grid, &cuts, params, bc()).unwrap();
            dd.init(gaussian, |_| 0.0, None).unwrap();
            let mut mono = Stepper1D::new(&grid, params, bc(), SourceSpec::none()).unwrap();
            let mut state = mono.init_history(&grid, &f, &zeros, None).unwrap();
            for _ in 0..100 {
                mono.step(&mut state).unwrap();
                dd.step().unwrap();
            }
            let (xs, us) = dd.gather();
            assert_eq!(xs.len(), grid.len());
            let mut worst = 0.0f64;
            for j in 0..grid.len() {
                worst = worst.max((us[j] - state.u_curr[j]).abs());
            }
            assert!(
                worst <= 1e-11,
                "split-vs-monolithic deviation {worst} with {} cuts",
                cuts.len()
            );
        }
    }

    #[test]
    fn single_subdomain_degenerates_to_monolithic() {
        let grid = Grid1D::uniform(0.0, 1.0, 32).unwrap();
        let params = SchemeParams::new(2.0, 1.0, 0.01).unwrap();
        let bc = BcSpec::new(EndBc::dirichlet_zero(), EndBc::dirichlet_zero()).unwrap();
        let mut dd = DdSolver::from_meshes(vec![grid.clone()], params, bc.clone()).unwrap();
        let pi = std::f64::consts::PI;
        dd.init(|x| (pi * x).sin(), |_| 0.0, None).unwrap();

        let mut mono = Stepper1D::new(&grid, params, bc, SourceSpec::none()).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|&x| (pi * x).sin()).collect();
        let zeros = vec![0.0; grid.len()];
        let mut state = mono.init_history(&grid, &f, &zeros, None).unwrap();
        for _ in 0..50 {
            mono.step(&mut state).unwrap();
            dd.step().unwrap();
        }
        let (_, us) = dd.gather();
        for j in 0..grid.len() {
            assert!((us[j] - state.u_curr[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let grid = Grid1D::uniform(-1.0, 1.0, 24).unwrap();
        let params = SchemeParams::new(2.0, 1.0, 0.05).unwrap();
        let bc = BcSpec::new(EndBc::Outflow, EndBc::Outflow).unwrap();
        let mut dd = DdSolver::split(&grid, &[12], params, bc).unwrap();
        dd.init(|_| 0.0, |_| 0.0, None).unwrap();
        for _ in 0..20 {
            dd.step().unwrap();
        }
        let (_, us) = dd.gather();
        assert!(us.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn independent_meshes_stay_close_to_monolithic() {
        // Heterogeneous subdomains: the interface defect must stay small
        // (second order), not machine precision.
        let params = SchemeParams::new(2.0, 1.0, 0.01).unwrap();
        let bc = || BcSpec::new(EndBc::Outflow, EndBc::Outflow).unwrap();
        let g0 = Grid1D::uniform(-1.0, 0.0, 60).unwrap();
        let g1 = Grid1D::chebyshev(0.0, 1.0, 80, crate::mesh::ChebKind::Full).unwrap();
        let mut dd = DdSolver::from_meshes(vec![g0.clone(), g1.clone()], params, bc()).unwrap();
        dd.init(gaussian, |_| 0.0, None).unwrap();

        let mut nodes = g0.nodes().to_vec();
        nodes.extend_from_slice(&g1.nodes()[1..]);
        let joined = Grid1D::from_nodes(nodes).unwrap();
        let mut mono = Stepper1D::new(&joined, params, bc(), SourceSpec::none()).unwrap();
        let f: Vec<f64> = joined.nodes().iter().map(|&x| gaussian(x)).collect();
        let zeros = vec![0.0; joined.len()];
        let mut state = mono.init_history(&joined, &f, &zeros, None).unwrap();
        for _ in 0..100 {
            mono.step(&mut state).unwrap();
            dd.step().unwrap();
        }
        let (_, us) = dd.gather();
        let mut worst = 0.0f64;
        for j in 0..joined.len() {
            worst = worst.max((us[j] - state.u_curr[j]).abs());
        }
        assert!(worst > 1e-12, "heterogeneous interfaces should differ from monolithic");
        assert!(worst < 1e-3, "interface defect too large: {worst}");
    }

    #[test]
    fn rejects_bad_configurations() {
        let grid = Grid1D::uniform(0.0, 1.0, 10).unwrap();
        let params = SchemeParams::new(2.0, 1.0, 0.01).unwrap();
        assert!(DdSolver::split(&grid, &[0], params, BcSpec::periodic()).is_err());
        let bc = BcSpec::new(EndBc::Outflow, EndBc::Outflow).unwrap();
        assert!(DdSolver::split(&grid, &[0], params, bc.clone()).is_err());
        assert!(DdSolver::split(&grid, &[9], params, bc.clone()).is_err());
        assert!(DdSolver::split(&grid, &[2], params, bc.clone()).is_err());
        let g0 = Grid1D::uniform(0.0, 0.4, 8).unwrap();
        let g1 = Grid1D::uniform(0.5, 1.0, 8).unwrap();
        assert!(DdSolver::from_meshes(vec![g0, g1], params, bc).is_err());
    }
}
