//! Study drivers behind the command line: configured runs with snapshot
//! output, refinement sweeps, the three-way decomposition comparison, and
//! a fast invariant check.
//!
//! Every driver consumes a `RunConfig` and reports plain data; file output
//! is limited to CSV writers so the callers stay scriptable. Error norms
//! are weighted discrete L2 norms, with weights from the trapezoidal rule
//! in 1D and from the per-node quadrature measures in 2D. Snapshot logs
//! use the plain root mean square over the written rows, so a reader can
//! recompute the logged value from the file alone.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::adi::{Domain2D, LineSource, Wave2D};
use crate::bc::{BcSpec, EndBc};
use crate::config::{BcKind, GeomKind, IcKind, MeshKind, RunConfig, SourceKind};
use crate::decomp::DdSolver;
use crate::error::{Error, Result};
use crate::geom::{EndTag, Geometry};
use crate::kernel::{ConvWeights, SchemeParams};
use crate::mesh::{ChebKind, Grid1D};
use crate::reference;
use crate::stepper::{amplification_check, SourceSpec, Stepper1D, WaveState1D};

/// Weighted discrete L2 distance `sqrt(sum w e^2 / sum w)`.
pub fn weighted_l2(num: &[f64], exact: &[f64], w: &[f64]) -> f64 {
    debug_assert_eq!(num.len(), exact.len());
    debug_assert_eq!(num.len(), w.len());
    let mut s = 0.0;
    let mut sw = 0.0;
    for i in 0..num.len() {
        let e = num[i] - exact[i];
        s += w[i] * e * e;
        sw += w[i];
    }
    if sw > 0.0 {
        (s / sw).sqrt()
    } else {
        0.0
    }
}

/// Plain root mean square, the norm logged with every snapshot.
pub fn rms(vals: &[f64]) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt()
}

/// Trapezoidal quadrature weights of a sorted node list.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for j in 0..n.saturating_sub(1) {
        let h = 0.5 * (xs[j + 1] - xs[j]);
        w[j] += h;
        w[j + 1] += h;
    }
    w
}

/// Number of steps a run takes: `t_final / dt`, rounded when the division
/// is essentially exact, otherwise rounded up so the final time is covered.
pub fn step_count(t_final: f64, dt: f64) -> u64 {
    let q = t_final / dt;
    let r = q.round();
    if (q - r).abs() < 1e-9 * q.max(1.0) {
        r as u64
    } else {
        q.ceil() as u64
    }
}

/// The four block composite mesh on `[a, b]`: a uniform quarter with `n`
/// cells, a quarter clustered toward the midpoint with `2n`, a uniform
/// quarter with `2n`, and a quarter clustered toward both of its ends with
/// `n`. Exercises abrupt width jumps at every interface.
pub fn composite_blocks(a: f64, b: f64, n: usize) -> Result<Vec<Grid1D>> {
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "the composite mesh needs n >= 4, got {n}"
        )));
    }
    let quarter = 0.25 * (b - a);
    let (q1, mid, q3) = (a + quarter, a + 2.0 * quarter, b - quarter);
    Ok(vec![
        Grid1D::uniform(a, q1, n)?,
        Grid1D::chebyshev(q1, mid, 2 * n, ChebKind::Half)?,
        Grid1D::uniform(mid, q3, 2 * n)?,
        Grid1D::chebyshev(q3, b, n, ChebKind::Full)?,
    ])
}

/// Concatenates abutting blocks into one grid, dropping each duplicated
/// interface node.
pub fn join_blocks(blocks: &[Grid1D]) -> Result<Grid1D> {
    let mut nodes = Vec::new();
    for (m, g) in blocks.iter().enumerate() {
        if m > 0 && g.a() != nodes[nodes.len() - 1] {
            return Err(Error::InvalidInput(
                "blocks must abut exactly at their interfaces".into(),
            ));
        }
        let skip = usize::from(m > 0);
        nodes.extend_from_slice(&g.nodes()[skip..]);
    }
    Grid1D::from_nodes(nodes)
}

fn blocks_for(cfg: &RunConfig) -> Result<Vec<Grid1D>> {
    match cfg.mesh {
        MeshKind::Uniform => Ok(vec![Grid1D::uniform(cfg.a, cfg.b, cfg.n)?]),
        MeshKind::Composite => composite_blocks(cfg.a, cfg.b, cfg.n),
    }
}

/// Spacing that `cfl` references: the width of the uniform cells. The
/// clustered composite blocks overshoot this near their coarse ends, but
/// the uniform width is the mesh's nominal resolution and the time step
/// follows it.
fn nominal_width(cfg: &RunConfig) -> f64 {
    match cfg.mesh {
        MeshKind::Uniform => (cfg.b - cfg.a) / cfg.n as f64,
        MeshKind::Composite => 0.25 * (cfg.b - cfg.a) / cfg.n as f64,
    }
}

fn bc_1d(kind: BcKind) -> Result<BcSpec> {
    Ok(match kind {
        BcKind::Dirichlet => BcSpec::new(EndBc::dirichlet_zero(), EndBc::dirichlet_zero())?,
        BcKind::Neumann => BcSpec::new(EndBc::neumann_zero(), EndBc::neumann_zero())?,
        BcKind::Periodic => BcSpec::periodic(),
        BcKind::Outflow => BcSpec::new(EndBc::Outflow, EndBc::Outflow)?,
    })
}

type Ic1D = (
    Box<dyn Fn(f64) -> f64>,
    Box<dyn Fn(f64) -> f64>,
    Option<Box<dyn Fn(f64) -> f64>>,
);

fn ic_1d(kind: IcKind) -> Result<Ic1D> {
    match kind {
        IcKind::Gaussian => Ok((
            Box::new(reference::gaussian_pulse),
            Box::new(|_| 0.0),
            Some(Box::new(reference::gaussian_pulse_d2)),
        )),
        IcKind::Zero => Ok((
            Box::new(|_| 0.0),
            Box::new(|_| 0.0),
            Some(Box::new(|_| 0.0)),
        )),
        _ => Err(Error::Config(
            "1D runs take `ic = gaussian` or `zero`".into(),
        )),
    }
}

enum Engine1D {
    Mono(Stepper1D, WaveState1D),
    Dd(DdSolver),
}

/// A configured 1D run, monolithic or decomposed.
pub struct Run1D {
    engine: Engine1D,
    xs: Vec<f64>,
    weights: Vec<f64>,
    dt: f64,
}

impl Run1D {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let blocks = blocks_for(cfg)?;
        let joined = join_blocks(&blocks)?;
        let dt = cfg.resolve_dt(nominal_width(cfg));
        let params = SchemeParams::new(cfg.beta, cfg.c, dt)?;
        let (f, g, fpp) = ic_1d(cfg.ic)?;

        let engine = if cfg.subdomains <= 1 {
            let stepper = Stepper1D::new(&joined, params, bc_1d(cfg.bc)?, SourceSpec::none())?;
            let fv: Vec<f64> = joined.nodes().iter().map(|&x| f(x)).collect();
            let gv: Vec<f64> = joined.nodes().iter().map(|&x| g(x)).collect();
            let fpv: Option<Vec<f64>> =
                fpp.as_ref().map(|d| joined.nodes().iter().map(|&x| d(x)).collect());
            let state = stepper.init_history(&joined, &fv, &gv, fpv.as_deref())?;
            Engine1D::Mono(stepper, state)
        } else {
            let mut dd = match cfg.mesh {
                MeshKind::Composite => {
                    if cfg.subdomains != blocks.len() {
                        return Err(Error::Config(format!(
                            "the composite mesh decomposes into {} subdomains, got {}",
                            blocks.len(),
                            cfg.subdomains
                        )));
                    }
                    DdSolver::from_meshes(blocks, params, bc_1d(cfg.bc)?)?
                }
                MeshKind::Uniform => {
                    if cfg.n % cfg.subdomains != 0 {
                        return Err(Error::Config(format!(
                            "`n` = {} is not divisible into {} subdomains",
                            cfg.n, cfg.subdomains
                        )));
                    }
                    let stride = cfg.n / cfg.subdomains;
                    let cuts: Vec<usize> =
                        (1..cfg.subdomains).map(|m| m * stride).collect();
                    DdSolver::split(&joined, &cuts, params, bc_1d(cfg.bc)?)?
                }
            };
            dd.init(&f, &g, fpp.as_deref())?;
            Engine1D::Dd(dd)
        };
        let xs = joined.nodes().to_vec();
        let weights = trapezoid_weights(&xs);
        Ok(Self { engine, xs, weights, dt })
    }

    pub fn step(&mut self) -> Result<()> {
        match &mut self.engine {
            Engine1D::Mono(stepper, state) => {
                stepper.step(state)?;
                state.check_finite()
            }
            Engine1D::Dd(dd) => {
                dd.step()?;
                dd.check_finite()
            }
        }
    }

    /// Current field on the joined node list.
    pub fn values(&self) -> Vec<f64> {
        match &self.engine {
            Engine1D::Mono(_, state) => state.u_curr.clone(),
            Engine1D::Dd(dd) => dd.gather().1,
        }
    }

    pub fn t(&self) -> f64 {
        match &self.engine {
            Engine1D::Mono(_, state) => state.t,
            Engine1D::Dd(dd) => dd.t,
        }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

fn geometry_for(cfg: &RunConfig) -> Result<Geometry> {
    let kind = cfg
        .geometry
        .ok_or_else(|| Error::Config("2D runs require `geometry`".into()))?;
    Ok(match kind {
        GeomKind::Rectangle => {
            let bc = match cfg.bc {
                BcKind::Dirichlet => EndTag::Dirichlet,
                BcKind::Neumann => EndTag::Neumann,
                _ => {
                    return Err(Error::Config(
                        "rectangle walls support `bc = dirichlet` or `neumann`".into(),
                    ))
                }
            };
            Geometry::Rectangle { lx: cfg.lx, ly: cfg.ly, bc }
        }
        GeomKind::Circle => Geometry::Circle { r: cfg.r },
        GeomKind::DoubleCircle => Geometry::DoubleCircle { r: cfg.r, gamma: cfg.gamma },
        GeomKind::QuarterCircle => Geometry::QuarterCircle { r: cfg.r },
        GeomKind::Slit => Geometry::SlitStrip {
            period: cfg.period,
            aperture: cfg.aperture,
            height: cfg.height,
        },
    })
}

type Field2D = Box<dyn Fn(f64, f64) -> f64>;

/// Initial displacement with its Laplacian and bilaplacian where analytic.
/// The standing modes are Laplacian eigenfunctions, so both are multiples
/// of the mode itself.
fn ic_2d(cfg: &RunConfig) -> Result<(Field2D, Option<Field2D>, Option<Field2D>)> {
    let rr = cfg.r;
    let gamma = cfg.gamma;
    fn eigen(
        f: impl Fn(f64, f64) -> f64 + Clone + 'static,
        rate: f64,
    ) -> (Field2D, Option<Field2D>, Option<Field2D>) {
        let l = f.clone();
        let l2 = f.clone();
        (
            Box::new(f),
            Some(Box::new(move |x, y| rate * l(x, y))),
            Some(Box::new(move |x, y| rate * rate * l2(x, y))),
        )
    }
    Ok(match cfg.ic {
        IcKind::Zero => eigen(|_, _| 0.0, 0.0),
        IcKind::CavityDirichlet => eigen(
            |x, y| reference::cavity_mode_dirichlet(x, y, 0.0, 1.0),
            reference::CAVITY_LAP_FACTOR,
        ),
        IcKind::CavityNeumann => eigen(
            |x, y| reference::cavity_mode_neumann(x, y, 0.0, 1.0),
            reference::CAVITY_LAP_FACTOR,
        ),
        IcKind::BesselMode => {
            let k = reference::DRUM_MODE_RATE / rr;
            eigen(
                move |x, y| reference::bessel_j0(k * (x * x + y * y).sqrt()),
                -k * k,
            )
        }
        IcKind::DoubleCircleBump => (
            Box::new(move |x, y| reference::double_circle_bump(x, y, gamma)),
            None,
            None,
        ),
        IcKind::Gaussian => {
            return Err(Error::Config("`ic = gaussian` is a 1D condition".into()))
        }
    })
}

/// Builds the 2D solver a config describes, initial state included.
pub fn build_wave(cfg: &RunConfig) -> Result<Wave2D> {
    let geom = geometry_for(cfg)?;
    let domain = Domain2D::build(geom, cfg.dx, cfg.dy)?;
    let dt = cfg.resolve_dt(cfg.dx.max(cfg.dy));
    let params = SchemeParams::new(cfg.beta, cfg.c, dt)?;
    let source = match cfg.source {
        SourceKind::None => None,
        SourceKind::SlitPlane => {
            let omega = 2.0 * std::f64::consts::PI * cfg.c / cfg.aperture;
            Some(LineSource {
                y_s: 0.0,
                sigma_prime: Arc::new(move |t: f64| -omega * (omega * t).sin()),
            })
        }
    };
    let mut wave = Wave2D::new(domain, params, source)?;
    let (f, lap, lap2) = ic_2d(cfg)?;
    wave.init(&*f, &|_, _| 0.0, lap.as_deref(), lap2.as_deref());
    Ok(wave)
}

/// One row of a refinement sweep.
#[derive(Clone, Copy, Debug)]
pub struct RefineRow {
    pub resolution: f64,
    pub error: f64,
    pub order: Option<f64>,
}

/// Fills observed orders from consecutive error ratios.
pub fn attach_orders(rows: &mut [RefineRow]) {
    for i in 1..rows.len() {
        let r = rows[i].resolution / rows[i - 1].resolution;
        let order = (rows[i - 1].error / rows[i].error).ln() / r.ln();
        rows[i].order = Some(order);
    }
    if let Some(first) = rows.first_mut() {
        first.order = None;
    }
}

/// Refinement sweep dispatcher; `levels` are resolutions to visit.
pub fn refine(cfg: &RunConfig, levels: &[usize]) -> Result<Vec<RefineRow>> {
    if levels.is_empty() {
        return Err(Error::Config("refinement needs at least one level".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("levels must increase".into()));
    }
    match cfg.dimension {
        1 => refine_pulse_1d(cfg, levels),
        _ => match cfg.geometry {
            Some(GeomKind::Rectangle) => refine_cavity(cfg, levels),
            Some(GeomKind::DoubleCircle) => refine_double_circle(cfg, levels),
            Some(GeomKind::QuarterCircle) => refine_quarter(cfg, levels),
            _ => Err(Error::Config(
                "no refinement study is defined for this geometry".into(),
            )),
        },
    }
}

/// 1D sweep over `n`: the traveling pulse against its free space solution,
/// worst step of the run. Meaningful under outflow ends, where the exact
/// solution never reflects.
fn refine_pulse_1d(cfg: &RunConfig, levels: &[usize]) -> Result<Vec<RefineRow>> {
    if cfg.ic != IcKind::Gaussian {
        return Err(Error::Config(
            "the 1D refinement study runs `ic = gaussian`".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in levels {
        let mut level_cfg = cfg.clone();
        level_cfg.n = n;
        let mut run = Run1D::build(&level_cfg)?;
        let steps = step_count(cfg.t_final, run.dt());
        let mut worst = 0.0f64;
        for _ in 0..steps {
            run.step()?;
            let t = run.t();
            let exact: Vec<f64> = run
                .xs()
                .iter()
                .map(|&x| reference::dalembert_gaussian(x, t, cfg.c))
                .collect();
            worst = worst.max(weighted_l2(&run.values(), &exact, run.weights()));
        }
        rows.push(RefineRow { resolution: n as f64, error: worst, order: None });
    }
    attach_orders(&mut rows);
    Ok(rows)
}

/// Cavity sweep: `dx = dy = 1/level`, error against the standing mode at
/// the final time.
fn refine_cavity(cfg: &RunConfig, levels: &[usize]) -> Result<Vec<RefineRow>> {
    let exact: fn(f64, f64, f64, f64) -> f64 = match cfg.ic {
        IcKind::CavityDirichlet => reference::cavity_mode_dirichlet,
        IcKind::CavityNeumann => reference::cavity_mode_neumann,
        _ => {
            return Err(Error::Config(
                "the cavity study runs `ic = cavity_dirichlet` or `cavity_neumann`".into(),
            ))
        }
    };
    let mut rows = Vec::new();
    for &level in levels {
        let mut level_cfg = cfg.clone();
        level_cfg.dx = 1.0 / level as f64;
        level_cfg.dy = level_cfg.dx;
        let mut wave = build_wave(&level_cfg)?;
        let steps = step_count(cfg.t_final, wave.params().dt);
        for _ in 0..steps {
            wave.step()?;
        }
        let t = wave.t();
        let dom = wave.domain();
        let exact_vals: Vec<f64> = dom
            .positions()
            .iter()
            .map(|&(x, y)| exact(x, y, t, cfg.c))
            .collect();
        let err = weighted_l2(wave.u(), &exact_vals, &dom.measures());
        rows.push(RefineRow { resolution: level as f64, error: err, order: None });
    }
    attach_orders(&mut rows);
    Ok(rows)
}

/// Comparison window of the self convergence study, counted back from the
/// final time.
const SELF_REF_WINDOW: f64 = 0.01;

fn capture_steps(wave: &mut Wave2D, wanted: &BTreeSet<u64>) -> Result<HashMap<u64, Vec<f64>>> {
    let mut out = HashMap::new();
    if wanted.contains(&0) {
        out.insert(0, wave.u().to_vec());
    }
    let last = wanted.iter().next_back().copied().unwrap_or(0);
    for n in 1..=last {
        wave.step()?;
        if wanted.contains(&n) {
            out.insert(n, wave.u().to_vec());
        }
    }
    Ok(out)
}

fn position_index(dom: &Domain2D) -> HashMap<(u64, u64), u32> {
    let mut map = HashMap::with_capacity(dom.n_nodes());
    for (i, &(x, y)) in dom.positions().iter().enumerate() {
        map.insert((x.to_bits(), y.to_bits()), i as u32);
    }
    map
}

/// Two colliding lobes on the double circle, measured against a once more
/// refined run of the same scheme. Levels multiply the base resolution and
/// must be powers of two so every spacing and step divides exactly; the
/// reference runs at four times the finest level. Matching nodes across
/// levels is bitwise, which the lattice construction guarantees.
fn refine_double_circle(cfg: &RunConfig, levels: &[usize]) -> Result<Vec<RefineRow>> {
    if cfg.ic != IcKind::DoubleCircleBump {
        return Err(Error::Config(
            "the double circle study runs `ic = double_circle_bump`".into(),
        ));
    }
    if levels.iter().any(|l| !l.is_power_of_two()) {
        return Err(Error::Config(
            "double circle levels must be powers of two".into(),
        ));
    }
    let dt_base = cfg.resolve_dt(cfg.dx.max(cfg.dy));
    let window_lo = cfg.t_final - SELF_REF_WINDOW;
    let samples = |dt: f64| -> Vec<u64> {
        let last = (cfg.t_final / dt + 1e-9).floor() as u64;
        let first = ((window_lo - 1e-12) / dt).ceil().max(1.0) as u64;
        (first..=last).collect()
    };

    let ref_mult = 4 * levels.iter().copied().max().unwrap();
    let mut ref_wanted = BTreeSet::new();
    for &level in levels {
        let ratio = (ref_mult / level) as u64;
        for n in samples(dt_base / level as f64) {
            ref_wanted.insert(n * ratio);
        }
    }

    let scaled = |cfg: &RunConfig, m: usize| -> RunConfig {
        let mut c = cfg.clone();
        c.dx = cfg.dx / m as f64;
        c.dy = cfg.dy / m as f64;
        c.dt = Some(dt_base / m as f64);
        c
    };

    let mut ref_wave = build_wave(&scaled(cfg, ref_mult))?;
    let ref_caps = capture_steps(&mut ref_wave, &ref_wanted)?;
    let ref_index = position_index(ref_wave.domain());

    let mut rows = Vec::new();
    for &level in levels {
        let mut wave = build_wave(&scaled(cfg, level))?;
        let ratio = (ref_mult / level) as u64;
        let wanted: BTreeSet<u64> = samples(dt_base / level as f64).into_iter().collect();
        let caps = capture_steps(&mut wave, &wanted)?;

        let dom = wave.domain();
        let ref_dom = ref_wave.domain();
        let measures = dom.measures();
        let mut pairs = Vec::new();
        for (i, &(x, y)) in dom.positions().iter().enumerate() {
            if dom.is_dirichlet(i as u32) {
                continue;
            }
            if let Some(&j) = ref_index.get(&(x.to_bits(), y.to_bits())) {
                if !ref_dom.is_dirichlet(j) {
                    pairs.push((i, j as usize, measures[i]));
                }
            }
        }

        let mut worst = 0.0f64;
        for (&n, u) in &caps {
            let r = &ref_caps[&(n * ratio)];
            let mut s = 0.0;
            let mut sw = 0.0;
            for &(i, j, w) in &pairs {
                let e = u[i] - r[j];
                s += w * e * e;
                sw += w;
            }
            worst = worst.max((s / sw).sqrt());
        }
        rows.push(RefineRow {
            resolution: level as f64 / cfg.dx,
            error: worst,
            order: None,
        });
    }
    attach_orders(&mut rows);
    Ok(rows)
}

/// Quarter disk with reflecting axes against the full disk, both carrying
/// the same radial mode; the difference at the final time measures how
/// faithfully the embedded walls realize the symmetry. Levels are
/// reciprocal spacings.
fn refine_quarter(cfg: &RunConfig, levels: &[usize]) -> Result<Vec<RefineRow>> {
    if cfg.ic != IcKind::BesselMode {
        return Err(Error::Config(
            "the quarter circle study runs `ic = bessel_mode`".into(),
        ));
    }
    let mut rows = Vec::new();
    for &level in levels {
        let mut quarter_cfg = cfg.clone();
        quarter_cfg.dx = 1.0 / level as f64;
        quarter_cfg.dy = quarter_cfg.dx;
        let mut full_cfg = quarter_cfg.clone();
        full_cfg.geometry = Some(GeomKind::Circle);

        let mut quarter = build_wave(&quarter_cfg)?;
        let mut full = build_wave(&full_cfg)?;
        let steps = step_count(cfg.t_final, quarter.params().dt);
        for _ in 0..steps {
            quarter.step()?;
            full.step()?;
        }

        let dom = quarter.domain();
        let full_dom = full.domain();
        let full_index = position_index(full_dom);
        let measures = dom.measures();
        let (dx, dy) = (dom.dx(), dom.dy());
        let mut s = 0.0;
        let mut sw = 0.0;
        for (i, &(x, y)) in dom.positions().iter().enumerate() {
            // The closed quadrant minus the arc: axis nodes carry the
            // Neumann walls and belong to the comparison.
            if dom.is_dirichlet(i as u32) || x > 0.5 * dx || y < -0.5 * dy {
                continue;
            }
            if let Some(&j) = full_index.get(&(x.to_bits(), y.to_bits())) {
                if !full_dom.is_dirichlet(j) {
                    let e = quarter.u()[i] - full.u()[j as usize];
                    s += measures[i] * e * e;
                    sw += measures[i];
                }
            }
        }
        rows.push(RefineRow {
            resolution: level as f64,
            error: (s / sw).sqrt(),
            order: None,
        });
    }
    attach_orders(&mut rows);
    Ok(rows)
}

/// The three way decomposition comparison at the config's resolution.
///
/// Runs the decomposed solver, the monolithic solver on the same joined
/// mesh, and a monolithic run on a domain extended by `c T` on both sides
/// so nothing returns from the far ends. The three errors separate what
/// the decomposition itself adds, what the outflow closure adds, and the
/// total distance from the free space solution. Every column is the worst
/// step of the run.
#[derive(Clone, Copy, Debug)]
pub struct DecompReport {
    pub n: usize,
    pub dd: f64,
    pub outflow: f64,
    pub total: f64,
}

pub fn decomp_compare(cfg: &RunConfig) -> Result<DecompReport> {
    if cfg.dimension != 1 || cfg.ic != IcKind::Gaussian {
        return Err(Error::Config(
            "the decomposition comparison is the 1D gaussian study".into(),
        ));
    }
    let blocks = blocks_for(cfg)?;
    let joined = join_blocks(&blocks)?;
    let dt = cfg.resolve_dt(nominal_width(cfg));
    let params = SchemeParams::new(cfg.beta, cfg.c, dt)?;

    let mut dd_cfg = cfg.clone();
    if dd_cfg.subdomains <= 1 {
        dd_cfg.subdomains = match cfg.mesh {
            MeshKind::Composite => blocks.len(),
            MeshKind::Uniform => 2,
        };
    }
    let mut dd = match Run1D::build(&dd_cfg)? {
        Run1D { engine: Engine1D::Dd(dd), .. } => dd,
        _ => unreachable!("subdomains > 1 builds the decomposed engine"),
    };

    let f: Vec<f64> = joined.nodes().iter().map(|&x| reference::gaussian_pulse(x)).collect();
    let g = vec![0.0; joined.len()];
    let fpp: Vec<f64> = joined.nodes().iter().map(|&x| reference::gaussian_pulse_d2(x)).collect();
    let mut mono = Stepper1D::new(&joined, params, bc_1d(cfg.bc)?, SourceSpec::none())?;
    let mut mono_state = mono.init_history(&joined, &f, &g, Some(&fpp))?;

    // The extended run meshes all of `[a - cT, b + cT]` uniformly at the
    // nominal spacing and keeps the same time step, so the far ends never
    // feed back into the interior within `T`.
    let reach = cfg.c * cfg.t_final;
    let h_ext = nominal_width(cfg);
    let pad_cells = ((reach / h_ext).ceil() as usize).max(4);
    let body_cells = (((cfg.b - cfg.a) / h_ext).round() as usize).max(1);
    let ext_a = cfg.a - pad_cells as f64 * h_ext;
    let ext_b = cfg.b + pad_cells as f64 * h_ext;
    let ext_grid = Grid1D::uniform(ext_a, ext_b, body_cells + 2 * pad_cells)?;
    let fe: Vec<f64> = ext_grid.nodes().iter().map(|&x| reference::gaussian_pulse(x)).collect();
    let ge = vec![0.0; ext_grid.len()];
    let fpe: Vec<f64> = ext_grid.nodes().iter().map(|&x| reference::gaussian_pulse_d2(x)).collect();
    let mut ext = Stepper1D::new(&ext_grid, params, bc_1d(BcKind::Dirichlet)?, SourceSpec::none())?;
    let mut ext_state = ext.init_history(&ext_grid, &fe, &ge, Some(&fpe))?;
    let stencil = cubic_samplers(&ext_grid, joined.nodes());

    let w = trapezoid_weights(joined.nodes());
    let steps = step_count(cfg.t_final, dt);
    let mut report = DecompReport { n: cfg.n, dd: 0.0, outflow: 0.0, total: 0.0 };
    for _ in 0..steps {
        dd.step()?;
        dd.check_finite()?;
        mono.step(&mut mono_state)?;
        ext.step(&mut ext_state)?;
        mono_state.check_finite()?;
        ext_state.check_finite()?;

        let (_, dvals) = dd.gather();
        let t = mono_state.t;
        let exact: Vec<f64> = joined
            .nodes()
            .iter()
            .map(|&x| reference::dalembert_gaussian(x, t, cfg.c))
            .collect();
        let restricted: Vec<f64> = stencil
            .iter()
            .map(|(base, c)| {
                let v = &ext_state.u_curr[*base..*base + 4];
                c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[3]
            })
            .collect();
        report.dd = report.dd.max(weighted_l2(&dvals, &mono_state.u_curr, &w));
        report.outflow = report
            .outflow
            .max(weighted_l2(&mono_state.u_curr, &restricted, &w));
        report.total = report.total.max(weighted_l2(&dvals, &exact, &w));
    }
    Ok(report)
}

/// Four point Lagrange samplers from a uniform grid onto arbitrary targets.
/// Targets that land on grid nodes come back exact.
fn cubic_samplers(grid: &Grid1D, targets: &[f64]) -> Vec<(usize, [f64; 4])> {
    let xs = grid.nodes();
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    targets
        .iter()
        .map(|&x| {
            let u = (x - xs[0]) / h;
            let base = (u.floor() as isize - 1).clamp(0, xs.len() as isize - 4) as usize;
            let s = u - base as f64;
            let mut c = [0.0; 4];
            for (j, cj) in c.iter_mut().enumerate() {
                let mut p = 1.0;
                for i in 0..4 {
                    if i != j {
                        p *= (s - i as f64) / (j as f64 - i as f64);
                    }
                }
                *cj = p;
            }
            (base, c)
        })
        .collect()
}

/// Long cavity run for stability probes; returns the largest `|u|` seen.
pub fn max_abs_over(cfg: &RunConfig, steps: u64) -> Result<f64> {
    let mut wave = build_wave(cfg)?;
    let mut peak = wave.max_abs();
    for _ in 0..steps {
        wave.step()?;
        peak = peak.max(wave.max_abs());
    }
    Ok(peak)
}

/// Runs a 2D config and records the quadrature weighted energy
/// `sum u^2 m` after every step.
pub fn run_energy(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let mut wave = build_wave(cfg)?;
    let m = wave.domain().measures();
    let steps = step_count(cfg.t_final, wave.params().dt);
    let mut trace = Vec::with_capacity(steps as usize + 1);
    let energy =
        |u: &[f64]| -> f64 { u.iter().zip(&m).map(|(v, w)| v * v * w).sum() };
    trace.push((0.0, energy(wave.u())));
    for _ in 0..steps {
        wave.step()?;
        trace.push((wave.t(), energy(wave.u())));
    }
    Ok(trace)
}

/// One snapshot written during a run.
#[derive(Clone, Debug)]
pub struct SnapshotRecord {
    pub t: f64,
    pub path: PathBuf,
    pub rms: f64,
}

/// Summary of a configured run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub steps: u64,
    pub t_end: f64,
    pub max_abs: f64,
    pub snapshots: Vec<SnapshotRecord>,
    pub energy_csv: Option<PathBuf>,
    pub warnings: Vec<String>,
}

fn write_snapshot_1d(path: &Path, xs: &[f64], u: &[f64]) -> Result<f64> {
    let mut out = String::from("x,u\n");
    for (x, v) in xs.iter().zip(u) {
        out.push_str(&format!("{x},{v}\n"));
    }
    fs::write(path, out)?;
    Ok(rms(u))
}

fn write_snapshot_2d(path: &Path, pos: &[(f64, f64)], u: &[f64]) -> Result<f64> {
    let mut out = String::from("x,y,u\n");
    for (&(x, y), v) in pos.iter().zip(u) {
        out.push_str(&format!("{x},{y},{v}\n"));
    }
    fs::write(path, out)?;
    Ok(rms(u))
}

/// Writes a refinement table as `resolution,error,order` rows; the first
/// row has no order.
pub fn write_refine_csv(path: &Path, rows: &[RefineRow]) -> Result<()> {
    let mut out = String::from("resolution,error,order\n");
    for row in rows {
        match row.order {
            Some(o) => out.push_str(&format!("{},{},{}\n", row.resolution, row.error, o)),
            None => out.push_str(&format!("{},{},\n", row.resolution, row.error)),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_decomp_csv(path: &Path, report: &DecompReport) -> Result<()> {
    let mut out = String::from("n,dd_error,outflow_error,total_error\n");
    out.push_str(&format!(
        "{},{},{},{}\n",
        report.n, report.dd, report.outflow, report.total
    ));
    fs::write(path, out)?;
    Ok(())
}

/// Runs a config to its final time, writing snapshots at the requested
/// times and the final state at the end.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    fs::create_dir_all(&cfg.output_dir)?;
    let mut snapshots = Vec::new();
    let mut next_snap = 0;

    match cfg.dimension {
        1 => {
            let mut run = Run1D::build(cfg)?;
            let steps = step_count(cfg.t_final, run.dt());
            let mut peak = 0.0f64;
            for _ in 0..steps {
                run.step()?;
                let t = run.t();
                peak = peak.max(run.values().iter().fold(0.0f64, |m, v| m.max(v.abs())));
                while next_snap < cfg.snapshot_times.len()
                    && cfg.snapshot_times[next_snap] <= t + 1e-9
                {
                    let path = cfg.output_dir.join(format!("snapshot_{next_snap}.csv"));
                    let r = write_snapshot_1d(&path, run.xs(), &run.values())?;
                    snapshots.push(SnapshotRecord { t, path, rms: r });
                    next_snap += 1;
                }
            }
            let path = cfg.output_dir.join("final.csv");
            let r = write_snapshot_1d(&path, run.xs(), &run.values())?;
            snapshots.push(SnapshotRecord { t: run.t(), path, rms: r });
            Ok(RunReport {
                steps,
                t_end: run.t(),
                max_abs: peak,
                snapshots,
                energy_csv: None,
                warnings: Vec::new(),
            })
        }
        _ => {
            let mut wave = build_wave(cfg)?;
            let warnings = wave.domain().warnings().to_vec();
            let measures = wave.domain().measures();
            let steps = step_count(cfg.t_final, wave.params().dt);
            let track_energy = cfg.source != SourceKind::None;
            let mut energy = Vec::new();
            if track_energy {
                let e: f64 = wave.u().iter().zip(&measures).map(|(v, w)| v * v * w).sum();
                energy.push((0.0, e));
            }
            let mut peak = wave.max_abs();
            for _ in 0..steps {
                wave.step()?;
                peak = peak.max(wave.max_abs());
                if track_energy {
                    let e: f64 =
                        wave.u().iter().zip(&measures).map(|(v, w)| v * v * w).sum();
                    energy.push((wave.t(), e));
                }
                let t = wave.t();
                while next_snap < cfg.snapshot_times.len()
                    && cfg.snapshot_times[next_snap] <= t + 1e-9
                {
                    let path = cfg.output_dir.join(format!("snapshot_{next_snap}.csv"));
                    let r = write_snapshot_2d(&path, wave.domain().positions(), wave.u())?;
                    snapshots.push(SnapshotRecord { t, path, rms: r });
                    next_snap += 1;
                }
            }
            let path = cfg.output_dir.join("final.csv");
            let r = write_snapshot_2d(&path, wave.domain().positions(), wave.u())?;
            snapshots.push(SnapshotRecord { t: wave.t(), path, rms: r });
            let energy_csv = if track_energy {
                let path = cfg.output_dir.join("energy.csv");
                let mut out = String::from("t,energy\n");
                for (t, e) in &energy {
                    out.push_str(&format!("{t},{e}\n"));
                }
                fs::write(&path, out)?;
                Some(path)
            } else {
                None
            };
            Ok(RunReport {
                steps,
                t_end: wave.t(),
                max_abs: peak,
                snapshots,
                energy_csv,
                warnings,
            })
        }
    }
}

/// One line of the built-in invariant check.
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Fast self contained invariant suite behind `check`; every entry runs in
/// well under a second.
pub fn self_check() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, pass: bool, detail: String| {
        out.push(CheckResult { name, pass, detail });
    };

    {
        // Weight branches agree where the series takes over.
        let lo = ConvWeights::new(0.5 - 1e-9);
        let hi = ConvWeights::new(0.5 + 1e-9);
        let gap = (lo.p - hi.p)
            .abs()
            .max((lo.q - hi.q).abs())
            .max((lo.r - hi.r).abs());
        push(
            "convolution weights are continuous across the series switch",
            gap < 1e-9,
            format!("largest branch gap {gap:.2e}"),
        );
    }

    {
        let grid = Grid1D::uniform(0.0, 1.0, 32).unwrap();
        let rhs = vec![-2.0; grid.len()];
        let bc = BcSpec::new(EndBc::neumann_zero(), EndBc::neumann_zero()).unwrap();
        let w = crate::adi::invert_helmholtz_line(&grid, &rhs, 20.0, &bc).unwrap();
        let worst = w.iter().fold(0.0f64, |m, v| m.max((v - 2.0).abs()));
        push(
            "helmholtz inversion is exact on constants",
            worst < 1e-12,
            format!("largest deviation {worst:.2e}"),
        );
    }

    {
        let mut worst = 0.0f64;
        for k in 0..=200 {
            let omega = 0.5 * k as f64;
            for rho in amplification_check(omega, 2.0, 1.0) {
                worst = worst.max((rho.norm() - 1.0).abs());
            }
        }
        push(
            "amplification factors sit on the unit circle",
            worst < 1e-12,
            format!("largest drift {worst:.2e}"),
        );
    }

    {
        // The decomposition must regroup the monolithic sweep exactly.
        let run = |subdomains: usize| -> Vec<f64> {
            let cfg = RunConfig::from_str(&format!(
                "dimension = 1\nic = gaussian\nbc = outflow\nn = 64\n\
                 subdomains = {subdomains}\nt_final = 0.5\ncfl = 1\n"
            ))
            .unwrap();
            let mut run = Run1D::build(&cfg).unwrap();
            for _ in 0..step_count(0.5, run.dt()) {
                run.step().unwrap();
            }
            run.values()
        };
        let mono = run(1);
        let split = run(4);
        let worst = mono
            .iter()
            .zip(&split)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        push(
            "decomposition reproduces the monolithic run",
            worst < 1e-11,
            format!("largest node gap {worst:.2e}"),
        );
    }

    {
        let cfg = RunConfig::from_str(
            "dimension = 2\ngeometry = rectangle\nbc = neumann\nic = zero\n\
             dx = 0.1\nt_final = 1\ncfl = 2\n",
        )
        .unwrap();
        let mut wave = build_wave(&cfg).unwrap();
        wave.init(&|_, _| 1.0, &|_, _| 0.0, Some(&|_, _| 0.0), None);
        for _ in 0..3 {
            wave.step().unwrap();
        }
        let worst = wave.u().iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        push(
            "constant state is a fixed point of the 2D sweep",
            worst < 1e-12,
            format!("largest deviation {worst:.2e}"),
        );
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_reproduce_the_span() {
        let grid = Grid1D::chebyshev(0.0, 2.0, 16, ChebKind::Full).unwrap();
        let w = trapezoid_weights(grid.nodes());
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn composite_blocks_abut_and_join() {
        let blocks = composite_blocks(-1.0, 1.0, 5).unwrap();
        assert_eq!(blocks.len(), 4);
        assert_eq!(
            blocks.iter().map(Grid1D::len).collect::<Vec<_>>(),
            vec![6, 11, 11, 6]
        );
        for pair in blocks.windows(2) {
            assert_eq!(pair[0].b(), pair[1].a());
        }
        let joined = join_blocks(&blocks).unwrap();
        assert_eq!(joined.len(), 6 + 10 + 10 + 5);
        assert_eq!(joined.a(), -1.0);
        assert_eq!(joined.b(), 1.0);
    }

    #[test]
    fn step_count_rounds_only_exact_divisions() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.0, 0.25), 4);
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(2.0, 2.0 / 509.0), 509);
    }

    #[test]
    fn observed_orders_match_hand_values() {
        let mut rows = vec![
            RefineRow { resolution: 20.0, error: 4e-3, order: None },
            RefineRow { resolution: 40.0, error: 1e-3, order: None },
            RefineRow { resolution: 60.0, error: 1e-3 / 1.5f64.powi(2), order: None },
        ];
        attach_orders(&mut rows);
        assert!(rows[0].order.is_none());
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-12);
        assert!((rows[2].order.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pulse_run_matches_the_free_space_solution() {
        let cfg = RunConfig::from_str(
            "dimension = 1\nic = gaussian\nbc = outflow\nmesh = composite\n\
             n = 24\ncfl = 1\nt_final = 0.4\n",
        )
        .unwrap();
        let mut run = Run1D::build(&cfg).unwrap();
        for _ in 0..step_count(cfg.t_final, run.dt()) {
            run.step().unwrap();
        }
        let t = run.t();
        let exact: Vec<f64> = run
            .xs()
            .iter()
            .map(|&x| reference::dalembert_gaussian(x, t, 1.0))
            .collect();
        let err = weighted_l2(&run.values(), &exact, run.weights());
        assert!(err < 2e-2, "pulse error {err}");
    }

    #[test]
    fn decomp_report_columns_are_ordered_sensibly() {
        let cfg = RunConfig::from_str(
            "dimension = 1\nic = gaussian\nbc = outflow\nmesh = composite\n\
             n = 10\nsubdomains = 4\ncfl = 1\nt_final = 0.5\n",
        )
        .unwrap();
        let report = decomp_compare(&cfg).unwrap();
        // Independently meshed subdomains add a real but small interface
        // error; the free space mismatch dominates on a mesh this coarse.
        assert!(report.dd > 0.0 && report.dd < report.total, "dd {}", report.dd);
        assert!(report.outflow > 0.0 && report.outflow < report.total);
        assert!(report.total < 0.1);
    }

    #[test]
    fn self_check_passes() {
        for check in self_check() {
            assert!(check.pass, "{}: {}", check.name, check.detail);
        }
    }

    #[test]
    fn run_writes_snapshots_that_recompute_their_norm() {
        let dir = std::env::temp_dir().join("adiwave-harness-run-test");
        let _ = fs::remove_dir_all(&dir);
        let cfg = RunConfig::from_str(&format!(
            "dimension = 1\nic = gaussian\nbc = dirichlet\nn = 32\ncfl = 1\n\
             t_final = 0.5\nsnapshot_times = 0.25\noutput_dir = {}\n",
            dir.display()
        ))
        .unwrap();
        let report = run(&cfg).unwrap();
        assert_eq!(report.snapshots.len(), 2);
        for snap in &report.snapshots {
            let text = fs::read_to_string(&snap.path).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some("x,u"));
            let us: Vec<f64> = lines
                .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
                .collect();
            assert!((rms(&us) - snap.rms).abs() <= 1e-12 * snap.rms.max(1.0));
        }
        let _ = fs::remove_dir_all(&dir);
    }
}
