//! Boundary closures for the integral solution.
//!
//! The particular integral `I[u]` satisfies the modified Helmholtz equation
//! but not the boundary conditions; the two homogeneous solutions
//! `exp(-alpha (x - a))` and `exp(-alpha (b - x))` carry coefficients A and
//! B that close the system. Each supported condition contributes one linear
//! equation in (A, B); this module assembles the two end equations and
//! solves the 2x2 system, which permits mixing condition kinds freely
//! between the two ends. Periodic conditions couple the ends and are
//! handled as a unit.

use crate::kernel::{OutflowWeights, SchemeParams};
use crate::{Error, Result};
use std::sync::Arc;

/// Time-dependent boundary data (value for Dirichlet, spatial derivative
/// for Neumann).
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Returns a provider that is identically zero.
pub fn zero_data() -> TimeFn {
    Arc::new(|_| 0.0)
}

/// Condition applied at one endpoint.
#[derive(Clone)]
pub enum EndBc {
    /// Prescribed value `U(t)`.
    Dirichlet(TimeFn),
    /// Prescribed spatial derivative `V(t) = u_x(t)` at the endpoint.
    Neumann(TimeFn),
    /// Ends identified with each other; must be used on both ends.
    Periodic,
    /// Free radiation out of the domain, no incoming waves.
    Outflow,
    /// Coefficient supplied externally (domain decomposition interfaces).
    Transmission,
}

impl std::fmt::Debug for EndBc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EndBc::Dirichlet(_) => "Dirichlet",
            EndBc::Neumann(_) => "Neumann",
            EndBc::Periodic => "Periodic",
            EndBc::Outflow => "Outflow",
            EndBc::Transmission => "Transmission",
        };
        f.write_str(name)
    }
}

impl EndBc {
    pub fn dirichlet_zero() -> Self {
        EndBc::Dirichlet(zero_data())
    }

    pub fn neumann_zero() -> Self {
        EndBc::Neumann(zero_data())
    }
}

/// Boundary conditions for a line.
#[derive(Debug, Clone)]
pub struct BcSpec {
    pub left: EndBc,
    pub right: EndBc,
}

impl BcSpec {
    pub fn new(left: EndBc, right: EndBc) -> Result<Self> {
        let lp = matches!(left, EndBc::Periodic);
        let rp = matches!(right, EndBc::Periodic);
        if lp != rp {
            return Err(Error::InvalidInput(
                "periodic conditions must be applied to both ends".into(),
            ));
        }
        Ok(Self { left, right })
    }

    pub fn periodic() -> Self {
        Self { left: EndBc::Periodic, right: EndBc::Periodic }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.left, EndBc::Periodic)
    }
}

/// Time history coefficients of the outflow recurrence, one pair per line.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutflowState {
    pub a_prev: f64,
    pub b_prev: f64,
}

/// Everything a closure can depend on at one time level.
///
/// `i_a`, `i_b` are the particular solution at the endpoints including any
/// source contribution; `u_*` and `u_prev_*` are endpoint traces of the two
/// stored time levels, used only by outflow ends.
#[derive(Debug, Clone, Copy)]
pub struct ClosureCtx {
    pub i_a: f64,
    pub i_b: f64,
    pub mu: f64,
    pub t_next: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub u_prev_a: f64,
    pub u_prev_b: f64,
    /// Externally supplied coefficients for transmission ends.
    pub trans_a: f64,
    pub trans_b: f64,
}

/// One end equation `ca * A + cb * B = rhs`.
#[derive(Debug, Clone, Copy)]
struct EndRow {
    ca: f64,
    cb: f64,
    rhs: f64,
}

/// Combination of the three newest boundary values entering the Dirichlet
/// and Neumann data terms.
fn data_term(f: &TimeFn, params: &SchemeParams, t_next: f64) -> f64 {
    let b2 = params.beta * params.beta;
    f(t_next) + (b2 - 2.0) * f(t_next - params.dt) + f(t_next - 2.0 * params.dt)
}

fn left_row(
    bc: &EndBc,
    ctx: &ClosureCtx,
    params: &SchemeParams,
    ow: &OutflowWeights,
    state: &OutflowState,
) -> EndRow {
    let b2 = params.beta * params.beta;
    match bc {
        EndBc::Dirichlet(f) => {
            let w = ctx.i_a - 2.0 / b2 * data_term(f, params, ctx.t_next);
            EndRow { ca: 1.0, cb: ctx.mu, rhs: -w }
        }
        EndBc::Neumann(f) => {
            let w = ctx.i_a - 2.0 / (params.alpha * b2) * data_term(f, params, ctx.t_next);
            EndRow { ca: 1.0, cb: -ctx.mu, rhs: w }
        }
        EndBc::Outflow => {
            let w = ow.d * state.a_prev
                + ow.cap0 * ctx.i_a
                + ow.cap1 * ctx.u_a
                + ow.cap2 * ctx.u_prev_a;
            EndRow { ca: 1.0 - ow.cap0, cb: -ow.cap0 * ctx.mu, rhs: w }
        }
        EndBc::Transmission => EndRow { ca: 1.0, cb: 0.0, rhs: ctx.trans_a },
        EndBc::Periodic => unreachable!("periodic closures bypass row assembly"),
    }
}

fn right_row(
    bc: &EndBc,
    ctx: &ClosureCtx,
    params: &SchemeParams,
    ow: &OutflowWeights,
    state: &OutflowState,
) -> EndRow {
    let b2 = params.beta * params.beta;
    match bc {
        EndBc::Dirichlet(f) => {
            let w = ctx.i_b - 2.0 / b2 * data_term(f, params, ctx.t_next);
            EndRow { ca: ctx.mu, cb: 1.0, rhs: -w }
        }
        EndBc::Neumann(f) => {
            let w = ctx.i_b + 2.0 / (params.alpha * b2) * data_term(f, params, ctx.t_next);
            EndRow { ca: -ctx.mu, cb: 1.0, rhs: w }
        }
        EndBc::Outflow => {
            let w = ow.d * state.b_prev
                + ow.cap0 * ctx.i_b
                + ow.cap1 * ctx.u_b
                + ow.cap2 * ctx.u_prev_b;
            EndRow { ca: -ow.cap0 * ctx.mu, cb: 1.0 - ow.cap0, rhs: w }
        }
        EndBc::Transmission => EndRow { ca: 0.0, cb: 1.0, rhs: ctx.trans_b },
        EndBc::Periodic => unreachable!("periodic closures bypass row assembly"),
    }
}

/// Solves for the homogeneous coefficients of one line and one time level.
///
/// Returns `(A, B)` and advances `state` when an end is outflow. The same
/// `OutflowWeights` serve both ends; they depend only on `beta`.
pub fn solve_closure(
    bc: &BcSpec,
    ctx: &ClosureCtx,
    params: &SchemeParams,
    ow: &OutflowWeights,
    state: &mut OutflowState,
) -> Result<(f64, f64)> {
    if bc.is_periodic() {
        let denom = 1.0 - ctx.mu;
        if denom <= 0.0 {
            return Err(Error::InvalidInput(
                "periodic closure is singular (mu >= 1)".into(),
            ));
        }
        return Ok((ctx.i_b / denom, ctx.i_a / denom));
    }
    let lr = left_row(&bc.left, ctx, params, ow, state);
    let rr = right_row(&bc.right, ctx, params, ow, state);
    let det = lr.ca * rr.cb - lr.cb * rr.ca;
    if det.abs() < 1e-300 {
        return Err(Error::Config(
            "boundary closure system is singular".into(),
        ));
    }
    let a = (lr.rhs * rr.cb - lr.cb * rr.rhs) / det;
    let b = (lr.ca * rr.rhs - lr.rhs * rr.ca) / det;
    if matches!(bc.left, EndBc::Outflow) {
        state.a_prev = a;
    }
    if matches!(bc.right, EndBc::Outflow) {
        state.b_prev = b;
    }
    Ok((a, b))
}

/// Convenience wrappers with the classical closed forms, used directly by
/// tests and by callers that know both ends share one kind.
pub fn dirichlet_coeffs(
    i_a: f64,
    i_b: f64,
    left: &TimeFn,
    right: &TimeFn,
    params: &SchemeParams,
    mu: f64,
    t_next: f64,
) -> (f64, f64) {
    let b2 = params.beta * params.beta;
    let wa = i_a - 2.0 / b2 * data_term(left, params, t_next);
    let wb = i_b - 2.0 / b2 * data_term(right, params, t_next);
    let denom = 1.0 - mu * mu;
    (-(wa - mu * wb) / denom, -(wb - mu * wa) / denom)
}

pub fn neumann_coeffs(
    i_a: f64,
    i_b: f64,
    left: &TimeFn,
    right: &TimeFn,
    params: &SchemeParams,
    mu: f64,
    t_next: f64,
) -> (f64, f64) {
    let b2 = params.beta * params.beta;
    let wa = i_a - 2.0 / (params.alpha * b2) * data_term(left, params, t_next);
    let wb = i_b + 2.0 / (params.alpha * b2) * data_term(right, params, t_next);
    let denom = 1.0 - mu * mu;
    ((wa + mu * wb) / denom, (wb + mu * wa) / denom)
}

pub fn periodic_coeffs(i_a: f64, i_b: f64, mu: f64) -> (f64, f64) {
    (i_b / (1.0 - mu), i_a / (1.0 - mu))
}

/// Outflow closure at both ends; returns `(A, B)` and the advanced state.
pub fn outflow_coeffs(
    i_a: f64,
    i_b: f64,
    u_ends: (f64, f64),
    u_prev_ends: (f64, f64),
    state: OutflowState,
    ow: &OutflowWeights,
    mu: f64,
) -> (f64, f64, OutflowState) {
    let wa = ow.d * state.a_prev + ow.cap0 * i_a + ow.cap1 * u_ends.0 + ow.cap2 * u_prev_ends.0;
    let wb = ow.d * state.b_prev + ow.cap0 * i_b + ow.cap1 * u_ends.1 + ow.cap2 * u_prev_ends.1;
    let g = 1.0 - ow.cap0;
    let det = g * g - (ow.cap0 * mu) * (ow.cap0 * mu);
    let a = (wa * g + ow.cap0 * mu * wb) / det;
    let b = (wb * g + ow.cap0 * mu * wa) / det;
    (a, b, OutflowState { a_prev: a, b_prev: b })
}
