//! Moments and quadrature weights of the exponential kernel.
//!
//! Every integral the solver needs reduces to moments of `exp(-nu*z)` over
//! the unit interval,
//!
//! ```text
//!     E_m(nu) = nu * Integral_0^1 (z^m / m!) exp(-nu*z) dz.
//! ```
//!
//! The closed forms for these moments subtract nearly equal terms, so for
//! small `nu` they are evaluated by series instead. The same care goes into
//! the per-cell convolution weights and the outflow extrapolation weights,
//! which are the only consumers of `E_m` inside the solver.

use crate::{Error, Result};

/// Scheme-wide constants for one time step size.
///
/// `beta` controls dissipation of the time discretization; the scheme is
/// unconditionally stable for `0 < beta <= 2`. `alpha = beta / (c * dt)` is
/// the kernel decay rate used by all convolutions of the step.
#[derive(Debug, Clone, Copy)]
pub struct SchemeParams {
    pub beta: f64,
    pub c: f64,
    pub dt: f64,
    pub alpha: f64,
}

impl SchemeParams {
    pub fn new(beta: f64, c: f64, dt: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 2.0) {
            return Err(Error::InvalidInput(format!(
                "beta must lie in (0, 2], got {beta}"
            )));
        }
        if !(c > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wave speed and time step must be positive, got c = {c}, dt = {dt}"
            )));
        }
        Ok(Self { beta, c, dt, alpha: beta / (c * dt) })
    }
}

/// Normalized exponential moment `E_m(nu)` for `0 <= m <= 3`, `nu > 0`.
///
/// Closed form `E_m = nu^-m (1 - exp(-nu) * sum_{l<=m} nu^l / l!)` cancels
/// catastrophically as `nu -> 0`; below `nu = 2` the alternating series
/// `E_m = sum_k (-1)^k nu^{k+1} / (m! k! (m+k+1))` is used instead.
pub fn exp_moment(m: u32, nu: f64) -> f64 {
    debug_assert!(m <= 3, "moments above E_3 are never needed");
    debug_assert!(nu > 0.0);
    if m == 0 {
        // E_0 = 1 - exp(-nu), stable at any nu via expm1.
        return -(-nu).exp_m1();
    }
    if nu < 2.0 {
        let mfact = [1.0, 1.0, 2.0, 6.0][m as usize];
        let mut term = nu / (mfact * (m as f64 + 1.0));
        let mut sum = term;
        for k in 1..60 {
            let kf = k as f64;
            term *= -nu / kf * (m as f64 + kf) / (m as f64 + kf + 1.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let mut poly = 1.0;
    let mut pow = 1.0;
    let mut fact = 1.0;
    for l in 1..=m {
        pow *= nu;
        fact *= l as f64;
        poly += pow / fact;
    }
    (1.0 - (-nu).exp() * poly) / nu.powi(m as i32)
}

/// Weights for integrating a quadratic interpolant against the kernel over
/// one mesh cell of scaled width `nu = alpha * h`.
///
/// With `u` the nodal value at the near end, `v` at the far end and `upp`
/// the second derivative, the one-sided cell integral is
/// `p * u + q * v + r * nu^2 / alpha^2 * upp` after the caller restores the
/// `h^2` scaling. The identities `p + q = 1 - d`, `p = E_0 - E_1`,
/// `q = E_1` and `r = E_2 - E_1 / 2` hold to roundoff.
#[derive(Debug, Clone, Copy)]
pub struct ConvWeights {
    /// Kernel attenuation over the cell, `exp(-nu)`.
    pub d: f64,
    /// Weight of the nodal value at the endpoint the integral is anchored to.
    pub p: f64,
    /// Weight of the nodal value at the opposite end of the cell.
    pub q: f64,
    /// Weight of the curvature contribution, to be scaled by `h^2`.
    pub r: f64,
}

impl ConvWeights {
    pub fn new(nu: f64) -> Self {
        debug_assert!(nu > 0.0, "cell width must be positive");
        if nu < 0.5 {
            // The closed forms lose digits as nu -> 0 (nine of them by
            // nu = 1e-3). The moment series carries full precision and the
            // weights are short combinations of well separated moments.
            let d = (-nu).exp();
            let e1 = exp_moment(1, nu);
            let p = exp_moment(0, nu) - e1;
            let q = e1;
            let r = exp_moment(2, nu) - 0.5 * e1;
            return Self { d, p, q, r };
        }
        Self::closed_form(nu)
    }

    /// Direct evaluation of the closed forms. Accurate for `nu` of order
    /// one and above; kept public as a cross-check for the series branch.
    pub fn closed_form(nu: f64) -> Self {
        let d = (-nu).exp();
        let em0 = -(-nu).exp_m1();
        let p = 1.0 - em0 / nu;
        let q = -d + em0 / nu;
        let r = em0 / (nu * nu) - (1.0 + d) / (2.0 * nu);
        Self { d, p, q, r }
    }
}

/// Extrapolation weights for the outflow (absorbing) boundary recurrence.
///
/// `gamma0..gamma2` weight the two newest boundary traces of the field and
/// the incoming convolution; `cap0..cap2` are the combinations that appear
/// once the update formula is folded in. All are functions of `beta` alone
/// and satisfy `gamma0 + gamma1 + gamma2 = 1 - exp(-beta)`.
#[derive(Debug, Clone, Copy)]
pub struct OutflowWeights {
    /// Attenuation of the boundary coefficient over one step, `exp(-beta)`.
    pub d: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub cap0: f64,
    pub cap1: f64,
    pub cap2: f64,
}

impl OutflowWeights {
    pub fn new(beta: f64) -> Self {
        debug_assert!(beta > 0.0);
        let d = (-beta).exp();
        // gamma0 = E_2 - E_1/2 equals the cell curvature weight r(beta);
        // gamma2 - gamma0 = E_1; the sum pins gamma1. These forms stay
        // accurate at small beta where the direct expressions cancel.
        let e1 = exp_moment(1, beta);
        let gamma0 = ConvWeights::new(beta).r;
        let gamma2 = gamma0 + e1;
        let gamma1 = -(-beta).exp_m1() - gamma0 - gamma2;
        let b2 = beta * beta;
        let cap0 = 0.5 * b2 * gamma0;
        let cap1 = gamma1 - gamma0 * (b2 - 2.0);
        let cap2 = e1;
        Self { d, gamma0, gamma1, gamma2, cap0, cap1, cap2 }
    }
}
