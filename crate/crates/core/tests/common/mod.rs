//! Shared oracles for the integration tests.
//!
//! Everything here is deliberately independent of the solver: quadrature by
//! adaptive Simpson refinement and closed-form convolutions obtained via
//! antiderivatives. The tests compare crate output against these.

#![allow(dead_code)]

fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson(m - a, fa, flm, fm);
    let right = simpson(b - m, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
        + adapt(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute accuracy
/// near `tol`. Plenty for smooth integrands; the kernel decay at rates up
/// to ~50 is resolved by the recursion.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(b - a, fa, fm, fb);
    adapt(f, a, fa, b, fb, fm, whole, tol, 60)
}

/// `nu * Integral_0^1 f(z) exp(-nu z) dz`, the moment every kernel weight
/// reduces to.
pub fn kernel_moment(f: impl Fn(f64) -> f64, nu: f64) -> f64 {
    nu * adaptive_simpson(&|z| f(z) * (-nu * z).exp(), 0.0, 1.0, 1e-15)
}

/// Analytic `I[u](x) = alpha Integral_a^b u(y) e^{-alpha|x-y|} dy` for the
/// quadratic `u = c0 + c1 y + c2 y^2`, by antiderivatives of each oriented
/// half. Exponentials are factored so large `alpha` spans cannot overflow.
pub fn analytic_poly_conv(c: [f64; 3], a: f64, b: f64, alpha: f64, x: f64) -> f64 {
    let g = |y: f64| {
        let u = c[0] + c[1] * y + c[2] * y * y;
        let up = c[1] + 2.0 * c[2] * y;
        let upp = 2.0 * c[2];
        u / alpha - up / (alpha * alpha) + upp / (alpha * alpha * alpha)
    };
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

/// Observed convergence order between two error levels whose resolutions
/// differ by `ratio`.
pub fn order_between(e_coarse: f64, e_fine: f64, ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / ratio.ln()
}

/// Path of a config shipped at the repository root.
pub fn config_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}
