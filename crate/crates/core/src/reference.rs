//! Closed-form reference solutions for the built-in studies.
//!
//! Everything here is independent of the solver: free-space d'Alembert
//! propagation of the standard Gaussian pulse, separable cavity modes, the
//! circular drum mode through a small Bessel evaluation, and the two-lobe
//! initial pulse. Values feed error norms only, so plain series evaluations
//! are enough.

use std::f64::consts::PI;

/// Bessel function of the first kind, order zero, by its Maclaurin series.
///
/// The series is evaluated with a term recurrence; for |x| <= 6, which covers
/// every mode used here, the error stays near roundoff. Larger arguments lose
/// accuracy gracefully but no caller needs them.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

/// The standard pulse: a Gaussian narrow enough to be numerically compact
/// on [-1, 1].
pub fn gaussian_pulse(x: f64) -> f64 {
    (-36.0 * x * x).exp()
}

/// Second derivative of the pulse, for exact starting histories.
pub fn gaussian_pulse_d2(x: f64) -> f64 {
    (5184.0 * x * x - 72.0) * gaussian_pulse(x)
}

/// Free-space evolution of `gaussian_pulse` with zero initial velocity.
pub fn dalembert_gaussian(x: f64, t: f64, c: f64) -> f64 {
    0.5 * (gaussian_pulse(x - c * t) + gaussian_pulse(x + c * t))
}

/// Fundamental mode of the unit square cavity centered at the origin with
/// pinned walls: `cos(pi x) cos(pi y) cos(sqrt(2) pi c t)`.
pub fn cavity_mode_dirichlet(x: f64, y: f64, t: f64, c: f64) -> f64 {
    (PI * x).cos() * (PI * y).cos() * (2.0f64.sqrt() * PI * c * t).cos()
}

/// Matching mode for reflecting walls: `sin(pi x) sin(pi y) cos(sqrt(2) pi c t)`.
pub fn cavity_mode_neumann(x: f64, y: f64, t: f64, c: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin() * (2.0f64.sqrt() * PI * c * t).cos()
}

/// Laplacian of either cavity mode at `t = 0` is `-2 pi^2` times the profile.
pub const CAVITY_LAP_FACTOR: f64 = -2.0 * PI * PI;

/// Second zero of J0, the rate of the second radial drum mode. At a true
/// zero the rim data vanishes, so pinning the rim adds no forcing.
pub const DRUM_MODE_RATE: f64 = 5.520078110286311;

/// Radial drum mode `J0(z r / rr) cos(z c t / rr)` on a disk of radius `rr`.
///
/// With `z` at a zero of J0 the rim is pinned; the same profile restricted
/// to one quadrant satisfies reflecting conditions on the axes.
pub fn drum_mode(x: f64, y: f64, t: f64, z: f64, rr: f64, c: f64) -> f64 {
    let r = (x * x + y * y).sqrt();
    bessel_j0(z * r / rr) * (z * c * t / rr).cos()
}

/// Two opposite smooth pulses centered on `(-gamma, 0)` and `(gamma, 0)`,
/// supported on disks of radius `0.8 gamma`:
/// `-+ cos^6((pi/2)(r / 0.8 gamma)^2)`.
pub fn double_circle_bump(x: f64, y: f64, gamma: f64) -> f64 {
    let rad = 0.8 * gamma;
    let lobe = |cx: f64, sign: f64| {
        let dx = x - cx;
        let r2 = dx * dx + y * y;
        if r2 < rad * rad {
            let c = (0.5 * PI * (r2 / (rad * rad))).cos();
            sign * c.powi(6)
        } else {
            0.0
        }
    };
    lobe(-gamma, -1.0) + lobe(gamma, 1.0)
}
