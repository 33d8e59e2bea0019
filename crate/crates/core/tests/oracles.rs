//! Quadrature oracles for the kernel weights.
//!
//! The unit tests freeze high precision reference values; these tests
//! re-derive every weight family from its defining integral with an
//! independent adaptive quadrature, so a systematic error in the closed
//! forms cannot hide behind a matching frozen constant.

mod common;

use adiwave::kernel::exp_moment;
use adiwave::{ConvWeights, OutflowWeights};
use common::kernel_moment;

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// The cell weights integrate the interpolant basis `1 - z`, `z` and
/// `z (z - 1) / 2` against the kernel.
#[test]
fn cell_weights_match_their_defining_integrals() {
    for nu in [1e-3, 0.04, 0.2, 0.5, 1.0, 2.0, 10.0, 50.0] {
        let w = ConvWeights::new(nu);
        let p = kernel_moment(|z| 1.0 - z, nu);
        let q = kernel_moment(|z| z, nu);
        let r = kernel_moment(|z| 0.5 * z * (z - 1.0), nu);
        assert!(rel(w.p, p) <= 1e-12, "p({nu}) = {} vs {p}", w.p);
        assert!(rel(w.q, q) <= 1e-12, "q({nu}) = {} vs {q}", w.q);
        assert!(rel(w.r, r) <= 1e-12, "r({nu}) = {} vs {r}", w.r);
    }
}

#[test]
fn moments_match_quadrature() {
    for m in 0..=3u32 {
        let mfact = [1.0, 1.0, 2.0, 6.0][m as usize];
        for nu in [1e-3, 0.5, 2.0, 20.0] {
            let want = kernel_moment(|z| z.powi(m as i32) / mfact, nu);
            assert!(
                rel(exp_moment(m, nu), want) <= 1e-12,
                "E_{m}({nu}) = {} vs {want}",
                exp_moment(m, nu)
            );
        }
    }
}

/// The outflow weights integrate the quadratic through the three newest
/// boundary traces. With `z` running backwards in time over the new step,
/// the traces sit at `z = -1, 0, 1` and the Lagrange basis is
/// `z(z-1)/2`, `1 - z^2`, `z(z+1)/2`.
#[test]
fn outflow_gammas_match_their_defining_integrals() {
    for beta in [0.2, 1.0, 2.0, 10.0, 20.0, 50.0] {
        let w = OutflowWeights::new(beta);
        let g0 = kernel_moment(|z| 0.5 * z * (z - 1.0), beta);
        let g1 = kernel_moment(|z| 1.0 - z * z, beta);
        let g2 = kernel_moment(|z| 0.5 * z * (z + 1.0), beta);
        assert!(rel(w.gamma0, g0) <= 1e-12, "gamma0({beta}) = {} vs {g0}", w.gamma0);
        assert!(rel(w.gamma1, g1) <= 1e-12, "gamma1({beta}) = {} vs {g1}", w.gamma1);
        assert!(rel(w.gamma2, g2) <= 1e-12, "gamma2({beta}) = {} vs {g2}", w.gamma2);
    }
}

/// Integrating the interpolant through arbitrary traces must equal the
/// weighted combination of the traces, not just hold basis by basis.
#[test]
fn gamma_combination_integrates_the_interpolant() {
    let triples = [
        (1.0, 0.0, 0.0),
        (0.3, -1.2, 0.7),
        (-0.05, 0.4, 2.1),
        (5.0, 5.0, 5.0),
    ];
    for beta in [0.2, 2.0, 20.0] {
        let w = OutflowWeights::new(beta);
        for (u_next, u_cur, u_old) in triples {
            let p = |z: f64| {
                u_next * 0.5 * z * (z - 1.0) + u_cur * (1.0 - z * z) + u_old * 0.5 * z * (z + 1.0)
            };
            let want = kernel_moment(p, beta);
            let got = w.gamma0 * u_next + w.gamma1 * u_cur + w.gamma2 * u_old;
            assert!(
                (got - want).abs() <= 1e-12 * (1.0 + want.abs()),
                "beta {beta}, traces ({u_next},{u_cur},{u_old}): {got} vs {want}"
            );
        }
    }
}

/// Direct closed forms of the gammas in terms of `exp(-beta)` alone.
#[test]
fn gamma_closed_forms_hold() {
    for beta in [0.2, 1.0, 2.0, 10.0, 50.0] {
        let w = OutflowWeights::new(beta);
        let e = (-beta).exp();
        let b2 = beta * beta;
        let g0 = (1.0 - e) / b2 - (1.0 + e) / (2.0 * beta);
        let g1 = -2.0 * (1.0 - e) / b2 + 2.0 * e / beta + 1.0;
        let g2 = (1.0 - e) / b2 + (1.0 - 3.0 * e) / (2.0 * beta) - e;
        assert!(rel(w.gamma0, g0) <= 1e-12);
        assert!(rel(w.gamma1, g1) <= 1e-12);
        assert!(rel(w.gamma2, g2) <= 1e-12);
    }
}

/// The folded coefficients are fixed combinations of the gammas.
#[test]
fn folded_outflow_coefficients_are_consistent() {
    for beta in [0.1, 0.7, 2.0, 6.0, 30.0] {
        let w = OutflowWeights::new(beta);
        let b2 = beta * beta;
        assert!((w.cap0 - 0.5 * b2 * w.gamma0).abs() <= 1e-13 * (1.0 + w.cap0.abs()));
        assert!(
            (w.cap1 - (w.gamma1 - w.gamma0 * (b2 - 2.0))).abs()
                <= 1e-13 * (1.0 + w.cap1.abs())
        );
        assert!((w.cap2 - (w.gamma2 - w.gamma0)).abs() <= 1e-13 * (1.0 + w.cap2.abs()));
    }
}
