//! Mie coefficients against an independent textbook evaluation.
//!
//! The reference uses power series for the spherical Bessel function of the
//! first kind, upward recurrence for the second kind, and the classical
//! homogeneous-sphere coefficient formulas written for `e^{−iωt}`. The
//! library works with `e^{jωt}` and transition coefficients `t = −conj(a)`.

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use scatmodes::mie::{mie_coefficients, Layer, LayeredSphere};

fn j_series(n: usize, x: f64) -> f64 {
    // j_n(x) = Σ_k (−x²/2)^k / k! · x^n / (2n + 2k + 1)!!
    let mut double_factorial = 1.0;
    for i in (1..=2 * n + 1).step_by(2) {
        double_factorial *= i as f64;
    }
    let mut term = x.powi(n as i32) / double_factorial;
    let mut sum = term;
    for k in 1..200 {
        term *= -x * x / (2.0 * k as f64 * (2 * n + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn y_upward(n_max: usize, x: f64) -> Vec<f64> {
    let mut y = vec![-x.cos() / x, -x.cos() / (x * x) - x.sin() / x];
    for n in 1..n_max {
        let next = (2 * n + 1) as f64 / x * y[n] - y[n - 1];
        y.push(next);
    }
    y
}

/// `(ψ_n, ψ_n′)` and `(ξ_n, ξ_n′)` with `ξ = x h⁽¹⁾`.
fn riccati(n: usize, x: f64) -> (f64, f64, C64, C64) {
    let j = |m: usize| j_series(m, x);
    let y = y_upward(n + 1, x);
    let psi = |m: usize| x * j(m);
    let xi = |m: usize| C64::new(x * j(m), x * y[m]);
    let (psi_prev, xi_prev) = if n == 0 { (x.cos(), C64::new(x.cos(), x.sin())) } else { (psi(n - 1), xi(n - 1)) };
    let dpsi = psi_prev - n as f64 * psi(n) / x;
    let dxi = xi_prev - n as f64 * xi(n) / x;
    (psi(n), dpsi, xi(n), dxi)
}

/// Electric and magnetic coefficients `(a_n, b_n)` of a homogeneous sphere.
fn textbook(n: usize, x: f64, eps: f64, mu: f64) -> (C64, C64) {
    let m = (eps * mu).sqrt();
    let (psi, dpsi, xi, dxi) = riccati(n, x);
    let (psi_m, dpsi_m, _, _) = riccati(n, m * x);
    let a = (m * psi_m * dpsi - mu * psi * dpsi_m) / (m * psi_m * dxi - mu * xi * dpsi_m);
    let b = (mu * psi_m * dpsi - m * psi * dpsi_m) / (mu * psi_m * dxi - m * xi * dpsi_m);
    (a, b)
}

fn relative(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

#[test]
fn homogeneous_sphere_matches_textbook_coefficients() {
    for &(ka, eps, mu) in &[(0.5, 3.0, 1.0), (1.0, 3.0, 1.0), (2.0, 3.0, 1.0), (1.3, 5.0, 2.0), (3.5, 2.0, 1.0)] {
        let sphere = LayeredSphere::homogeneous(0.1, eps, mu).unwrap();
        let t = mie_coefficients(&sphere, ka, 8).unwrap();
        for l in 1..=8 {
            let (a, b) = textbook(l, ka, eps, mu);
            let (te, tm) = (t[l - 1][0], t[l - 1][1]);
            assert!(relative(tm, -a.conj()) < 1e-9, "ka {ka} eps {eps} l {l}: TM {tm} vs {}", -a.conj());
            assert!(relative(te, -b.conj()) < 1e-9, "ka {ka} eps {eps} l {l}: TE {te} vs {}", -b.conj());
        }
    }
}

#[test]
fn small_sphere_reduces_to_rayleigh_dipole() {
    // t_TM(l=1) → −j (2/3) (ka)³ (ε−1)/(ε+2) for ka → 0.
    let (ka, eps) = (1e-3, 4.0);
    let t = mie_coefficients(&LayeredSphere::homogeneous(1.0, eps, 1.0).unwrap(), ka, 1).unwrap();
    let rayleigh = C64::new(0.0, -2.0 / 3.0 * ka.powi(3) * (eps - 1.0) / (eps + 2.0));
    assert!(relative(t[0][1], rayleigh) < 1e-5, "{} vs {rayleigh}", t[0][1]);
}

proptest! {
    #[test]
    fn identical_shells_equal_one_homogeneous_sphere(ka in 0.2f64..3.0, eps in 1.5f64..8.0, mu in 1.0f64..3.0, shells in 2usize..5) {
        let homogeneous = mie_coefficients(&LayeredSphere::homogeneous(1.0, eps, mu).unwrap(), ka, 6).unwrap();
        let layers = (1..=shells)
            .map(|i| Layer { eps_r: eps, mu_r: mu, boundary_fraction: i as f64 / shells as f64 })
            .collect();
        let layered = mie_coefficients(&LayeredSphere::new(1.0, layers).unwrap(), ka, 6).unwrap();
        for (h, s) in homogeneous.iter().zip(&layered) {
            for p in 0..2 {
                prop_assert!((h[p] - s[p]).norm() <= 1e-10 * h[p].norm().max(1e-12));
            }
        }
    }

    #[test]
    fn swapping_permittivity_and_permeability_swaps_polarizations(ka in 0.2f64..3.0, eps in 1.0f64..6.0, mu in 1.0f64..6.0) {
        prop_assume!((eps - mu).abs() > 1e-3 || eps != 1.0);
        let a = mie_coefficients(&LayeredSphere::homogeneous(1.0, eps, mu).unwrap(), ka, 5).unwrap();
        let b = mie_coefficients(&LayeredSphere::homogeneous(1.0, mu, eps).unwrap(), ka, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x[0] - y[1]).norm() <= 1e-10 * x[0].norm().max(1e-12));
            prop_assert!((x[1] - y[0]).norm() <= 1e-10 * x[1].norm().max(1e-12));
        }
    }

    #[test]
    fn lossless_layers_stay_on_the_unit_circle(ka in 0.1f64..5.0, e1 in 1.0f64..10.0, e2 in 1.0f64..10.0, m1 in 1.0f64..4.0) {
        let layers = vec![
            Layer { eps_r: e1, mu_r: m1, boundary_fraction: 0.5 },
            Layer { eps_r: e2, mu_r: 1.0, boundary_fraction: 1.0 },
        ];
        prop_assume!(e1 != 1.0 || e2 != 1.0 || m1 != 1.0);
        let t = mie_coefficients(&LayeredSphere::new(1.0, layers).unwrap(), ka, 10).unwrap();
        for pair in t {
            for c in pair {
                prop_assert!(((2.0 * c + 1.0).norm() - 1.0).abs() < 1e-10);
            }
        }
    }
}
