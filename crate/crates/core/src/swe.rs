//! Spherical-wave indexing, vector spherical harmonics and the conversions
//! between a transition matrix and a sampled scattering dyadic.
//!
//! Harmonics use the complex, Condon–Shortley phased scalar harmonics
//! `Y_lm` and
//!
//! ```text
//! A_1 = [θ̂ (1/sinθ) ∂_φ Y − φ̂ ∂_θ Y] / √(l(l+1))      (τ = 1, TE)
//! A_2 = [θ̂ ∂_θ Y + φ̂ (1/sinθ) ∂_φ Y] / √(l(l+1))      (τ = 2, TM)
//! Y_α = −(−j)^{τ−l} A_α
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, J};
use crate::modes::Z0;
use crate::quadrature::{Direction, QuadratureRule};
use crate::scattering::ScatteringMatrix;

/// Spherical-wave index `(τ, l, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SweIndex {
    pub tau: u8,
    pub l: usize,
    pub m: i64,
}

impl SweIndex {
    pub fn new(tau: u8, l: usize, m: i64) -> Result<Self> {
        if !(tau == 1 || tau == 2) || l == 0 || m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("invalid spherical-wave index ({tau}, {l}, {m})")));
        }
        Ok(SweIndex { tau, l, m })
    }

    /// Flattened zero-based index `2(l(l+1) + m − 1) + τ − 1`.
    pub fn alpha(&self) -> usize {
        let l = self.l as i64;
        (2 * (l * (l + 1) + self.m - 1) + self.tau as i64 - 1) as usize
    }

    pub fn from_alpha(alpha: usize) -> Self {
        let tau = (alpha % 2) as u8 + 1;
        let j = (alpha / 2 + 1) as i64; // = l(l+1) + m
        let mut l = ((j as f64).sqrt()) as i64;
        while l * l > j {
            l -= 1;
        }
        while (l + 1) * (l + 1) <= j {
            l += 1;
        }
        SweIndex { tau, l: l as usize, m: j - l * (l + 1) }
    }
}

/// Number of spherical waves up to degree `l_max`: `2 l_max (l_max + 2)`.
pub fn swe_count(l_max: usize) -> usize {
    2 * l_max * (l_max + 2)
}

/// Default truncation degree for electrical size `ka`.
pub fn default_l_max(ka: f64) -> usize {
    (ka + 2.0 * ka.cbrt()).ceil().max(1.0) as usize
}

/// Transition matrix in the canonical `α` order.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub l_max: usize,
    pub entries: CMat,
}

impl TransitionMatrix {
    pub fn zeros(l_max: usize) -> Self {
        let n = swe_count(l_max);
        TransitionMatrix { l_max, entries: CMat::zeros(n, n) }
    }

    /// Diagonal matrix with one value per `(τ, l)`, repeated over `m`.
    pub fn diagonal<F: Fn(u8, usize) -> C64>(l_max: usize, value: F) -> Self {
        let mut t = Self::zeros(l_max);
        for a in 0..swe_count(l_max) {
            let idx = SweIndex::from_alpha(a);
            t.entries[(a, a)] = value(idx.tau, idx.l);
        }
        t
    }
}

/// Normalised associated Legendre values with the `sin^m θ` factor removed,
/// together with their derivatives in `x = cos θ`. Indexed `[l][m]`, `m ≥ 0`.
struct ReducedLegendre {
    value: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
}

impl ReducedLegendre {
    fn new(l_max: usize, x: f64) -> Self {
        let mut value = vec![vec![0.0; l_max + 1]; l_max + 1];
        let mut slope = vec![vec![0.0; l_max + 1]; l_max + 1];
        let mut diagonal = 1.0 / (4.0 * PI).sqrt();
        for m in 0..=l_max {
            if m > 0 {
                let mf = m as f64;
                diagonal *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            }
            value[m][m] = diagonal;
            if m < l_max {
                let c = (2.0 * m as f64 + 3.0).sqrt();
                value[m + 1][m] = x * c * diagonal;
                slope[m + 1][m] = c * diagonal;
            }
            for l in m + 2..=l_max {
                let (lf, mf) = (l as f64, m as f64);
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let lp = lf - 1.0;
                let b = ((lp * lp - mf * mf) / (4.0 * lp * lp - 1.0)).sqrt();
                value[l][m] = a * (x * value[l - 1][m] - b * value[l - 2][m]);
                slope[l][m] = a * (value[l - 1][m] + x * slope[l - 1][m] - b * slope[l - 2][m]);
            }
        }
        ReducedLegendre { value, slope }
    }
}

/// `Y_α(r̂)` for every `α` up to `l_max`, each as (θ, φ) components.
pub fn vsh_components(l_max: usize, dir: &Direction) -> Vec<[C64; 2]> {
    let (s, x) = dir.theta().sin_cos();
    let legendre = ReducedLegendre::new(l_max, x);
    let mut out = vec![[C64::new(0.0, 0.0); 2]; swe_count(l_max)];
    for l in 1..=l_max {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        for m in 0..=l {
            let mf = m as f64;
            let q = legendre.value[l][m];
            let dq = legendre.slope[l][m];
            // s^{m-1} with the m = 0 term never used.
            let s_m1 = if m == 0 { 0.0 } else { s.powi(m as i32 - 1) };
            let phase = C64::from_polar(1.0, mf * dir.phi());
            let azimuthal = J * (mf * s_m1 * q) * phase; // (1/sinθ) ∂_φ Y
            let polar = (mf * s_m1 * x * q - s.powi(m as i32 + 1) * dq) * phase; // ∂_θ Y
            let te = [azimuthal * norm, -polar * norm];
            let tm = [polar * norm, azimuthal * norm];
            for (tau, a) in [(1u8, te), (2u8, tm)] {
                let prefactor = -(-J).powi((tau as i32 - l as i32).rem_euclid(4));
                let positive = [a[0] * prefactor, a[1] * prefactor];
                let idx = SweIndex { tau, l, m: m as i64 };
                out[idx.alpha()] = positive;
                if m > 0 {
                    // Y_{l,-m} = (-1)^m conj(Y_{l,m}) carries through both derivatives;
                    // the prefactor is applied afresh.
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let neg = [a[0].conj() * sign * prefactor, a[1].conj() * sign * prefactor];
                    out[SweIndex { tau, l, m: -(m as i64) }.alpha()] = neg;
                }
            }
        }
    }
    out
}

/// `Y_α(r̂)` as a Cartesian 3-vector.
pub fn eval_vsh(index: SweIndex, dir: &Direction) -> [C64; 3] {
    let c = vsh_components(index.l, dir)[index.alpha()];
    let (th, ph) = (dir.theta_hat(), dir.phi_hat());
    [0, 1, 2].map(|i| c[0] * th[i] + c[1] * ph[i])
}

/// Matrix of harmonic samples: row `(γ, p)` in θ-then-φ block order,
/// column `α`.
pub fn sample_matrix(rule: &QuadratureRule, l_max: usize) -> CMat {
    let n = rule.len();
    let mut y = CMat::zeros(2 * n, swe_count(l_max));
    for (p, dir) in rule.points.iter().enumerate() {
        for (a, c) in vsh_components(l_max, dir).into_iter().enumerate() {
            y[(p, a)] = c[0];
            y[(n + p, a)] = c[1];
        }
    }
    y
}

fn require_degree(rule: &QuadratureRule, l_max: usize) -> Result<()> {
    if rule.order_capability < 2 * l_max {
        return Err(Error::InsufficientQuadrature { l_max, available: rule.order_capability, required: 2 * l_max });
    }
    Ok(())
}

fn doubled_weights(rule: &QuadratureRule) -> Vec<f64> {
    rule.weights.iter().chain(&rule.weights).copied().collect()
}

/// `T_αβ = Σ_pq ℓ_p ℓ_q Y_α*(r̂_p) · S(r̂_p, r̂_q) · Y_β(r̂_q)`.
pub fn t_from_s(smat: &ScatteringMatrix, l_max: usize) -> Result<TransitionMatrix> {
    let rule = smat.rule();
    require_degree(rule, l_max)?;
    let y = sample_matrix(rule, l_max);
    let unweighted = smat.unweighted();
    let w = doubled_weights(rule);
    let weighted_y = CMat::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * w[i]);
    let entries = weighted_y.adjoint() * unweighted * &weighted_y;
    Ok(TransitionMatrix { l_max, entries })
}

/// `S(r̂_p, r̂_q) = Σ_αβ Y_α(r̂_p) T_αβ Y_β*(r̂_q)` on the rule's points.
pub fn s_from_t(tmat: &TransitionMatrix, rule: &QuadratureRule, k: f64) -> Result<ScatteringMatrix> {
    require_degree(rule, tmat.l_max)?;
    let y = sample_matrix(rule, tmat.l_max);
    let matrix = &y * &tmat.entries * y.adjoint();
    ScatteringMatrix::new(rule.clone(), k, matrix)
}

/// Spherical-wave coefficients of a sampled far field.
#[derive(Clone, Debug)]
pub struct FarFieldExpansion {
    pub coefficients: Vec<C64>,
    /// `‖F − √Z₀ Σ f_α Y_α‖ / ‖F‖` in the rule's weighted norm (0 when F = 0).
    pub residual: f64,
}

/// `f_α = (1/√Z₀) Σ_q ℓ_q Y_α*(r̂_q) · F(r̂_q)` with `F` stacked `[F_θ; F_φ]`.
pub fn expand_farfield(field: &[C64], rule: &QuadratureRule, l_max: usize) -> Result<FarFieldExpansion> {
    if field.len() != 2 * rule.len() {
        return Err(Error::DimensionMismatch {
            what: "far-field samples".into(),
            expected: 2 * rule.len(),
            found: field.len(),
        });
    }
    let y = sample_matrix(rule, l_max);
    let w = doubled_weights(rule);
    let scale = 1.0 / Z0.sqrt();
    let coefficients: Vec<C64> = (0..y.ncols())
        .map(|a| (0..y.nrows()).map(|i| y[(i, a)].conj() * field[i] * w[i]).sum::<C64>() * scale)
        .collect();
    let mut err = 0.0;
    let mut total = 0.0;
    for i in 0..y.nrows() {
        let rebuilt: C64 = (0..y.ncols()).map(|a| y[(i, a)] * coefficients[a]).sum::<C64>() * Z0.sqrt();
        err += w[i].abs() * (field[i] - rebuilt).norm_sqr();
        total += w[i].abs() * field[i].norm_sqr();
    }
    let residual = if total == 0.0 { 0.0 } else { (err / total).sqrt() };
    Ok(FarFieldExpansion { coefficients, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::quadrature::{dot, lebedev_rule, SUPPORTED_SIZES};
    use proptest::prelude::*;

    fn gram(rule: &QuadratureRule, l_max: usize) -> CMat {
        let y = sample_matrix(rule, l_max);
        let w = doubled_weights(rule);
        let wy = CMat::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * w[i]);
        y.adjoint() * wy
    }

    #[test]
    fn flattening_matches_the_documented_formula() {
        let mut expected = 0;
        for l in 1..=6 {
            for m in -(l as i64)..=l as i64 {
                for tau in 1..=2u8 {
                    let idx = SweIndex::new(tau, l, m).unwrap();
                    assert_eq!(idx.alpha(), expected);
                    assert_eq!(SweIndex::from_alpha(expected), idx);
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, swe_count(6));
        assert!(SweIndex::new(3, 1, 0).is_err());
        assert!(SweIndex::new(1, 1, 2).is_err());
    }

    #[test]
    fn harmonics_are_tangential() {
        let rule = lebedev_rule(50).unwrap();
        for dir in &rule.points {
            let r = dir.unit_vector();
            for a in 0..swe_count(4) {
                let y = eval_vsh(SweIndex::from_alpha(a), dir);
                let radial: C64 = (0..3).map(|i| y[i] * r[i]).sum();
                assert!(radial.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_harmonic_has_unit_norm() {
        let rule = lebedev_rule(14).unwrap();
        let dir_norm = rule.integrate(|d| {
            let y = eval_vsh(SweIndex::new(1, 1, 0).unwrap(), d);
            y.iter().map(|c| C64::from(c.norm_sqr())).sum()
        });
        assert!((dir_norm.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gram_matrix_is_identity_within_each_rule_capability() {
        for &n in &SUPPORTED_SIZES {
            let rule = lebedev_rule(n).unwrap();
            let l_max = rule.max_resolved_degree();
            let g = gram(&rule, l_max);
            let id = CMat::identity(g.nrows(), g.ncols());
            assert!(max_abs_diff(&g, &id) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn mixed_degree_products_within_capability_are_exact() {
        // Pairs with l_α + l_β ≤ degree are integrated exactly even when one
        // of them exceeds degree / 2.
        let rule = lebedev_rule(26).unwrap(); // degree 7
        let y = sample_matrix(&rule, 6);
        let w = doubled_weights(&rule);
        for a in 0..y.ncols() {
            for b in 0..y.ncols() {
                let (ia, ib) = (SweIndex::from_alpha(a), SweIndex::from_alpha(b));
                if ia.l + ib.l > rule.order_capability {
                    continue;
                }
                let g: C64 = (0..y.nrows()).map(|i| y[(i, a)].conj() * y[(i, b)] * w[i]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((g - expected).norm() < 1e-10, "{ia:?} {ib:?}");
            }
        }
    }

    #[test]
    fn degree_beyond_capability_is_not_exact() {
        // Y_4^0 integrates to zero analytically; the 6-point rule (degree 3)
        // returns a visibly nonzero value.
        let rule = lebedev_rule(6).unwrap();
        let legendre = |d: &Direction| {
            let x = d.theta().cos();
            C64::from((35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0)
        };
        assert!(rule.integrate(legendre).norm() > 0.1);
        assert!(lebedev_rule(14).unwrap().integrate(legendre).norm() < 1e-14);
    }

    #[test]
    fn poles_are_finite_and_consistent_with_neighbours() {
        let pole = Direction::new(0.0, 0.0).unwrap();
        let near = Direction::new(1e-9, 0.0).unwrap();
        let a = vsh_components(4, &pole);
        let b = vsh_components(4, &near);
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[0]).norm() < 1e-7 && (x[1] - y[1]).norm() < 1e-7);
        }
    }

    #[test]
    fn dipole_harmonic_matches_closed_form() {
        // TM dipole along z: A_2(τ=2,l=1,m=0) = −θ̂ sinθ √(3/8π).
        let d = Direction::new(0.7, 1.1).unwrap();
        let a = vsh_components(1, &d)[SweIndex::new(2, 1, 0).unwrap().alpha()];
        // Y = −(−j)^{1}·A = j·A
        let expected = J * (-(3.0 / (8.0 * PI)).sqrt() * 0.7_f64.sin());
        assert!((a[0] - expected).norm() < 1e-15);
        assert!(a[1].norm() < 1e-15);
    }

    #[test]
    fn round_trip_t_to_s_to_t() {
        let rule = lebedev_rule(26).unwrap();
        let l_max = 3;
        let n = swe_count(l_max);
        let t = TransitionMatrix {
            l_max,
            entries: CMat::from_fn(n, n, |i, j| C64::new((i + 2 * j) as f64 * 0.01, (i as f64 - j as f64) * 0.02)),
        };
        let s = s_from_t(&t, &rule, 1.0).unwrap();
        let back = t_from_s(&s, l_max).unwrap();
        assert!(max_abs_diff(&back.entries, &t.entries) < 1e-8);
    }

    #[test]
    fn zero_maps_to_zero_and_capability_is_enforced() {
        let rule = lebedev_rule(14).unwrap();
        let s = s_from_t(&TransitionMatrix::zeros(2), &rule, 1.0).unwrap();
        assert_eq!(crate::linalg::max_abs(s.unweighted()), 0.0);
        let t = t_from_s(&s, 2).unwrap();
        assert_eq!(crate::linalg::max_abs(&t.entries), 0.0);
        assert!(matches!(t_from_s(&s, 3), Err(Error::InsufficientQuadrature { l_max: 3, available: 5, required: 6 })));
    }

    #[test]
    fn expansion_of_a_single_harmonic() {
        let rule = lebedev_rule(38).unwrap();
        let target = SweIndex::new(2, 2, -1).unwrap();
        let y = sample_matrix(&rule, 4);
        let field: Vec<C64> = (0..y.nrows()).map(|i| y[(i, target.alpha())] * Z0.sqrt()).collect();
        let e = expand_farfield(&field, &rule, 4).unwrap();
        for (a, c) in e.coefficients.iter().enumerate() {
            let expected = if a == target.alpha() { 1.0 } else { 0.0 };
            assert!((c - expected).norm() < 1e-12);
        }
        assert!(e.residual < 1e-12);

        let zero = expand_farfield(&vec![C64::new(0.0, 0.0); field.len()], &rule, 4).unwrap();
        assert!(zero.coefficients.iter().all(|c| c.norm() == 0.0));
        assert_eq!(zero.residual, 0.0);
    }

    proptest! {
        #[test]
        fn flattening_is_bijective(alpha in 0usize..2000) {
            let idx = SweIndex::from_alpha(alpha);
            prop_assert!(idx.l >= 1 && idx.m.unsigned_abs() as usize <= idx.l);
            prop_assert_eq!(idx.alpha(), alpha);
        }

        #[test]
        fn harmonics_tangential_at_random_directions(theta in 0.0f64..PI, phi in 0.0f64..6.2, a in 0usize..swe_count(6)) {
            let d = Direction::new(theta, phi).unwrap();
            let y = eval_vsh(SweIndex::from_alpha(a), &d);
            let r = d.unit_vector();
            let re = [y[0].re, y[1].re, y[2].re];
            let im = [y[0].im, y[1].im, y[2].im];
            prop_assert!(dot(&re, &r).abs() < 1e-14 && dot(&im, &r).abs() < 1e-14);
        }
    }
}
