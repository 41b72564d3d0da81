//! Analytic transition matrix of a lossless multilayer sphere, and a
//! scattering backend built on it.
//!
//! The layered recursion carries the impedance-like log-derivative
//! `G = (m/μ) ψ′/ψ` (TE) or `(m/ε) ψ′/ψ` (TM) from the core outwards. Inside a
//! shell the field is `ψ + Rχ`, with `R` fixed by continuity of `G` at the
//! shell's inner radius. Coefficients are first formed in the `e^{−iωt}`
//! convention of the classical Mie literature and conjugated into the
//! `e^{jωt}` convention used everywhere else in this crate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::par::Execution;
use crate::quadrature::{cross, dot, norm, Direction, QuadratureRule, Vec3};
use crate::scattering::{Capability, ScatteringBackend};
use crate::swe::{swe_count, SweIndex, TransitionMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub eps_r: f64,
    #[serde(default = "unit")]
    pub mu_r: f64,
    /// Outer radius of the layer as a fraction of the sphere radius.
    pub boundary_fraction: f64,
}

fn unit() -> f64 {
    1.0
}

/// Concentric layers listed from the centre outwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredSphere {
    pub radius_m: f64,
    pub layers: Vec<Layer>,
}

impl LayeredSphere {
    pub fn new(radius_m: f64, layers: Vec<Layer>) -> Result<Self> {
        let sphere = LayeredSphere { radius_m, layers };
        sphere.validate()?;
        Ok(sphere)
    }

    /// Homogeneous sphere.
    pub fn homogeneous(radius_m: f64, eps_r: f64, mu_r: f64) -> Result<Self> {
        Self::new(radius_m, vec![Layer { eps_r, mu_r, boundary_fraction: 1.0 }])
    }

    /// Equal-thickness shells with the given materials.
    pub fn equal_shells(radius_m: f64, eps_r: &[f64], mu_r: &[f64]) -> Result<Self> {
        if eps_r.len() != mu_r.len() {
            return Err(Error::InvalidGeometry("permittivity and permeability lists differ in length".into()));
        }
        let n = eps_r.len() as f64;
        let layers = eps_r
            .iter()
            .zip(mu_r)
            .enumerate()
            .map(|(i, (&e, &m))| Layer {
                eps_r: e,
                mu_r: m,
                boundary_fraction: if i + 1 == eps_r.len() { 1.0 } else { (i + 1) as f64 / n },
            })
            .collect();
        Self::new(radius_m, layers)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return Err(Error::InvalidGeometry(format!("radius must be positive, got {}", self.radius_m)));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidGeometry("sphere has no layers".into()));
        }
        let mut previous = 0.0;
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.eps_r > 0.0 && layer.eps_r.is_finite() && layer.mu_r > 0.0 && layer.mu_r.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "layer {i}: material parameters must be positive and finite (eps_r = {}, mu_r = {})",
                    layer.eps_r, layer.mu_r
                )));
            }
            if !(layer.boundary_fraction > previous) {
                return Err(Error::InvalidGeometry(format!("layer {i}: boundary fractions must increase")));
            }
            previous = layer.boundary_fraction;
        }
        if previous != 1.0 {
            return Err(Error::InvalidGeometry(format!("outermost boundary fraction is {previous}, expected 1")));
        }
        Ok(())
    }

    pub fn is_magnetic(&self) -> bool {
        self.layers.iter().any(|l| l.mu_r != 1.0)
    }
}

/// Riccati–Bessel functions `ψ_n = x j_n(x)`, `χ_n = −x y_n(x)` and their
/// derivatives for `n = 0..=n_max`.
#[derive(Clone, Debug)]
pub struct RiccatiBessel {
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub chi: Vec<f64>,
    pub dchi: Vec<f64>,
}

impl RiccatiBessel {
    pub fn new(n_max: usize, x: f64) -> Result<Self> {
        assert!(x > 0.0, "Riccati-Bessel argument must be positive");
        // Downward continued fraction for r_n = j_n / j_{n-1}. The start index
        // sits well above both n_max and x, where the ratio is ~x/(2n+1).
        let start = n_max.max(x.ceil() as usize) + 16 + (4.0 * x.cbrt()) as usize;
        let mut ratio = vec![0.0; start + 2];
        for n in (1..=start).rev() {
            ratio[n] = 1.0 / ((2 * n + 1) as f64 / x - ratio[n + 1]);
        }
        let (s, c) = x.sin_cos();
        let j0 = s / x;
        let j1 = s / (x * x) - c / x;
        let mut j = vec![0.0; n_max + 1];
        // Seed from whichever closed form is better conditioned at this x.
        if j0.abs() >= j1.abs() {
            j[0] = j0;
            for n in 1..=n_max {
                j[n] = ratio[n] * j[n - 1];
            }
        } else {
            j[0] = j1 / ratio[1];
            if n_max >= 1 {
                j[1] = j1;
            }
            for n in 2..=n_max {
                j[n] = ratio[n] * j[n - 1];
            }
        }

        let mut psi = vec![0.0; n_max + 1];
        let mut chi = vec![0.0; n_max + 1];
        let mut dpsi = vec![0.0; n_max + 1];
        let mut dchi = vec![0.0; n_max + 1];
        for n in 0..=n_max {
            psi[n] = x * j[n];
        }
        chi[0] = c;
        if n_max >= 1 {
            chi[1] = c / x + s;
        }
        for n in 1..n_max {
            chi[n + 1] = (2 * n + 1) as f64 / x * chi[n] - chi[n - 1];
        }
        for n in 0..=n_max {
            let (psi_prev, chi_prev) = if n == 0 { (c, -s) } else { (psi[n - 1], chi[n - 1]) };
            dpsi[n] = psi_prev - n as f64 * psi[n] / x;
            dchi[n] = chi_prev - n as f64 * chi[n] / x;
            if !(psi[n].is_finite() && chi[n].is_finite() && dpsi[n].is_finite() && dchi[n].is_finite()) {
                return Err(Error::MieOverflow { l: n });
            }
        }
        Ok(RiccatiBessel { psi, dpsi, chi, dchi })
    }
}

/// Per-degree transition coefficients `[t_TE, t_TM]` for `l = 1..=l_max`
/// (entry `l − 1`).
pub fn mie_coefficients(sphere: &LayeredSphere, ka: f64, l_max: usize) -> Result<Vec<[C64; 2]>> {
    sphere.validate()?;
    if !(ka > 0.0 && ka.is_finite()) {
        return Err(Error::Domain(format!("ka must be positive, got {ka}")));
    }
    if l_max == 0 {
        return Err(Error::Domain("l_max must be at least 1".into()));
    }

    // Riccati-Bessel tables at every interface, evaluated in the layer on
    // either side, plus the exterior.
    let mut inner_tables = Vec::with_capacity(sphere.layers.len());
    let mut outer_tables = Vec::with_capacity(sphere.layers.len());
    for (i, layer) in sphere.layers.iter().enumerate() {
        let index = (layer.eps_r * layer.mu_r).sqrt();
        outer_tables.push(RiccatiBessel::new(l_max, index * ka * layer.boundary_fraction)?);
        inner_tables.push(if i == 0 {
            None
        } else {
            Some(RiccatiBessel::new(l_max, index * ka * sphere.layers[i - 1].boundary_fraction)?)
        });
    }
    let exterior = RiccatiBessel::new(l_max, ka)?;

    let mut out = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let mut pair = [C64::new(0.0, 0.0); 2];
        for (slot, electric_wall) in [(0usize, false), (1usize, true)] {
            let mut admittance = 0.0;
            for (i, layer) in sphere.layers.iter().enumerate() {
                let index = (layer.eps_r * layer.mu_r).sqrt();
                let factor = if electric_wall { index / layer.eps_r } else { index / layer.mu_r };
                let rb = &outer_tables[i];
                let log_derivative = match &inner_tables[i] {
                    None => rb.dpsi[l] / rb.psi[l],
                    Some(ib) => {
                        let d = admittance / factor;
                        let r = (d * ib.psi[l] - ib.dpsi[l]) / (ib.dchi[l] - d * ib.chi[l]);
                        (rb.dpsi[l] + r * rb.dchi[l]) / (rb.psi[l] + r * rb.chi[l])
                    }
                };
                admittance = factor * log_derivative;
            }
            let xi = C64::new(exterior.psi[l], -exterior.chi[l]);
            let dxi = C64::new(exterior.dpsi[l], -exterior.dchi[l]);
            let c = (admittance * exterior.psi[l] - exterior.dpsi[l]) / (xi * admittance - dxi);
            let t = -c.conj();
            if !(t.re.is_finite() && t.im.is_finite()) {
                return Err(Error::MieOverflow { l });
            }
            pair[slot] = t;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Diagonal transition matrix of the sphere, each `t_{τl}` repeated over `m`.
pub fn layered_tmatrix(sphere: &LayeredSphere, ka: f64, l_max: usize) -> Result<TransitionMatrix> {
    let coefficients = mie_coefficients(sphere, ka, l_max)?;
    Ok(TransitionMatrix::diagonal(l_max, |tau, l| coefficients[l - 1][tau as usize - 1]))
}

/// One analytic mode: a single spherical wave with its eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereMode {
    pub index: SweIndex,
    pub t: C64,
}

/// Modes of the diagonal transition matrix sorted by `|t|` descending, ties by
/// `arg t` ascending, then by spherical-wave index. The eigenvector of each
/// mode is the unit coefficient vector at `index`.
pub fn analytic_modes(sphere: &LayeredSphere, ka: f64, l_max: usize) -> Result<Vec<SphereMode>> {
    let coefficients = mie_coefficients(sphere, ka, l_max)?;
    let mut modes: Vec<SphereMode> = (0..swe_count(l_max))
        .map(|a| {
            let index = SweIndex::from_alpha(a);
            SphereMode { index, t: coefficients[index.l - 1][index.tau as usize - 1] }
        })
        .collect();
    modes.sort_by(|x, y| {
        y.t.norm()
            .total_cmp(&x.t.norm())
            .then(x.t.arg().total_cmp(&y.t.arg()))
            .then(x.index.alpha().cmp(&y.index.alpha()))
    });
    Ok(modes)
}

/// How many degrees the backend keeps in its far-field series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Enough degrees that the series has converged to double precision.
    Converged,
    /// Only the degrees the observation rule resolves exactly.
    RuleLimited,
    Fixed(usize),
}

/// Converged truncation degree for electrical size `ka`.
pub fn converged_degree(ka: f64) -> usize {
    (ka + 4.0 * ka.cbrt() + 2.0).ceil() as usize
}

/// Scattering backend evaluating the Mie series in closed form.
#[derive(Clone, Debug)]
pub struct MieBackend {
    pub sphere: LayeredSphere,
    pub truncation: Truncation,
}

impl MieBackend {
    pub fn new(sphere: LayeredSphere, truncation: Truncation) -> Self {
        MieBackend { sphere, truncation }
    }

    pub fn degree_for(&self, k: f64, rule: &QuadratureRule) -> usize {
        match self.truncation {
            Truncation::Converged => converged_degree(k * self.sphere.radius_m),
            Truncation::RuleLimited => rule.max_resolved_degree().max(1),
            Truncation::Fixed(l) => l.max(1),
        }
    }

    fn coefficients(&self, k: f64, rule: &QuadratureRule) -> Result<Vec<[C64; 2]>> {
        mie_coefficients(&self.sphere, k * self.sphere.radius_m, self.degree_for(k, rule))
    }
}

/// Dyadic `S(r̂, r̂′)` of the sphere from its per-degree coefficients, via the
/// angular functions `π_n`, `τ_n` in the scattering plane.
pub fn sphere_dyadic(coefficients: &[[C64; 2]], observation: &Vec3, incident: &Vec3) -> [[C64; 3]; 3] {
    let mu = dot(observation, incident).clamp(-1.0, 1.0);
    // |r̂ × k̂| keeps full relative accuracy near forward and back scattering,
    // where sqrt(1 − μ²) would amplify rounding in μ.
    let sin = norm(&cross(observation, incident));
    let parallel: Vec3 = if sin > 1e-6 {
        [0, 1, 2].map(|i| (observation[i] - mu * incident[i]) / sin)
    } else {
        any_perpendicular(incident)
    };
    let perpendicular = cross(incident, &parallel);
    let scattered_parallel: Vec3 = [0, 1, 2].map(|i| mu * parallel[i] - sin * incident[i]);

    let (mut in_plane, mut out_of_plane) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let (mut pi_prev, mut pi) = (0.0, 1.0);
    for (i, [t_te, t_tm]) in coefficients.iter().enumerate() {
        let n = (i + 1) as f64;
        if i > 0 {
            let next = ((2.0 * n - 1.0) * mu * pi - n * pi_prev) / (n - 1.0);
            pi_prev = pi;
            pi = next;
        }
        let tau = n * mu * pi - (n + 1.0) * pi_prev;
        let weight = (2.0 * n + 1.0) / (n * (n + 1.0));
        in_plane += (t_tm * tau + t_te * pi) * weight;
        out_of_plane += (t_tm * pi + t_te * tau) * weight;
    }
    in_plane /= 4.0 * PI;
    out_of_plane /= 4.0 * PI;
    let mut s = [[C64::new(0.0, 0.0); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            s[r][c] =
                in_plane * (scattered_parallel[r] * parallel[c]) + out_of_plane * (perpendicular[r] * perpendicular[c]);
        }
    }
    s
}

fn any_perpendicular(v: &Vec3) -> Vec3 {
    let helper = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = cross(v, &helper);
    let n = dot(&p, &p).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn far_field_from_coefficients(
    coefficients: &[[C64; 2]],
    k: f64,
    incident: &Direction,
    polarization: usize,
    rule: &QuadratureRule,
) -> Vec<C64> {
    let n = rule.len();
    let e0 = incident.polarization(polarization);
    let k_in = incident.unit_vector();
    // F = j(4π/k) S·E0.
    let scale = C64::new(0.0, 4.0 * PI / k);
    let mut out = vec![C64::new(0.0, 0.0); 2 * n];
    for (p, dir) in rule.points.iter().enumerate() {
        let s = sphere_dyadic(coefficients, &dir.unit_vector(), &k_in);
        let field: [C64; 3] = [0, 1, 2].map(|r| (0..3).map(|c| s[r][c] * e0[c]).sum::<C64>() * scale);
        for g in 0..2 {
            let basis = dir.polarization(g);
            out[g * n + p] = (0..3).map(|i| field[i] * basis[i]).sum();
        }
    }
    out
}

impl ScatteringBackend for MieBackend {
    fn capability(&self) -> Capability {
        Capability { name: "mie", wavenumbers: (f64::MIN_POSITIVE, f64::INFINITY), magnetic_materials: true }
    }

    fn far_field(&self, k: f64, incident: &Direction, polarization: usize, rule: &QuadratureRule) -> Result<Vec<C64>> {
        let coefficients = self.coefficients(k, rule)?;
        Ok(far_field_from_coefficients(&coefficients, k, incident, polarization, rule))
    }

    fn far_fields(&self, k: f64, rule: &QuadratureRule, execution: Execution) -> Result<CMat> {
        let coefficients = self.coefficients(k, rule)?;
        let n = rule.len();
        let columns = execution
            .map(2 * n, |col| far_field_from_coefficients(&coefficients, k, &rule.points[col % n], col / n, rule));
        Ok(CMat::from_fn(2 * n, 2 * n, |i, j| columns[j][i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn homogeneous(eps: f64) -> LayeredSphere {
        LayeredSphere::homogeneous(1.0, eps, 1.0).unwrap()
    }

    #[test]
    fn riccati_bessel_wronskian() {
        // ψ_n χ_n′ − ψ_n′ χ_n = −1 for χ_n = −x y_n.
        for &x in &[1e-2, 0.3, 1.0, 3.2, 7.5, 25.0] {
            let rb = RiccatiBessel::new(20, x).unwrap();
            for n in 0..=20 {
                let w = rb.psi[n] * rb.dchi[n] - rb.dpsi[n] * rb.chi[n];
                if rb.chi[n].abs() < 1e200 {
                    assert!((w + 1.0).abs() < 1e-9 * (1.0 + rb.chi[n].abs() * rb.dpsi[n].abs()), "x={x} n={n} w={w}");
                }
            }
        }
    }

    #[test]
    fn riccati_bessel_closed_forms() {
        let x: f64 = 2.3;
        let rb = RiccatiBessel::new(2, x).unwrap();
        let (s, c) = x.sin_cos();
        assert!((rb.psi[0] - s).abs() < 1e-15);
        assert!((rb.psi[1] - (s / x - c)).abs() < 1e-15);
        assert!((rb.psi[2] - ((3.0 / (x * x) - 1.0) * s - 3.0 * c / x)).abs() < 1e-14);
        assert!((rb.chi[0] - c).abs() < 1e-15);
        assert!((rb.dpsi[0] - c).abs() < 1e-15);
    }

    #[test]
    fn coefficients_lie_on_the_unitary_circle() {
        let sphere = LayeredSphere::equal_shells(1.0, &[1.0, 5.0, 1.0, 2.0], &[3.0, 1.0, 8.0, 1.0]).unwrap();
        for &ka in &[0.1, 0.5, 1.0, 2.5, 4.5, 8.0] {
            for pair in mie_coefficients(&sphere, ka, 12).unwrap() {
                for t in pair {
                    assert!(((2.0 * t + 1.0).norm() - 1.0).abs() < 1e-12, "ka={ka} t={t}");
                }
            }
        }
    }

    #[test]
    fn vacuum_sphere_does_not_scatter() {
        let sphere = LayeredSphere::equal_shells(1.0, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let t = layered_tmatrix(&sphere, 1.3, 5).unwrap();
        assert!(crate::linalg::max_abs(&t.entries) < 1e-15);
    }

    #[test]
    fn splitting_a_homogeneous_sphere_changes_nothing() {
        let whole = mie_coefficients(&homogeneous(4.0), 1.7, 8).unwrap();
        let split = LayeredSphere::equal_shells(1.0, &[4.0, 4.0, 4.0], &[1.0, 1.0, 1.0]).unwrap();
        let parts = mie_coefficients(&split, 1.7, 8).unwrap();
        for (a, b) in whole.iter().zip(&parts) {
            for i in 0..2 {
                assert!((a[i] - b[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dual_sphere_swaps_te_and_tm() {
        // Exchanging ε and μ swaps the roles of the two polarizations.
        let a = mie_coefficients(&LayeredSphere::homogeneous(1.0, 3.0, 2.0).unwrap(), 1.2, 6).unwrap();
        let b = mie_coefficients(&LayeredSphere::homogeneous(1.0, 2.0, 3.0).unwrap(), 1.2, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[1]).norm() < 1e-13 && (x[1] - y[0]).norm() < 1e-13);
        }
    }

    #[test]
    fn small_spheres_barely_scatter() {
        let small = mie_coefficients(&homogeneous(3.0), 1e-3, 4).unwrap();
        assert!(small.iter().flatten().all(|t| t.norm() < 1e-8));
        // Rayleigh limit of the electric dipole term: |t_TM1| ≈ (2/3)(ε−1)/(ε+2) (ka)^3.
        let t = mie_coefficients(&homogeneous(3.0), 1e-2, 1).unwrap()[0][1];
        let rayleigh = 2.0 / 3.0 * 2.0 / 5.0 * 1e-6;
        assert!((t.norm() - rayleigh).abs() < 1e-3 * rayleigh);
    }

    #[test]
    fn pec_limit_stabilises() {
        // Perfect conductor: t_TE = −conj(ψ/ξ), t_TM = −conj(ψ′/ξ′).
        let ka = 0.5;
        let rb = RiccatiBessel::new(3, ka).unwrap();
        let pec: Vec<[C64; 2]> = (1..=3)
            .map(|l| {
                let xi = C64::new(rb.psi[l], -rb.chi[l]);
                let dxi = C64::new(rb.dpsi[l], -rb.dchi[l]);
                [-(rb.psi[l] / xi).conj(), -(rb.dpsi[l] / dxi).conj()]
            })
            .collect();
        let deviation = |eps: f64| {
            mie_coefficients(&homogeneous(eps), ka, 3)
                .unwrap()
                .iter()
                .zip(&pec)
                .map(|(t, p)| (t[0] - p[0]).norm().max((t[1] - p[1]).norm()))
                .fold(0.0, f64::max)
        };
        let (a, b, c) = (deviation(1e3), deviation(1e4), deviation(1e6));
        assert!(a > b && b > c, "{a} {b} {c}");
        assert!(c < 1e-3);
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        assert!(LayeredSphere::new(1.0, vec![]).is_err());
        assert!(LayeredSphere::new(1.0, vec![Layer { eps_r: 2.0, mu_r: 1.0, boundary_fraction: 0.5 }]).is_err());
        assert!(LayeredSphere::homogeneous(1.0, 0.0, 1.0).is_err());
        assert!(LayeredSphere::homogeneous(-1.0, 2.0, 1.0).is_err());
        let bad = LayeredSphere {
            radius_m: 1.0,
            layers: vec![
                Layer { eps_r: 2.0, mu_r: 1.0, boundary_fraction: 0.6 },
                Layer { eps_r: 2.0, mu_r: 1.0, boundary_fraction: 0.6 },
            ],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn analytic_modes_are_sorted_with_full_multiplicity() {
        let modes = analytic_modes(&homogeneous(3.0), 1.0, 4).unwrap();
        assert_eq!(modes.len(), swe_count(4));
        for w in modes.windows(2) {
            assert!(w[0].t.norm() >= w[1].t.norm());
        }
        let first = modes[0];
        let multiplicity = modes.iter().filter(|m| m.t == first.t).count();
        assert_eq!(multiplicity, 2 * first.index.l + 1);
    }

    #[test]
    fn forward_and_backward_dyadics_are_basis_free() {
        let coefficients = mie_coefficients(&homogeneous(3.0), 1.0, 6).unwrap();
        let z = [0.0, 0.0, 1.0];
        for obs in [z, [0.0, 0.0, -1.0]] {
            let s = sphere_dyadic(&coefficients, &obs, &z);
            // Proportional to the transverse projector I − ẑẑ.
            assert!((s[0][0] - s[1][1]).norm() < 1e-15);
            assert!(s[0][1].norm() < 1e-15 && s[2][2].norm() < 1e-15);
        }
    }
}
