//! The sampled scattering dyadic, assembly from a backend, quadrature
//! weighting and the reciprocity check.
//!
//! Layout: row `(γ, p)` and column `(γ′, q)` with the θ block first, so the
//! matrix is `[S_θθ′ S_θφ′; S_φθ′ S_φφ′]` with `N_q × N_q` blocks.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, J};
use crate::par::Execution;
use crate::quadrature::{dot, Direction, QuadratureRule};

/// What a backend can handle.
#[derive(Clone, Debug, PartialEq)]
pub struct Capability {
    pub name: &'static str,
    /// Inclusive wavenumber range in rad/m.
    pub wavenumbers: (f64, f64),
    pub magnetic_materials: bool,
}

impl Capability {
    pub fn supports(&self, k: f64) -> bool {
        k.is_finite() && k >= self.wavenumbers.0 && k <= self.wavenumbers.1
    }
}

/// A full-wave solver that returns far fields for plane-wave excitation.
///
/// The incident field is `p̂ e^{−jk r̂′·r}` with unit amplitude and `p̂` the
/// `θ̂` (polarization 0) or `φ̂` (polarization 1) vector of `r̂′`. The result is
/// the scattered far-field amplitude `F` (with `E ≈ F e^{−jkr}/r`) sampled at
/// every rule point, stacked `[F_θ; F_φ]`.
pub trait ScatteringBackend: Sync {
    fn capability(&self) -> Capability;

    fn far_field(&self, k: f64, incident: &Direction, polarization: usize, rule: &QuadratureRule) -> Result<Vec<C64>>;

    /// Far fields for all `2N_q` excitations along the rule's own directions,
    /// column `(γ′, q)` in the canonical layout. Backends that can share work
    /// across excitations override this.
    fn far_fields(&self, k: f64, rule: &QuadratureRule, execution: Execution) -> Result<CMat> {
        let n = rule.len();
        let columns = execution.try_map(2 * n, |col| {
            let (pol, q) = (col / n, col % n);
            self.far_field(k, &rule.points[q], pol, rule)
                .map_err(|e| Error::Backend { excitation: col, source: Box::new(e) })
        })?;
        Ok(CMat::from_fn(2 * n, 2 * n, |i, j| columns[j][i]))
    }
}

/// A backend with nothing to scatter.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmptyBackend;

impl ScatteringBackend for EmptyBackend {
    fn capability(&self) -> Capability {
        Capability { name: "empty", wavenumbers: (0.0, f64::INFINITY), magnetic_materials: true }
    }

    fn far_field(&self, _: f64, _: &Direction, _: usize, rule: &QuadratureRule) -> Result<Vec<C64>> {
        Ok(vec![C64::new(0.0, 0.0); 2 * rule.len()])
    }
}

/// Scattering-dyadic samples on a quadrature rule.
#[derive(Clone, Debug)]
pub struct ScatteringMatrix {
    rule: QuadratureRule,
    k: f64,
    unweighted: CMat,
    weighted: Option<CMat>,
}

impl ScatteringMatrix {
    pub fn new(rule: QuadratureRule, k: f64, matrix: CMat) -> Result<Self> {
        let n = 2 * rule.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "scattering matrix".into(),
                expected: n,
                found: if matrix.nrows() != n { matrix.nrows() } else { matrix.ncols() },
            });
        }
        for j in 0..n {
            for i in 0..n {
                let z = matrix[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Domain(format!("non-finite scattering entry at ({i}, {j})")));
                }
            }
        }
        Ok(ScatteringMatrix { rule, k, unweighted: matrix, weighted: None })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.rule.len()
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted.is_some()
    }

    /// The samples `S(r̂_p, r̂_q)` without weights.
    pub fn unweighted(&self) -> &CMat {
        &self.unweighted
    }

    /// `S · blockdiag(Λ, Λ)`, present once [`apply_weights`] has run.
    pub fn weighted(&self) -> Option<&CMat> {
        self.weighted.as_ref()
    }

    /// One of the four `N_q × N_q` blocks of the unweighted matrix.
    pub fn block(&self, row_pol: usize, col_pol: usize) -> CMat {
        let n = self.n_points();
        CMat::from_fn(n, n, |i, j| self.unweighted[(row_pol * n + i, col_pol * n + j)])
    }
}

/// Fills the scattering matrix with `2N_q` backend excitations.
pub fn assemble(
    backend: &dyn ScatteringBackend,
    rule: &QuadratureRule,
    k: f64,
    execution: Execution,
) -> Result<ScatteringMatrix> {
    if !backend.capability().supports(k) {
        return Err(Error::UnsupportedWavenumber { k });
    }
    let fields = backend.far_fields(k, rule, execution)?;
    let scale = -J * k / (4.0 * PI);
    let matrix = CMat::from_fn(fields.nrows(), fields.ncols(), |i, j| fields[(i, j)] * scale);
    ScatteringMatrix::new(rule.clone(), k, matrix)
}

/// Right-multiplies by `blockdiag(Λ, Λ)`.
pub fn apply_weights(mut smat: ScatteringMatrix) -> Result<ScatteringMatrix> {
    if smat.weighted.is_some() {
        return Err(Error::AlreadyWeighted);
    }
    let n = smat.n_points();
    let weights = &smat.rule.weights;
    let s = &smat.unweighted;
    smat.weighted = Some(CMat::from_fn(2 * n, 2 * n, |i, j| s[(i, j)] * weights[j % n]));
    Ok(smat)
}

/// Location and size of the largest reciprocity violation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReciprocityReport {
    pub residual: f64,
    /// Matrix `(row, column)` of the worst entry.
    pub worst: Option<(usize, usize)>,
}

/// Sign of each basis vector under `r̂ → −r̂`: `γ̂(r̂_p) = sign · γ̂(−r̂_p)`.
///
/// Away from the poles this is `(+1, −1)`; on the poles, where both azimuths
/// are pinned to zero, it is `(−1, +1)`.
pub fn inversion_signs(rule: &QuadratureRule, antipodes: &[usize]) -> Vec<[f64; 2]> {
    rule.points
        .iter()
        .zip(antipodes)
        .map(|(d, &a)| {
            let o = &rule.points[a];
            [0, 1].map(|g| dot(&d.polarization(g), &o.polarization(g)).signum())
        })
        .collect()
}

/// Checks `S(r̂, r̂′) = Sᵀ(−r̂′, −r̂)` entry by entry.
pub fn reciprocity_report(smat: &ScatteringMatrix) -> Result<ReciprocityReport> {
    let rule = smat.rule();
    let antipodes = rule.antipodes()?;
    let signs = inversion_signs(rule, &antipodes);
    let n = rule.len();
    let s = smat.unweighted();
    let mut report = ReciprocityReport { residual: 0.0, worst: None };
    for gp in 0..2 {
        for q in 0..n {
            for g in 0..2 {
                for p in 0..n {
                    let direct = s[(g * n + p, gp * n + q)];
                    let mirrored = s[(gp * n + antipodes[q], g * n + antipodes[p])];
                    let r = (direct - mirrored * (signs[p][g] * signs[q][gp])).norm();
                    if r > report.residual {
                        report = ReciprocityReport { residual: r, worst: Some((g * n + p, gp * n + q)) };
                    }
                }
            }
        }
    }
    Ok(report)
}

pub fn reciprocity_residual(smat: &ScatteringMatrix) -> Result<f64> {
    reciprocity_report(smat).map(|r| r.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig, max_abs};
    use crate::quadrature::lebedev_rule;

    fn sample_matrix(n: usize) -> CMat {
        CMat::from_fn(2 * n, 2 * n, |i, j| {
            C64::new(((i * 7 + j * 3) % 11) as f64 * 0.1, ((i + 2 * j) % 5) as f64 * 0.05)
        })
    }

    #[test]
    fn empty_backend_gives_zero_matrix() {
        let rule = lebedev_rule(14).unwrap();
        let s = assemble(&EmptyBackend, &rule, 2.0, Execution::Sequential).unwrap();
        assert_eq!(max_abs(s.unweighted()), 0.0);
        assert_eq!(s.unweighted().ncols(), 28);
        assert_eq!(reciprocity_residual(&s).unwrap(), 0.0);
    }

    #[test]
    fn six_point_weighting_is_a_scalar_multiple() {
        let rule = lebedev_rule(6).unwrap();
        let s = ScatteringMatrix::new(rule, 1.0, sample_matrix(6)).unwrap();
        let w = apply_weights(s.clone()).unwrap();
        let scaled = w.weighted().unwrap();
        for j in 0..12 {
            for i in 0..12 {
                assert!((scaled[(i, j)] - s.unweighted()[(i, j)] * (4.0 * PI / 6.0)).norm() < 1e-15);
            }
        }
        assert!(matches!(apply_weights(w), Err(Error::AlreadyWeighted)));
    }

    #[test]
    fn weighted_spectrum_matches_symmetrized_form() {
        let rule = lebedev_rule(14).unwrap();
        let s = ScatteringMatrix::new(rule.clone(), 1.0, sample_matrix(14)).unwrap();
        let w = apply_weights(s.clone()).unwrap();
        let root: Vec<f64> = rule.weights.iter().chain(&rule.weights).map(|w| w.sqrt()).collect();
        let sym = CMat::from_fn(28, 28, |i, j| s.unweighted()[(i, j)] * root[i] * root[j]);
        let (mut a, _) = eig(w.weighted().unwrap()).unwrap();
        let (mut b, _) = eig(&sym).unwrap();
        let key = |z: &C64| (z.re, z.im);
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_weights_give_zero_matrix() {
        let mut rule = lebedev_rule(14).unwrap();
        rule.weights.iter_mut().for_each(|w| *w = 0.0);
        let s = apply_weights(ScatteringMatrix::new(rule, 1.0, sample_matrix(14)).unwrap()).unwrap();
        assert_eq!(max_abs(s.weighted().unwrap()), 0.0);
    }

    #[test]
    fn inversion_signs_flip_phi_except_on_poles() {
        let rule = lebedev_rule(26).unwrap();
        let signs = inversion_signs(&rule, &rule.antipodes().unwrap());
        for (d, s) in rule.points.iter().zip(&signs) {
            if d.is_pole() {
                assert_eq!(*s, [-1.0, 1.0]);
            } else {
                assert_eq!(*s, [1.0, -1.0]);
            }
        }
    }

    #[test]
    fn injected_asymmetry_is_located() {
        let rule = lebedev_rule(14).unwrap();
        let mut m = CMat::zeros(28, 28);
        m[(3, 17)] = C64::new(0.1, 0.0);
        let s = ScatteringMatrix::new(rule, 1.0, m).unwrap();
        let r = reciprocity_report(&s).unwrap();
        assert!(r.residual >= 0.05);
        let (row, col) = r.worst.unwrap();
        assert!((row, col) == (3, 17) || s.unweighted()[(row, col)].norm() == 0.0);
    }

    #[test]
    fn dimension_checks() {
        let rule = lebedev_rule(6).unwrap();
        assert!(matches!(
            ScatteringMatrix::new(rule, 1.0, CMat::zeros(10, 12)),
            Err(Error::DimensionMismatch { expected: 12, found: 10, .. })
        ));
    }
}
