//! Eigendecomposition of the weighted scattering matrix and the modal
//! quantities derived from it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{eig, frobenius, vec_norm, CMat, C64, J};
use crate::quadrature::{QuadratureRule, Vec3};
use crate::scattering::ScatteringMatrix;

/// Free-space wave impedance in ohms.
pub const Z0: f64 = 376.730313668;
/// Speed of light in vacuum in m/s.
pub const C0: f64 = 299_792_458.0;
/// Default significance floor below which characteristic angles switch to the
/// `arg(1 + 2t)` form.
pub const DEFAULT_SIGNIFICANCE_FLOOR: f64 = 1e-6;

pub fn wavenumber(frequency_hz: f64) -> f64 {
    2.0 * PI * frequency_hz / C0
}

pub fn frequency(k: f64) -> f64 {
    k * C0 / (2.0 * PI)
}

/// `t = −1/(1 + jλ)`.
pub fn t_from_lambda(lambda: C64) -> C64 {
    -(C64::new(1.0, 0.0) + J * lambda).inv()
}

/// Inverse of [`t_from_lambda`]: `λ = j(1 + 1/t)`; `None` for `t = 0`.
pub fn lambda_from_t(t: C64) -> Option<C64> {
    if t == C64::new(0.0, 0.0) {
        None
    } else {
        Some(J * (C64::new(1.0, 0.0) + t.inv()))
    }
}

fn arg_positive(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        let wrapped = a + 2.0 * PI;
        if wrapped >= 2.0 * PI {
            0.0
        } else {
            wrapped
        }
    } else {
        a
    }
}

/// Characteristic angle: `arg t` above the floor, otherwise
/// `arg(1 + 2t)/2 + π/2`. Both arguments are taken in `[0, 2π)`. The second
/// value is `true` when the angle sits on the branch endpoint.
pub fn characteristic_angle(t: C64, floor: f64) -> (f64, bool) {
    if t.norm() > floor {
        (arg_positive(t), false)
    } else {
        let a = arg_positive(C64::new(1.0, 0.0) + 2.0 * t);
        (a / 2.0 + PI / 2.0, a == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModalMetrics {
    pub significance: f64,
    /// `None` when `t = 0`, i.e. `|λ| = ∞`.
    pub lambda: Option<C64>,
    pub alpha: f64,
    /// The angle was computed exactly at the branch endpoint.
    pub alpha_at_endpoint: bool,
    pub s: C64,
    pub lossless_residual: f64,
}

pub fn metrics(t: C64, floor: f64) -> ModalMetrics {
    let (alpha, alpha_at_endpoint) = characteristic_angle(t, floor);
    let s = 2.0 * t + 1.0;
    ModalMetrics {
        significance: t.norm(),
        lambda: lambda_from_t(t),
        alpha,
        alpha_at_endpoint,
        s,
        lossless_residual: (s.norm() - 1.0).abs(),
    }
}

/// Eigenpairs of one weighted scattering matrix.
#[derive(Clone, Debug)]
pub struct ModeSet {
    pub k: f64,
    pub rule: QuadratureRule,
    /// Sorted by `|t|` descending.
    pub eigenvalues: Vec<C64>,
    /// Column `n` is `F_n = [F_θ; F_φ]`, normalized to `F_nᴴ blockdiag(Λ,Λ) F_n = 1`.
    pub eigenvectors: CMat,
    /// `‖S_w F_n − t_n F_n‖ / (‖S_w‖ ‖F_n‖)`.
    pub residuals: Vec<f64>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn far_field(&self, n: usize) -> Vec<C64> {
        crate::linalg::column(&self.eigenvectors, n)
    }

    pub fn metrics(&self, n: usize, floor: f64) -> ModalMetrics {
        metrics(self.eigenvalues[n], floor)
    }

    /// `blockdiag(Λ, Λ)` diagonal used for inner products. Absolute values
    /// keep the form definite for rules with negative weights.
    pub fn inner_weights(&self) -> Vec<f64> {
        inner_weights(&self.rule)
    }
}

pub(crate) fn inner_weights(rule: &QuadratureRule) -> Vec<f64> {
    rule.weights.iter().chain(&rule.weights).map(|w| w.abs()).collect()
}

fn inner(a: &[C64], w: &[f64], b: &[C64]) -> C64 {
    crate::linalg::weighted_dot(a, w, b)
}

/// Tuning knobs of [`decompose_with`].
#[derive(Clone, Copy, Debug)]
pub struct DecomposeOptions {
    /// Eigenvalues closer than this times `max |t|` form one eigenspace.
    pub degeneracy_tolerance: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { degeneracy_tolerance: 1e-9 }
    }
}

pub fn decompose(smat: &ScatteringMatrix) -> Result<ModeSet> {
    decompose_with(smat, DecomposeOptions::default())
}

/// Full eigendecomposition with deterministic normalization, ordering and
/// eigenspace bases.
pub fn decompose_with(smat: &ScatteringMatrix, options: DecomposeOptions) -> Result<ModeSet> {
    let sw = smat.weighted().ok_or(Error::NotWeighted)?;
    let dim = sw.nrows();
    let w = inner_weights(smat.rule());
    let (values, vectors) = eig(sw)?;
    let scale = values.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let tolerance = options.degeneracy_tolerance * scale;

    // Group numerically coincident eigenvalues.
    let mut parent: Vec<usize> = (0..dim).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..dim {
        for j in i + 1..dim {
            if (values[i] - values[j]).norm() <= tolerance {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; dim];
    for i in 0..dim {
        let r = root(&mut parent, i);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(i);
    }

    let mut modes: Vec<(C64, Vec<C64>)> = Vec::with_capacity(dim);
    let mut group_keys: Vec<(f64, f64, usize)> = Vec::new();
    for members in &groups {
        let raw: Vec<Vec<C64>> = members.iter().map(|&i| crate::linalg::column(&vectors, i)).collect();
        let mut basis = if members.len() == 1 { Vec::new() } else { canonical_basis(&raw, &w) };
        if basis.len() != members.len() {
            // Single eigenvalue, or a numerically defective group whose
            // vectors do not span the full multiplicity.
            basis = raw.into_iter().map(|v| normalize(v, &w)).collect();
        }
        let first = modes.len();
        for mut f in basis {
            let sf = apply(sw, &f);
            let t = inner(&f, &w, &sf);
            fix_phase(&mut f);
            modes.push((t, f));
        }
        let mean: C64 = modes[first..].iter().map(|m| m.0).sum::<C64>() / (modes.len() - first) as f64;
        group_keys.push((mean.norm(), arg_positive(mean), first));
    }
    let mut order: Vec<usize> = (0..group_keys.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (group_keys[a], group_keys[b]);
        y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2))
    });
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut columns = Vec::with_capacity(dim);
    for g in order {
        let start = group_keys[g].2;
        let end = group_keys.get(g + 1).map(|k| k.2).unwrap_or(modes.len());
        for (t, f) in &modes[start..end] {
            eigenvalues.push(*t);
            columns.push(f.clone());
        }
    }

    let norm = frobenius(sw);
    let residuals = eigenvalues
        .iter()
        .zip(&columns)
        .map(|(t, f)| {
            let sf = apply(sw, f);
            let r: Vec<C64> = sf.iter().zip(f).map(|(a, b)| a - b * t).collect();
            let denom = norm * vec_norm(f);
            if denom == 0.0 {
                0.0
            } else {
                vec_norm(&r) / denom
            }
        })
        .collect();

    Ok(ModeSet {
        k: smat.k(),
        rule: smat.rule().clone(),
        eigenvalues,
        eigenvectors: crate::linalg::from_columns(dim, &columns),
        residuals,
    })
}

fn apply(m: &CMat, v: &[C64]) -> Vec<C64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

fn normalize(mut v: Vec<C64>, w: &[f64]) -> Vec<C64> {
    let n = inner(&v, w, &v).re.sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
    v
}

/// Rotates `v` so its first largest-magnitude entry is real and positive.
fn fix_phase(v: &mut [C64]) {
    let largest = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if largest == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= (1.0 - 1e-9) * largest).unwrap();
    let rotation = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= rotation);
}

/// Basis of the span of `vectors` that depends only on the subspace: the
/// projector's columns `P e_i` are orthonormalized in index order, each step
/// taking the first column whose remaining norm is (numerically) the largest.
fn canonical_basis(vectors: &[Vec<C64>], w: &[f64]) -> Vec<Vec<C64>> {
    let dim = vectors[0].len();
    // Orthonormal basis of the span (modified Gram–Schmidt).
    let mut q: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &q {
                let c = inner(b, w, &r);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= y * c);
            }
        }
        let n = inner(&r, w, &r).re.sqrt();
        let reference = inner(v, w, v).re.sqrt();
        if n > 1e-8 * reference {
            q.push(r.into_iter().map(|z| z / n).collect());
        }
    }
    let d = q.len();
    // Coordinates of P e_i in the basis q: conj(q_k[i]) w_i.
    let mut candidates: Vec<Vec<C64>> = (0..dim).map(|i| q.iter().map(|b| b[i].conj() * w[i]).collect()).collect();
    let mut chosen: Vec<Vec<C64>> = Vec::with_capacity(d);
    for _ in 0..d {
        let norms: Vec<f64> = candidates.iter().map(|c| vec_norm(c)).collect();
        let largest = norms.iter().copied().fold(0.0, f64::max);
        if largest == 0.0 {
            break;
        }
        let pivot = norms.iter().position(|&n| n >= (1.0 - 1e-9) * largest).unwrap();
        let u: Vec<C64> = candidates[pivot].iter().map(|z| z / norms[pivot]).collect();
        for c in candidates.iter_mut() {
            let proj: C64 = u.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
            c.iter_mut().zip(&u).for_each(|(x, y)| *x -= y * proj);
        }
        chosen.push(u);
    }
    chosen.iter().map(|u| (0..dim).map(|i| q.iter().zip(u).map(|(b, c)| b[i] * c).sum()).collect()).collect()
}

/// Per-mode `||2t+1| − 1|` and the largest value among modes above `floor`.
#[derive(Clone, Debug, PartialEq)]
pub struct LosslessSummary {
    pub per_mode: Vec<f64>,
    pub max_above_floor: f64,
}

pub fn lossless_residual(modes: &ModeSet, floor: f64) -> LosslessSummary {
    let per_mode: Vec<f64> = modes.eigenvalues.iter().map(|t| metrics(*t, floor).lossless_residual).collect();
    let max_above_floor =
        modes.eigenvalues.iter().zip(&per_mode).filter(|(t, _)| t.norm() > floor).map(|(_, r)| *r).fold(0.0, f64::max);
    LosslessSummary { per_mode, max_above_floor }
}

/// `G_mn = F_mᴴ blockdiag(Λ, Λ) F_n`.
pub fn farfield_orthogonality(modes: &ModeSet) -> CMat {
    let w = modes.inner_weights();
    let f = &modes.eigenvectors;
    let wf = CMat::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] * w[i]);
    f.adjoint() * wf
}

/// Incident field whose scattered far field is the given mode:
/// `E(r) = −jk/(4π t) Σ_q ℓ_q F(r̂_q) e^{−jk r̂_q·r}`.
#[derive(Clone, Debug)]
pub struct CharacteristicExcitation {
    pub k: f64,
    pub t: C64,
    directions: Vec<Vec3>,
    amplitudes: Vec<[C64; 3]>,
}

impl CharacteristicExcitation {
    pub fn new(far_field: &[C64], t: C64, rule: &QuadratureRule, k: f64, floor: f64) -> Result<Self> {
        let n = rule.len();
        if far_field.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                what: "modal far field".into(),
                expected: 2 * n,
                found: far_field.len(),
            });
        }
        if !(t.norm() > floor) {
            return Err(Error::BelowSignificanceThreshold { significance: t.norm(), floor });
        }
        let prefactor = -J * k / (4.0 * PI * t);
        let amplitudes = rule
            .points
            .iter()
            .enumerate()
            .map(|(q, d)| {
                let (th, ph) = (d.theta_hat(), d.phi_hat());
                let c = prefactor * rule.weights[q];
                [0, 1, 2].map(|i| c * (far_field[q] * th[i] + far_field[n + q] * ph[i]))
            })
            .collect();
        Ok(CharacteristicExcitation {
            k,
            t,
            directions: rule.points.iter().map(|d| d.unit_vector()).collect(),
            amplitudes,
        })
    }

    /// Plane-wave components: propagation direction and vector amplitude.
    pub fn plane_waves(&self) -> impl Iterator<Item = (&Vec3, &[C64; 3])> {
        self.directions.iter().zip(&self.amplitudes)
    }

    pub fn field(&self, r: &Vec3) -> [C64; 3] {
        let mut e = [C64::new(0.0, 0.0); 3];
        for (d, a) in self.plane_waves() {
            let phase = C64::from_polar(1.0, -self.k * crate::quadrature::dot(d, r));
            for i in 0..3 {
                e[i] += a[i] * phase;
            }
        }
        e
    }
}

/// Characteristic excitation of mode `n` of a mode set.
pub fn characteristic_excitation(modes: &ModeSet, n: usize, floor: f64) -> Result<CharacteristicExcitation> {
    CharacteristicExcitation::new(&modes.far_field(n), modes.eigenvalues[n], &modes.rule, modes.k, floor)
}
