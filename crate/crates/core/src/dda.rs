//! Volumetric point-dipole method of moments.
//!
//! Unknowns are the current moments `I_i` (three Cartesian components per
//! dipole) in the system `Z I = V`. The diagonal blocks carry the
//! Clausius–Mossotti inverse polarizability with the radiation-reaction
//! term, which makes `Re Z` exactly the radiation operator; the off-diagonal
//! blocks are `jkZ₀ G(r_i − r_j)` with the free-space dyadic Green function.

use std::f64::consts::PI;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, CMat, C64, J};
use crate::modes::{CharacteristicExcitation, Z0};
use crate::par::Execution;
use crate::quadrature::{dot, Direction, QuadratureRule, Vec3};
use crate::scattering::{Capability, ScatteringBackend};

/// Rectangular block of identical cubic cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub extent: [usize; 3],
    pub spacing_m: f64,
    pub eps_r: f64,
}

impl BlockSpec {
    /// Half the diagonal of the block's outer boundary.
    pub fn circumscribing_radius(&self) -> f64 {
        let [nx, ny, nz] = self.extent.map(|n| n as f64 * self.spacing_m);
        0.5 * (nx * nx + ny * ny + nz * nz).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct DipoleModel {
    pub positions: Vec<Vec3>,
    /// `1/α` per dipole in m⁻³, radiation reaction included.
    pub polarizability_inverse: Vec<C64>,
    pub k: f64,
    pub lattice_spacing: f64,
}

impl DipoleModel {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Moves every dipole by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        let mut m = self.clone();
        for p in &mut m.positions {
            for i in 0..3 {
                p[i] += offset[i];
            }
        }
        m
    }
}

/// `1/α` of a cell of volume `spacing³`: Clausius–Mossotti plus `jk³/(6π)`.
pub fn inverse_polarizability(eps_r: f64, spacing: f64, k: f64) -> C64 {
    let static_part = (eps_r + 2.0) / (3.0 * spacing.powi(3) * (eps_r - 1.0));
    C64::new(static_part, k.powi(3) / (6.0 * PI))
}

/// Dipole lattice centred on the origin.
pub fn build_block(extent: [usize; 3], spacing: f64, eps_r: f64, k: f64) -> Result<DipoleModel> {
    if extent.contains(&0) {
        return Err(Error::DegenerateExtent(extent));
    }
    if eps_r == 1.0 {
        return Err(Error::ZeroContrast);
    }
    if !(eps_r > 1.0 && eps_r.is_finite()) {
        return Err(Error::InvalidGeometry(format!("dipole backend needs a finite eps_r > 1, got {eps_r}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) || !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidGeometry(format!("spacing and k must be positive (spacing = {spacing}, k = {k})")));
    }
    let wavelength = 2.0 * PI / k;
    if spacing > wavelength / 10.0 {
        warn!("lattice spacing {spacing:e} m exceeds a tenth of the wavelength {wavelength:e} m");
    }
    let centre = extent.map(|n| (n as f64 - 1.0) / 2.0);
    let mut positions = Vec::with_capacity(extent.iter().product());
    for ix in 0..extent[0] {
        for iy in 0..extent[1] {
            for iz in 0..extent[2] {
                positions.push([
                    (ix as f64 - centre[0]) * spacing,
                    (iy as f64 - centre[1]) * spacing,
                    (iz as f64 - centre[2]) * spacing,
                ]);
            }
        }
    }
    let inverse = inverse_polarizability(eps_r, spacing, k);
    Ok(DipoleModel { polarizability_inverse: vec![inverse; positions.len()], positions, k, lattice_spacing: spacing })
}

/// Free-space dyadic Green function for `e^{jωt}`, `G(R) = e^{−jkR}/(4πR)[...]`.
pub fn dyadic_green(k: f64, separation: &Vec3) -> [[C64; 3]; 3] {
    let r = dot(separation, separation).sqrt();
    let kr = k * r;
    let unit = separation.map(|c| c / r);
    let scalar = C64::from_polar(1.0 / (4.0 * PI * r), -kr);
    let transverse = C64::new(1.0 - 1.0 / (kr * kr), -1.0 / kr);
    let longitudinal = C64::new(-1.0 + 3.0 / (kr * kr), 3.0 / kr);
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let identity = if a == b { transverse } else { C64::new(0.0, 0.0) };
            g[a][b] = scalar * (identity + longitudinal * (unit[a] * unit[b]));
        }
    }
    g
}

/// Factorized impedance matrix.
pub struct ImpedanceSystem {
    z: CMat,
    lu: PartialPivLu<C64>,
    /// Ratio of the largest to the smallest pivot magnitude, a cheap
    /// conditioning indicator.
    pub pivot_ratio: f64,
}

impl std::fmt::Debug for ImpedanceSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImpedanceSystem")
            .field("dimension", &self.z.nrows())
            .field("pivot_ratio", &self.pivot_ratio)
            .finish()
    }
}

impl ImpedanceSystem {
    /// Factorizes an explicit matrix.
    pub fn from_matrix(z: CMat) -> Result<Self> {
        let lu = z.partial_piv_lu();
        let pivots: Vec<f64> = (0..z.nrows()).map(|i| lu.U()[(i, i)].norm()).collect();
        let largest = pivots.iter().copied().fold(0.0, f64::max);
        let smallest = pivots.iter().copied().fold(f64::INFINITY, f64::min);
        if !(smallest > 0.0) || !largest.is_finite() {
            return Err(Error::SingularImpedance(format!("pivot magnitudes span [{smallest:e}, {largest:e}]")));
        }
        Ok(ImpedanceSystem { z, lu, pivot_ratio: largest / smallest })
    }

    pub fn z(&self) -> &CMat {
        &self.z
    }

    /// Radiation part `Re Z`.
    pub fn r(&self) -> Mat<f64> {
        Mat::from_fn(self.z.nrows(), self.z.ncols(), |i, j| self.z[(i, j)].re)
    }

    /// Reactance part `Im Z`.
    pub fn x(&self) -> Mat<f64> {
        Mat::from_fn(self.z.nrows(), self.z.ncols(), |i, j| self.z[(i, j)].im)
    }

    pub fn solve(&self, rhs: &CMat) -> CMat {
        self.lu.solve(rhs)
    }

    pub fn solve_vec(&self, rhs: &[C64]) -> Vec<C64> {
        let b = CMat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Impedance matrix of the model.
pub fn assemble_z(model: &DipoleModel) -> Result<ImpedanceSystem> {
    let n = model.len();
    let k = model.k;
    let mut z = CMat::zeros(3 * n, 3 * n);
    for i in 0..n {
        let self_term = -J * (Z0 / k) * model.polarizability_inverse[i];
        for c in 0..3 {
            z[(3 * i + c, 3 * i + c)] = self_term;
        }
        for j in i + 1..n {
            let d = [0, 1, 2].map(|c| model.positions[i][c] - model.positions[j][c]);
            if dot(&d, &d) == 0.0 {
                return Err(Error::InvalidGeometry(format!("dipoles {i} and {j} coincide")));
            }
            let g = dyadic_green(k, &d);
            for a in 0..3 {
                for b in 0..3 {
                    let v = J * k * Z0 * g[a][b];
                    z[(3 * i + a, 3 * j + b)] = v;
                    z[(3 * j + b, 3 * i + a)] = v;
                }
            }
        }
    }
    ImpedanceSystem::from_matrix(z)
}

/// Rows `K_γ(r̂_p)` for every rule point and polarization, θ block first.
#[derive(Clone, Debug)]
pub struct FarFieldOperator {
    pub rows: CMat,
}

pub fn farfield_operator(model: &DipoleModel, rule: &QuadratureRule) -> FarFieldOperator {
    let n = rule.len();
    let k = model.k;
    let prefactor = -J * Z0 * k / (4.0 * PI);
    let mut rows = CMat::zeros(2 * n, 3 * model.len());
    for (p, dir) in rule.points.iter().enumerate() {
        let r = dir.unit_vector();
        for (i, pos) in model.positions.iter().enumerate() {
            let phase = prefactor * C64::from_polar(1.0, k * dot(&r, pos));
            for g in 0..2 {
                let pol = dir.polarization(g);
                for c in 0..3 {
                    rows[(g * n + p, 3 * i + c)] = phase * pol[c];
                }
            }
        }
    }
    FarFieldOperator { rows }
}

/// `V_i = amplitude · p̂ e^{−jk r̂′·r_i}` for a plane wave along `dir`.
pub fn planewave_rhs(model: &DipoleModel, dir: &Direction, polarization: usize, amplitude: C64) -> Vec<C64> {
    let r = dir.unit_vector();
    let pol = dir.polarization(polarization);
    let mut v = Vec::with_capacity(3 * model.len());
    for pos in &model.positions {
        let phase = amplitude * C64::from_polar(1.0, -model.k * dot(&r, pos));
        v.extend(pol.iter().map(|&c| phase * c));
    }
    v
}

/// `−(1/Z₀) K_γ(r̂_p) Z⁻¹ K_γ′ᴴ(r̂_q)` for one entry.
pub fn s_entry_from_z(system: &ImpedanceSystem, k_op: &FarFieldOperator, row: usize, col: usize) -> C64 {
    let m = k_op.rows.ncols();
    let rhs: Vec<C64> = (0..m).map(|i| k_op.rows[(col, i)].conj()).collect();
    let current = system.solve_vec(&rhs);
    -(0..m).map(|i| k_op.rows[(row, i)] * current[i]).sum::<C64>() / Z0
}

/// The whole unweighted matrix `−(1/Z₀) K Z⁻¹ Kᴴ`.
pub fn s_matrix_from_z(system: &ImpedanceSystem, k_op: &FarFieldOperator) -> CMat {
    let kh = k_op.rows.adjoint().to_owned();
    let w = system.solve(&kh);
    let s = &k_op.rows * w;
    CMat::from_fn(s.nrows(), s.ncols(), |i, j| -s[(i, j)] / Z0)
}

/// Characteristic eigenpairs of `X I = λ R I`.
#[derive(Clone, Debug)]
pub struct ClassicalModes {
    /// Sorted by `|λ|` ascending.
    pub lambdas: Vec<f64>,
    /// Columns `I_n`, normalized so that `I_mᵀ R I_n = δ_mn`.
    pub currents: Mat<f64>,
    /// Dimension of the numerically radiating subspace of `R`.
    pub radiating_rank: usize,
}

/// Solves the generalized problem on the radiating subspace of `R`.
///
/// With `R = U Σ Uᵀ` split into radiating (`r`) and non-radiating (`n`)
/// directions, the non-radiating components follow from the second block row
/// and leave `(X_rr − X_rn X_nn⁻¹ X_nr) a = λ Σ_r a`.
pub fn classical_cm(system: &ImpedanceSystem) -> Result<ClassicalModes> {
    let r = system.r();
    let x = system.x();
    let dim = r.nrows();
    let (sigma, u) = symmetric_eig(&r)?;
    let largest = sigma.iter().copied().fold(0.0, f64::max);
    if !(largest > 0.0) {
        return Err(Error::Domain("radiation matrix R vanishes".into()));
    }
    let keep: Vec<usize> = (0..dim).filter(|&i| sigma[i] > 1e-12 * largest).collect();
    let drop: Vec<usize> = (0..dim).filter(|&i| sigma[i] <= 1e-12 * largest).collect();
    let ur = Mat::from_fn(dim, keep.len(), |i, j| u[(i, keep[j])]);
    let un = Mat::from_fn(dim, drop.len(), |i, j| u[(i, drop[j])]);
    let xr = ur.transpose() * &x;
    let x_rr = &xr * &ur;
    let mut reduced = x_rr.clone();
    let mut back = Mat::<f64>::zeros(drop.len(), keep.len());
    if !drop.is_empty() {
        let x_rn = &xr * &un;
        let x_nn = un.transpose() * &x * &un;
        let x_nr = x_rn.transpose().to_owned();
        let lu = x_nn.partial_piv_lu();
        back = lu.solve(&x_nr);
        reduced = &x_rr - &x_rn * &back;
    }
    let root: Vec<f64> = keep.iter().map(|&i| sigma[i].sqrt()).collect();
    let nr = keep.len();
    let scaled = Mat::from_fn(nr, nr, |i, j| 0.5 * (reduced[(i, j)] + reduced[(j, i)]) / (root[i] * root[j]));
    let (lambda, c) = symmetric_eig(&scaled)?;
    let mut order: Vec<usize> = (0..nr).collect();
    order.sort_by(|&a, &b| lambda[a].abs().total_cmp(&lambda[b].abs()));
    let mut currents = Mat::<f64>::zeros(dim, nr);
    for (col, &m) in order.iter().enumerate() {
        let a: Vec<f64> = (0..nr).map(|i| c[(i, m)] / root[i]).collect();
        let b: Vec<f64> = (0..drop.len()).map(|i| -(0..nr).map(|j| back[(i, j)] * a[j]).sum::<f64>()).collect();
        for row in 0..dim {
            let radiating: f64 = (0..nr).map(|j| ur[(row, j)] * a[j]).sum();
            let silent: f64 = (0..drop.len()).map(|j| un[(row, j)] * b[j]).sum();
            currents[(row, col)] = radiating + silent;
        }
    }
    Ok(ClassicalModes { lambdas: order.iter().map(|&m| lambda[m]).collect(), currents, radiating_rank: nr })
}

/// Current excited by the characteristic field of a mode.
pub fn modal_current(
    excitation: &CharacteristicExcitation,
    system: &ImpedanceSystem,
    model: &DipoleModel,
) -> (Vec<C64>, Vec<C64>) {
    let mut v = Vec::with_capacity(3 * model.len());
    for pos in &model.positions {
        v.extend(excitation.field(pos));
    }
    let i = system.solve_vec(&v);
    (v, i)
}

/// Dipole-lattice backend; the model is rebuilt for every wavenumber.
#[derive(Clone, Debug)]
pub struct DdaBackend {
    pub block: BlockSpec,
}

impl DdaBackend {
    pub fn new(block: BlockSpec) -> Self {
        DdaBackend { block }
    }

    pub fn model(&self, k: f64) -> Result<DipoleModel> {
        build_block(self.block.extent, self.block.spacing_m, self.block.eps_r, k)
    }
}

impl ScatteringBackend for DdaBackend {
    fn capability(&self) -> Capability {
        Capability { name: "dda", wavenumbers: (f64::MIN_POSITIVE, f64::INFINITY), magnetic_materials: false }
    }

    fn far_field(&self, k: f64, incident: &Direction, polarization: usize, rule: &QuadratureRule) -> Result<Vec<C64>> {
        let model = self.model(k)?;
        let system = assemble_z(&model)?;
        let k_op = farfield_operator(&model, rule);
        let current = system.solve_vec(&planewave_rhs(&model, incident, polarization, C64::new(1.0, 0.0)));
        Ok(apply_rows(&k_op.rows, &current))
    }

    fn far_fields(&self, k: f64, rule: &QuadratureRule, execution: Execution) -> Result<CMat> {
        let model = self.model(k)?;
        let system = assemble_z(&model)?;
        let k_op = farfield_operator(&model, rule);
        let n = rule.len();
        let columns = execution.map(2 * n, |col| {
            let v = planewave_rhs(&model, &rule.points[col % n], col / n, C64::new(1.0, 0.0));
            apply_rows(&k_op.rows, &system.solve_vec(&v))
        });
        Ok(CMat::from_fn(2 * n, 2 * n, |i, j| columns[j][i]))
    }
}

fn apply_rows(rows: &CMat, v: &[C64]) -> Vec<C64> {
    (0..rows.nrows()).map(|i| (0..rows.ncols()).map(|j| rows[(i, j)] * v[j]).sum()).collect()
}
