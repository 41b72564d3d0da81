//! Characteristic excitations: field probes and re-feeding to the backend.

use num_complex::Complex64 as C64;
use scatmodes::mie::{LayeredSphere, MieBackend, Truncation};
use scatmodes::modes::{characteristic_excitation, decompose, DEFAULT_SIGNIFICANCE_FLOOR, Z0};
use scatmodes::quadrature::{lebedev_rule, Direction, QuadratureRule};
use scatmodes::scattering::{apply_weights, assemble, ScatteringBackend};
use scatmodes::swe::{expand_farfield, vsh_components};
use scatmodes::Execution;

const KA: f64 = 1.1;

/// Series truncated at l = 3, which the 26-point rule resolves exactly.
fn sphere_backend() -> MieBackend {
    MieBackend::new(LayeredSphere::equal_shells(1.0, &[4.0, 2.0], &[1.0, 1.5]).unwrap(), Truncation::Fixed(3))
}

fn leading_excitation(n: usize) -> (scatmodes::modes::ModeSet, scatmodes::modes::CharacteristicExcitation) {
    let rule = lebedev_rule(26).unwrap();
    let s = assemble(&sphere_backend(), &rule, KA, Execution::default()).unwrap();
    let modes = decompose(&apply_weights(s).unwrap()).unwrap();
    let excitation = characteristic_excitation(&modes, n, DEFAULT_SIGNIFICANCE_FLOOR).unwrap();
    (modes, excitation)
}

#[test]
fn excitation_solves_the_vector_helmholtz_equation() {
    let (_, excitation) = leading_excitation(0);
    let h = 1e-3;
    for point in [[0.1, -0.2, 0.3], [0.7, 0.0, -0.4], [0.0, 0.0, 0.0]] {
        let at = |dx: [f64; 3]| excitation.field(&[point[0] + dx[0], point[1] + dx[1], point[2] + dx[2]]);
        let centre = at([0.0; 3]);
        let mut laplacian = [C64::new(0.0, 0.0); 3];
        let mut divergence = C64::new(0.0, 0.0);
        for axis in 0..3 {
            let mut step = [0.0; 3];
            step[axis] = h;
            let plus = at(step);
            step[axis] = -h;
            let minus = at(step);
            for c in 0..3 {
                laplacian[c] += (plus[c] - 2.0 * centre[c] + minus[c]) / (h * h);
            }
            divergence += (plus[axis] - minus[axis]) / (2.0 * h);
        }
        let scale = centre.iter().map(|z| z.norm()).fold(0.0, f64::max) * KA * KA;
        for c in 0..3 {
            let residual = (laplacian[c] + KA * KA * centre[c]).norm();
            assert!(residual < 1e-5 * scale, "Helmholtz residual {residual:e} at {point:?}");
        }
        assert!(divergence.norm() < 1e-6 * scale / KA, "divergence {:e}", divergence.norm());
    }
}

/// Directions away from every Lebedev node, with nominal equal weights.
fn probe_rule() -> QuadratureRule {
    let points: Vec<Direction> = [(0.3, 0.2), (1.1, 2.9), (2.2, 4.4), (1.7, 0.9), (2.9, 5.8)]
        .iter()
        .map(|&(t, p)| Direction::new(t, p).unwrap())
        .collect();
    let w = 4.0 * std::f64::consts::PI / points.len() as f64;
    let n = points.len();
    QuadratureRule::from_samples(points, vec![w; n]).unwrap()
}

#[test]
fn refed_excitation_reproduces_the_modal_far_field_off_the_grid() {
    let backend = sphere_backend();
    for n in [0, 3, 6, 11, 20] {
        let (modes, excitation) = leading_excitation(n);
        let probes = probe_rule();
        let m = probes.len();
        // Scattered far field of the excitation, superposed plane wave by plane wave.
        let mut scattered = vec![C64::new(0.0, 0.0); 2 * m];
        for (dir, amplitude) in excitation.plane_waves() {
            let d = Direction::from_vector(*dir).unwrap();
            for pol in 0..2 {
                let p = d.polarization(pol);
                let a: C64 = (0..3).map(|i| amplitude[i] * p[i]).sum();
                let f = backend.far_field(KA, &d, pol, &probes).unwrap();
                scattered.iter_mut().zip(&f).for_each(|(s, v)| *s += a * v);
            }
        }
        // The mode's far field continued off the grid through its expansion.
        let expansion = expand_farfield(&modes.far_field(n), &modes.rule, 3).unwrap();
        assert!(expansion.residual < 1e-12);
        let mut expected = vec![C64::new(0.0, 0.0); 2 * m];
        for (q, dir) in probes.points.iter().enumerate() {
            for (c, y) in expansion.coefficients.iter().zip(vsh_components(3, dir)) {
                expected[q] += Z0.sqrt() * c * y[0];
                expected[m + q] += Z0.sqrt() * c * y[1];
            }
        }
        let norm = expected.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let error = scattered.iter().zip(&expected).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(error < 1e-10 * norm, "mode {n}: relative error {:e}", error / norm);
    }
}
