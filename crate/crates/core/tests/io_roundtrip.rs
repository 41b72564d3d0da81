use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use scatmodes::io::{read_dataset, read_modes, read_tmatrix, write_dataset, write_modes, write_tmatrix};
use scatmodes::linalg::CMat;
use scatmodes::mie::{layered_tmatrix, LayeredSphere, MieBackend, Truncation};
use scatmodes::modes::{decompose, frequency, wavenumber, DEFAULT_SIGNIFICANCE_FLOOR};
use scatmodes::quadrature::{dot, lebedev_rule};
use scatmodes::scattering::{apply_weights, assemble, ScatteringMatrix};
use scatmodes::{Error, Execution};

fn mie_matrix(nq: usize, ka: f64) -> (ScatteringMatrix, f64) {
    let radius = 0.03;
    let f = frequency(ka / radius);
    let sphere = LayeredSphere::equal_shells(radius, &[3.0, 5.0], &[1.0, 2.0]).unwrap();
    let rule = lebedev_rule(nq).unwrap();
    let s =
        assemble(&MieBackend::new(sphere, Truncation::Converged), &rule, wavenumber(f), Execution::default()).unwrap();
    (s, f)
}

#[test]
fn mie_dataset_round_trip_preserves_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let (s, f) = mie_matrix(26, 1.2);
    let path = dir.path().join("mie.csv");
    write_dataset(&s, f, &path).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.matrix.unweighted(), s.unweighted());
    assert_eq!(back.matrix.rule(), s.rule());
    assert_eq!(back.matrix.k().to_bits(), s.k().to_bits());
    let before = decompose(&apply_weights(s).unwrap()).unwrap();
    let after = decompose(&apply_weights(back.matrix).unwrap()).unwrap();
    for (a, b) in before.eigenvalues.iter().zip(&after.eigenvalues) {
        assert!((a - b).norm() <= 1e-15);
    }
}

#[test]
fn writing_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (s, f) = mie_matrix(14, 0.7);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_dataset(&s, f, &a).unwrap();
    write_dataset(&s, f, &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn mode_and_tmatrix_exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (s, _) = mie_matrix(26, 0.9);
    let modes = decompose(&apply_weights(s).unwrap()).unwrap();
    let path = dir.path().join("modes.csv");
    write_modes(&modes, DEFAULT_SIGNIFICANCE_FLOOR, &path).unwrap();
    let back = read_modes(&path).unwrap();
    assert_eq!(back.eigenvalues, modes.eigenvalues);
    assert_eq!(back.eigenvectors, modes.eigenvectors);
    assert_eq!(back.rule, modes.rule);

    let sphere = LayeredSphere::homogeneous(1.0, 4.0, 1.0).unwrap();
    let t = layered_tmatrix(&sphere, 1.5, 4).unwrap();
    let path = dir.path().join("t.csv");
    write_tmatrix(&t, 1.5, &path).unwrap();
    let (back, k) = read_tmatrix(&path).unwrap();
    assert_eq!((back.l_max, &back.entries), (t.l_max, &t.entries));
    assert_eq!(k, 1.5);
}

/// Writes a dataset the way an unrelated producer might: shortest float
/// formatting, column-major entry order, zero-padded rule id left custom.
fn hand_built_single_dipole(path: &std::path::Path, k: f64, t: C64) {
    let rule = lebedev_rule(14).unwrap();
    let n = rule.len();
    let samples: Vec<String> =
        rule.points.iter().zip(&rule.weights).map(|(d, w)| format!("[{},{},{}]", d.theta(), d.phi(), w)).collect();
    let mut text = format!(
        "{{\"kind\":\"farfield-dataset\",\"format_version\":1,\"frequency_hz\":{},\"wavenumber\":{},\"rule_id\":\"custom\",\"n_points\":{n},\"rule\":[{}],\"scaling_note\":\"hand built\"}}\nrow,col,re,im\n",
        frequency(k),
        k,
        samples.join(",")
    );
    for col in 0..2 * n {
        for row in 0..2 * n {
            let a = rule.points[row % n].polarization(row / n);
            let b = rule.points[col % n].polarization(col / n);
            let s = t * (3.0 / (8.0 * PI)) * dot(&a, &b);
            writeln!(text, "{row},{col},{},{}", s.re, s.im).unwrap();
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn hand_built_single_dipole_dataset_gives_its_analytic_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dipole.csv");
    // A lossless dipole: t on the circle |2t + 1| = 1.
    let u: f64 = 0.37;
    let t = C64::new(0.0, -u) / C64::new(1.0, u);
    hand_built_single_dipole(&path, 3.0, t);
    let data = read_dataset(&path).unwrap();
    assert_eq!(data.matrix.rule().id, scatmodes::quadrature::RuleId::Lebedev(14));
    let report = data.validate(DEFAULT_SIGNIFICANCE_FLOOR).unwrap();
    for n in 0..3 {
        assert!((report.modes.eigenvalues[n] - t).norm() < 1e-13, "{}", report.modes.eigenvalues[n]);
    }
    assert!(report.modes.eigenvalues[3].norm() < 1e-13);
    assert!(report.reciprocity.unwrap().residual < 1e-15);
    assert!(report.lossless_max < 1e-13);
}

#[test]
fn duplicate_and_out_of_range_entries_are_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (s, f) = mie_matrix(6, 0.5);
    let path = dir.path().join("d.csv");
    write_dataset(&s, f, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = lines[4];
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 6, .. })));
    lines[5] = "99,0,0,0";
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(read_dataset(&path), Err(Error::Parse { line: 6, .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn arbitrary_matrices_round_trip_bit_exactly(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 288)) {
        let dir = tempfile::tempdir().unwrap();
        let rule = lebedev_rule(6).unwrap();
        let m = CMat::from_fn(12, 12, |i, j| C64::new(values[2 * (12 * i + j)], values[2 * (12 * i + j) + 1]));
        let s = ScatteringMatrix::new(rule, wavenumber(2.5e9), m.clone()).unwrap();
        let path = dir.path().join("x.csv");
        write_dataset(&s, 2.5e9, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let (a, b) = (back.matrix.unweighted()[(i, j)], m[(i, j)]);
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
