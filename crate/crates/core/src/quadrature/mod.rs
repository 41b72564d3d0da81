//! Lebedev rules on the unit sphere, the plane-wave count estimate, and
//! weighted integration.

mod tables;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// A direction on the unit sphere in spherical coordinates.
///
/// The unit vector is always recomputed from `(theta, phi)`, so two directions
/// with the same angles are bit-identical. On the poles the azimuth is pinned
/// to zero, which also fixes the local `θ̂`, `φ̂` frame there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
    unit: Vec3,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!("direction angles out of range: theta = {theta}, phi = {phi}")));
        }
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        if theta == 0.0 || theta == PI {
            phi = 0.0;
        }
        Ok(Self::from_angles_unchecked(theta, phi))
    }

    fn from_angles_unchecked(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Direction { theta, phi, unit: [st * cp, st * sp, ct] }
    }

    /// Direction of a nonzero vector.
    pub fn from_vector(v: Vec3) -> Result<Self> {
        let rho = v[0].hypot(v[1]);
        if rho == 0.0 && v[2] == 0.0 {
            return Err(Error::Domain("zero vector has no direction".into()));
        }
        let theta = rho.atan2(v[2]);
        let phi = if rho == 0.0 {
            0.0
        } else {
            let p = v[1].atan2(v[0]);
            if p < 0.0 {
                let wrapped = p + 2.0 * PI;
                if wrapped >= 2.0 * PI {
                    0.0
                } else {
                    wrapped
                }
            } else {
                p
            }
        };
        Direction::new(theta, phi)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unit_vector(&self) -> Vec3 {
        self.unit
    }

    pub fn is_pole(&self) -> bool {
        self.theta == 0.0 || self.theta == PI
    }

    pub fn theta_hat(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [ct * cp, ct * sp, -st]
    }

    pub fn phi_hat(&self) -> Vec3 {
        let (sp, cp) = self.phi.sin_cos();
        [-sp, cp, 0.0]
    }

    /// Polarization unit vector: index 0 is `θ̂`, index 1 is `φ̂`.
    pub fn polarization(&self, component: usize) -> Vec3 {
        match component {
            0 => self.theta_hat(),
            1 => self.phi_hat(),
            _ => panic!("polarization index must be 0 or 1"),
        }
    }
}

/// Identifies where a rule came from, for file headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RuleId {
    Lebedev(usize),
    Custom,
}

impl From<RuleId> for String {
    fn from(id: RuleId) -> String {
        match id {
            RuleId::Lebedev(n) => format!("lebedev-{n}"),
            RuleId::Custom => "custom".to_string(),
        }
    }
}

impl TryFrom<String> for RuleId {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "custom" {
            return Ok(RuleId::Custom);
        }
        s.strip_prefix("lebedev-")
            .and_then(|n| n.parse().ok())
            .map(RuleId::Lebedev)
            .ok_or_else(|| format!("unrecognised rule id '{s}'"))
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&String::from(*self))
    }
}

/// Quadrature points with their solid-angle weights, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub id: RuleId,
    pub points: Vec<Direction>,
    pub weights: Vec<f64>,
    /// Highest spherical-harmonic degree integrated exactly.
    pub order_capability: usize,
}

pub const SUPPORTED_SIZES: [usize; 14] = [6, 14, 26, 38, 50, 74, 86, 110, 146, 170, 194, 230, 266, 302];

/// Builds the Lebedev rule with `n_points` points.
pub fn lebedev_rule(n_points: usize) -> Result<QuadratureRule> {
    let table = tables::TABLES.iter().find(|t| t.n_points == n_points).ok_or_else(|| unsupported(n_points))?;

    let mut samples: Vec<(Direction, f64)> = Vec::with_capacity(n_points);
    for &(kind, a, b, v) in table.orbits {
        let weight = 4.0 * PI * v;
        for p in orbit(kind, a, b) {
            samples.push((Direction::from_vector(p)?, weight));
        }
    }
    assert_eq!(samples.len(), n_points, "orbit expansion produced a wrong point count");
    canonical_sort(&mut samples);

    Ok(QuadratureRule {
        id: RuleId::Lebedev(n_points),
        points: samples.iter().map(|s| s.0).collect(),
        weights: samples.iter().map(|s| s.1).collect(),
        order_capability: table.degree,
    })
}

fn unsupported(requested: usize) -> Error {
    Error::UnsupportedRuleSize {
        requested,
        below: SUPPORTED_SIZES.iter().rev().find(|&&n| n < requested).copied(),
        above: SUPPORTED_SIZES.iter().find(|&&n| n > requested).copied(),
    }
}

fn canonical_sort(samples: &mut [(Direction, f64)]) {
    samples.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.theta.total_cmp(&y.0.theta)).then(x.0.phi.total_cmp(&y.0.phi)));
}

/// Expands one octahedral orbit generator into its points.
fn orbit(kind: u8, a: f64, b: f64) -> Vec<Vec3> {
    let generator: Vec3 = match kind {
        1 => [1.0, 0.0, 0.0],
        2 => {
            let s = 0.5_f64.sqrt();
            [0.0, s, s]
        }
        3 => {
            let s = (1.0_f64 / 3.0).sqrt();
            [s, s, s]
        }
        4 => [a, a, (1.0 - 2.0 * a * a).sqrt()],
        5 => [a, (1.0 - a * a).sqrt(), 0.0],
        6 => [a, b, (1.0 - a * a - b * b).sqrt()],
        _ => unreachable!("unknown orbit kind {kind}"),
    };
    const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut points: Vec<Vec3> = Vec::new();
    for perm in PERMUTATIONS {
        for signs in 0..8u8 {
            let mut p = [0.0; 3];
            for (axis, &source) in perm.iter().enumerate() {
                let flip = signs >> axis & 1 == 1;
                let value = generator[source];
                // Normalising -0.0 keeps the duplicate check exact.
                p[axis] = if value == 0.0 {
                    0.0
                } else if flip {
                    -value
                } else {
                    value
                };
            }
            if !points.contains(&p) {
                points.push(p);
            }
        }
    }
    points
}

impl QuadratureRule {
    /// A rule from explicit samples, e.g. read back from a dataset header.
    ///
    /// Points are kept in the given order. If they coincide with an embedded
    /// Lebedev table the rule is tagged with it and inherits its degree.
    pub fn from_samples(points: Vec<Direction>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "rule weights".into(),
                expected: points.len(),
                found: weights.len(),
            });
        }
        if let Ok(reference) = lebedev_rule(points.len()) {
            if reference.points == points && reference.weights == weights {
                return Ok(reference);
            }
        }
        let weight_sum: f64 = weights.iter().sum();
        if ((weight_sum - 4.0 * PI) / (4.0 * PI)).abs() > 1e-6 {
            return Err(Error::UnknownRule { weight_sum });
        }
        Ok(QuadratureRule { id: RuleId::Custom, points, weights, order_capability: 0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ_q ℓ_q f(r̂_q)`.
    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(&Direction) -> Complex64,
    {
        self.points.iter().zip(&self.weights).map(|(d, &w)| f(d) * w).sum()
    }

    /// Index of the antipode `-r̂_p` of every point.
    pub fn antipodes(&self) -> Result<Vec<usize>> {
        (0..self.len())
            .map(|p| {
                let u = self.points[p].unit;
                self.points
                    .iter()
                    .position(|d| {
                        let v = d.unit;
                        (u[0] + v[0]).abs() < 1e-12 && (u[1] + v[1]).abs() < 1e-12 && (u[2] + v[2]).abs() < 1e-12
                    })
                    .ok_or(Error::RuleNotInversionSymmetric { point: p })
            })
            .collect()
    }

    /// Largest spherical-wave degree whose products this rule integrates exactly.
    pub fn max_resolved_degree(&self) -> usize {
        self.order_capability / 2
    }
}

/// Plane-wave count estimate `(4/3)(ka + 2 ka^{1/3} + 1)²`.
pub fn plane_wave_estimate(ka: f64) -> f64 {
    let modes = ka + 2.0 * ka.cbrt() + 1.0;
    4.0 / 3.0 * modes * modes
}

/// Smallest supported Lebedev size covering [`plane_wave_estimate`].
pub fn minimum_points(ka: f64) -> Result<usize> {
    if !(ka > 0.0) || !ka.is_finite() {
        return Err(Error::Domain(format!("electrical size must be positive, got {ka}")));
    }
    let bound = plane_wave_estimate(ka);
    SUPPORTED_SIZES.iter().copied().find(|&n| n as f64 >= bound).ok_or_else(|| unsupported(bound.ceil() as usize))
}
