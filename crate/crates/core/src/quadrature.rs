//! Gauss-type quadrature on the reference interval, triangle and tetrahedron.
//!
//! Simplex rules are collapsed tensor products: Gauss–Legendre in the first
//! direction and Gauss–Jacobi with weights `(1-t)` and `(1-t)²` in the
//! collapsed directions, so an `n`-point-per-direction rule is exact for total
//! degree `2n - 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Edge,
    Face,
    Cell,
}

impl EntityKind {
    pub fn dim(self) -> usize {
        match self {
            EntityKind::Edge => 1,
            EntityKind::Face => 2,
            EntityKind::Cell => 3,
        }
    }

    /// Measure of the reference entity.
    pub fn reference_measure(self) -> f64 {
        match self {
            EntityKind::Edge => 1.0,
            EntityKind::Face => 0.5,
            EntityKind::Cell => 1.0 / 6.0,
        }
    }
}

/// Quadrature rule on a reference entity. Unused coordinates are zero.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
    pub entity_kind: EntityKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("degenerate {kind:?}: measure {measure:e}")]
    Degenerate { kind: EntityKind, measure: f64 },
    #[error("rule for {rule:?} applied to {geometry:?} geometry")]
    KindMismatch { rule: EntityKind, geometry: EntityKind },
}

/// Gauss–Jacobi nodes and weights on `[0, 1]` for the weight `(1 - t)^alpha`
/// (Golub–Welsch).
pub fn gauss_jacobi_01(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let a = alpha as f64;
    // Monic Jacobi recurrence on [-1, 1] with weight (1-s)^a (1+s)^0.
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            -a / (a + 2.0)
        } else {
            -a * a / ((2.0 * kf + a) * (2.0 * kf + a + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + a;
            let b = 4.0 * m * (m + a) * m * (m + a) / (s * s * (s + 1.0) * (s - 1.0));
            jac[(k, k + 1)] = b.sqrt();
            jac[(k + 1, k)] = b.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jac);
    let total = 1.0 / (a + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + eig.eigenvalues[i]), total * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss–Legendre rule on `[0, 1]` exact to total degree `degree`.
pub fn interval_rule(degree: usize) -> QuadRule {
    let (x, w) = gauss_jacobi_01(points_for_degree(degree), 0);
    let n = x.len();
    QuadRule {
        points: x.into_iter().map(|t| [t, 0.0, 0.0]).collect(),
        weights: w,
        exactness_degree: 2 * n - 1,
        entity_kind: EntityKind::Edge,
    }
}

/// Collapsed rule on the triangle `{x, y ≥ 0, x + y ≤ 1}`.
pub fn tri_rule(degree: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (xa, wa) = gauss_jacobi_01(n, 0);
    let (xb, wb) = gauss_jacobi_01(n, 1);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (b, wb) in xb.iter().zip(&wb) {
        for (a, wa) in xa.iter().zip(&wa) {
            points.push([a * (1.0 - b), *b, 0.0]);
            weights.push(wa * wb);
        }
    }
    QuadRule { points, weights, exactness_degree: 2 * n - 1, entity_kind: EntityKind::Face }
}

/// Collapsed rule on the tetrahedron `{x, y, z ≥ 0, x + y + z ≤ 1}`.
pub fn tet_rule(degree: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (xa, wa) = gauss_jacobi_01(n, 0);
    let (xb, wb) = gauss_jacobi_01(n, 1);
    let (xc, wc) = gauss_jacobi_01(n, 2);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (c, wc) in xc.iter().zip(&wc) {
        for (b, wb) in xb.iter().zip(&wb) {
            for (a, wa) in xa.iter().zip(&wa) {
                points.push([a * (1.0 - b) * (1.0 - c), b * (1.0 - c), *c]);
                weights.push(wa * wb * wc);
            }
        }
    }
    QuadRule { points, weights, exactness_degree: 2 * n - 1, entity_kind: EntityKind::Cell }
}

/// Vertices of an affine physical entity.
#[derive(Debug, Clone, Copy)]
pub enum EntityGeometry {
    Edge([Point; 2]),
    Face([Point; 3]),
    Cell([Point; 4]),
}

impl EntityGeometry {
    pub fn kind(&self) -> EntityKind {
        match self {
            EntityGeometry::Edge(_) => EntityKind::Edge,
            EntityGeometry::Face(_) => EntityKind::Face,
            EntityGeometry::Cell(_) => EntityKind::Cell,
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            EntityGeometry::Edge(p) => (p[1] - p[0]).norm(),
            EntityGeometry::Face(p) => 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm(),
            EntityGeometry::Cell(p) => {
                (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))).abs() / 6.0
            }
        }
    }

    fn vertices(&self) -> &[Point] {
        match self {
            EntityGeometry::Edge(p) => p,
            EntityGeometry::Face(p) => p,
            EntityGeometry::Cell(p) => p,
        }
    }

    /// Affine image of reference coordinates.
    pub fn map(&self, r: &[f64; 3]) -> Point {
        let v = self.vertices();
        let mut x = v[0];
        for (d, vd) in v.iter().enumerate().skip(1) {
            x += r[d - 1] * (vd - v[0]);
        }
        x
    }
}

/// Quadrature points and weights on a physical entity.
#[derive(Debug, Clone, Default)]
pub struct PhysicalRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl PhysicalRule {
    pub fn integrate<F: FnMut(&Point) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Maps a reference rule onto a physical entity, scaling the weights by the
/// ratio of physical to reference measure.
pub fn push_forward(rule: &QuadRule, geometry: &EntityGeometry) -> Result<PhysicalRule, QuadratureError> {
    if rule.entity_kind != geometry.kind() {
        return Err(QuadratureError::KindMismatch { rule: rule.entity_kind, geometry: geometry.kind() });
    }
    let measure = geometry.measure();
    let scale = geometry
        .vertices()
        .iter()
        .skip(1)
        .map(|v| (v - geometry.vertices()[0]).norm())
        .fold(0.0, f64::max);
    if !(measure > 1e-14 * scale.powi(rule.entity_kind.dim() as i32)) {
        return Err(QuadratureError::Degenerate { kind: rule.entity_kind, measure });
    }
    let jac = measure / rule.entity_kind.reference_measure();
    Ok(PhysicalRule {
        points: rule.points.iter().map(|r| geometry.map(r)).collect(),
        weights: rule.weights.iter().map(|w| w * jac).collect(),
    })
}

/// Closed-form monomial integrals used to certify rules.
pub mod oracle {
    /// `∫_{reference simplex} x^a y^b z^c = a! b! c! / (a + b + c + dim)!`.
    pub fn simplex_monomial_integral(exps: &[u32]) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let num: f64 = exps.iter().map(|&e| fact(e)).product();
        let total: u32 = exps.iter().sum::<u32>() + exps.len() as u32;
        num / fact(total)
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::simplex_monomial_integral;
    use super::*;

    fn integrate_monomial(rule: &QuadRule, exps: &[u32]) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * exps.iter().enumerate().map(|(d, &e)| p[d].powi(e as i32)).product::<f64>())
            .sum()
    }

    #[test]
    fn reference_measures() {
        for d in 0..=16 {
            let sums = [
                (interval_rule(d), 1.0),
                (tri_rule(d), 0.5),
                (tet_rule(d), 1.0 / 6.0),
            ];
            for (rule, m) in sums {
                let s: f64 = rule.weights.iter().sum();
                assert!((s - m).abs() < 1e-14, "degree {d}: {s} vs {m}");
                assert!(rule.exactness_degree >= d);
            }
        }
    }

    #[test]
    fn factorial_identities() {
        assert!((integrate_monomial(&tet_rule(0), &[0, 0, 0]) - 1.0 / 6.0).abs() < 1e-15);
        assert!((integrate_monomial(&tet_rule(2), &[2, 0, 0]) - 1.0 / 60.0).abs() < 1e-15);
        assert!((integrate_monomial(&tri_rule(3), &[1, 1]) - 1.0 / 24.0).abs() < 1e-15);
        assert!((simplex_monomial_integral(&[2, 0, 0]) - 1.0 / 60.0).abs() < 1e-16);
    }

    #[test]
    fn jacobi_weight_moments() {
        for alpha in 0..3u32 {
            let (x, w) = gauss_jacobi_01(6, alpha);
            for p in 0..12 {
                let q: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(p)).sum();
                // ∫_0^1 t^p (1-t)^alpha dt = p! alpha! / (p + alpha + 1)!
                let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
                let exact = fact(p as u32) * fact(alpha) / fact(p as u32 + alpha + 1);
                assert!((q - exact).abs() <= 1e-14 * exact, "alpha {alpha} p {p}");
            }
        }
    }

    #[test]
    fn identity_push_forward() {
        let rule = tet_rule(5);
        let geo = EntityGeometry::Cell([Point::zeros(), Point::x(), Point::y(), Point::z()]);
        let phys = push_forward(&rule, &geo).unwrap();
        for ((p, w), (r, rw)) in phys.points.iter().zip(&phys.weights).zip(rule.points.iter().zip(&rule.weights)) {
            assert_eq!(p.as_slice(), &r[..]);
            assert!((w - rw).abs() < 1e-16);
        }
    }

    #[test]
    fn physical_measures() {
        let cell = EntityGeometry::Cell([
            Point::new(0.1, 0.2, 0.3),
            Point::new(0.9, 0.1, 0.2),
            Point::new(0.3, 0.8, 0.1),
            Point::new(0.4, 0.3, 1.1),
        ]);
        let v = push_forward(&tet_rule(3), &cell).unwrap().integrate(|_| 1.0);
        assert!((v - cell.measure()).abs() < 1e-15);
        let face = EntityGeometry::Face([Point::new(0.0, 0.0, 1.0), Point::new(2.0, 0.0, 1.0), Point::new(0.0, 3.0, 1.0)]);
        let a = push_forward(&tri_rule(2), &face).unwrap().integrate(|_| 1.0);
        assert!((a - 3.0).abs() < 1e-14);
        let edge = EntityGeometry::Edge([Point::zeros(), Point::new(3.0, 4.0, 0.0)]);
        let l = push_forward(&interval_rule(1), &edge).unwrap().integrate(|_| 1.0);
        assert!((l - 5.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_and_mismatched_geometry() {
        let flat = EntityGeometry::Cell([Point::zeros(), Point::x(), Point::y(), Point::new(1.0, 1.0, 0.0)]);
        assert!(matches!(push_forward(&tet_rule(2), &flat), Err(QuadratureError::Degenerate { .. })));
        let face = EntityGeometry::Face([Point::zeros(), Point::x(), Point::y()]);
        assert!(matches!(push_forward(&tet_rule(2), &face), Err(QuadratureError::KindMismatch { .. })));
    }
}
