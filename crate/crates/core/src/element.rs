//! The 28-dimensional nonconforming grad-curl element (lowest order).
//!
//! The local space is first-kind Nédélec of degree one enriched with the
//! face-bubble fields `b_K b_F t`, where `t` runs over the two tangents of
//! each face. Its degrees of freedom are
//!
//! * two Legendre moments of `u·t_e` per edge,
//! * `∫_F (u × n_F)·t_i` for the two tangents of each face,
//! * `∫_F ((∇×u) × n_F)·t_i` for the two tangents of each face.
//!
//! The element is built directly on the physical cell: the generalized
//! Vandermonde matrix of the functionals applied to an explicit generator set
//! is inverted to obtain the nodal basis. All frames are the global entity
//! frames, so neighbouring cells agree on shared functionals without signs.

use nalgebra::{DMatrix, Matrix3};
use thiserror::Error;

use crate::mesh::{barycentric_functions, face_frame, Point, StructuredTetMesh, LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::{interval_rule, push_forward, tri_rule, EntityGeometry, PhysicalRule};

/// Number of local basis functions.
pub const N_LOCAL: usize = 28;

/// Largest 1-norm condition number accepted for the equilibrated Vandermonde.
pub const MAX_VANDERMONDE_CONDITION: f64 = 1e9;

/// Quadrature degree used for the functionals; value fields have degree 7.
const FUNCTIONAL_DEGREE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("cell {cell}: Vandermonde matrix is numerically singular (condition {condition:e})")]
    SingularVandermonde { cell: usize, condition: f64 },
    #[error("cell {cell}: degenerate geometry")]
    DegenerateCell { cell: usize },
}

/// Value, curl and gradient of curl of a vector field at one point.
///
/// `grad_curl[(a, b)] = ∂(∇×u)_a / ∂x_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: Point,
    pub curl: Point,
    pub grad_curl: Matrix3<f64>,
}

impl FieldSample {
    pub fn zero() -> Self {
        FieldSample { value: Point::zeros(), curl: Point::zeros(), grad_curl: Matrix3::zeros() }
    }
}

/// Curl from the Jacobian `jac[(i, k)] = ∂u_i/∂x_k`.
pub fn curl_from_jacobian(jac: &Matrix3<f64>) -> Point {
    Point::new(jac[(2, 1)] - jac[(1, 2)], jac[(0, 2)] - jac[(2, 0)], jac[(1, 0)] - jac[(0, 1)])
}

/// Gradient of curl from component Hessians `hess[c][(k, l)] = ∂²u_c/∂x_k∂x_l`.
pub fn grad_curl_from_hessians(hess: &[Matrix3<f64>; 3]) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    for l in 0..3 {
        g[(0, l)] = hess[2][(1, l)] - hess[1][(2, l)];
        g[(1, l)] = hess[0][(2, l)] - hess[2][(0, l)];
        g[(2, l)] = hess[1][(0, l)] - hess[0][(1, l)];
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    /// Moment of `u·t_e` against the shifted Legendre polynomial of `degree`.
    EdgeMoment { degree: u8 },
    /// `∫_F (u × n_F)·t_i`, `component = i - 1`.
    FaceTangential { component: u8 },
    /// `∫_F ((∇×u) × n_F)·t_i`, `component = i - 1`.
    FaceCurlTrace { component: u8 },
}

/// One local degree of freedom with its quadrature and global frame.
#[derive(Debug, Clone)]
pub struct DofFunctional {
    pub kind: DofKind,
    /// Global edge or face id.
    pub entity: usize,
    pub local_entity: usize,
    /// Edge tangent, or the face tangent `t_i`.
    pub direction: Point,
    /// Face normal (zero for edges).
    pub normal: Point,
    rule: PhysicalRule,
}

impl DofFunctional {
    /// Applies the functional to a field given by `f(x) -> (u(x), ∇×u(x))`.
    pub fn apply<F: Fn(&Point) -> (Point, Point)>(&self, f: F) -> f64 {
        self.rule.integrate(|x| {
            let (u, curl) = f(x);
            match self.kind {
                DofKind::EdgeMoment { .. } => u.dot(&self.direction),
                DofKind::FaceTangential { .. } => u.cross(&self.normal).dot(&self.direction),
                DofKind::FaceCurlTrace { .. } => curl.cross(&self.normal).dot(&self.direction),
            }
        })
    }
}

/// Affine barycentric coordinate `λ(x) = offset + gradient·x`.
#[derive(Debug, Clone, Copy)]
struct Barycentric {
    offset: f64,
    gradient: Point,
}

impl Barycentric {
    fn eval(&self, x: &Point) -> f64 {
        self.offset + self.gradient.dot(x)
    }
}

/// The eight matrices `A` whose fields `ξ × (Aξ)` span the homogeneous
/// quadratic fields orthogonal to `ξ`.
fn cross_generator_matrices() -> [Matrix3<f64>; 8] {
    let e = |i: usize, j: usize| {
        let mut m = Matrix3::zeros();
        m[(i, j)] = 1.0;
        m
    };
    [
        e(0, 1),
        e(0, 2),
        e(1, 0),
        e(1, 2),
        e(2, 0),
        e(2, 1),
        e(0, 0) - e(1, 1),
        e(1, 1) - e(2, 2),
    ]
}

/// Value, gradient and Hessian of `Π_m λ_m^{p_m}`.
fn product_derivatives(lambda: &[f64; 4], grads: &[Point; 4], powers: &[u32; 4]) -> (f64, Point, Matrix3<f64>) {
    let pw = |m: usize, p: u32| lambda[m].powi(p as i32);
    let mut value = 1.0;
    for m in 0..4 {
        value *= pw(m, powers[m]);
    }
    let mut grad = Point::zeros();
    let mut hess = Matrix3::zeros();
    for m in 0..4 {
        let pm = powers[m];
        if pm == 0 {
            continue;
        }
        let rest: f64 = (0..4).filter(|&o| o != m).map(|o| pw(o, powers[o])).product();
        grad += (pm as f64 * pw(m, pm - 1) * rest) * grads[m];
        if pm >= 2 {
            let c = (pm * (pm - 1)) as f64 * pw(m, pm - 2) * rest;
            hess += c * grads[m] * grads[m].transpose();
        }
        for n in 0..4 {
            let pn = powers[n];
            if n == m || pn == 0 {
                continue;
            }
            let rest: f64 = (0..4).filter(|&o| o != m && o != n).map(|o| pw(o, powers[o])).product();
            let c = (pm * pn) as f64 * pw(m, pm - 1) * pw(n, pn - 1) * rest;
            hess += c * grads[m] * grads[n].transpose();
        }
    }
    (value, grad, hess)
}

/// Basis values, curls and gradients of curl tabulated at a point set.
///
/// Entry `q * N_LOCAL + j` belongs to point `q` and basis function `j`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub n_points: usize,
    pub samples: Vec<FieldSample>,
}

impl BasisTable {
    pub fn at(&self, point: usize, basis: usize) -> &FieldSample {
        &self.samples[point * N_LOCAL + basis]
    }

    pub fn point(&self, point: usize) -> &[FieldSample] {
        &self.samples[point * N_LOCAL..(point + 1) * N_LOCAL]
    }

    /// Field of the local coefficient vector at point `q`.
    pub fn combine(&self, point: usize, coeffs: &[f64; N_LOCAL]) -> FieldSample {
        let mut out = FieldSample::zero();
        for (s, &c) in self.point(point).iter().zip(coeffs) {
            if c != 0.0 {
                out.value += c * s.value;
                out.curl += c * s.curl;
                out.grad_curl += c * s.grad_curl;
            }
        }
        out
    }
}

/// Local grad-curl element on one physical cell.
#[derive(Debug, Clone)]
pub struct LocalGradCurlElement {
    pub cell_id: usize,
    pub center: Point,
    /// Cell diameter, used to scale local coordinates.
    pub h: f64,
    barycentric: [Barycentric; 4],
    bubble_tangents: [[Point; 2]; 4],
    /// `coeffs[(k, j)]` is the weight of generator `k` in basis function `j`.
    coeffs: DMatrix<f64>,
    pub functionals: Vec<DofFunctional>,
    /// 1-norm condition number of the equilibrated Vandermonde matrix.
    pub condition: f64,
    /// `max |ℓ_i(φ_j) - δ_ij|` measured after dualization.
    pub kronecker_error: f64,
}

impl LocalGradCurlElement {
    /// Evaluates the 28 generators (not the nodal basis) at `x`.
    pub fn generators_at(&self, x: &Point) -> [FieldSample; N_LOCAL] {
        let mut out = [FieldSample::zero(); N_LOCAL];
        let h = self.h;
        let xi = (x - self.center) / h;

        for (i, g) in out.iter_mut().take(3).enumerate() {
            g.value[i] = 1.0;
        }
        for i in 0..3 {
            for j in 0..3 {
                let g = &mut out[3 + 3 * i + j];
                g.value[i] = xi[j];
                let mut jac = Matrix3::zeros();
                jac[(i, j)] = 1.0 / h;
                g.curl = curl_from_jacobian(&jac);
            }
        }
        for (m, a) in cross_generator_matrices().iter().enumerate() {
            let g = &mut out[12 + m];
            let a_xi = a * xi;
            g.value = xi.cross(&a_xi);
            let mut jac = Matrix3::zeros();
            for k in 0..3 {
                let ek = Point::ith(k, 1.0);
                let col = ek.cross(&a_xi) + xi.cross(&a.column(k).into_owned());
                jac.set_column(k, &(col / h));
            }
            g.curl = curl_from_jacobian(&jac);
            let mut hess = [Matrix3::zeros(); 3];
            for k in 0..3 {
                for l in 0..3 {
                    let ek = Point::ith(k, 1.0);
                    let el = Point::ith(l, 1.0);
                    let d2 = (ek.cross(&a.column(l).into_owned()) + el.cross(&a.column(k).into_owned())) / (h * h);
                    for c in 0..3 {
                        hess[c][(k, l)] = d2[c];
                    }
                }
            }
            g.grad_curl = grad_curl_from_hessians(&hess);
        }

        let lambda = self.barycentric.map(|b| b.eval(x));
        let grads = self.barycentric.map(|b| b.gradient);
        for f in 0..4 {
            let mut powers = [2u32; 4];
            powers[f] = 1;
            let (beta, dbeta, hbeta) = product_derivatives(&lambda, &grads, &powers);
            for (i, t) in self.bubble_tangents[f].iter().enumerate() {
                let g = &mut out[20 + 2 * f + i];
                g.value = beta * t;
                g.curl = dbeta.cross(t);
                let mut gc = Matrix3::zeros();
                for l in 0..3 {
                    gc.set_column(l, &hbeta.column(l).into_owned().cross(t));
                }
                g.grad_curl = gc;
            }
        }
        out
    }

    /// Tabulates the nodal basis (value, curl, grad-curl) at `points`.
    pub fn eval_basis(&self, points: &[Point]) -> BasisTable {
        let mut samples = Vec::with_capacity(points.len() * N_LOCAL);
        for x in points {
            let gens = self.generators_at(x);
            for j in 0..N_LOCAL {
                let mut s = FieldSample::zero();
                for (k, g) in gens.iter().enumerate() {
                    let c = self.coeffs[(k, j)];
                    if c != 0.0 {
                        s.value += c * g.value;
                        s.curl += c * g.curl;
                        s.grad_curl += c * g.grad_curl;
                    }
                }
                samples.push(s);
            }
        }
        BasisTable { n_points: points.len(), samples }
    }

    /// Field with the given local coefficients at a single point.
    pub fn eval_field(&self, coeffs: &[f64; N_LOCAL], x: &Point) -> FieldSample {
        self.eval_basis(std::slice::from_ref(x)).combine(0, coeffs)
    }

    /// Canonical interpolation: the 28 functionals applied to a field given by
    /// `f(x) -> (u(x), ∇×u(x))`.
    pub fn local_interpolate<F: Fn(&Point) -> (Point, Point)>(&self, f: F) -> [f64; N_LOCAL] {
        let mut out = [0.0; N_LOCAL];
        for (o, l) in out.iter_mut().zip(&self.functionals) {
            *o = l.apply(&f);
        }
        out
    }

    /// Barycentric coordinates of `x` in this cell.
    pub fn barycentric_at(&self, x: &Point) -> [f64; 4] {
        self.barycentric.map(|b| b.eval(x))
    }

    pub fn barycentric_gradients(&self) -> [Point; 4] {
        self.barycentric.map(|b| b.gradient)
    }

    /// Bubble generator `b_K b_F t_i` of local face `face`, as a field sample.
    pub fn bubble_generator(&self, face: usize, component: usize, x: &Point) -> FieldSample {
        self.generators_at(x)[20 + 2 * face + component]
    }

    /// Generator `ξ × (Aξ)` number `m` (0..8) at `x`.
    pub fn cross_generator(&self, m: usize, x: &Point) -> FieldSample {
        self.generators_at(x)[12 + m]
    }
}

/// Builds the local element on `cell` and its dual basis.
pub fn build_local_element(mesh: &StructuredTetMesh, cell: usize) -> Result<LocalGradCurlElement, ElementError> {
    let verts = mesh.cell_points(cell);
    let ids = mesh.cells[cell];
    let center = verts.iter().sum::<Point>() / 4.0;
    let h = mesh.cell_diameter(cell);

    let barycentric = barycentric_functions(&verts)
        .ok_or(ElementError::DegenerateCell { cell })?
        .map(|(offset, gradient)| Barycentric { offset, gradient });

    let edge_rule = interval_rule(FUNCTIONAL_DEGREE);
    let face_rule = tri_rule(FUNCTIONAL_DEGREE);
    let mut functionals = Vec::with_capacity(N_LOCAL);

    for (le, pair) in LOCAL_EDGES.iter().enumerate() {
        let (a, b) = if ids[pair[0]] < ids[pair[1]] { (pair[0], pair[1]) } else { (pair[1], pair[0]) };
        let geo = EntityGeometry::Edge([verts[a], verts[b]]);
        let base = push_forward(&edge_rule, &geo).map_err(|_| ElementError::DegenerateCell { cell })?;
        let tangent = (verts[b] - verts[a]).normalize();
        for degree in 0..2u8 {
            let weights = base
                .weights
                .iter()
                .zip(&edge_rule.points)
                .map(|(w, s)| if degree == 0 { *w } else { w * (2.0 * s[0] - 1.0) })
                .collect();
            functionals.push(DofFunctional {
                kind: DofKind::EdgeMoment { degree },
                entity: mesh.cell_edges[cell][le],
                local_entity: le,
                direction: tangent,
                normal: Point::zeros(),
                rule: PhysicalRule { points: base.points.clone(), weights },
            });
        }
    }

    let mut bubble_tangents = [[Point::zeros(); 2]; 4];
    let mut face_data = Vec::with_capacity(4);
    for lf in 0..4 {
        let gf = mesh.cell_faces[cell][lf];
        let frame = face_frame(mesh, gf).map_err(|_| ElementError::DegenerateCell { cell })?;
        let geo = EntityGeometry::Face(mesh.face_points(gf));
        let rule = push_forward(&face_rule, &geo).map_err(|_| ElementError::DegenerateCell { cell })?;
        bubble_tangents[lf] = frame.face_tangents;
        face_data.push((gf, frame, rule));
    }
    for make in [
        (|c| DofKind::FaceTangential { component: c }) as fn(u8) -> DofKind,
        |c| DofKind::FaceCurlTrace { component: c },
    ] {
        for (lf, (gf, frame, rule)) in face_data.iter().enumerate() {
            for c in 0..2u8 {
                functionals.push(DofFunctional {
                    kind: make(c),
                    entity: *gf,
                    local_entity: lf,
                    direction: frame.face_tangents[c as usize],
                    normal: frame.face_normal,
                    rule: rule.clone(),
                });
            }
        }
    }
    debug_assert_eq!(functionals.len(), N_LOCAL);
    debug_assert!(LOCAL_FACES.len() == 4);

    let mut element = LocalGradCurlElement {
        cell_id: cell,
        center,
        h,
        barycentric,
        bubble_tangents,
        coeffs: DMatrix::identity(N_LOCAL, N_LOCAL),
        functionals,
        condition: 0.0,
        kronecker_error: 0.0,
    };

    // V[i][k] = ℓ_i(g_k).
    let mut vander = DMatrix::<f64>::zeros(N_LOCAL, N_LOCAL);
    for (i, l) in element.functionals.iter().enumerate() {
        for (x, w) in l.rule.points.iter().zip(&l.rule.weights) {
            let gens = element.generators_at(x);
            for (k, g) in gens.iter().enumerate() {
                let v = match l.kind {
                    DofKind::EdgeMoment { .. } => g.value.dot(&l.direction),
                    DofKind::FaceTangential { .. } => g.value.cross(&l.normal).dot(&l.direction),
                    DofKind::FaceCurlTrace { .. } => g.curl.cross(&l.normal).dot(&l.direction),
                };
                vander[(i, k)] += w * v;
            }
        }
    }

    // Row then column equilibration; the inverse is rescaled afterwards.
    let row_scale: Vec<f64> = (0..N_LOCAL).map(|i| 1.0 / vander.row(i).amax().max(f64::MIN_POSITIVE)).collect();
    let mut scaled = vander.clone();
    for i in 0..N_LOCAL {
        scaled.row_mut(i).scale_mut(row_scale[i]);
    }
    let col_scale: Vec<f64> = (0..N_LOCAL).map(|k| 1.0 / scaled.column(k).amax().max(f64::MIN_POSITIVE)).collect();
    for k in 0..N_LOCAL {
        scaled.column_mut(k).scale_mut(col_scale[k]);
    }
    let norm1 = |m: &DMatrix<f64>| (0..m.ncols()).map(|k| m.column(k).lp_norm(1)).fold(0.0, f64::max);
    let inv_scaled = match scaled.clone().try_inverse() {
        Some(m) => m,
        None => return Err(ElementError::SingularVandermonde { cell, condition: f64::INFINITY }),
    };
    let condition = norm1(&scaled) * norm1(&inv_scaled);
    if !(condition < MAX_VANDERMONDE_CONDITION) {
        return Err(ElementError::SingularVandermonde { cell, condition });
    }
    let mut coeffs = inv_scaled;
    for k in 0..N_LOCAL {
        coeffs.row_mut(k).scale_mut(col_scale[k]);
    }
    for i in 0..N_LOCAL {
        coeffs.column_mut(i).scale_mut(row_scale[i]);
    }
    let kron = &vander * &coeffs - DMatrix::<f64>::identity(N_LOCAL, N_LOCAL);
    element.kronecker_error = kron.amax();
    element.coeffs = coeffs;
    element.condition = condition;
    Ok(element)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    fn interior_point(el: &LocalGradCurlElement, mesh: &StructuredTetMesh, w: [f64; 4]) -> Point {
        let p = mesh.cell_points(el.cell_id);
        let s: f64 = w.iter().sum();
        (0..4).map(|i| w[i] / s * p[i]).sum()
    }

    #[test]
    fn kronecker_on_unit_cube() {
        let mesh = build_structured_mesh(1).unwrap();
        for c in 0..mesh.n_cells() {
            let el = build_local_element(&mesh, c).unwrap();
            assert!(el.kronecker_error < 1e-9, "cell {c}: {}", el.kronecker_error);
            assert!(el.condition < MAX_VANDERMONDE_CONDITION);
            assert_eq!(el.functionals.len(), N_LOCAL);
        }
    }

    #[test]
    fn dual_basis_through_evaluation_path() {
        let mesh = build_structured_mesh(2).unwrap();
        let el = build_local_element(&mesh, 17).unwrap();
        for j in 0..N_LOCAL {
            let mut e = [0.0; N_LOCAL];
            e[j] = 1.0;
            let dofs = el.local_interpolate(|x| {
                let s = el.eval_field(&e, x);
                (s.value, s.curl)
            });
            for (i, d) in dofs.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-9, "l_{i}(phi_{j}) = {d}");
            }
        }
    }

    #[test]
    fn functional_ordering() {
        let mesh = build_structured_mesh(1).unwrap();
        let el = build_local_element(&mesh, 0).unwrap();
        assert!(el.functionals[..12].iter().all(|l| matches!(l.kind, DofKind::EdgeMoment { .. })));
        assert!(el.functionals[12..20].iter().all(|l| matches!(l.kind, DofKind::FaceTangential { .. })));
        assert!(el.functionals[20..].iter().all(|l| matches!(l.kind, DofKind::FaceCurlTrace { .. })));
    }

    #[test]
    fn constant_field_reproduced() {
        let mesh = build_structured_mesh(2).unwrap();
        let el = build_local_element(&mesh, 5).unwrap();
        let dofs = el.local_interpolate(|_| (Point::x(), Point::zeros()));
        for w in [[1.0, 2.0, 3.0, 4.0], [0.3, 0.1, 0.5, 0.2], [1.0, 1.0, 1.0, 5.0]] {
            let x = interior_point(&el, &mesh, w);
            let s = el.eval_field(&dofs, &x);
            assert!((s.value - Point::x()).norm() < 1e-12);
            assert!(s.curl.norm() < 1e-10);
        }
    }

    #[test]
    fn constant_generators_are_curl_free() {
        let mesh = build_structured_mesh(1).unwrap();
        let el = build_local_element(&mesh, 2).unwrap();
        let g = el.generators_at(&el.center);
        for s in &g[..3] {
            assert_eq!(s.curl, Point::zeros());
            assert_eq!(s.grad_curl, Matrix3::zeros());
        }
    }

    #[test]
    fn members_of_the_space_are_reproduced() {
        let mesh = build_structured_mesh(2).unwrap();
        let el = build_local_element(&mesh, 9).unwrap();
        // ξ × (E_12 ξ)
        let dofs = el.local_interpolate(|x| {
            let s = el.cross_generator(0, x);
            (s.value, s.curl)
        });
        for f in 0..4 {
            let dofs_b = el.local_interpolate(|x| {
                let s = el.bubble_generator(f, 0, x);
                (s.value, s.curl)
            });
            for w in [[1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 1.0, 1.0]] {
                let x = interior_point(&el, &mesh, w);
                let exact = el.bubble_generator(f, 0, &x);
                let got = el.eval_field(&dofs_b, &x);
                assert!((got.value - exact.value).norm() < 1e-10 * (1.0 + exact.value.norm()));
            }
        }
        for w in [[1.0, 2.0, 3.0, 4.0], [0.25, 0.25, 0.25, 0.25], [5.0, 1.0, 2.0, 1.0]] {
            let x = interior_point(&el, &mesh, w);
            let exact = el.cross_generator(0, &x);
            let got = el.eval_field(&dofs, &x);
            assert!((got.value - exact.value).norm() < 1e-10);
            assert!((got.curl - exact.curl).norm() < 1e-9);
        }
    }

    #[test]
    fn field_outside_space_keeps_its_dofs() {
        let mesh = build_structured_mesh(2).unwrap();
        let el = build_local_element(&mesh, 30).unwrap();
        let field = |x: &Point| (Point::new(x.y * x.y, 0.0, 0.0), Point::new(0.0, 0.0, -2.0 * x.y));
        let dofs = el.local_interpolate(field);
        let again = el.local_interpolate(|x| {
            let s = el.eval_field(&dofs, x);
            (s.value, s.curl)
        });
        for (a, b) in dofs.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn product_rule_against_finite_differences() {
        let grads = [Point::new(1.0, 0.2, -0.3), Point::new(-0.4, 1.1, 0.2), Point::new(0.3, -0.5, 0.9), Point::new(0.1, 0.1, 0.1)];
        let offs = [0.2, 0.3, 0.1, 0.4];
        let powers = [1, 2, 2, 2];
        let eval = |x: &Point| {
            let l = [0, 1, 2, 3].map(|i| offs[i] + grads[i].dot(x));
            product_derivatives(&l, &grads, &powers)
        };
        let x = Point::new(0.13, 0.27, 0.41);
        let (_, g, hs) = eval(&x);
        let d = 1e-5;
        for k in 0..3 {
            let e = Point::ith(k, d);
            let (vp, gp, _) = eval(&(x + e));
            let (vm, gm, _) = eval(&(x - e));
            assert!(((vp - vm) / (2.0 * d) - g[k]).abs() < 1e-8);
            let hcol = (gp - gm) / (2.0 * d);
            assert!((hcol - hs.column(k)).norm() < 1e-8);
        }
    }
}
