//! Property suites for the mesh, quadrature, element, spaces and
//! manufactured fields. Each check records the measured quantity and the
//! tolerance it was held to.

use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::element::{build_local_element, LocalGradCurlElement};
use crate::manufactured::{example1, example2, oracle, ManufacturedSolution};
use crate::mesh::{build_structured_mesh, face_frame, validate_mesh, Point, StructuredTetMesh};
use crate::quadrature::oracle::simplex_monomial_integral;
use crate::quadrature::{interval_rule, push_forward, tet_rule, tri_rule, EntityGeometry, QuadRule};
use crate::space::{build_dof_map, build_scalar_space, p2_basis, BcFlavor};
use crate::tabulation::ShapeCache;

pub const KRONECKER_TOL: f64 = 1e-9;
pub const QUADRATURE_TOL: f64 = 1e-12;
pub const QUADRATURE_MAX_DEGREE: usize = 16;
pub const GRADIENT_INCLUSION_TOL: f64 = 1e-9;
pub const TANGENTIAL_TOL: f64 = 1e-10;
pub const CURL_TRACE_TOL: f64 = 1e-10;
/// Finite-difference agreement for first and second derivatives.
pub const FD_LOW_ORDER_TOL: f64 = 1e-6;
/// Finite-difference agreement for third and fourth derivatives.
pub const FD_HIGH_ORDER_TOL: f64 = 1e-5;
pub const DIVERGENCE_TOL: f64 = 1e-10;
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Number of randomly perturbed tetrahedra in the unisolvence check.
pub const RANDOM_TETS: usize = 50;
const SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn below(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        CheckOutcome { suite, name: name.into(), measured, tolerance, passed: measured <= tolerance }
    }

    fn flag(suite: &'static str, name: impl Into<String>, passed: bool) -> Self {
        CheckOutcome { suite, name: name.into(), measured: f64::from(u8::from(!passed)), tolerance: 0.0, passed }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "pass" } else { "FAIL" };
        write!(f, "[{tag}] {}: {} ({:.3e} <= {:.0e})", self.suite, self.name, self.measured, self.tolerance)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn extend(&mut self, more: Vec<CheckOutcome>) {
        self.outcomes.extend(more);
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{o}")?;
        }
        let failed = self.outcomes.iter().filter(|o| !o.passed).count();
        write!(f, "{} checks, {} failed", self.outcomes.len(), failed)
    }
}

pub fn mesh_suite(ns: &[usize]) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for &n in ns {
        match build_structured_mesh(n) {
            Ok(mesh) => {
                for c in validate_mesh(&mesh).checks {
                    out.push(CheckOutcome::flag("mesh", format!("N={n} {}", c.name), c.passed));
                }
                let cache = ShapeCache::new();
                let shapes_ok = (0..mesh.n_cells()).all(|c| cache.element(&mesh, c).is_ok());
                out.push(CheckOutcome::flag("mesh", format!("N={n} six cell shapes"), shapes_ok && cache.n_shapes() == 6));
            }
            Err(e) => out.push(CheckOutcome::flag("mesh", format!("N={n} build: {e}"), false)),
        }
    }
    out
}

fn monomial_sweep(rule: &QuadRule, dim: usize) -> f64 {
    let d = rule.exactness_degree.min(QUADRATURE_MAX_DEGREE) as u32;
    let mut worst = 0.0f64;
    let mut exps = vec![0u32; dim];
    loop {
        if exps.iter().sum::<u32>() <= d {
            let q: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * exps.iter().enumerate().map(|(k, &e)| p[k].powi(e as i32)).product::<f64>())
                .sum();
            let exact = simplex_monomial_integral(&exps);
            worst = worst.max((q - exact).abs() / exact);
        }
        let mut k = 0;
        loop {
            if k == dim {
                return worst;
            }
            exps[k] += 1;
            if exps[k] <= d {
                break;
            }
            exps[k] = 0;
            k += 1;
        }
    }
}

/// Every monomial of total degree up to each rule's degree, for all rules up
/// to [`QUADRATURE_MAX_DEGREE`].
pub fn quadrature_suite() -> Vec<CheckOutcome> {
    let mut worst = [0.0f64; 3];
    let mut exactness = true;
    for d in 0..=QUADRATURE_MAX_DEGREE {
        for (k, rule) in [interval_rule(d), tri_rule(d), tet_rule(d)].iter().enumerate() {
            exactness &= rule.exactness_degree >= d;
            let mut capped = rule.clone();
            capped.exactness_degree = d;
            worst[k] = worst[k].max(monomial_sweep(&capped, k + 1));
        }
    }
    let mut out: Vec<CheckOutcome> = ["interval", "triangle", "tetrahedron"]
        .iter()
        .zip(worst)
        .map(|(name, w)| CheckOutcome::below("quadrature", format!("{name} monomials to degree 16"), w, QUADRATURE_TOL))
        .collect();
    out.push(CheckOutcome::flag("quadrature", "declared exactness covers requested degree", exactness));
    out
}

/// Unit-cube mesh with every vertex moved by up to `amp` in each coordinate;
/// resampled until all six cells keep a clearly positive volume.
pub fn perturbed_unit_mesh(rng: &mut StdRng, amp: f64) -> StructuredTetMesh {
    let base = build_structured_mesh(1).expect("unit mesh");
    loop {
        let mut mesh = base.clone();
        for v in mesh.vertices.iter_mut() {
            *v += Point::from_fn(|_, _| rng.random_range(-amp..amp));
        }
        if (0..mesh.n_cells()).all(|c| mesh.cell_volume(c) > 0.01 * mesh.cell_diameter(c).powi(3)) {
            return mesh;
        }
    }
}

/// Kronecker property of the dual basis on every cell of the `n` mesh and on
/// `n_random` perturbed tetrahedra.
pub fn element_suite(n: usize, n_random: usize) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let worst = build_structured_mesh(n)
        .map_err(|e| e.to_string())
        .and_then(|mesh| {
            (0..mesh.n_cells()).try_fold(0.0f64, |w, c| {
                build_local_element(&mesh, c).map(|el| w.max(el.kronecker_error)).map_err(|e| e.to_string())
            })
        });
    out.push(match worst {
        Ok(w) => CheckOutcome::below("element", format!("Kronecker on all cells, N={n}"), w, KRONECKER_TOL),
        Err(e) => CheckOutcome::flag("element", format!("Kronecker on N={n}: {e}"), false),
    });

    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for i in 0..n_random {
        let mesh = perturbed_unit_mesh(&mut rng, 0.2);
        match build_local_element(&mesh, i % mesh.n_cells()) {
            Ok(el) => worst = worst.max(el.kronecker_error),
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        worst = f64::INFINITY;
    }
    out.push(CheckOutcome::below("element", format!("Kronecker on {n_random} random tetrahedra"), worst, KRONECKER_TOL));
    out
}

fn random_vector(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Face quadrature points on `face`.
fn face_points(mesh: &StructuredTetMesh, face: usize) -> (Vec<Point>, Vec<f64>) {
    let rule = push_forward(&tri_rule(8), &EntityGeometry::Face(mesh.face_points(face))).expect("non-degenerate face");
    (rule.points, rule.weights)
}

/// Gradient inclusion, tangential continuity and weak curl-trace continuity
/// on the `n` mesh.
pub fn space_suite(n: usize) -> Vec<CheckOutcome> {
    let suite = "space";
    let mesh = match build_structured_mesh(n) {
        Ok(m) => m,
        Err(e) => return vec![CheckOutcome::flag(suite, format!("N={n} mesh: {e}"), false)],
    };
    let elements: Result<Vec<LocalGradCurlElement>, _> = (0..mesh.n_cells()).map(|c| build_local_element(&mesh, c)).collect();
    let elements = match elements {
        Ok(e) => e,
        Err(e) => return vec![CheckOutcome::flag(suite, format!("N={n} elements: {e}"), false)],
    };
    let mut out = vec![gradient_inclusion(&mesh, &elements)];

    let dofs = build_dof_map(&mesh, BcFlavor::Weak);
    let mut rng = StdRng::seed_from_u64(SEED ^ n as u64);
    let coeffs = random_vector(&mut rng, dofs.n_dofs);
    let mut tangential = 0.0f64;
    let mut trace = 0.0f64;
    for f in (0..mesh.n_faces()).filter(|&f| !mesh.boundary_faces[f]) {
        let frame = face_frame(&mesh, f).expect("face id in range");
        let nrm = frame.face_normal;
        let (pts, wts) = face_points(&mesh, f);
        let sides: Vec<Vec<(Point, Point)>> = mesh.face_cells[f]
            .iter()
            .map(|&c| {
                let local = dofs.gather(c, &coeffs);
                let table = elements[c].eval_basis(&pts);
                (0..pts.len()).map(|q| table.combine(q, &local)).map(|s| (s.value, s.curl)).collect()
            })
            .collect();
        let scale = sides[0].iter().map(|(u, _)| u.norm()).fold(1e-300, f64::max);
        let curl_scale: f64 = wts.iter().zip(&sides[0]).map(|(w, (_, c))| w * c.norm()).sum::<f64>().max(1e-300);
        let mut jump = [0.0; 2];
        for q in 0..pts.len() {
            let (u0, c0) = sides[0][q];
            let (u1, c1) = sides[1][q];
            tangential = tangential.max((u0 - u1).cross(&nrm).norm() / scale);
            for (i, t) in frame.face_tangents.iter().enumerate() {
                jump[i] += wts[q] * (c0 - c1).cross(&nrm).dot(t);
            }
        }
        trace = trace.max(jump[0].abs().max(jump[1].abs()) / curl_scale);
    }
    out.push(CheckOutcome::below(suite, format!("tangential continuity, N={n}"), tangential, TANGENTIAL_TOL));
    out.push(CheckOutcome::below(suite, format!("weak curl-trace continuity, N={n}"), trace, CURL_TRACE_TOL));
    out
}

/// For every interior quadratic Lagrange basis function `q`, the cell-wise
/// interpolant of `∇q` reproduces `∇q`, is single-valued, and vanishes on
/// constrained DOFs.
fn gradient_inclusion(mesh: &StructuredTetMesh, elements: &[LocalGradCurlElement]) -> CheckOutcome {
    let n = mesh.n_per_axis;
    let scalar = build_scalar_space(mesh);
    let dofs = build_dof_map(mesh, BcFlavor::Strong);
    let mut scalar_cells = vec![Vec::new(); scalar.n_dofs];
    for (c, d) in scalar.cell_dofs.iter().enumerate() {
        for &g in d {
            scalar_cells[g].push(c);
        }
    }
    let mut vector_cells = vec![Vec::new(); dofs.n_dofs];
    for (c, d) in dofs.cell_dofs.iter().enumerate() {
        for &g in d {
            vector_cells[g].push(c);
        }
    }
    let probe = tet_rule(4);
    let mut worst = 0.0f64;
    let mut value: Vec<Option<f64>> = vec![None; dofs.n_dofs];
    for &g in &scalar.numbering.free_dofs {
        let support = &scalar_cells[g];
        let mut touched = Vec::new();
        let mut coeff_scale = 1e-300f64;
        let mut local_coeffs = Vec::with_capacity(support.len());
        for &c in support {
            let a = scalar.cell_dofs[c].iter().position(|&x| x == g).expect("support cell");
            let el = &elements[c];
            let grads = el.barycentric_gradients();
            let grad_q = move |x: &Point| p2_basis(&el.barycentric_at(x), &grads).1[a];
            let coeffs = el.local_interpolate(|x| (grad_q(x), Point::zeros()));
            coeff_scale = coeff_scale.max(coeffs.iter().fold(0.0, |m, v| m.max(v.abs())));

            let rule = push_forward(&probe, &EntityGeometry::Cell(mesh.cell_points(c))).expect("valid cell");
            let table = el.eval_basis(&rule.points);
            let mut grad_scale = 1e-300f64;
            let mut err = 0.0f64;
            for (q, x) in rule.points.iter().enumerate() {
                let s = table.combine(q, &coeffs);
                let exact = grad_q(x);
                grad_scale = grad_scale.max(exact.norm());
                err = err.max((s.value - exact).norm()).max(s.curl.norm());
            }
            worst = worst.max(err / grad_scale);
            local_coeffs.push((c, coeffs));
        }
        for (c, coeffs) in &local_coeffs {
            for (k, &gd) in dofs.cell_dofs[*c].iter().enumerate() {
                match value[gd] {
                    Some(v) => worst = worst.max((v - coeffs[k]).abs() / coeff_scale),
                    None => {
                        value[gd] = Some(coeffs[k]);
                        touched.push(gd);
                    }
                }
            }
        }
        for &gd in &touched {
            let v = value[gd].take().unwrap_or(0.0);
            let outside = vector_cells[gd].iter().any(|c| !support.contains(c));
            if outside || dofs.numbering.constrained[gd] {
                worst = worst.max(v.abs() / coeff_scale);
            }
        }
    }
    CheckOutcome::below("space", format!("gradient inclusion, N={n}"), worst, GRADIENT_INCLUSION_TOL)
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(1e-300, |m, x| m.max(x.abs()))
}

fn random_point(rng: &mut StdRng, margin: f64) -> Point {
    Point::from_fn(|_, _| rng.random_range(margin..1.0 - margin))
}

fn random_boundary_point(rng: &mut StdRng) -> (Point, Point) {
    let axis = rng.random_range(0..3);
    let side = rng.random_range(0..2);
    let mut x = random_point(rng, 0.0);
    x[axis] = side as f64;
    let mut n = Point::zeros();
    n[axis] = if side == 0 { -1.0 } else { 1.0 };
    (x, n)
}

/// Closed-form derivatives against finite differences, divergence and
/// boundary traces for the manufactured fields.
pub fn manufactured_suite(samples: usize) -> Vec<CheckOutcome> {
    let suite = "manufactured";
    let mut rng = StdRng::seed_from_u64(SEED.rotate_left(7));
    let mut out = Vec::new();
    let cases: Vec<(String, ManufacturedSolution)> = vec![
        ("example 1, eps=1".into(), example1(1.0)),
        ("example 1, eps=1e-2".into(), example1(1e-2)),
        ("example 2".into(), example2()),
    ];
    for (label, sol) in &cases {
        let pts: Vec<Point> = (0..samples).map(|_| random_point(&mut rng, 0.05)).collect();
        let h1 = 1e-3;

        let h3 = 5e-3;
        let mut diffs = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        let mut scales = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        let mut div = 0.0f64;
        let mut jac_scale = 1e-300f64;
        for x in &pts {
            let curl = sol.curl(x);
            let fd_curl = oracle::curl(&|y: &Point| sol.u(y), x, h1);
            diffs[0].push((curl - fd_curl).norm());
            scales[0].push(curl.norm());

            let g = sol.grad_curl(x);
            let fd_g = nalgebra::Matrix3::from_fn(|a, b| oracle::d1(&|y: &Point| sol.curl(y)[a], b, x, h1));
            diffs[1].push((g - fd_g).norm());
            scales[1].push(g.norm());

            let f = sol.source(x);
            let fd_f = oracle::source(sol, source_epsilon(sol), x, h3);
            diffs[2].push((f - fd_f).norm());
            scales[2].push(f.norm());

            let clc = sol.reference.curl_laplace_curl(x);
            let fd_clc = oracle::source(sol, 0.0, x, h3) - oracle::source(sol, 1.0, x, h3);
            diffs[3].push((clc - fd_clc).norm());
            scales[3].push(clc.norm());

            div = div.max(sol.reference.divergence(x).abs());
            for k in 0..3 {
                jac_scale = jac_scale.max(oracle::d1(&|y: &Point| sol.u(y)[k], k, x, h1).abs());
            }
        }
        let rel = |k: usize| max_norm(&diffs[k]) / max_norm(&scales[k]);
        out.push(CheckOutcome::below(suite, format!("{label}: curl vs differences"), rel(0), FD_LOW_ORDER_TOL));
        out.push(CheckOutcome::below(suite, format!("{label}: grad curl vs differences"), rel(1), FD_LOW_ORDER_TOL));
        out.push(CheckOutcome::below(suite, format!("{label}: source vs differences"), rel(2), FD_HIGH_ORDER_TOL));
        out.push(CheckOutcome::below(suite, format!("{label}: curl laplace curl vs differences"), rel(3), FD_HIGH_ORDER_TOL));
        out.push(CheckOutcome::below(suite, format!("{label}: divergence"), div / jac_scale.max(1.0), DIVERGENCE_TOL));

        let mut tangential = 0.0f64;
        let mut curl_bdry = 0.0f64;
        for _ in 0..samples {
            let (x, n) = random_boundary_point(&mut rng);
            tangential = tangential.max(sol.u(&x).cross(&n).norm());
            curl_bdry = curl_bdry.max(sol.curl(&x).norm());
        }
        out.push(CheckOutcome::below(suite, format!("{label}: u x n on boundary"), tangential, BOUNDARY_TOL));
        if sol.divergence_free && sol.name == "example1" {
            out.push(CheckOutcome::below(suite, format!("{label}: curl u on boundary"), curl_bdry, BOUNDARY_TOL));
        }
    }
    out
}

fn source_epsilon(sol: &ManufacturedSolution) -> f64 {
    match sol.reference_kind {
        crate::manufactured::ReferenceKind::ExactU => sol.epsilon,
        crate::manufactured::ReferenceKind::ReducedU => 0.0,
    }
}

/// All suites at their default sizes.
pub fn run_all() -> CheckReport {
    let mut report = CheckReport::default();
    report.extend(mesh_suite(&[1, 2, 4]));
    report.extend(quadrature_suite());
    report.extend(element_suite(4, RANDOM_TETS));
    for n in [2, 4] {
        report.extend(space_suite(n));
    }
    report.extend(manufactured_suite(20));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suites_pass() {
        let report = run_all();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn perturbed_cells_stay_positive() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let mesh = perturbed_unit_mesh(&mut rng, 0.3);
            assert!((0..6).all(|c| mesh.cell_volume(c) > 0.0));
        }
    }

    #[test]
    fn failed_check_is_reported() {
        let o = CheckOutcome::below("demo", "too large", 2.0, 1.0);
        assert!(!o.passed);
        assert!(o.to_string().starts_with("[FAIL] demo: too large"));
        let report = CheckReport { outcomes: vec![o] };
        assert!(!report.all_passed());
    }
}
