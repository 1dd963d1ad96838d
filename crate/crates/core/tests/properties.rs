use std::sync::LazyLock;

use proptest::prelude::*;
use quadcurl::checks::perturbed_unit_mesh;
use quadcurl::element::{build_local_element, LocalGradCurlElement};
use quadcurl::forms::CsrMatrix;
use quadcurl::manufactured::{example1, example2};
use quadcurl::mesh::{barycentric_functions, build_structured_mesh, face_frame, Point, StructuredTetMesh};
use quadcurl::quadrature::{push_forward, tet_rule, EntityGeometry};
use quadcurl::space::{build_dof_map, BcFlavor, GlobalDofMap};
use quadcurl::study::compute_rates;
use rand::rngs::StdRng;
use rand::SeedableRng;

struct Fixture {
    mesh: StructuredTetMesh,
    dofs: GlobalDofMap,
    elements: Vec<LocalGradCurlElement>,
    interior_faces: Vec<usize>,
}

static FIXTURE: LazyLock<Fixture> = LazyLock::new(|| {
    let mesh = build_structured_mesh(2).unwrap();
    let dofs = build_dof_map(&mesh, BcFlavor::Weak);
    let elements = (0..mesh.n_cells()).map(|c| build_local_element(&mesh, c).unwrap()).collect();
    let interior_faces = (0..mesh.n_faces()).filter(|&f| !mesh.boundary_faces[f]).collect();
    Fixture { mesh, dofs, elements, interior_faces }
});

fn point() -> impl Strategy<Value = Point> {
    (0.01..0.99f64, 0.01..0.99f64, 0.01..0.99f64).prop_map(|(x, y, z)| Point::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_recover_power_laws(c in 0.01..100.0f64, p in 0.1..4.0f64, h0 in 0.05..0.5f64, k in 1.1..3.0f64) {
        let hs = [h0, h0 / k, h0 / (k * k)];
        let es: Vec<f64> = hs.iter().map(|h| c * h.powf(p)).collect();
        for r in compute_rates(&es, &hs).unwrap() {
            prop_assert!((r - p).abs() < 1e-9);
        }
    }

    #[test]
    fn tet_rule_integrates_barycentric_products(seed in any::<u64>(), i in 0usize..4, j in 0usize..4) {
        let mesh = perturbed_unit_mesh(&mut StdRng::seed_from_u64(seed), 0.2);
        let verts = mesh.cell_points((seed % 6) as usize);
        let bary = barycentric_functions(&verts).unwrap();
        let rule = push_forward(&tet_rule(2), &EntityGeometry::Cell(verts)).unwrap();
        let vol = mesh.cell_volume((seed % 6) as usize);
        let lam = |k: usize, x: &Point| bary[k].0 + bary[k].1.dot(x);
        let got = rule.integrate(|x| lam(i, x) * lam(j, x));
        let want = vol * if i == j { 2.0 } else { 1.0 } / 20.0;
        prop_assert!((got - want).abs() <= 1e-13 * vol);
    }

    #[test]
    fn example1_source_is_the_operator(x in point(), eps in 1e-6..1.0f64) {
        let sol = example1(eps);
        let r = &sol.reference;
        let want = r.curl_curl(&x) - eps * eps * r.curl_laplace_curl(&x);
        prop_assert!((sol.source(&x) - want).norm() <= 1e-12 * (1.0 + want.norm()));
        prop_assert!(r.divergence(&x).abs() <= 1e-12);
    }

    #[test]
    fn example2_reference_is_divergence_free(x in point()) {
        let sol = example2();
        prop_assert!(sol.reference.divergence(&x).abs() <= 1e-15);
        prop_assert!((sol.source(&x) - sol.reference.curl_curl(&x)).norm() <= 1e-15);
    }

    #[test]
    fn csr_transpose_is_adjoint(seed in any::<u64>(), x in prop::collection::vec(-1.0..1.0f64, 7), y in prop::collection::vec(-1.0..1.0f64, 5)) {
        let mut row_ptr = vec![0];
        let (mut col_idx, mut values) = (Vec::new(), Vec::new());
        for r in 0..5u64 {
            for c in 0..7u64 {
                let h = seed.wrapping_mul(6364136223846793005).wrapping_add(r * 7 + c).rotate_left((r + c) as u32);
                if h % 3 == 0 {
                    col_idx.push(c as usize);
                    values.push((h % 1000) as f64 / 500.0 - 1.0);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let m = CsrMatrix { nrows: 5, ncols: 7, row_ptr, col_idx, values };
        let lhs: f64 = m.matvec(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = m.transpose_matvec(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_tets_are_unisolvent(seed in any::<u64>(), cell in 0usize..6) {
        let mesh = perturbed_unit_mesh(&mut StdRng::seed_from_u64(seed), 0.25);
        let el = build_local_element(&mesh, cell).unwrap();
        prop_assert!(el.kronecker_error <= 1e-9);
    }

    #[test]
    fn traces_agree_across_interior_faces(
        coeffs in prop::collection::vec(-1.0..1.0f64, FIXTURE.dofs.n_dofs),
        pick in any::<prop::sample::Index>(),
        w in (0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64),
    ) {
        let fx = &*FIXTURE;
        let f = fx.interior_faces[pick.index(fx.interior_faces.len())];
        let p = fx.mesh.face_points(f);
        let s = w.0 + w.1 + w.2;
        let x = (w.0 * p[0] + w.1 * p[1] + w.2 * p[2]) / s;
        let n = face_frame(&fx.mesh, f).unwrap().face_normal;
        let sides: Vec<Point> = fx.mesh.face_cells[f]
            .iter()
            .map(|&c| fx.elements[c].eval_field(&fx.dofs.gather(c, &coeffs), &x).value.cross(&n))
            .collect();
        prop_assert!((sides[0] - sides[1]).norm() <= 1e-10 * (1.0 + sides[0].norm()));
    }
}
