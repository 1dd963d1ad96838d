use quadcurl::element::{build_local_element, LocalGradCurlElement};
use quadcurl::forms::{assemble, assemble_energy_norms, ProblemSpec, MASS_DEGREE};
use quadcurl::manufactured::example1;
use quadcurl::mesh::{barycentric_functions, Point, StructuredTetMesh};
use quadcurl::solver::solve_saddle;
use quadcurl::space::{p2_basis, BcFlavor};
use quadcurl::study::{compute_errors, multiplier_seminorm, Discretization};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn elements(mesh: &StructuredTetMesh) -> Vec<LocalGradCurlElement> {
    (0..mesh.n_cells()).map(|c| build_local_element(mesh, c).unwrap()).collect()
}

fn locate(mesh: &StructuredTetMesh, x: &Point) -> usize {
    (0..mesh.n_cells())
        .find(|&c| {
            barycentric_functions(&mesh.cell_points(c)).unwrap().iter().all(|(o, g)| o + g.dot(x) > -1e-12)
        })
        .expect("point inside the cube")
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn errors_against_own_field_vanish() {
    let disc = Discretization::new(2, BcFlavor::Weak).unwrap();
    let els = elements(&disc.mesh);
    let u = random_vector(disc.dofs.n_dofs, 1);
    let field = |x: &Point| {
        let c = locate(&disc.mesh, x);
        els[c].eval_field(&disc.dofs.gather(c, &u), x)
    };
    let spec = ProblemSpec::new(1.0, 50.0, BcFlavor::Weak);
    let m = compute_errors(&disc, &u, field, &spec, false).unwrap();
    let e = m.full(1.0, BcFlavor::Weak);
    for v in e.as_array() {
        assert!(v <= 1e-12, "{e:?}");
    }
    assert!(m.energy_analysis(1.0) <= 1e-12);
}

/// Global interpolant of the gradient of a random interior quadratic.
fn gradient_interpolant(disc: &Discretization, els: &[LocalGradCurlElement], q: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; disc.dofs.n_dofs];
    for c in 0..disc.mesh.n_cells() {
        let el = &els[c];
        let grads = el.barycentric_gradients();
        let local = disc.scalar.gather(c, q);
        let grad_q = |x: &Point| -> Point {
            let (_, d) = p2_basis(&el.barycentric_at(x), &grads);
            d.iter().zip(&local).map(|(g, v)| g * *v).sum()
        };
        let coeffs = el.local_interpolate(|x| (grad_q(x), Point::zeros()));
        for (k, &g) in disc.dofs.cell_dofs[c].iter().enumerate() {
            u[g] = coeffs[k];
        }
    }
    u
}

#[test]
fn discrete_gradients_lie_in_the_kernel_of_a() {
    for flavor in [BcFlavor::Weak, BcFlavor::Strong] {
        let disc = Discretization::new(2, flavor).unwrap();
        let els = elements(&disc.mesh);
        let q = disc.scalar.numbering.extend(&random_vector(disc.scalar.n_free(), 2));
        let u = gradient_interpolant(&disc, &els, &q);
        for (g, &c) in disc.dofs.numbering.constrained.iter().enumerate() {
            if c {
                assert!(u[g].abs() < 1e-12);
            }
        }
        let spec = ProblemSpec::new(1.0, 50.0, flavor);
        let sys = assemble(&disc.mesh, &disc.dofs, &disc.scalar, &spec, &disc.cache, |_| Point::zeros()).unwrap();
        let u_free = disc.dofs.numbering.restrict(&u);
        let au = sys.a.matvec(&u_free);
        let scale = sys.a.max_abs() * u_free.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(au.iter().all(|v| v.abs() <= 1e-10 * scale));

        // (∇q, ∇q) through the coupling block equals |q|₁².
        let q_free = disc.scalar.numbering.restrict(&q);
        let btu = sys.b.transpose_matvec(&u_free);
        let pairing: f64 = btu.iter().zip(&q_free).map(|(a, b)| a * b).sum();
        let semi = multiplier_seminorm(&disc, &q, MASS_DEGREE).unwrap();
        assert!((pairing - semi * semi).abs() <= 1e-10 * semi * semi, "{pairing} vs {}", semi * semi);
    }
}

#[test]
fn analysis_norm_dominates_volume_norm() {
    let disc = Discretization::new(2, BcFlavor::Weak).unwrap();
    let spec = ProblemSpec::new(1.0, 50.0, BcFlavor::Weak);
    let norms = assemble_energy_norms(&disc.mesh, &disc.dofs, &spec, &disc.cache).unwrap();
    for seed in 0..5 {
        let v = random_vector(disc.dofs.n_dofs, 10 + seed);
        for eps in [1.0, 1e-3] {
            let full = norms.eps_h_sq(&v, eps);
            let vol = norms.a_sq(&v, eps);
            assert!(full >= vol && vol >= norms.mass.quadratic_form(&v) && vol > 0.0);
        }
    }
}

#[test]
fn zero_load_gives_zero_solution() {
    let disc = Discretization::new(2, BcFlavor::Strong).unwrap();
    let spec = ProblemSpec::new(1e-2, 50.0, BcFlavor::Strong);
    let sys = assemble(&disc.mesh, &disc.dofs, &disc.scalar, &spec, &disc.cache, |_| Point::zeros()).unwrap();
    let sol = solve_saddle(&sys).unwrap();
    assert!(sol.u.iter().chain(&sol.p).all(|&v| v == 0.0));
}

#[test]
fn solves_are_deterministic_and_accurate() {
    let sol = example1(1.0);
    let disc = Discretization::new(3, BcFlavor::Weak).unwrap();
    let spec = ProblemSpec::new(1.0, 50.0, BcFlavor::Weak);
    let run = || {
        let sys = assemble(&disc.mesh, &disc.dofs, &disc.scalar, &spec, &disc.cache, |x| sol.source(x)).unwrap();
        let out = solve_saddle(&sys).unwrap();
        let (top, bottom) = sys.apply(&out.u_free, &out.p_free);
        let r: f64 = top.iter().zip(&sys.rhs_u).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            + bottom.iter().map(|v| v * v).sum::<f64>();
        let b: f64 = sys.rhs_u.iter().map(|v| v * v).sum();
        assert!((r / b).sqrt() <= 1e-9);
        out
    };
    let (a, b) = (run(), run());
    assert_eq!(a.u, b.u);
    assert_eq!(a.p, b.p);
    assert_eq!(a.inertia.positive, disc.dofs.n_free());
    assert_eq!(a.inertia.negative, disc.scalar.n_free());
    let exact = |x: &Point| sol.sample(x);
    let m = compute_errors(&disc, &a.u, exact, &spec, false).unwrap();
    assert!(m.full(1.0, BcFlavor::Weak).curl < 1.0);
}
