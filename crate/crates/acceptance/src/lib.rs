//! Acceptance criteria 1-9, one pass/fail line each.

use std::cell::RefCell;
use std::collections::HashMap;
use std::time::Instant;

use quadcurl::checks::{element_suite, quadrature_suite, space_suite, CheckOutcome, RANDOM_TETS};
use quadcurl::element::FieldSample;
use quadcurl::forms::{assemble, ProblemSpec, MASS_DEGREE};
use quadcurl::mesh::Point;
use quadcurl::solver::{a_block_inertia, Inertia};
use quadcurl::space::BcFlavor;
use quadcurl::study::{
    compute_errors, compute_rates, multiplier_seminorm, relative_gap, run_row, solve_manufactured, Discretization,
    Example, RelativeErrors, StudyConfig,
};

/// Relative tolerance on tabulated error values.
const VALUE_TOL: f64 = 0.02;
/// Absolute tolerance on tabulated rates.
const RATE_TOL: f64 = 0.15;
/// `|p_h|₁ / ‖u_h‖` bound.
const MULTIPLIER_TOL: f64 = 1e-8;
const WEAK_CURL_RATE_MIN: f64 = 1.7;
const STRONG_CURL_RATE_MAX: f64 = 0.7;
const STRONG_CURL_SUB_RATE_MAX: f64 = 1.6;
const SIGMA_STABLE: f64 = 50.0;
const SIGMA_UNSTABLE: f64 = 1e-3;

type Key = (u8, BcFlavor, u64, usize);

#[derive(Clone, Copy)]
struct Row {
    h: f64,
    full: RelativeErrors,
    sub: Option<RelativeErrors>,
}

#[derive(Default)]
struct Runs(RefCell<HashMap<Key, Result<Row, String>>>);

impl Runs {
    /// Solves once per (example, flavor, ε, N); subdomain errors whenever N
    /// allows them.
    fn get(&self, example: Example, flavor: BcFlavor, eps: f64, n: usize) -> Result<Row, String> {
        let key = (example.id(), flavor, eps.to_bits(), n);
        if let Some(r) = self.0.borrow().get(&key) {
            return r.clone();
        }
        let mut config = StudyConfig::new(example, flavor, vec![n]);
        config.epsilons = vec![eps];
        config.subdomain = n % 8 == 0;
        let start = Instant::now();
        let r = run_row(&config, eps, n)
            .map(|d| Row { h: 3f64.sqrt() / n as f64, full: d.errors, sub: d.subdomain })
            .map_err(|e| e.to_string());
        println!(
            "    solved example {} {flavor} eps={eps:e} N={n} in {:.1} s",
            example.id(),
            start.elapsed().as_secs_f64()
        );
        self.0.borrow_mut().insert(key, r.clone());
        r
    }

    fn series(&self, example: Example, flavor: BcFlavor, eps: f64, ns: &[usize]) -> Result<Vec<Row>, String> {
        ns.iter().map(|&n| self.get(example, flavor, eps, n)).collect()
    }
}

fn rates_of(rows: &[Row], pick: impl Fn(&Row) -> Option<f64>) -> Result<Vec<f64>, String> {
    let e: Vec<f64> = rows.iter().map(|r| pick(r).ok_or("missing subdomain errors")).collect::<Result<_, _>>()?;
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    compute_rates(&e, &h).map_err(|e| e.to_string())
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn from_checks(outcomes: Vec<CheckOutcome>) -> Verdict {
    let passed = outcomes.iter().all(|o| o.passed);
    let detail = outcomes.iter().map(|o| format!("{} {:.1e}", o.name, o.measured)).collect::<Vec<_>>().join("; ");
    Verdict { passed, detail }
}

fn value_check(label: &str, got: f64, target: f64) -> (bool, String) {
    let gap = relative_gap(got, target);
    (gap <= VALUE_TOL, format!("{label} {got:.4e} vs {target:.4e} (gap {:.1}%)", 100.0 * gap))
}

fn rate_check(label: &str, got: &[f64], target: &[f64]) -> (bool, String) {
    let ok = got.len() == target.len() && got.iter().zip(target).all(|(g, t)| (g - t).abs() <= RATE_TOL);
    (ok, format!("{label} rates {got:.2?} vs {target:.2?}"))
}

fn combine(parts: Vec<(bool, String)>) -> Verdict {
    Verdict { passed: parts.iter().all(|p| p.0), detail: parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ") }
}

fn criterion1() -> Result<Verdict, String> {
    Ok(from_checks(element_suite(4, RANDOM_TETS)))
}

fn criterion2() -> Result<Verdict, String> {
    Ok(from_checks(quadrature_suite()))
}

fn criterion3() -> Result<Verdict, String> {
    let mut parts = Vec::new();
    for eps in [1.0, 1e-2] {
        let sol = Example::Smooth.solution(eps);
        let spec = ProblemSpec::new(eps, SIGMA_STABLE, BcFlavor::Weak);
        let solved = solve_manufactured(4, &sol, &spec).map_err(|e| e.to_string())?;
        let p = multiplier_seminorm(&solved.disc, &solved.solution.p, MASS_DEGREE).map_err(|e| e.to_string())?;
        let zero = |_: &Point| FieldSample::zero();
        let norms = compute_errors(&solved.disc, &solved.solution.u, zero, &spec, false).map_err(|e| e.to_string())?;
        let ratio = p / norms.error.l2.sqrt();
        parts.push((ratio <= MULTIPLIER_TOL, format!("eps={eps:e}: |p_h|_1/||u_h|| = {ratio:.2e}")));
    }
    Ok(combine(parts))
}

fn criterion4(runs: &Runs) -> Result<Verdict, String> {
    let a = runs.get(Example::Smooth, BcFlavor::Weak, 1.0, 8)?;
    let b = runs.get(Example::Smooth, BcFlavor::Weak, 1e-5, 8)?;
    Ok(combine(vec![
        value_check("eps=1 E_eps_h", a.full.energy, 0.4822),
        value_check("eps=1e-5 E_eps_h", b.full.energy, 0.0844),
    ]))
}

fn criterion5(runs: &Runs) -> Result<Verdict, String> {
    let ns = [8, 10, 12];
    let one = runs.series(Example::Smooth, BcFlavor::Weak, 1.0, &ns)?;
    let small = runs.series(Example::Smooth, BcFlavor::Weak, 1e-5, &ns)?;
    Ok(combine(vec![
        rate_check("eps=1 E_eps_h", &rates_of(&one, |r| Some(r.full.energy))?, &[0.84, 0.89]),
        rate_check("eps=1e-5 E_eps_h", &rates_of(&small, |r| Some(r.full.energy))?, &[1.89, 1.93]),
    ]))
}

fn criterion6(runs: &Runs) -> Result<Verdict, String> {
    let rows = runs.series(Example::Smooth, BcFlavor::Strong, 1.0, &[8, 10, 12])?;
    Ok(combine(vec![
        value_check("eps=1 E_A", rows[0].full.energy, 0.4661),
        rate_check("E_L2", &rates_of(&rows, |r| Some(r.full.l2))?, &[1.68, 1.77]),
        rate_check("E_curl", &rates_of(&rows, |r| Some(r.full.curl))?, &[1.63, 1.73]),
        rate_check("E_gc", &rates_of(&rows, |r| Some(r.full.grad_curl))?, &[0.85, 0.89]),
        rate_check("E_A", &rates_of(&rows, |r| Some(r.full.energy))?, &[0.85, 0.89]),
    ]))
}

fn criterion7(runs: &Runs) -> Result<Verdict, String> {
    let eps = quadcurl::manufactured::EXAMPLE2_EPSILON;
    let ex = Example::BoundaryLayer;
    let weak = rates_of(&runs.series(ex, BcFlavor::Weak, eps, &[8, 10, 12])?, |r| Some(r.full.curl))?;
    let strong = rates_of(&runs.series(ex, BcFlavor::Strong, eps, &[8, 10, 12])?, |r| Some(r.full.curl))?;
    let weak_sub = rates_of(&runs.series(ex, BcFlavor::Weak, eps, &[8, 16])?, |r| r.sub.map(|s| s.curl))?;
    let strong_sub = rates_of(&runs.series(ex, BcFlavor::Strong, eps, &[8, 16])?, |r| r.sub.map(|s| s.curl))?;
    let fmt = |r: &[f64]| format!("{r:.2?}");
    Ok(combine(vec![
        (weak.iter().all(|&r| r >= WEAK_CURL_RATE_MIN), format!("weak E_curl rates {} >= {WEAK_CURL_RATE_MIN}", fmt(&weak))),
        (strong.iter().all(|&r| r <= STRONG_CURL_RATE_MAX), format!("strong E_curl rates {} <= {STRONG_CURL_RATE_MAX}", fmt(&strong))),
        (weak_sub.iter().all(|&r| r >= WEAK_CURL_RATE_MIN), format!("weak subdomain rate {} >= {WEAK_CURL_RATE_MIN}", fmt(&weak_sub))),
        (strong_sub.iter().all(|&r| r <= STRONG_CURL_SUB_RATE_MAX), format!("strong subdomain rate {} <= {STRONG_CURL_SUB_RATE_MAX}", fmt(&strong_sub))),
    ]))
}

fn criterion8() -> Result<Verdict, String> {
    let sol = Example::Smooth.solution(1.0);
    let disc = Discretization::new(4, BcFlavor::Weak).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for sigma in [SIGMA_STABLE, SIGMA_UNSTABLE] {
        let spec = ProblemSpec::new(1.0, sigma, BcFlavor::Weak);
        let sys = assemble(&disc.mesh, &disc.dofs, &disc.scalar, &spec, &disc.cache, |x| sol.source(x))
            .map_err(|e| e.to_string())?;
        let a = a_block_inertia(&sys).map_err(|e| e.to_string())?;
        if sigma == SIGMA_STABLE {
            let full = quadcurl::solver::solve_saddle(&sys).map_err(|e| e.to_string())?.inertia;
            let want = Inertia { positive: sys.n_u(), negative: sys.n_p(), zero: 0 };
            parts.push((
                a.negative == 0 && a.zero == 0 && full == want,
                format!("sigma={sigma}: A block {a}, saddle {full} (want {want})"),
            ));
        } else {
            parts.push((a.negative >= 1, format!("sigma={sigma:e}: A block {a}, needs a negative pivot")));
        }
    }
    Ok(combine(parts))
}

fn criterion9() -> Result<Verdict, String> {
    let mut outcomes = space_suite(2);
    outcomes.extend(space_suite(4));
    Ok(from_checks(outcomes))
}

/// Runs every criterion in order and reports whether all passed.
pub fn run_all() -> bool {
    let runs = Runs::default();
    type Criterion<'a> = (&'a str, Box<dyn Fn() -> Result<Verdict, String> + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("element unisolvence", Box::new(criterion1)),
        ("quadrature exactness", Box::new(criterion2)),
        ("multiplier vanishing", Box::new(criterion3)),
        ("smooth example, weak, reference values", Box::new(|| criterion4(&runs))),
        ("smooth example, weak, rates", Box::new(|| criterion5(&runs))),
        ("smooth example, strong, values and rates", Box::new(|| criterion6(&runs))),
        ("weak vs strong pollution", Box::new(|| criterion7(&runs))),
        ("Nitsche penalty threshold", Box::new(criterion8)),
        ("space properties", Box::new(criterion9)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run().unwrap_or_else(|e| Verdict { passed: false, detail: format!("error: {e}") });
        let secs = start.elapsed().as_secs_f64();
        let tag = if verdict.passed { "PASS" } else { "FAIL" };
        println!("criterion {} {tag}: {name}: {} [{secs:.1} s]", i + 1, verdict.detail);
        failed += usize::from(!verdict.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    failed == 0
}
