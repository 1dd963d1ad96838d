//! Refinement studies: solve, measure errors against a reference field and
//! tabulate rates.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::element::{ElementError, FieldSample};
use crate::forms::{assemble, FormsError, ProblemSpec};
use crate::manufactured::{example1, example2, ManufacturedSolution};
use crate::mesh::{build_structured_mesh, MeshError, Point, StructuredTetMesh};
use crate::solver::{solve_saddle, SolutionVector, SolverError};
use crate::space::{build_dof_map, build_scalar_space, BcFlavor, GlobalDofMap, ScalarLagrangeSpace};
use crate::tabulation::ShapeCache;

/// Inner subdomain `(LO, HI)³` used to measure errors away from boundary layers.
pub const SUBDOMAIN: (f64, f64) = (0.125, 0.875);

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("subdomain errors need N divisible by 8, got N = {0}")]
    SubdomainResolution(usize),
    #[error("rates need at least two rows with strictly decreasing h")]
    RateInput,
    #[error("rates need positive errors, got {0}")]
    NonPositiveError(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Mesh, spaces and shape cache for one resolution and boundary treatment.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: StructuredTetMesh,
    pub dofs: GlobalDofMap,
    pub scalar: ScalarLagrangeSpace,
    pub cache: ShapeCache,
}

impl Discretization {
    pub fn new(n: usize, flavor: BcFlavor) -> Result<Self, StudyError> {
        let mesh = build_structured_mesh(n)?;
        let dofs = build_dof_map(&mesh, flavor);
        let scalar = build_scalar_space(&mesh);
        Ok(Discretization { mesh, dofs, scalar, cache: ShapeCache::new() })
    }

    /// Field of global vector coefficients `u` at quadrature point `q` of `cell`.
    fn field_at(&self, table: &crate::tabulation::PointTable, cell: usize, q: usize, u: &[f64]) -> FieldSample {
        table.basis.combine(q, &self.dofs.gather(cell, u))
    }
}

/// Discrete solution together with its discretization.
#[derive(Debug)]
pub struct SolvedProblem {
    pub disc: Discretization,
    pub spec: ProblemSpec,
    pub solution: SolutionVector,
    pub seconds: f64,
}

pub fn solve_manufactured(
    n: usize,
    reference: &ManufacturedSolution,
    spec: &ProblemSpec,
) -> Result<SolvedProblem, StudyError> {
    let start = Instant::now();
    let disc = Discretization::new(n, spec.flavor)?;
    let system = assemble(&disc.mesh, &disc.dofs, &disc.scalar, spec, &disc.cache, |x| reference.source(x))?;
    let solution = solve_saddle(&system)?;
    Ok(SolvedProblem { disc, spec: *spec, solution, seconds: start.elapsed().as_secs_f64() })
}

/// Squared norms accumulated by quadrature.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquaredNorms {
    pub l2: f64,
    pub curl: f64,
    pub grad_curl: f64,
    /// `Σ_{F ⊂ ∂Ω} h_F⁻¹ ‖∇×v‖²_F`
    pub boundary: f64,
}

impl std::ops::Add for SquaredNorms {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        SquaredNorms {
            l2: self.l2 + o.l2,
            curl: self.curl + o.curl,
            grad_curl: self.grad_curl + o.grad_curl,
            boundary: self.boundary + o.boundary,
        }
    }
}

impl SquaredNorms {
    /// `ε²(‖∇_h∇×v‖² + boundary) + ‖∇×v‖² + ‖v‖²`
    pub fn eps_h(&self, eps: f64) -> f64 {
        eps * eps * (self.grad_curl + self.boundary) + self.curl + self.l2
    }

    /// `ε²‖∇_h∇×v‖² + ‖∇×v‖² + ‖v‖²`
    pub fn a(&self, eps: f64) -> f64 {
        eps * eps * self.grad_curl + self.curl + self.l2
    }
}

/// Relative errors of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrors {
    pub l2: f64,
    pub curl: f64,
    pub grad_curl: f64,
    /// `E_{ε,h}` (weak) or `E_A` (strong). The numerator has no
    /// boundary-face term; see [`ErrorMeasures::energy_analysis`].
    pub energy: f64,
}

impl RelativeErrors {
    pub fn as_array(&self) -> [f64; 4] {
        [self.l2, self.curl, self.grad_curl, self.energy]
    }
}

/// Error and reference norms of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMeasures {
    pub error: SquaredNorms,
    pub reference: SquaredNorms,
    pub error_sub: Option<SquaredNorms>,
    pub reference_sub: Option<SquaredNorms>,
}

fn ratio(num: f64, den: f64) -> f64 {
    (num / den).sqrt()
}

impl ErrorMeasures {
    fn relative(e: &SquaredNorms, r: &SquaredNorms, eps: f64, flavor: BcFlavor) -> RelativeErrors {
        let energy = match flavor {
            BcFlavor::Weak => ratio(e.a(eps), r.eps_h(eps)),
            BcFlavor::Strong => ratio(e.a(eps), r.a(eps)),
        };
        RelativeErrors {
            l2: ratio(e.l2, r.l2),
            curl: ratio(e.curl, r.curl),
            grad_curl: ratio(e.grad_curl, r.grad_curl),
            energy,
        }
    }

    /// Relative errors on the whole domain.
    pub fn full(&self, eps: f64, flavor: BcFlavor) -> RelativeErrors {
        Self::relative(&self.error, &self.reference, eps, flavor)
    }

    /// Relative errors restricted to the inner subdomain (no boundary term).
    pub fn subdomain(&self, eps: f64) -> Option<RelativeErrors> {
        Some(Self::relative(self.error_sub.as_ref()?, self.reference_sub.as_ref()?, eps, BcFlavor::Strong))
    }

    /// Error in the full mesh-dependent norm, boundary-face term included
    /// in numerator and denominator.
    pub fn energy_analysis(&self, eps: f64) -> f64 {
        ratio(self.error.eps_h(eps), self.reference.eps_h(eps))
    }
}

fn in_subdomain(x: &Point) -> bool {
    x.iter().all(|&c| c > SUBDOMAIN.0 && c < SUBDOMAIN.1)
}

fn sample_norms(s: &FieldSample, w: f64) -> SquaredNorms {
    SquaredNorms {
        l2: w * s.value.norm_squared(),
        curl: w * s.curl.norm_squared(),
        grad_curl: w * s.grad_curl.norm_squared(),
        boundary: 0.0,
    }
}

fn diff(a: &FieldSample, b: &FieldSample) -> FieldSample {
    FieldSample { value: a.value - b.value, curl: a.curl - b.curl, grad_curl: a.grad_curl - b.grad_curl }
}

/// Integrates `reference − u_h` and `reference` cell by cell at the error
/// quadrature degree, plus the boundary-face curl term.
pub fn compute_errors<R>(
    disc: &Discretization,
    u: &[f64],
    reference: R,
    spec: &ProblemSpec,
    subdomain: bool,
) -> Result<ErrorMeasures, StudyError>
where
    R: Fn(&Point) -> FieldSample + Sync,
{
    spec.validate()?;
    let mesh = &disc.mesh;
    if subdomain && mesh.n_per_axis % 8 != 0 {
        return Err(StudyError::SubdomainResolution(mesh.n_per_axis));
    }
    let degree = spec.error_degree;
    let per_cell = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| -> Result<(SquaredNorms, SquaredNorms, bool), StudyError> {
            let t = disc.cache.cell_table(mesh, c, degree)?;
            let mut e = SquaredNorms::default();
            let mut r = SquaredNorms::default();
            for (q, (x, &w)) in t.points_on(mesh, c).zip(&t.weights).enumerate() {
                let exact = reference(&x);
                let uh = disc.field_at(&t, c, q, u);
                e = e + sample_norms(&diff(&exact, &uh), w);
                r = r + sample_norms(&exact, w);
            }
            Ok((e, r, in_subdomain(&mesh.cell_barycenter(c))))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = ErrorMeasures {
        error: SquaredNorms::default(),
        reference: SquaredNorms::default(),
        error_sub: subdomain.then(SquaredNorms::default),
        reference_sub: subdomain.then(SquaredNorms::default),
    };
    for (e, r, inside) in per_cell {
        out.error = out.error + e;
        out.reference = out.reference + r;
        if inside {
            if let (Some(es), Some(rs)) = (out.error_sub.as_mut(), out.reference_sub.as_mut()) {
                *es = *es + e;
                *rs = *rs + r;
            }
        }
    }

    for f in mesh.boundary_face_ids() {
        let cell = mesh.face_cells[f][0];
        let lf = mesh.cell_faces[cell].iter().position(|&g| g == f).unwrap();
        let t = disc.cache.face_table(mesh, cell, lf, degree)?;
        let inv_h = 1.0 / mesh.face_diameter(f);
        for (q, (x, &w)) in t.points_on(mesh, cell).zip(&t.weights).enumerate() {
            let exact = reference(&x);
            let uh = disc.field_at(&t, cell, q, u);
            out.error.boundary += inv_h * w * (exact.curl - uh.curl).norm_squared();
            out.reference.boundary += inv_h * w * exact.curl.norm_squared();
        }
    }
    Ok(out)
}

/// `|p|₁` of a multiplier coefficient vector over all scalar DOFs.
pub fn multiplier_seminorm(disc: &Discretization, p: &[f64], degree: usize) -> Result<f64, StudyError> {
    let mesh = &disc.mesh;
    let mut sum = 0.0;
    for c in 0..mesh.n_cells() {
        let t = disc.cache.cell_table(mesh, c, degree)?;
        let local = disc.scalar.gather(c, p);
        for ((_, grads), &w) in t.scalar.iter().zip(&t.weights) {
            let g: Point = grads.iter().zip(&local).map(|(d, v)| d * *v).sum();
            sum += w * g.norm_squared();
        }
    }
    Ok(sum.sqrt())
}

/// `rate_i = ln(E_{i−1}/E_i) / ln(h_{i−1}/h_i)`.
pub fn compute_rates(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>, StudyError> {
    if errors.len() < 2 || errors.len() != hs.len() || hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(StudyError::RateInput);
    }
    if let Some(&e) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(StudyError::NonPositiveError(e));
    }
    Ok(errors.windows(2).zip(hs.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect())
}

/// Test problem selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    /// Smooth trigonometric solution.
    Smooth,
    /// Boundary-layer problem measured against the reduced solution.
    BoundaryLayer,
}

impl Example {
    pub fn id(self) -> u8 {
        match self {
            Example::Smooth => 1,
            Example::BoundaryLayer => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Example::Smooth),
            2 => Some(Example::BoundaryLayer),
            _ => None,
        }
    }

    pub fn solution(self, eps: f64) -> ManufacturedSolution {
        match self {
            Example::Smooth => example1(eps),
            Example::BoundaryLayer => {
                let mut s = example2();
                s.epsilon = eps;
                s
            }
        }
    }

    pub fn default_sigma(self) -> f64 {
        match self {
            Example::Smooth => 50.0,
            Example::BoundaryLayer => 20.0,
        }
    }

    pub fn default_epsilons(self) -> Vec<f64> {
        match self {
            Example::Smooth => vec![1.0, 1e-2, 1e-5],
            Example::BoundaryLayer => vec![crate::manufactured::EXAMPLE2_EPSILON],
        }
    }
}

/// Output table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub example: Example,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub flavor: BcFlavor,
    pub sigma: f64,
    pub subdomain: bool,
    pub assembly_degree: usize,
    pub error_degree: usize,
    pub load_degree: usize,
    pub format: TableFormat,
}

impl StudyConfig {
    pub fn new(example: Example, flavor: BcFlavor, ns: Vec<usize>) -> Self {
        StudyConfig {
            example,
            epsilons: example.default_epsilons(),
            ns,
            flavor,
            sigma: example.default_sigma(),
            subdomain: false,
            assembly_degree: crate::forms::STIFFNESS_DEGREE,
            error_degree: crate::forms::MASS_DEGREE,
            load_degree: crate::forms::LOAD_DEGREE,
            format: TableFormat::Csv,
        }
    }

    pub fn spec(&self, eps: f64) -> ProblemSpec {
        ProblemSpec {
            epsilon: eps,
            sigma: self.sigma,
            flavor: self.flavor,
            assembly_degree: self.assembly_degree,
            error_degree: self.error_degree,
            load_degree: self.load_degree,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if let Some(&n) = self.ns.iter().find(|&&n| self.subdomain && n % 8 != 0) {
            return Err(StudyError::SubdomainResolution(n));
        }
        if self.ns.contains(&0) {
            return Err(StudyError::Mesh(MeshError::ZeroSubdivisions));
        }
        for &eps in &self.epsilons {
            self.spec(eps).validate()?;
        }
        Ok(())
    }
}

/// One `(ε, N)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub epsilon: f64,
    pub n: usize,
    pub h: f64,
    pub outcome: Result<RowData, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowData {
    pub errors: RelativeErrors,
    pub subdomain: Option<RelativeErrors>,
    /// Rates against the previous row of the same ε.
    pub rates: Option<[f64; 4]>,
    pub subdomain_rates: Option<[f64; 4]>,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

/// Solves one row and measures its errors.
pub fn run_row(config: &StudyConfig, eps: f64, n: usize) -> Result<RowData, StudyError> {
    let spec = config.spec(eps);
    let sol = config.example.solution(eps);
    let solved = solve_manufactured(n, &sol, &spec)?;
    let m = compute_errors(&solved.disc, &solved.solution.u, |x| sol.sample(x), &spec, config.subdomain)?;
    Ok(RowData {
        errors: m.full(eps, config.flavor),
        subdomain: m.subdomain(eps),
        rates: None,
        subdomain_rates: None,
        residual: solved.solution.relative_residual,
        seconds: solved.seconds,
    })
}

fn pair_rates(prev: &[f64; 4], cur: &[f64; 4], h: (f64, f64)) -> Option<[f64; 4]> {
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = *compute_rates(&[prev[k], cur[k]], &[h.0, h.1]).ok()?.first()?;
    }
    Some(out)
}

/// Attaches rates between consecutive successful rows of the same ε.
pub fn attach_rates(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let (head, tail) = rows.split_at_mut(i);
        let (prev, cur) = (&head[i - 1], &mut tail[0]);
        if prev.epsilon != cur.epsilon {
            continue;
        }
        if let (Ok(p), Ok(c)) = (&prev.outcome, &mut cur.outcome) {
            let h = (prev.h, cur.h);
            c.rates = pair_rates(&p.errors.as_array(), &c.errors.as_array(), h);
            if let (Some(ps), Some(cs)) = (p.subdomain, c.subdomain) {
                c.subdomain_rates = pair_rates(&ps.as_array(), &cs.as_array(), h);
            }
        }
    }
}

/// Runs every `(ε, N)` row in configuration order.
pub fn run_convergence(config: &StudyConfig) -> Result<StudyTable, StudyError> {
    config.validate()?;
    let mut rows = Vec::new();
    for &eps in &config.epsilons {
        for &n in &config.ns {
            let outcome = run_row(config, eps, n).map_err(|e| e.to_string());
            rows.push(StudyRow { epsilon: eps, n, h: 3f64.sqrt() / n as f64, outcome });
        }
    }
    attach_rates(&mut rows);
    Ok(StudyTable { config: config.clone(), rows })
}

fn fmt_err(e: f64) -> String {
    format!("{e:.3e}")
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(String::new, |r| format!("{r:.2}"))
}

impl StudyTable {
    fn energy_label(&self) -> &'static str {
        match self.config.flavor {
            BcFlavor::Weak => "E_eps_h",
            BcFlavor::Strong => "E_A",
        }
    }

    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.outcome.is_err())
    }

    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut s = String::from(
            "example,bc,sigma,eps,N,h,E_L2,rate_L2,E_curl,rate_curl,E_gc,rate_gc,E_energy,rate_energy",
        );
        if c.subdomain {
            s.push_str(",E_L2_sub,rate_L2_sub,E_curl_sub,rate_curl_sub,E_gc_sub,rate_gc_sub,E_A_sub,rate_A_sub");
        }
        s.push_str(",status\n");
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{:e},{},{:.4}", c.example.id(), c.flavor, c.sigma, r.epsilon, r.n, r.h);
            match &r.outcome {
                Ok(d) => {
                    let groups = std::iter::once((d.errors, d.rates)).chain(c.subdomain.then_some((
                        d.subdomain.unwrap_or(RelativeErrors { l2: f64::NAN, curl: f64::NAN, grad_curl: f64::NAN, energy: f64::NAN }),
                        d.subdomain_rates,
                    )));
                    for (e, rates) in groups {
                        for (k, v) in e.as_array().iter().enumerate() {
                            let _ = write!(s, ",{},{}", fmt_err(*v), fmt_rate(rates.map(|x| x[k])));
                        }
                    }
                    s.push_str(",ok\n");
                }
                Err(msg) => {
                    let cols = if c.subdomain { 16 } else { 8 };
                    s.push_str(&",".repeat(cols));
                    let _ = writeln!(s, ",failed: {}", msg.replace(',', ";"));
                }
            }
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let (names, sub): (Vec<String>, bool) = if c.subdomain {
            let e = ["E_{L²,Ω₀}", "E_{curl,Ω₀}", "E_{gc,Ω₀}", "E_{A,Ω₀}"];
            (e.iter().map(|s| s.to_string()).collect(), true)
        } else {
            let energy = if c.flavor == BcFlavor::Weak { "E_{ε,h}" } else { "E_A" };
            (["E_{L²}", "E_curl", "E_gc", energy].iter().map(|s| s.to_string()).collect(), false)
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Example {}, {} boundary treatment, σ = {}",
            c.example.id(),
            c.flavor,
            c.sigma
        );
        s.push('\n');
        let mut header = String::from("| ε | h |");
        let mut rule = String::from("|---|---|");
        for n in &names {
            let _ = write!(header, " {n} | rate |");
            rule.push_str("---|---|");
        }
        let _ = writeln!(s, "{header}\n{rule}");
        for r in &self.rows {
            let _ = write!(s, "| {:e} | {:.4} |", r.epsilon, r.h);
            match &r.outcome {
                Ok(d) => {
                    let (e, rates) = if sub { (d.subdomain, d.subdomain_rates) } else { (Some(d.errors), d.rates) };
                    let e = e.map_or([f64::NAN; 4], |e| e.as_array());
                    for k in 0..4 {
                        let _ = write!(s, " {} | {} |", fmt_err(e[k]), fmt_rate(rates.map(|x| x[k])));
                    }
                    s.push('\n');
                }
                Err(msg) => {
                    let _ = writeln!(s, " failed: {msg} |");
                }
            }
        }
        let _ = writeln!(s, "\nEnergy column: {}", self.energy_label());
        s
    }

    pub fn render(&self) -> String {
        match self.config.format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => self.to_markdown(),
        }
    }
}

/// Relative difference `|a − b| / |b|`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert_eq!(compute_rates(&[4.0, 1.0], &[0.2, 0.1]).unwrap(), vec![2.0]);
        assert_eq!(compute_rates(&[1.0, 1.0], &[0.3, 0.1]).unwrap(), vec![0.0]);
        let h = 3f64.sqrt();
        let r = compute_rates(&[1.734e-1, 1.179e-1], &[h / 8.0, h / 10.0]).unwrap();
        assert!((r[0] - 1.73).abs() < 0.005, "{r:?}");
        assert!(compute_rates(&[1.0], &[0.1]).is_err());
        assert!(compute_rates(&[1.0, 0.0], &[0.2, 0.1]).is_err());
        assert!(compute_rates(&[1.0, 0.5], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn weak_energy_has_volume_numerator() {
        let e = SquaredNorms { l2: 1.0, curl: 1.0, grad_curl: 2.0, boundary: 5.0 };
        let r = SquaredNorms { l2: 4.0, curl: 4.0, grad_curl: 8.0, boundary: 0.0 };
        let m = ErrorMeasures { error: e, reference: r, error_sub: None, reference_sub: None };
        assert!((m.full(1.0, BcFlavor::Weak).energy - 0.5).abs() < 1e-15);
        assert!((m.full(1.0, BcFlavor::Strong).energy - 0.5).abs() < 1e-15);
        assert!((m.energy_analysis(1.0) - 0.75).abs() < 1e-15);
        assert!(m.subdomain(1.0).is_none());
    }

    #[test]
    fn subdomain_needs_multiple_of_eight() {
        let mut c = StudyConfig::new(Example::BoundaryLayer, BcFlavor::Strong, vec![8, 12]);
        c.subdomain = true;
        assert!(matches!(c.validate(), Err(StudyError::SubdomainResolution(12))));
        c.ns = vec![8, 16];
        assert!(c.validate().is_ok());
    }
}
