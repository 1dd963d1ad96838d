//! Assembly of the saddle-point system and of the norm matrices.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::element::{ElementError, N_LOCAL};
use crate::mesh::{Point, StructuredTetMesh};
use crate::space::{BcFlavor, FreeNumbering, GlobalDofMap, ScalarLagrangeSpace, N_SCALAR_LOCAL};
use crate::tabulation::ShapeCache;

/// Highest polynomial degree of the stiffness integrands (curl·curl of the
/// degree-7 bubbles).
pub const STIFFNESS_DEGREE: usize = 12;
/// Highest polynomial degree of the mass integrand.
pub const MASS_DEGREE: usize = 14;
/// Default exactness degree for `(f, φ_i)`; exact for loads of degree ≤ 13.
pub const LOAD_DEGREE: usize = 20;

#[derive(Debug, Error)]
pub enum FormsError {
    #[error("quadrature degree {got} below the integrand degree {required}")]
    InsufficientQuadrature { required: usize, got: usize },
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("penalty sigma must be positive for the weak scheme, got {0}")]
    InvalidSigma(f64),
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// Parameters of one discrete problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub epsilon: f64,
    pub sigma: f64,
    pub flavor: BcFlavor,
    /// Exactness degree for the bilinear forms.
    pub assembly_degree: usize,
    /// Exactness degree for errors and mass terms.
    pub error_degree: usize,
    /// Exactness degree for the load integrals.
    pub load_degree: usize,
}

impl ProblemSpec {
    pub fn new(epsilon: f64, sigma: f64, flavor: BcFlavor) -> Self {
        ProblemSpec {
            epsilon,
            sigma,
            flavor,
            assembly_degree: STIFFNESS_DEGREE,
            error_degree: MASS_DEGREE,
            load_degree: LOAD_DEGREE,
        }
    }

    pub fn validate(&self) -> Result<(), FormsError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(FormsError::InvalidEpsilon(self.epsilon));
        }
        if self.flavor == BcFlavor::Weak && !(self.sigma > 0.0) {
            return Err(FormsError::InvalidSigma(self.sigma));
        }
        if self.assembly_degree < STIFFNESS_DEGREE {
            return Err(FormsError::InsufficientQuadrature { required: STIFFNESS_DEGREE, got: self.assembly_degree });
        }
        for got in [self.error_degree, self.load_degree] {
            if got < MASS_DEGREE {
                return Err(FormsError::InsufficientQuadrature { required: MASS_DEGREE, got });
            }
        }
        Ok(())
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sorted, deduplicated row patterns.
    fn from_rows(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in &rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { nrows: rows.len(), ncols, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let row = &self.col_idx[lo..self.row_ptr[r + 1]];
        row.binary_search(&c).ok().map(|k| lo + k)
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self.slot(r, c).expect("entry outside the sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.slot(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// `y = M x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `y = Mᵀ x`
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// `xᵀ M x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.nrows).map(|r| x[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|M_ij − M_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Writes `row col value` lines (zero-based), preceded by a size line.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Block system `[A B; Bᵀ 0] [u; p] = [rhs_u; 0]` over free DOFs.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub u_numbering: FreeNumbering,
    pub p_numbering: FreeNumbering,
}

impl SaddleSystem {
    pub fn n_u(&self) -> usize {
        self.a.nrows
    }

    pub fn n_p(&self) -> usize {
        self.b.ncols
    }

    /// Block matrix-vector product.
    pub fn apply(&self, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = self.a.matvec(u);
        for (t, bp) in top.iter_mut().zip(self.b.matvec(p)) {
            *t += bp;
        }
        (top, self.b.transpose_matvec(u))
    }
}

/// Free positions of a cell's local DOFs.
fn local_free<const K: usize>(dofs: &[usize; K], numbering: &FreeNumbering) -> [Option<usize>; K] {
    dofs.map(|g| numbering.free_index[g])
}

fn pattern<const K: usize, const L: usize>(
    nrows: usize,
    rows_of: impl Iterator<Item = ([Option<usize>; K], [Option<usize>; L])>,
) -> Vec<Vec<usize>> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
    for (r, c) in rows_of {
        for i in r.iter().flatten() {
            rows[*i].extend(c.iter().flatten());
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    rows
}

/// Boundary faces with their owning cell and local face index.
fn boundary_face_owners(mesh: &StructuredTetMesh) -> Vec<(usize, usize, usize)> {
    mesh.boundary_face_ids()
        .map(|f| {
            let cell = mesh.face_cells[f][0];
            let lf = mesh.cell_faces[cell].iter().position(|&g| g == f).unwrap();
            (f, cell, lf)
        })
        .collect()
}

const CHUNK: usize = 512;

/// Assembles the saddle-point system for load `source`.
pub fn assemble<F>(
    mesh: &StructuredTetMesh,
    dofs: &GlobalDofMap,
    scalar: &ScalarLagrangeSpace,
    spec: &ProblemSpec,
    cache: &ShapeCache,
    source: F,
) -> Result<SaddleSystem, FormsError>
where
    F: Fn(&Point) -> Point + Sync,
{
    spec.validate()?;
    let un = &dofs.numbering;
    let pn = &scalar.numbering;
    let cells = 0..mesh.n_cells();
    let u_local: Vec<[Option<usize>; N_LOCAL]> = cells.clone().map(|c| local_free(&dofs.cell_dofs[c], un)).collect();
    let p_local: Vec<[Option<usize>; N_SCALAR_LOCAL]> =
        cells.clone().map(|c| local_free(&scalar.cell_dofs[c], pn)).collect();

    let mut a = CsrMatrix::from_rows(un.n_free(), pattern(un.n_free(), u_local.iter().map(|r| (*r, *r))));
    let mut b = CsrMatrix::from_rows(pn.n_free(), pattern(un.n_free(), u_local.iter().copied().zip(p_local.iter().copied())));
    let mut rhs_u = vec![0.0; un.n_free()];
    let eps2 = spec.epsilon * spec.epsilon;

    let cell_ids: Vec<usize> = cells.collect();
    for chunk in cell_ids.chunks(CHUNK) {
        let loads = chunk
            .par_iter()
            .map(|&c| -> Result<[f64; N_LOCAL], FormsError> {
                let t = cache.cell_table(mesh, c, spec.load_degree)?;
                let mut load = [0.0; N_LOCAL];
                for (q, (x, &w)) in t.points_on(mesh, c).zip(&t.weights).enumerate() {
                    let f = source(&x);
                    for (l, s) in load.iter_mut().zip(t.basis.point(q)) {
                        *l += w * f.dot(&s.value);
                    }
                }
                Ok(load)
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (&c, load) in chunk.iter().zip(loads) {
            let m = cache.cell_matrices(mesh, c, spec.assembly_degree, spec.error_degree)?;
            let ul = &u_local[c];
            for (i, gi) in ul.iter().enumerate() {
                let Some(gi) = *gi else { continue };
                rhs_u[gi] += load[i];
                for (j, gj) in ul.iter().enumerate() {
                    if let Some(gj) = *gj {
                        a.add(gi, gj, eps2 * m.grad_curl[(i, j)] + m.curl[(i, j)]);
                    }
                }
                for (k, gk) in p_local[c].iter().enumerate() {
                    if let Some(gk) = *gk {
                        b.add(gi, gk, m.coupling[(i, k)]);
                    }
                }
            }
        }
    }

    if spec.flavor == BcFlavor::Weak {
        for (f, cell, lf) in boundary_face_owners(mesh) {
            let m = cache.face_matrices(mesh, cell, lf, spec.assembly_degree)?;
            let pen = spec.sigma / mesh.face_diameter(f);
            let ul = &u_local[cell];
            for (i, gi) in ul.iter().enumerate() {
                let Some(gi) = *gi else { continue };
                for (j, gj) in ul.iter().enumerate() {
                    if let Some(gj) = *gj {
                        a.add(gi, gj, eps2 * (m.consistency[(i, j)] + pen * m.curl_trace[(i, j)]));
                    }
                }
            }
        }
    }

    Ok(SaddleSystem { a, b, rhs_u, u_numbering: un.clone(), p_numbering: pn.clone() })
}

/// Quadratic forms over all vector DOFs (constrained ones included).
#[derive(Debug, Clone)]
pub struct NormMatrices {
    /// `Σ_K ‖∇∇×v‖²_K`
    pub broken_grad_curl: CsrMatrix,
    /// `Σ_{F ⊂ ∂Ω} h_F⁻¹ ‖∇×v‖²_F`
    pub boundary_curl: CsrMatrix,
    /// `‖∇×v‖²`
    pub curl: CsrMatrix,
    /// `‖v‖²`
    pub mass: CsrMatrix,
}

impl NormMatrices {
    pub fn grad_curl_sq(&self, v: &[f64]) -> f64 {
        self.broken_grad_curl.quadratic_form(v)
    }

    /// `ε²(Σ_K ‖∇∇×v‖² + Σ_F h_F⁻¹‖∇×v‖²_F) + ‖∇×v‖² + ‖v‖²`
    pub fn eps_h_sq(&self, v: &[f64], epsilon: f64) -> f64 {
        epsilon * epsilon * (self.broken_grad_curl.quadratic_form(v) + self.boundary_curl.quadratic_form(v))
            + self.curl.quadratic_form(v)
            + self.mass.quadratic_form(v)
    }

    /// `ε² Σ_K ‖∇∇×v‖² + ‖∇×v‖² + ‖v‖²`
    pub fn a_sq(&self, v: &[f64], epsilon: f64) -> f64 {
        epsilon * epsilon * self.broken_grad_curl.quadratic_form(v)
            + self.curl.quadratic_form(v)
            + self.mass.quadratic_form(v)
    }
}

pub fn assemble_energy_norms(
    mesh: &StructuredTetMesh,
    dofs: &GlobalDofMap,
    spec: &ProblemSpec,
    cache: &ShapeCache,
) -> Result<NormMatrices, FormsError> {
    spec.validate()?;
    let n = dofs.n_dofs;
    let all: Vec<[Option<usize>; N_LOCAL]> = dofs.cell_dofs.iter().map(|d| d.map(Some)).collect();
    let rows = pattern(n, all.iter().map(|r| (*r, *r)));
    let mut gc = CsrMatrix::from_rows(n, rows);
    let mut curl = gc.clone();
    let mut mass = gc.clone();
    let mut bc = gc.clone();
    for c in 0..mesh.n_cells() {
        let m = cache.cell_matrices(mesh, c, spec.assembly_degree, spec.error_degree)?;
        let d = &dofs.cell_dofs[c];
        for i in 0..N_LOCAL {
            for j in 0..N_LOCAL {
                gc.add(d[i], d[j], m.grad_curl[(i, j)]);
                curl.add(d[i], d[j], m.curl[(i, j)]);
                mass.add(d[i], d[j], m.mass[(i, j)]);
            }
        }
    }
    for (f, cell, lf) in boundary_face_owners(mesh) {
        let m = cache.face_matrices(mesh, cell, lf, spec.assembly_degree)?;
        let inv_h = 1.0 / mesh.face_diameter(f);
        let d = &dofs.cell_dofs[cell];
        for i in 0..N_LOCAL {
            for j in 0..N_LOCAL {
                bc.add(d[i], d[j], inv_h * m.curl_trace[(i, j)]);
            }
        }
    }
    Ok(NormMatrices { broken_grad_curl: gc, boundary_curl: bc, curl, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;
    use crate::space::{build_dof_map, build_scalar_space};

    #[test]
    fn refuses_low_quadrature() {
        let mut spec = ProblemSpec::new(1.0, 50.0, BcFlavor::Weak);
        spec.assembly_degree = 10;
        assert!(matches!(
            spec.validate(),
            Err(FormsError::InsufficientQuadrature { required: 12, got: 10 })
        ));
        let mut spec = ProblemSpec::new(1.0, 50.0, BcFlavor::Weak);
        spec.error_degree = 12;
        assert!(spec.validate().is_err());
        assert!(ProblemSpec::new(0.0, 50.0, BcFlavor::Weak).validate().is_err());
        assert!(ProblemSpec::new(1.0, 0.0, BcFlavor::Weak).validate().is_err());
        assert!(ProblemSpec::new(1.0, 0.0, BcFlavor::Strong).validate().is_ok());
    }

    #[test]
    fn csr_basics() {
        let mut m = CsrMatrix::from_rows(3, vec![vec![0, 2], vec![1], vec![0, 2]]);
        m.add(0, 0, 2.0);
        m.add(0, 2, 1.0);
        m.add(2, 0, 1.0);
        m.add(1, 1, 3.0);
        m.add(2, 2, 4.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0, 5.0]);
        assert_eq!(m.transpose_matvec(&[1.0, 0.0, 0.0]), vec![2.0, 0.0, 1.0]);
        assert_eq!(m.quadratic_form(&[1.0, 1.0, 1.0]), 11.0);
        assert_eq!(m.symmetry_defect(), 0.0);
        let mut out = Vec::new();
        m.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("3 3 5\n"));
    }

    #[test]
    fn assembled_a_is_symmetric() {
        let mesh = build_structured_mesh(2).unwrap();
        let scalar = build_scalar_space(&mesh);
        let cache = ShapeCache::new();
        for flavor in [BcFlavor::Weak, BcFlavor::Strong] {
            let dofs = build_dof_map(&mesh, flavor);
            let spec = ProblemSpec::new(1.0, 50.0, flavor);
            let sys = assemble(&mesh, &dofs, &scalar, &spec, &cache, |_| Point::zeros()).unwrap();
            assert!(sys.a.symmetry_defect() < 1e-12);
            assert_eq!(sys.n_u(), dofs.n_free());
            assert_eq!(sys.n_p(), scalar.n_free());
        }
    }
}
