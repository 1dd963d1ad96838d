//! Sparse symmetric-indefinite solve of the saddle-point system.
//!
//! The block matrix is shifted to `[A + δI, B; Bᵀ, −δI]`, which is
//! quasi-definite and therefore factorizable as `LDLᵀ` under any symmetric
//! ordering. The factorization then preconditions restarted GMRES on the
//! unshifted system.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, supernodal::SupernodalLdltRef, CholeskySymbolicParams, SymbolicCholesky,
    SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};
use thiserror::Error;

use crate::forms::{CsrMatrix, SaddleSystem};

/// Required relative residual of the block system.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// GMRES stops once the relative residual falls below this.
const GMRES_TARGET: f64 = 1e-14;
const GMRES_RESTART: usize = 40;
const GMRES_MAX_ITERS: usize = 400;
/// Relative size of the diagonal shift.
const SHIFT: f64 = 1e-13;
/// Pivots below this fraction of the largest input diagonal count as zero.
const ZERO_PIVOT: f64 = 1e-16;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("empty system ({n_u} vector and {n_p} scalar unknowns)")]
    EmptySystem { n_u: usize, n_p: usize },
    #[error("symbolic analysis failed: {0}")]
    Symbolic(String),
    #[error("factorization breakdown at pivot {index}")]
    Breakdown { index: usize },
    #[error("relative residual {residual:.3e} above tolerance {tolerance:.1e} after {iterations} iterations")]
    ResidualTooLarge { residual: f64, tolerance: f64, iterations: usize },
}

/// Signs of the pivots of an `LDLᵀ` factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl std::fmt::Display for Inertia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(+{}, -{}, 0:{})", self.positive, self.negative, self.zero)
    }
}

/// Solution of the block system.
#[derive(Debug, Clone)]
pub struct SolutionVector {
    pub u_free: Vec<f64>,
    pub p_free: Vec<f64>,
    /// Vector coefficients over all DOFs, zero on constrained ones.
    pub u: Vec<f64>,
    /// Multiplier coefficients over all scalar DOFs.
    pub p: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
    /// Inertia of the shifted block matrix.
    pub inertia: Inertia,
}

/// Symmetric matrix stored as its lower triangle by columns.
#[derive(Debug, Clone)]
pub struct LowerCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl LowerCsc {
    /// Lower triangle of a symmetric CSR matrix plus `shift` on the diagonal.
    pub fn from_symmetric(m: &CsrMatrix, shift: f64) -> Self {
        let mut out = LowerCsc { n: m.nrows, col_ptr: vec![0], row_idx: Vec::new(), values: Vec::new() };
        for r in 0..m.nrows {
            out.push_column(r, m.row(r).filter(|&(c, _)| c >= r), shift, std::iter::empty());
        }
        out
    }

    fn push_column(
        &mut self,
        j: usize,
        upper_row: impl Iterator<Item = (usize, f64)>,
        shift: f64,
        tail: impl Iterator<Item = (usize, f64)>,
    ) {
        let start = self.row_idx.len();
        let mut has_diag = false;
        for (c, v) in upper_row {
            self.row_idx.push(c);
            self.values.push(if c == j { v + shift } else { v });
            has_diag |= c == j;
        }
        if !has_diag {
            self.row_idx.insert(start, j);
            self.values.insert(start, shift);
        }
        for (c, v) in tail {
            self.row_idx.push(c);
            self.values.push(v);
        }
        self.col_ptr.push(self.row_idx.len());
    }
}

/// Numeric `LDLᵀ` factorization with its symbolic structure.
pub struct LdltFactor {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    /// Largest diagonal entry of the factored matrix.
    scale: f64,
}

impl std::fmt::Debug for LdltFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LdltFactor").field("n", &self.symbolic.nrows()).field("nnz", &self.values.len()).finish()
    }
}

impl LdltFactor {
    pub fn new(m: &LowerCsc) -> Result<Self, SolverError> {
        let sym = SymbolicSparseColMatRef::new_checked(m.n, m.n, &m.col_ptr, None, &m.row_idx);
        let mat = SparseColMatRef::new(sym, &m.values);
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let symbolic = factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, params)
            .map_err(|e| SolverError::Symbolic(format!("{e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let par = Par::Seq;
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(par, Default::default()));
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                mat,
                Side::Lower,
                LdltRegularization::default(),
                par,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| match e {
                faer::linalg::cholesky::ldlt::factor::LdltError::ZeroPivot { index } => {
                    SolverError::Breakdown { index }
                }
            })?;
        let scale = (0..m.n)
            .filter_map(|j| (m.col_ptr[j]..m.col_ptr[j + 1]).find(|&k| m.row_idx[k] == j))
            .fold(0.0f64, |acc, k| acc.max(m.values[k].abs()));
        let f = LdltFactor { symbolic, values, scale };
        if let Some(index) = f.pivots().iter().position(|d| !d.is_finite()) {
            return Err(SolverError::Breakdown { index });
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.symbolic.nrows()
    }

    /// Number of stored factor entries.
    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    /// Diagonal of `D` in elimination order.
    pub fn pivots(&self) -> Vec<f64> {
        let SymbolicCholeskyRaw::Supernodal(sym) = self.symbolic.raw() else {
            unreachable!("supernodal factorization forced");
        };
        let l = SupernodalLdltRef::new(sym, &self.values);
        let mut d = Vec::with_capacity(self.n());
        for s in 0..sym.n_supernodes() {
            let block = l.supernode(s).val();
            for j in 0..block.ncols() {
                d.push(block[(j, j)]);
            }
        }
        d
    }

    pub fn inertia(&self) -> Inertia {
        let mut out = Inertia::default();
        for v in self.pivots() {
            if v.abs() <= ZERO_PIVOT * self.scale {
                out.zero += 1;
            } else if v > 0.0 {
                out.positive += 1;
            } else {
                out.negative += 1;
            }
        }
        out
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let par = Par::Seq;
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, par));
        let lu = faer::sparse::linalg::cholesky::LdltRef::new(&self.symbolic, &self.values);
        let n = rhs.len();
        let x = MatMut::from_column_major_slice_mut(rhs, n, 1);
        lu.solve_in_place_with_conj(Conj::No, x, par, MemStack::new(&mut buf));
    }
}

/// Pivot signs of `M + δI` with `δ = relative_shift · max |M_ii|`.
pub fn symmetric_inertia(m: &CsrMatrix, relative_shift: f64) -> Result<Inertia, SolverError> {
    if m.nrows == 0 {
        return Err(SolverError::EmptySystem { n_u: 0, n_p: 0 });
    }
    let diag_max = (0..m.nrows).fold(0.0f64, |acc, r| acc.max(m.get(r, r).abs()));
    Ok(LdltFactor::new(&LowerCsc::from_symmetric(m, relative_shift * diag_max))?.inertia())
}

/// Inertia of the shifted `A` block, as used inside the block factorization.
pub fn a_block_inertia(sys: &SaddleSystem) -> Result<Inertia, SolverError> {
    symmetric_inertia(&sys.a, SHIFT)
}

/// Shifted block matrix in lower-triangular CSC form.
fn shifted_block(sys: &SaddleSystem) -> LowerCsc {
    let n_u = sys.n_u();
    let diag_max = (0..n_u).fold(0.0f64, |m, r| m.max(sys.a.get(r, r).abs()));
    let delta = SHIFT * diag_max.max(f64::MIN_POSITIVE);
    let mut out = LowerCsc { n: n_u + sys.n_p(), col_ptr: vec![0], row_idx: Vec::new(), values: Vec::new() };
    for r in 0..n_u {
        out.push_column(r, sys.a.row(r).filter(|&(c, _)| c >= r), delta, sys.b.row(r).map(|(k, v)| (n_u + k, v)));
    }
    for k in 0..sys.n_p() {
        out.push_column(n_u + k, std::iter::empty(), -delta, std::iter::empty());
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned restarted GMRES; returns `(x, relative residual, iterations)`.
fn gmres<A, P>(apply: A, precond: P, b: &[f64], x0: Vec<f64>) -> (Vec<f64>, f64, usize)
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&mut [f64]),
{
    let bnorm = norm(b);
    let mut x = x0;
    let residual = |x: &[f64]| -> Vec<f64> { apply(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual(&x);
    let mut rel = norm(&r) / bnorm;
    let mut iters = 0;
    while rel > GMRES_TARGET && iters < GMRES_MAX_ITERS {
        let beta = norm(&r);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h = vec![vec![0.0; GMRES_RESTART]; GMRES_RESTART + 1];
        let (mut cs, mut sn) = (vec![0.0; GMRES_RESTART], vec![0.0; GMRES_RESTART]);
        let mut g = vec![0.0; GMRES_RESTART + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..GMRES_RESTART {
            let mut z = v[k].clone();
            precond(&mut z);
            let mut w = apply(&z);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            let hk1 = h[k + 1][k];
            h[k + 1][k] = 0.0;
            iters += 1;
            k_used = k + 1;
            if (g[k + 1] / bnorm).abs() <= GMRES_TARGET || hk1 == 0.0 || iters >= GMRES_MAX_ITERS {
                break;
            }
            v.push(w.iter().map(|t| t / hk1).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut dx = vec![0.0; b.len()];
        for (yi, vi) in y.iter().zip(&v) {
            for (d, t) in dx.iter_mut().zip(vi) {
                *d += yi * t;
            }
        }
        precond(&mut dx);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        r = residual(&x);
        let new_rel = norm(&r) / bnorm;
        if new_rel >= rel && k_used < GMRES_RESTART {
            rel = new_rel;
            break;
        }
        rel = new_rel;
    }
    (x, rel, iters)
}

/// Solves the block system and checks the residual.
pub fn solve_saddle(sys: &SaddleSystem) -> Result<SolutionVector, SolverError> {
    let (n_u, n_p) = (sys.n_u(), sys.n_p());
    if n_u == 0 || n_p == 0 {
        return Err(SolverError::EmptySystem { n_u, n_p });
    }
    let factor = LdltFactor::new(&shifted_block(sys))?;
    let inertia = factor.inertia();
    let n = n_u + n_p;
    let mut b = sys.rhs_u.clone();
    b.resize(n, 0.0);

    let (x, relative_residual, iterations) = if norm(&b) == 0.0 {
        (vec![0.0; n], 0.0, 0)
    } else {
        let apply = |x: &[f64]| {
            let (top, bottom) = sys.apply(&x[..n_u], &x[n_u..]);
            let mut out = top;
            out.extend(bottom);
            out
        };
        gmres(apply, |z: &mut [f64]| factor.solve_in_place(z), &b, vec![0.0; n])
    };
    if !(relative_residual <= RESIDUAL_TOLERANCE) {
        return Err(SolverError::ResidualTooLarge {
            residual: relative_residual,
            tolerance: RESIDUAL_TOLERANCE,
            iterations,
        });
    }
    let (u_free, p_free) = (x[..n_u].to_vec(), x[n_u..].to_vec());
    Ok(SolutionVector {
        u: sys.u_numbering.extend(&u_free),
        p: sys.p_numbering.extend(&p_free),
        u_free,
        p_free,
        relative_residual,
        iterations,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(dense: &[Vec<f64>]) -> CsrMatrix {
        let n = dense.len();
        let mut row_ptr = vec![0];
        let (mut col_idx, mut values) = (Vec::new(), Vec::new());
        for row in dense {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: n, ncols: n, row_ptr, col_idx, values }
    }

    #[test]
    fn inertia_of_small_indefinite_matrix() {
        let m = csr(&[vec![2.0, 1.0, 0.0], vec![1.0, -3.0, 1.0], vec![0.0, 1.0, 4.0]]);
        let i = symmetric_inertia(&m, 0.0).unwrap();
        assert_eq!(i, Inertia { positive: 2, negative: 1, zero: 0 });
    }

    #[test]
    fn factor_solves_spd_system() {
        let m = csr(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let f = LdltFactor::new(&LowerCsc::from_symmetric(&m, 0.0)).unwrap();
        let mut x = vec![5.0, 5.0, 3.0];
        f.solve_in_place(&mut x);
        for (a, b) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gmres_with_exact_preconditioner() {
        let m = csr(&[vec![4.0, 1.0], vec![1.0, -2.0]]);
        let f = LdltFactor::new(&LowerCsc::from_symmetric(&m, 0.0)).unwrap();
        let (x, rel, _) = gmres(|x| m.matvec(x), |z| f.solve_in_place(z), &[5.0, -1.0], vec![0.0; 2]);
        assert!(rel < 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
