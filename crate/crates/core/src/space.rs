//! Global degree-of-freedom numbering for the vector space and the scalar
//! multiplier space.

use crate::element::N_LOCAL;
use crate::mesh::{Point, StructuredTetMesh, LOCAL_EDGES};

/// How the boundary condition `∇×u = 0` is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcFlavor {
    /// Nitsche terms; boundary curl-trace DOFs stay free.
    Weak,
    /// Boundary curl-trace DOFs constrained to zero.
    Strong,
}

impl std::fmt::Display for BcFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BcFlavor::Weak => "weak",
            BcFlavor::Strong => "strong",
        })
    }
}

impl std::str::FromStr for BcFlavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weak" => Ok(BcFlavor::Weak),
            "strong" => Ok(BcFlavor::Strong),
            other => Err(format!("unknown boundary treatment '{other}' (expected weak or strong)")),
        }
    }
}

/// Numbering shared by constrained spaces: global ids, a constraint mask and
/// the compressed numbering of the free ids.
#[derive(Debug, Clone)]
pub struct FreeNumbering {
    pub constrained: Vec<bool>,
    /// Global id of each free DOF, increasing.
    pub free_dofs: Vec<usize>,
    /// Position in `free_dofs`, or `None` for constrained DOFs.
    pub free_index: Vec<Option<usize>>,
}

impl FreeNumbering {
    fn new(constrained: Vec<bool>) -> Self {
        let mut free_dofs = Vec::new();
        let free_index = constrained
            .iter()
            .enumerate()
            .map(|(g, &c)| {
                if c {
                    None
                } else {
                    free_dofs.push(g);
                    Some(free_dofs.len() - 1)
                }
            })
            .collect();
        FreeNumbering { constrained, free_dofs, free_index }
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Zero-extends a vector of free values to all DOFs.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.constrained.len()];
        for (&g, &v) in self.free_dofs.iter().zip(free) {
            out[g] = v;
        }
        out
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| full[g]).collect()
    }
}

/// Global numbering of the vector grad-curl space.
///
/// Edge `e` owns DOFs `2e, 2e+1`; face `f` owns `2E + 4f + {0, 1}`
/// (tangential) and `2E + 4f + {2, 3}` (curl trace).
#[derive(Debug, Clone)]
pub struct GlobalDofMap {
    pub flavor: BcFlavor,
    pub n_dofs: usize,
    pub cell_dofs: Vec<[usize; N_LOCAL]>,
    pub numbering: FreeNumbering,
    n_edges: usize,
}

impl GlobalDofMap {
    pub fn edge_dofs(&self, edge: usize) -> [usize; 2] {
        [2 * edge, 2 * edge + 1]
    }

    pub fn face_tangential_dofs(&self, face: usize) -> [usize; 2] {
        let b = 2 * self.n_edges + 4 * face;
        [b, b + 1]
    }

    pub fn face_curl_dofs(&self, face: usize) -> [usize; 2] {
        let b = 2 * self.n_edges + 4 * face;
        [b + 2, b + 3]
    }

    pub fn n_free(&self) -> usize {
        self.numbering.n_free()
    }

    pub fn n_constrained(&self) -> usize {
        self.numbering.constrained.iter().filter(|&&c| c).count()
    }

    /// Local coefficient vector of `cell` from a global vector.
    pub fn gather(&self, cell: usize, global: &[f64]) -> [f64; N_LOCAL] {
        self.cell_dofs[cell].map(|g| global[g])
    }
}

pub fn build_dof_map(mesh: &StructuredTetMesh, flavor: BcFlavor) -> GlobalDofMap {
    let n_edges = mesh.n_edges();
    let n_dofs = 2 * n_edges + 4 * mesh.n_faces();
    let cell_dofs = (0..mesh.n_cells())
        .map(|c| {
            let mut d = [0usize; N_LOCAL];
            for (le, &e) in mesh.cell_edges[c].iter().enumerate() {
                d[2 * le] = 2 * e;
                d[2 * le + 1] = 2 * e + 1;
            }
            for (lf, &f) in mesh.cell_faces[c].iter().enumerate() {
                let b = 2 * n_edges + 4 * f;
                d[12 + 2 * lf] = b;
                d[12 + 2 * lf + 1] = b + 1;
                d[20 + 2 * lf] = b + 2;
                d[20 + 2 * lf + 1] = b + 3;
            }
            d
        })
        .collect();

    let mut constrained = vec![false; n_dofs];
    for (e, &b) in mesh.boundary_edges.iter().enumerate() {
        if b {
            constrained[2 * e] = true;
            constrained[2 * e + 1] = true;
        }
    }
    for (f, &b) in mesh.boundary_faces.iter().enumerate() {
        if b {
            let base = 2 * n_edges + 4 * f;
            constrained[base] = true;
            constrained[base + 1] = true;
            if flavor == BcFlavor::Strong {
                constrained[base + 2] = true;
                constrained[base + 3] = true;
            }
        }
    }

    GlobalDofMap { flavor, n_dofs, cell_dofs, numbering: FreeNumbering::new(constrained), n_edges }
}

/// Number of local scalar basis functions (quadratic Lagrange).
pub const N_SCALAR_LOCAL: usize = 10;

/// Continuous piecewise-quadratic scalar space with zero boundary values.
///
/// Vertex `v` owns DOF `v`, edge `e` owns DOF `V + e` (its midpoint).
#[derive(Debug, Clone)]
pub struct ScalarLagrangeSpace {
    pub n_dofs: usize,
    /// Local order: four vertices, then the six edges in `LOCAL_EDGES` order.
    pub cell_dofs: Vec<[usize; N_SCALAR_LOCAL]>,
    pub numbering: FreeNumbering,
    /// Interpolation node of each DOF.
    pub nodes: Vec<Point>,
}

/// Quadratic Lagrange basis values and gradients from barycentric data.
pub fn p2_basis(lambda: &[f64; 4], grads: &[Point; 4]) -> ([f64; N_SCALAR_LOCAL], [Point; N_SCALAR_LOCAL]) {
    let mut val = [0.0; N_SCALAR_LOCAL];
    let mut grad = [Point::zeros(); N_SCALAR_LOCAL];
    for i in 0..4 {
        val[i] = lambda[i] * (2.0 * lambda[i] - 1.0);
        grad[i] = (4.0 * lambda[i] - 1.0) * grads[i];
    }
    for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
        val[4 + k] = 4.0 * lambda[*a] * lambda[*b];
        grad[4 + k] = 4.0 * (lambda[*a] * grads[*b] + lambda[*b] * grads[*a]);
    }
    (val, grad)
}

impl ScalarLagrangeSpace {
    pub fn n_free(&self) -> usize {
        self.numbering.n_free()
    }

    /// Nodal interpolant of `f` over all DOFs.
    pub fn interpolate<F: Fn(&Point) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    pub fn gather(&self, cell: usize, global: &[f64]) -> [f64; N_SCALAR_LOCAL] {
        self.cell_dofs[cell].map(|g| global[g])
    }
}

pub fn build_scalar_space(mesh: &StructuredTetMesh) -> ScalarLagrangeSpace {
    let nv = mesh.n_vertices();
    let n_dofs = nv + mesh.n_edges();
    let cell_dofs = (0..mesh.n_cells())
        .map(|c| {
            let mut d = [0usize; N_SCALAR_LOCAL];
            d[..4].copy_from_slice(&mesh.cells[c]);
            for (k, &e) in mesh.cell_edges[c].iter().enumerate() {
                d[4 + k] = nv + e;
            }
            d
        })
        .collect();
    let constrained = mesh.boundary_vertices.iter().chain(&mesh.boundary_edges).copied().collect();
    let nodes = mesh
        .vertices
        .iter()
        .copied()
        .chain(mesh.edges.iter().map(|e| 0.5 * (mesh.vertices[e[0]] + mesh.vertices[e[1]])))
        .collect();
    ScalarLagrangeSpace { n_dofs, cell_dofs, numbering: FreeNumbering::new(constrained), nodes }
}
