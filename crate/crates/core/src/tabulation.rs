//! Per-shape caches of basis tables and local matrices.
//!
//! Cells that are translates of each other with the same global-id ordering
//! of their vertices carry identical local elements, so tables and local
//! matrices are computed once per shape and reused. The structured mesh has
//! six shapes.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::element::{build_local_element, BasisTable, ElementError, LocalGradCurlElement, N_LOCAL};
use crate::mesh::{Point, StructuredTetMesh, LOCAL_FACES};
use crate::quadrature::{push_forward, tet_rule, tri_rule, EntityGeometry};
use crate::space::{p2_basis, N_SCALAR_LOCAL};

/// Vertex offsets relative to the first vertex (rounded) and the rank of each
/// vertex's global id within the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShapeKey {
    offsets: [i64; 9],
    ranks: [u8; 4],
}

pub fn shape_key(mesh: &StructuredTetMesh, cell: usize) -> ShapeKey {
    let p = mesh.cell_points(cell);
    let mut offsets = [0i64; 9];
    for i in 0..3 {
        for k in 0..3 {
            offsets[3 * i + k] = ((p[i + 1][k] - p[0][k]) * 1e9).round() as i64;
        }
    }
    let ids = mesh.cells[cell];
    let ranks = ids.map(|a| ids.iter().filter(|&&b| b < a).count() as u8);
    ShapeKey { offsets, ranks }
}

/// Basis data at the pushed-forward points of a reference rule.
#[derive(Debug, Clone)]
pub struct PointTable {
    /// Points on the representative cell.
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub basis: BasisTable,
    /// Quadratic Lagrange values and gradients (cell tables only).
    pub scalar: Vec<([f64; N_SCALAR_LOCAL], [Point; N_SCALAR_LOCAL])>,
    /// Vertex 0 of the representative cell.
    origin: Point,
}

impl PointTable {
    /// Physical quadrature points on a cell of the same shape.
    pub fn points_on(&self, mesh: &StructuredTetMesh, cell: usize) -> impl Iterator<Item = Point> + '_ {
        let shift = mesh.vertices[mesh.cells[cell][0]] - self.origin;
        self.points.iter().map(move |p| p + shift)
    }
}

/// Volume matrices shared by all cells of one shape.
#[derive(Debug, Clone)]
pub struct CellMatrices {
    /// `(∇∇×φ_i, ∇∇×φ_j)_K`
    pub grad_curl: DMatrix<f64>,
    /// `(∇×φ_i, ∇×φ_j)_K`
    pub curl: DMatrix<f64>,
    /// `(φ_i, φ_j)_K`
    pub mass: DMatrix<f64>,
    /// `(φ_i, ∇q_a)_K`, 28 × 10
    pub coupling: DMatrix<f64>,
}

/// Boundary-face matrices for one shape and local face.
#[derive(Debug, Clone)]
pub struct FaceMatrices {
    /// `−⟨(∇∇×φ_i) n, ∇×φ_j⟩_F − ⟨(∇∇×φ_j) n, ∇×φ_i⟩_F`, outward `n`.
    pub consistency: DMatrix<f64>,
    /// `⟨∇×φ_i, ∇×φ_j⟩_F`
    pub curl_trace: DMatrix<f64>,
}

#[derive(Debug)]
struct Memo<K, V>(Mutex<HashMap<K, Arc<V>>>);

impl<K: Eq + Hash + Clone, V> Memo<K, V> {
    fn new() -> Self {
        Memo(Mutex::new(HashMap::new()))
    }

    fn get_or_try<E>(&self, key: K, make: impl FnOnce() -> Result<V, E>) -> Result<Arc<V>, E> {
        if let Some(v) = self.0.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(make()?);
        Ok(self.0.lock().unwrap().entry(key).or_insert(v).clone())
    }
}

/// Shape-keyed caches for one mesh.
#[derive(Debug)]
pub struct ShapeCache {
    elements: Memo<ShapeKey, (usize, LocalGradCurlElement)>,
    cell_tables: Memo<(ShapeKey, usize), PointTable>,
    face_tables: Memo<(ShapeKey, usize, usize), PointTable>,
    cell_matrices: Memo<(ShapeKey, usize, usize), CellMatrices>,
    face_matrices: Memo<(ShapeKey, usize, usize), FaceMatrices>,
}

impl Default for ShapeCache {
    fn default() -> Self {
        Self::new()
    }
}

impl ShapeCache {
    pub fn new() -> Self {
        ShapeCache {
            elements: Memo::new(),
            cell_tables: Memo::new(),
            face_tables: Memo::new(),
            cell_matrices: Memo::new(),
            face_matrices: Memo::new(),
        }
    }

    pub fn n_shapes(&self) -> usize {
        self.elements.0.lock().unwrap().len()
    }

    /// Element of the representative cell with the same shape as `cell`,
    /// together with that representative's id.
    pub fn element(
        &self,
        mesh: &StructuredTetMesh,
        cell: usize,
    ) -> Result<Arc<(usize, LocalGradCurlElement)>, ElementError> {
        self.elements.get_or_try(shape_key(mesh, cell), || Ok((cell, build_local_element(mesh, cell)?)))
    }

    /// Tabulation at the degree-`degree` tetrahedral rule.
    pub fn cell_table(
        &self,
        mesh: &StructuredTetMesh,
        cell: usize,
        degree: usize,
    ) -> Result<Arc<PointTable>, ElementError> {
        let key = shape_key(mesh, cell);
        self.cell_tables.get_or_try((key, degree), || {
            let rep = self.element(mesh, cell)?;
            let (rep_cell, el) = (rep.0, &rep.1);
            let verts = mesh.cell_points(rep_cell);
            let rule = push_forward(&tet_rule(degree), &EntityGeometry::Cell(verts))
                .map_err(|_| ElementError::DegenerateCell { cell: rep_cell })?;
            let grads = el.barycentric_gradients();
            let scalar = rule.points.iter().map(|x| p2_basis(&el.barycentric_at(x), &grads)).collect();
            Ok(PointTable {
                basis: el.eval_basis(&rule.points),
                points: rule.points,
                weights: rule.weights,
                scalar,
                origin: verts[0],
            })
        })
    }

    /// Tabulation at the degree-`degree` triangle rule on local face `local_face`.
    pub fn face_table(
        &self,
        mesh: &StructuredTetMesh,
        cell: usize,
        local_face: usize,
        degree: usize,
    ) -> Result<Arc<PointTable>, ElementError> {
        let key = shape_key(mesh, cell);
        self.face_tables.get_or_try((key, local_face, degree), || {
            let rep = self.element(mesh, cell)?;
            let (rep_cell, el) = (rep.0, &rep.1);
            let verts = mesh.cell_points(rep_cell);
            let fv = LOCAL_FACES[local_face].map(|i| verts[i]);
            let rule = push_forward(&tri_rule(degree), &EntityGeometry::Face(fv))
                .map_err(|_| ElementError::DegenerateCell { cell: rep_cell })?;
            Ok(PointTable {
                basis: el.eval_basis(&rule.points),
                points: rule.points,
                weights: rule.weights,
                scalar: Vec::new(),
                origin: verts[0],
            })
        })
    }

    /// Volume matrices: stiffness parts at `stiffness_degree`, mass and
    /// coupling at `mass_degree`.
    pub fn cell_matrices(
        &self,
        mesh: &StructuredTetMesh,
        cell: usize,
        stiffness_degree: usize,
        mass_degree: usize,
    ) -> Result<Arc<CellMatrices>, ElementError> {
        let key = shape_key(mesh, cell);
        self.cell_matrices.get_or_try((key, stiffness_degree, mass_degree), || {
            let st = self.cell_table(mesh, cell, stiffness_degree)?;
            let mt = self.cell_table(mesh, cell, mass_degree)?;
            let mut grad_curl = DMatrix::zeros(N_LOCAL, N_LOCAL);
            let mut curl = DMatrix::zeros(N_LOCAL, N_LOCAL);
            for (q, &w) in st.weights.iter().enumerate() {
                let s = st.basis.point(q);
                for i in 0..N_LOCAL {
                    for j in 0..=i {
                        grad_curl[(i, j)] += w * s[i].grad_curl.dot(&s[j].grad_curl);
                        curl[(i, j)] += w * s[i].curl.dot(&s[j].curl);
                    }
                }
            }
            let mut mass = DMatrix::zeros(N_LOCAL, N_LOCAL);
            let mut coupling = DMatrix::zeros(N_LOCAL, N_SCALAR_LOCAL);
            for (q, &w) in mt.weights.iter().enumerate() {
                let s = mt.basis.point(q);
                let (_, dq) = &mt.scalar[q];
                for i in 0..N_LOCAL {
                    for j in 0..=i {
                        mass[(i, j)] += w * s[i].value.dot(&s[j].value);
                    }
                    for (a, g) in dq.iter().enumerate() {
                        coupling[(i, a)] += w * s[i].value.dot(g);
                    }
                }
            }
            for m in [&mut grad_curl, &mut curl, &mut mass] {
                m.fill_upper_triangle_with_lower_triangle();
            }
            Ok(CellMatrices { grad_curl, curl, mass, coupling })
        })
    }

    /// Boundary-face matrices on local face `local_face` of `cell`.
    pub fn face_matrices(
        &self,
        mesh: &StructuredTetMesh,
        cell: usize,
        local_face: usize,
        degree: usize,
    ) -> Result<Arc<FaceMatrices>, ElementError> {
        let key = shape_key(mesh, cell);
        self.face_matrices.get_or_try((key, local_face, degree), || {
            let t = self.face_table(mesh, cell, local_face, degree)?;
            let face = mesh.cell_faces[cell][local_face];
            let n = mesh.outward_normal(face, cell);
            let mut consistency = DMatrix::zeros(N_LOCAL, N_LOCAL);
            let mut curl_trace = DMatrix::zeros(N_LOCAL, N_LOCAL);
            for (q, &w) in t.weights.iter().enumerate() {
                let s = t.basis.point(q);
                let dn: Vec<Point> = s.iter().map(|x| x.grad_curl * n).collect();
                for i in 0..N_LOCAL {
                    for j in 0..N_LOCAL {
                        consistency[(i, j)] -= w * (dn[i].dot(&s[j].curl) + dn[j].dot(&s[i].curl));
                        curl_trace[(i, j)] += w * s[i].curl.dot(&s[j].curl);
                    }
                }
            }
            Ok(FaceMatrices { consistency, curl_trace })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn six_shapes_on_structured_mesh() {
        let mesh = build_structured_mesh(3).unwrap();
        let cache = ShapeCache::new();
        for c in 0..mesh.n_cells() {
            cache.element(&mesh, c).unwrap();
        }
        assert_eq!(cache.n_shapes(), 6);
    }

    #[test]
    fn cached_table_matches_direct_evaluation() {
        let mesh = build_structured_mesh(3).unwrap();
        let cache = ShapeCache::new();
        for c in [0, 17, 93, mesh.n_cells() - 1] {
            let table = cache.cell_table(&mesh, c, 6).unwrap();
            let pts: Vec<Point> = table.points_on(&mesh, c).collect();
            let direct = build_local_element(&mesh, c).unwrap().eval_basis(&pts);
            for (a, b) in table.basis.samples.iter().zip(&direct.samples) {
                assert!((a.value - b.value).norm() < 1e-9);
                assert!((a.curl - b.curl).norm() < 1e-8);
                assert!((a.grad_curl - b.grad_curl).norm() < 1e-6);
            }
        }
    }
}
