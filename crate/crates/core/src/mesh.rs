//! Structured tetrahedral meshes of the unit cube.
//!
//! Every one of the `N³` subcubes is split into six tetrahedra that share the
//! subcube's main diagonal (the Kuhn split). Entities (edges, faces) are stored
//! as sorted global vertex-id tuples, so any quantity derived from them is
//! independent of the cell it is requested from.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Point = Vector3<f64>;

/// Local vertex pairs of the six edges of a tetrahedron.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local vertex triples of the four faces; face `i` is opposite vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("number of subdivisions per axis must be at least 1")]
    ZeroSubdivisions,
    #[error("{kind} id {id} out of range (have {len})")]
    InvalidEntity { kind: &'static str, id: usize, len: usize },
}

/// Kuhn triangulation of `[0,1]³` with full entity connectivity.
///
/// Fields are public for inspection; the constructor is the only place that
/// establishes the invariants checked by [`validate_mesh`].
#[derive(Debug, Clone)]
pub struct StructuredTetMesh {
    pub n_per_axis: usize,
    pub vertices: Vec<Point>,
    /// Vertex ids of each cell, ordered so the signed volume is positive.
    pub cells: Vec<[usize; 4]>,
    /// Sorted vertex pairs, lexicographically ordered.
    pub edges: Vec<[usize; 2]>,
    /// Sorted vertex triples, lexicographically ordered.
    pub faces: Vec<[usize; 3]>,
    /// Global edge ids in [`LOCAL_EDGES`] order.
    pub cell_edges: Vec<[usize; 6]>,
    /// Global face ids in [`LOCAL_FACES`] order.
    pub cell_faces: Vec<[usize; 4]>,
    /// Incident cells of each face (one entry for boundary faces).
    pub face_cells: Vec<Vec<usize>>,
    pub boundary_faces: Vec<bool>,
    pub boundary_edges: Vec<bool>,
    pub boundary_vertices: Vec<bool>,
    pub h_max: f64,
}

/// Orthonormal frame attached to a global entity.
///
/// For edges only `edge_tangent` is meaningful; for faces the triple
/// `(t1, t2, n)` is right-handed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntityFrame {
    pub edge_tangent: Point,
    pub face_normal: Point,
    pub face_tangents: [Point; 2],
}

fn vertex_id(n: usize, i: usize, j: usize, k: usize) -> usize {
    let m = n + 1;
    i + m * (j + m * k)
}

fn signed_volume(p: &[Point; 4]) -> f64 {
    (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
}

fn sorted<const K: usize>(mut a: [usize; K]) -> [usize; K] {
    a.sort_unstable();
    a
}

/// Affine barycentric functions `λ_i(x) = o_i + g_i·x` of a tetrahedron as
/// `(o_i, g_i)`; `None` when degenerate.
pub fn barycentric_functions(p: &[Point; 4]) -> Option<[(f64, Point); 4]> {
    let jac = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let inv = jac.try_inverse()?;
    let mut out = [(0.0, Point::zeros()); 4];
    for i in 1..4 {
        let g: Point = inv.row(i - 1).transpose();
        out[i] = (-g.dot(&p[0]), g);
    }
    out[0] = (
        1.0 - out[1..].iter().map(|b| b.0).sum::<f64>(),
        -out[1..].iter().map(|b| b.1).sum::<Point>(),
    );
    Some(out)
}

/// Builds the Kuhn triangulation with `n` subdivisions per axis.
pub fn build_structured_mesh(n: usize) -> Result<StructuredTetMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    let m = n + 1;
    let step = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push(Point::new(i as f64 * step, j as f64 * step, k as f64 * step));
            }
        }
    }

    // Each axis permutation (a, b, c) gives the monotone lattice path
    // 0 -> e_a -> e_a + e_b -> (1,1,1) through the subcube.
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut offset = [0usize; 3];
                    let mut ids = [0usize; 4];
                    ids[0] = vertex_id(n, i, j, k);
                    for (step_idx, &axis) in perm.iter().enumerate() {
                        offset[axis] = 1;
                        ids[step_idx + 1] = vertex_id(n, i + offset[0], j + offset[1], k + offset[2]);
                    }
                    let pts = ids.map(|v| vertices[v]);
                    if signed_volume(&pts) < 0.0 {
                        ids.swap(2, 3);
                    }
                    cells.push(ids);
                }
            }
        }
    }

    let mut edges: Vec<[usize; 2]> = cells
        .iter()
        .flat_map(|c| LOCAL_EDGES.iter().map(move |e| sorted([c[e[0]], c[e[1]]])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut faces: Vec<[usize; 3]> = cells
        .iter()
        .flat_map(|c| LOCAL_FACES.iter().map(move |f| sorted([c[f[0]], c[f[1]], c[f[2]]])))
        .collect();
    faces.sort_unstable();
    faces.dedup();

    let edge_index: HashMap<[usize; 2], usize> =
        edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let face_index: HashMap<[usize; 3], usize> =
        faces.iter().enumerate().map(|(i, f)| (*f, i)).collect();

    let cell_edges: Vec<[usize; 6]> = cells
        .iter()
        .map(|c| LOCAL_EDGES.map(|e| edge_index[&sorted([c[e[0]], c[e[1]]])]))
        .collect();
    let cell_faces: Vec<[usize; 4]> = cells
        .iter()
        .map(|c| LOCAL_FACES.map(|f| face_index[&sorted([c[f[0]], c[f[1]], c[f[2]]])]))
        .collect();

    let mut face_cells = vec![Vec::with_capacity(2); faces.len()];
    for (ci, cf) in cell_faces.iter().enumerate() {
        for &f in cf {
            face_cells[f].push(ci);
        }
    }

    let on_boundary_plane = |f: &[usize; 3]| {
        (0..3).any(|axis| {
            [0.0, 1.0].iter().any(|&side| {
                f.iter().all(|&v| (vertices[v][axis] - side).abs() < 1e-12)
            })
        })
    };
    let boundary_faces: Vec<bool> = faces.iter().map(on_boundary_plane).collect();
    let mut boundary_edges = vec![false; edges.len()];
    let mut boundary_vertices = vec![false; vertices.len()];
    for (fi, f) in faces.iter().enumerate() {
        if !boundary_faces[fi] {
            continue;
        }
        for &v in f {
            boundary_vertices[v] = true;
        }
        for pair in [[f[0], f[1]], [f[0], f[2]], [f[1], f[2]]] {
            boundary_edges[edge_index[&pair]] = true;
        }
    }

    let mut mesh = StructuredTetMesh {
        n_per_axis: n,
        vertices,
        cells,
        edges,
        faces,
        cell_edges,
        cell_faces,
        face_cells,
        boundary_faces,
        boundary_edges,
        boundary_vertices,
        h_max: 0.0,
    };
    mesh.h_max = (0..mesh.n_cells()).map(|c| mesh.cell_diameter(c)).fold(0.0, f64::max);
    Ok(mesh)
}

impl StructuredTetMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Nominal mesh size `√3 / N`, the value tabulated in convergence tables.
    pub fn h(&self) -> f64 {
        3f64.sqrt() / self.n_per_axis as f64
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 4] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn face_points(&self, face: usize) -> [Point; 3] {
        self.faces[face].map(|v| self.vertices[v])
    }

    pub fn edge_points(&self, edge: usize) -> [Point; 2] {
        self.edges[edge].map(|v| self.vertices[v])
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        signed_volume(&self.cell_points(cell))
    }

    pub fn cell_barycenter(&self, cell: usize) -> Point {
        self.cell_points(cell).iter().sum::<Point>() / 4.0
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let p = self.cell_points(cell);
        LOCAL_EDGES.iter().map(|e| (p[e[1]] - p[e[0]]).norm()).fold(0.0, f64::max)
    }

    pub fn face_diameter(&self, face: usize) -> f64 {
        let p = self.face_points(face);
        [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| (p[b] - p[a]).norm()).fold(0.0, f64::max)
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let p = self.face_points(face);
        0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
    }

    /// Unit normal of a face pointing out of `cell`.
    pub fn outward_normal(&self, face: usize, cell: usize) -> Point {
        let n = self.face_frame_unchecked(face).face_normal;
        let p = self.face_points(face);
        let face_center = (p[0] + p[1] + p[2]) / 3.0;
        if n.dot(&(face_center - self.cell_barycenter(cell))) >= 0.0 {
            n
        } else {
            -n
        }
    }

    pub fn boundary_face_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary_faces.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Writes a vertex table followed by a cell table.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "vertices {}", self.n_vertices())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
        }
        writeln!(w, "cells {}", self.n_cells())?;
        for c in &self.cells {
            writeln!(w, "{} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        Ok(())
    }

    fn face_frame_unchecked(&self, face: usize) -> EntityFrame {
        let p = self.face_points(face);
        let n = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
        let t1 = (p[1] - p[0]).normalize();
        let t2 = n.cross(&t1);
        EntityFrame { edge_tangent: t1, face_normal: n, face_tangents: [t1, t2] }
    }
}

/// Frame of a face: normal from the sorted-vertex orientation, `t1` along
/// the edge joining its two lowest vertex ids, `t2 = n × t1`.
pub fn face_frame(mesh: &StructuredTetMesh, face: usize) -> Result<EntityFrame, MeshError> {
    if face >= mesh.n_faces() {
        return Err(MeshError::InvalidEntity { kind: "face", id: face, len: mesh.n_faces() });
    }
    Ok(mesh.face_frame_unchecked(face))
}

/// Frame of an edge: unit tangent from the lower to the higher vertex id.
pub fn edge_frame(mesh: &StructuredTetMesh, edge: usize) -> Result<EntityFrame, MeshError> {
    if edge >= mesh.n_edges() {
        return Err(MeshError::InvalidEntity { kind: "edge", id: edge, len: mesh.n_edges() });
    }
    let p = mesh.edge_points(edge);
    let t = (p[1] - p[0]).normalize();
    Ok(EntityFrame { edge_tangent: t, face_normal: Point::zeros(), face_tangents: [Point::zeros(); 2] })
}

#[derive(Debug, Clone)]
pub struct MeshCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct MeshDiagnostics {
    pub euler_characteristic: i64,
    pub total_volume: f64,
    pub checks: Vec<MeshCheck>,
}

impl MeshDiagnostics {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &MeshCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for MeshDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail)?;
        }
        write!(f, "euler characteristic {}", self.euler_characteristic)
    }
}

/// Reports every violated mesh invariant. Never fails.
pub fn validate_mesh(mesh: &StructuredTetMesh) -> MeshDiagnostics {
    let mut checks = Vec::new();

    let volumes: Vec<f64> = (0..mesh.n_cells()).map(|c| mesh.cell_volume(c)).collect();
    let bad_volume: Vec<usize> = volumes.iter().enumerate().filter(|(_, &v)| v <= 0.0).map(|(i, _)| i).collect();
    checks.push(MeshCheck {
        name: "positive cell volumes",
        passed: bad_volume.is_empty(),
        detail: if bad_volume.is_empty() {
            format!("{} cells", mesh.n_cells())
        } else {
            format!("non-positive signed volume in cells {:?}", &bad_volume[..bad_volume.len().min(8)])
        },
    });

    let total_volume: f64 = volumes.iter().map(|v| v.abs()).sum();
    checks.push(MeshCheck {
        name: "total volume",
        passed: (total_volume - 1.0).abs() < 1e-12,
        detail: format!("{total_volume:.15}"),
    });

    let mut incidence_errors = 0usize;
    for (f, cells) in mesh.face_cells.iter().enumerate() {
        let expected = if mesh.boundary_faces[f] { 1 } else { 2 };
        if cells.len() != expected {
            incidence_errors += 1;
        }
    }
    checks.push(MeshCheck {
        name: "face incidence",
        passed: incidence_errors == 0,
        detail: format!("{incidence_errors} faces with wrong cell count"),
    });

    let euler = mesh.n_vertices() as i64 - mesh.n_edges() as i64 + mesh.n_faces() as i64
        - mesh.n_cells() as i64;
    checks.push(MeshCheck {
        name: "euler characteristic",
        passed: euler == 1,
        detail: format!("V - E + F - T = {euler}"),
    });

    let diam = (0..mesh.n_cells()).map(|c| mesh.cell_diameter(c)).fold(0.0, f64::max);
    checks.push(MeshCheck {
        name: "mesh size",
        passed: (diam - mesh.h_max).abs() < 1e-12 && (diam - mesh.h()).abs() < 1e-12,
        detail: format!("max diameter {diam:.6}, sqrt(3)/N = {:.6}", mesh.h()),
    });

    let sorted_entities = mesh.edges.windows(2).all(|w| w[0] < w[1])
        && mesh.faces.windows(2).all(|w| w[0] < w[1])
        && mesh.edges.iter().all(|e| e[0] < e[1])
        && mesh.faces.iter().all(|f| f[0] < f[1] && f[1] < f[2]);
    checks.push(MeshCheck {
        name: "sorted entities",
        passed: sorted_entities,
        detail: format!("{} edges, {} faces", mesh.n_edges(), mesh.n_faces()),
    });

    MeshDiagnostics { euler_characteristic: euler, total_volume, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cube_counts() {
        let mesh = build_structured_mesh(1).unwrap();
        assert_eq!(mesh.n_vertices(), 8);
        assert_eq!(mesh.n_cells(), 6);
        assert_eq!(mesh.n_edges(), 19);
        assert_eq!(mesh.n_faces(), 18);
        assert_eq!(mesh.boundary_faces.iter().filter(|&&b| b).count(), 12);
        assert_eq!(validate_mesh(&mesh).euler_characteristic, 1);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert_eq!(build_structured_mesh(0).unwrap_err(), MeshError::ZeroSubdivisions);
    }

    #[test]
    fn tabulated_mesh_size() {
        let mesh = build_structured_mesh(8).unwrap();
        assert_eq!(format!("{:.4}", mesh.h_max), "0.2165");
    }

    #[test]
    fn every_cell_contains_the_subcube_diagonal() {
        let mesh = build_structured_mesh(2).unwrap();
        for c in 0..mesh.n_cells() {
            let p = mesh.cell_points(c);
            let lo = p.iter().fold(Point::repeat(f64::MAX), |a, b| a.inf(b));
            let hi = p.iter().fold(Point::repeat(f64::MIN), |a, b| a.sup(b));
            assert!(p.iter().any(|q| (q - lo).norm() < 1e-14));
            assert!(p.iter().any(|q| (q - hi).norm() < 1e-14));
        }
    }

    #[test]
    fn swapped_cell_is_flagged() {
        let mut mesh = build_structured_mesh(2).unwrap();
        mesh.cells[3].swap(0, 1);
        let diag = validate_mesh(&mesh);
        assert!(!diag.is_ok());
        assert!(diag.failed().any(|c| c.name == "positive cell volumes"));
    }

    #[test]
    fn invalid_entity_ids() {
        let mesh = build_structured_mesh(1).unwrap();
        assert!(face_frame(&mesh, 18).is_err());
        assert!(edge_frame(&mesh, 19).is_err());
    }

    #[test]
    fn frames_on_boundary_plane_and_edges() {
        let mesh = build_structured_mesh(2).unwrap();
        for f in 0..mesh.n_faces() {
            let p = mesh.face_points(f);
            if p.iter().all(|q| q.z.abs() < 1e-14) {
                let fr = face_frame(&mesh, f).unwrap();
                assert!((fr.face_normal.dot(&Point::z()).abs() - 1.0).abs() < 1e-14);
            }
        }
        for e in 0..mesh.n_edges() {
            let [a, b] = mesh.edge_points(e);
            let t = edge_frame(&mesh, e).unwrap().edge_tangent;
            assert!((t - (b - a).normalize()).norm() < 1e-15);
        }
    }

    #[test]
    fn dump_has_both_tables() {
        let mesh = build_structured_mesh(1).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("vertices 8\n"));
        assert!(text.contains("cells 6\n"));
        assert_eq!(text.lines().count(), 1 + 8 + 1 + 6);
    }
}
