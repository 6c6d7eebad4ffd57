//! Triangulations of the unit square with edge topology.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("number of subdivisions must be at least 1")]
    ZeroSubdivisions,
    #[error("triangle {0} has non-positive signed area")]
    InvertedTriangle(usize),
    #[error("triangle {triangle} references vertex {vertex} out of range")]
    VertexOutOfRange { triangle: usize, vertex: usize },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
}

/// Orientation of the cell diagonals of a structured mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Every cell is split from its lower-left to its upper-right corner.
    #[default]
    LowerLeftToUpperRight,
}

/// An undirected edge stored with `vertices[0] < vertices[1]`.
///
/// The global orientation of the edge runs from the lower to the higher
/// vertex index; its unit normal is that tangent rotated clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }
}

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub vertices: [[f64; 2]; 3],
    /// `2 * area`, positive for counterclockwise triangles.
    pub det: f64,
    /// Constant physical gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = vertices;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        // grad lambda_k = rot(x_{k+2} - x_{k+1}) / det
        let mut grad_bary = [[0.0; 2]; 3];
        for (k, g) in grad_bary.iter_mut().enumerate() {
            let p = vertices[(k + 1) % 3];
            let q = vertices[(k + 2) % 3];
            *g = [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
        }
        Self {
            vertices,
            det,
            grad_bary,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.point([1.0 / 3.0; 3])
    }

    pub fn diameter(&self) -> f64 {
        (0..3)
            .map(|k| dist(self.vertices[k], self.vertices[(k + 1) % 3]))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    math::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))
}

/// Conforming triangulation with vertex, triangle and edge tables.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `triangle_edges[t][k]` is the edge opposite local vertex `k`.
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<usize>,
    h: f64,
}

impl Mesh {
    /// Builds a mesh from raw tables, validating orientation and manifoldness.
    pub fn from_triangles(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::VertexOutOfRange {
                    triangle: t,
                    vertex: v,
                });
            }
            let geo = TriangleGeometry::new(tri.map(|v| vertices[v]));
            if geo.det <= 0.0 {
                return Err(MeshError::InvertedTriangle(t));
            }
        }

        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 1);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let idx = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: [None, None],
                    });
                    edges.len() - 1
                });
                let edge = &mut edges[idx];
                if edge.triangles[0].is_none() {
                    edge.triangles[0] = Some(t);
                } else if edge.triangles[1].is_none() {
                    edge.triangles[1] = Some(t);
                } else {
                    return Err(MeshError::NonManifoldEdge(key.0, key.1));
                }
                *slot = idx;
            }
            triangle_edges.push(local);
        }
        let boundary_edges = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_boundary())
            .map(|(i, _)| i)
            .collect();

        let h = triangles
            .iter()
            .map(|tri| TriangleGeometry::new(tri.map(|v| vertices[v])).diameter())
            .fold(0.0, f64::max);

        Ok(Self {
            vertices,
            triangles,
            edges,
            triangle_edges,
            boundary_edges,
            h,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    /// Maximum triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn geometry(&self, t: usize) -> TriangleGeometry {
        TriangleGeometry::new(self.triangles[t].map(|v| self.vertices[v]))
    }

    /// Unit normal of edge `e` in its global orientation.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices.map(|v| self.vertices[v]);
        let len = dist(a, b);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices.map(|v| self.vertices[v]);
        dist(a, b)
    }

    /// `+1` if the global normal of the edge opposite local vertex `k` of
    /// triangle `t` points out of `t`, `-1` otherwise.
    pub fn edge_sign(&self, t: usize, k: usize) -> f64 {
        let e = self.triangle_edges[t][k];
        let n = self.edge_normal(e);
        let opposite = self.vertices[self.triangles[t][k]];
        let on_edge = self.vertices[self.edges[e].vertices[0]];
        let d = [on_edge[0] - opposite[0], on_edge[1] - opposite[1]];
        if d[0] * n[0] + d[1] * n[1] > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Sign that turns the global normal of a boundary edge into the outward one.
    pub fn boundary_outward_sign(&self, e: usize) -> f64 {
        let edge = &self.edges[e];
        let t = edge.triangles[0].expect("edge has at least one triangle");
        let k = self.triangle_edges[t]
            .iter()
            .position(|&x| x == e)
            .expect("edge belongs to its triangle");
        self.edge_sign(t, k)
    }
}

/// Structured triangulation of `[0,1]^2` with `n` cells per side.
///
/// Vertex `(i, j)` has index `j*(n+1) + i`; each cell contributes two
/// counterclockwise triangles in row-major order.
pub fn build_unit_square_mesh(n: usize, diagonal: Diagonal) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    let np = n + 1;
    let nf = n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * np + i;
            let v10 = v00 + 1;
            let v01 = v00 + np;
            let v11 = v01 + 1;
            match diagonal {
                Diagonal::LowerLeftToUpperRight => {
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                }
            }
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Vertices lying on a boundary edge, in increasing index order.
pub fn classify_boundary_vertices(mesh: &Mesh) -> Vec<usize> {
    let mut flag = alloc::vec![false; mesh.n_vertices()];
    for &e in mesh.boundary_edges() {
        for v in mesh.edges()[e].vertices {
            flag[v] = true;
        }
    }
    flag.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect()
}
