use alloc::sync::Arc;
use alloc::vec::Vec;

use super::basis::{bubble, RtElementBasis};
use super::{gauss_legendre, quadrature_rule};
use crate::mesh::{Mesh, TriangleGeometry};

/// Kind of finite element space on a triangulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Continuous piecewise linears, one DOF per vertex.
    P1Scalar,
    /// One component of the mini velocity: P1 plus one cubic bubble per
    /// triangle. Vertex DOFs come first, bubble `t` is DOF `V + t`.
    MiniVelocityComponent,
    /// Order-one Raviart–Thomas: two DOFs per edge then two per triangle.
    Rt1,
    /// Discontinuous piecewise linears, DOF `3t + k` is the barycentric
    /// coordinate `k` of triangle `t`.
    DgP1,
    /// Lowest-order Raviart–Thomas, one flux DOF per edge.
    Rt0,
    /// Piecewise constants.
    DgP0,
}

impl SpaceKind {
    pub fn dofs_per_cell(self) -> usize {
        match self {
            SpaceKind::P1Scalar | SpaceKind::DgP1 | SpaceKind::Rt0 => 3,
            SpaceKind::MiniVelocityComponent => 4,
            SpaceKind::Rt1 => 8,
            SpaceKind::DgP0 => 1,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::Rt0 | SpaceKind::Rt1)
    }
}

/// Basis values of one cell at one point, in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis {
    pub len: usize,
    pub values: [f64; 8],
    pub gradients: [[f64; 2]; 8],
    pub vector_values: [[f64; 2]; 8],
    pub divergences: [f64; 8],
}

impl Default for LocalBasis {
    fn default() -> Self {
        Self {
            len: 0,
            values: [0.0; 8],
            gradients: [[0.0; 2]; 8],
            vector_values: [[0.0; 2]; 8],
            divergences: [0.0; 8],
        }
    }
}

/// Degree-of-freedom map of one space on a shared mesh.
#[derive(Debug, Clone)]
pub struct FeSpace {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
    cell_dofs: Vec<usize>,
    n_dofs: usize,
    geometry: Vec<TriangleGeometry>,
    rt: Vec<RtElementBasis>,
}

impl FeSpace {
    pub fn new(kind: SpaceKind, mesh: Arc<Mesh>) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let nt = mesh.n_triangles();
        let stride = kind.dofs_per_cell();
        let mut cell_dofs = Vec::with_capacity(nt * stride);
        let geometry: Vec<_> = (0..nt).map(|t| mesh.geometry(t)).collect();
        let mut rt = Vec::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            match kind {
                SpaceKind::P1Scalar => cell_dofs.extend_from_slice(tri),
                SpaceKind::MiniVelocityComponent => {
                    cell_dofs.extend_from_slice(tri);
                    cell_dofs.push(nv + t);
                }
                SpaceKind::DgP1 => cell_dofs.extend((0..3).map(|k| 3 * t + k)),
                SpaceKind::DgP0 => cell_dofs.push(t),
                SpaceKind::Rt0 | SpaceKind::Rt1 => {
                    let edges = mesh.triangle_edges()[t];
                    let flip = core::array::from_fn(|k| tri[(k + 1) % 3] > tri[(k + 2) % 3]);
                    if kind == SpaceKind::Rt1 {
                        for e in edges {
                            cell_dofs.push(2 * e);
                            cell_dofs.push(2 * e + 1);
                        }
                        cell_dofs.push(2 * ne + 2 * t);
                        cell_dofs.push(2 * ne + 2 * t + 1);
                        rt.push(RtElementBasis::new(&geometry[t], 1, flip));
                    } else {
                        cell_dofs.extend_from_slice(&edges);
                        rt.push(RtElementBasis::new(&geometry[t], 0, flip));
                    }
                }
            }
        }
        let n_dofs = match kind {
            SpaceKind::P1Scalar => nv,
            SpaceKind::MiniVelocityComponent => nv + nt,
            SpaceKind::Rt1 => 2 * ne + 2 * nt,
            SpaceKind::DgP1 => 3 * nt,
            SpaceKind::Rt0 => ne,
            SpaceKind::DgP0 => nt,
        };
        Self {
            kind,
            mesh,
            cell_dofs,
            n_dofs,
            geometry,
            rt,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_cells(&self) -> usize {
        self.geometry.len()
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let s = self.kind.dofs_per_cell();
        &self.cell_dofs[t * s..(t + 1) * s]
    }

    pub fn geometry(&self, t: usize) -> &TriangleGeometry {
        &self.geometry[t]
    }

    pub fn rt_basis(&self, t: usize) -> Option<&RtElementBasis> {
        self.rt.get(t)
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Fills `out` with the local basis of cell `t` at barycentric `bary`.
    #[inline]
    pub fn eval_local(&self, t: usize, bary: [f64; 3], out: &mut LocalBasis) {
        let geo = &self.geometry[t];
        match self.kind {
            SpaceKind::P1Scalar | SpaceKind::DgP1 => {
                out.len = 3;
                out.values[..3].copy_from_slice(&bary);
                out.gradients[..3].copy_from_slice(&geo.grad_bary);
            }
            SpaceKind::MiniVelocityComponent => {
                out.len = 4;
                out.values[..3].copy_from_slice(&bary);
                out.gradients[..3].copy_from_slice(&geo.grad_bary);
                let (b, gb) = bubble(bary, &geo.grad_bary);
                out.values[3] = b;
                out.gradients[3] = gb;
            }
            SpaceKind::DgP0 => {
                out.len = 1;
                out.values[0] = 1.0;
                out.gradients[0] = [0.0, 0.0];
            }
            SpaceKind::Rt0 | SpaceKind::Rt1 => {
                let rt = &self.rt[t];
                out.len = rt.len();
                rt.eval(geo.point(bary), &mut out.vector_values, &mut out.divergences);
            }
        }
    }

    /// Value and gradient of a scalar field with coefficients `coeffs`.
    #[inline]
    pub fn eval_scalar(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> (f64, [f64; 2]) {
        let mut b = LocalBasis::default();
        self.eval_local(t, bary, &mut b);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (j, &d) in self.cell_dofs(t).iter().enumerate() {
            let c = coeffs[d];
            v += c * b.values[j];
            g[0] += c * b.gradients[j][0];
            g[1] += c * b.gradients[j][1];
        }
        (v, g)
    }

    /// Value and divergence of a Raviart–Thomas field.
    #[inline]
    pub fn eval_vector(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> ([f64; 2], f64) {
        let mut b = LocalBasis::default();
        self.eval_local(t, bary, &mut b);
        let mut v = [0.0; 2];
        let mut d = 0.0;
        for (j, &dof) in self.cell_dofs(t).iter().enumerate() {
            let c = coeffs[dof];
            v[0] += c * b.vector_values[j][0];
            v[1] += c * b.vector_values[j][1];
            d += c * b.divergences[j];
        }
        (v, d)
    }

    /// DOFs attached to boundary entities: vertex DOFs for Lagrange kinds,
    /// edge DOFs for Raviart–Thomas kinds, nothing for discontinuous kinds.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        match self.kind {
            SpaceKind::P1Scalar | SpaceKind::MiniVelocityComponent => {
                crate::mesh::classify_boundary_vertices(&self.mesh)
            }
            SpaceKind::Rt1 => {
                let mut out: Vec<usize> = self
                    .mesh
                    .boundary_edges()
                    .iter()
                    .flat_map(|&e| [2 * e, 2 * e + 1])
                    .collect();
                out.sort_unstable();
                out
            }
            SpaceKind::Rt0 => self.mesh.boundary_edges().to_vec(),
            SpaceKind::DgP1 | SpaceKind::DgP0 => Vec::new(),
        }
    }

    /// Normal-trace DOFs of edge `e` for a field given pointwise.
    pub fn edge_moments(&self, e: usize, field: &dyn Fn([f64; 2]) -> [f64; 2]) -> [f64; 2] {
        let edge = self.mesh.edges()[e];
        let xa = self.mesh.vertices()[edge.vertices[0]];
        let xb = self.mesh.vertices()[edge.vertices[1]];
        let n = self.mesh.edge_normal(e);
        let (gx, gw) = gauss_legendre(6);
        let mut m = [0.0; 2];
        for (&s, &w) in gx.iter().zip(&gw) {
            let x = [xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])];
            let u = field(x);
            let un = u[0] * n[0] + u[1] * n[1];
            match self.kind {
                SpaceKind::Rt1 => {
                    m[0] += w * un * (1.0 - s);
                    m[1] += w * un * s;
                }
                _ => m[0] += w * un,
            }
        }
        m
    }

    /// Canonical Raviart–Thomas interpolant of a pointwise vector field.
    ///
    /// # Panics
    /// If the space is not a Raviart–Thomas kind.
    pub fn interpolate_rt(&self, field: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        assert!(self.kind.is_vector(), "interpolate_rt needs a Raviart-Thomas space");
        let mut out = alloc::vec![0.0; self.n_dofs];
        for e in 0..self.mesh.n_edges() {
            let m = self.edge_moments(e, field);
            if self.kind == SpaceKind::Rt1 {
                out[2 * e] = m[0];
                out[2 * e + 1] = m[1];
            } else {
                out[e] = m[0];
            }
        }
        if self.kind == SpaceKind::Rt1 {
            let rule = quadrature_rule(10).expect("degree 10 is supported");
            let ne = self.mesh.n_edges();
            for t in 0..self.n_cells() {
                let geo = &self.geometry[t];
                let mut acc = [0.0; 2];
                for (bary, w) in rule.iter() {
                    let u = field(geo.point(bary));
                    acc[0] += 2.0 * w * u[0];
                    acc[1] += 2.0 * w * u[1];
                }
                out[2 * ne + 2 * t] = acc[0];
                out[2 * ne + 2 * t + 1] = acc[1];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_unit_square_mesh, Diagonal};

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(build_unit_square_mesh(n, Diagonal::LowerLeftToUpperRight).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = mesh(3);
        let (v, e, t) = (m.n_vertices(), m.n_edges(), m.n_triangles());
        let count = |k| FeSpace::new(k, m.clone()).n_dofs();
        assert_eq!(count(SpaceKind::P1Scalar), v);
        assert_eq!(count(SpaceKind::MiniVelocityComponent), v + t);
        assert_eq!(count(SpaceKind::Rt1), 2 * e + 2 * t);
        assert_eq!(count(SpaceKind::DgP1), 3 * t);
        assert_eq!(count(SpaceKind::Rt0), e);
        assert_eq!(count(SpaceKind::DgP0), t);
    }

    #[test]
    fn cell_dofs_in_range_and_dg_unshared() {
        let m = mesh(4);
        for kind in [
            SpaceKind::P1Scalar,
            SpaceKind::MiniVelocityComponent,
            SpaceKind::Rt1,
            SpaceKind::DgP1,
        ] {
            let s = FeSpace::new(kind, m.clone());
            let mut seen = alloc::vec![0usize; s.n_dofs()];
            for t in 0..s.n_cells() {
                for &d in s.cell_dofs(t) {
                    assert!(d < s.n_dofs());
                    seen[d] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c > 0));
            if kind == SpaceKind::DgP1 {
                assert!(seen.iter().all(|&c| c == 1));
            }
        }
    }

    #[test]
    fn rt1_normal_continuity() {
        // For random coefficients the normal component must agree across each
        // interior edge at the midpoint and at the two Gauss points.
        let m = mesh(4);
        let s = FeSpace::new(SpaceKind::Rt1, m.clone());
        let coeffs: Vec<f64> = (0..s.n_dofs()).map(|i| ((i * 7919) % 113) as f64 / 37.0 - 1.4).collect();
        let g = 0.5 / 3f64.sqrt();
        for (e, edge) in m.edges().iter().enumerate() {
            let [Some(t0), Some(t1)] = edge.triangles else { continue };
            let n = m.edge_normal(e);
            for s_param in [0.5, 0.5 - g, 0.5 + g] {
                let xa = m.vertices()[edge.vertices[0]];
                let xb = m.vertices()[edge.vertices[1]];
                let x = [xa[0] + s_param * (xb[0] - xa[0]), xa[1] + s_param * (xb[1] - xa[1])];
                let vals: Vec<f64> = [t0, t1]
                    .iter()
                    .map(|&t| {
                        let bary = barycentric(s.geometry(t), x);
                        let (v, _) = s.eval_vector(&coeffs, t, bary);
                        v[0] * n[0] + v[1] * n[1]
                    })
                    .collect();
                assert!((vals[0] - vals[1]).abs() < 1e-10, "edge {e}: {vals:?}");
            }
        }
    }

    pub(crate) fn barycentric(geo: &TriangleGeometry, x: [f64; 2]) -> [f64; 3] {
        let a = geo.vertices[0];
        let l1 = geo.grad_bary[1][0] * (x[0] - a[0]) + geo.grad_bary[1][1] * (x[1] - a[1]);
        let l2 = geo.grad_bary[2][0] * (x[0] - a[0]) + geo.grad_bary[2][1] * (x[1] - a[1]);
        [1.0 - l1 - l2, l1, l2]
    }

    #[test]
    fn rt1_divergence_matches_finite_differences() {
        // w = (x, y) lies in RT1, so its interpolant reproduces div w = 2.
        let m = mesh(1);
        let s = FeSpace::new(SpaceKind::Rt1, m.clone());
        let c = s.interpolate_rt(&|x| x);
        let fd = 1e-6;
        let points = [[0.3, 0.1], [0.6, 0.2], [0.5, 0.45], [0.2, 0.7], [0.35, 0.55]];
        for x in points {
            let t = (0..s.n_cells())
                .find(|&t| barycentric(s.geometry(t), x).iter().all(|&l| l > 0.0))
                .unwrap();
            let at = |p: [f64; 2]| s.eval_vector(&c, t, barycentric(s.geometry(t), p)).0;
            let dx = (at([x[0] + fd, x[1]])[0] - at([x[0] - fd, x[1]])[0]) / (2.0 * fd);
            let dy = (at([x[0], x[1] + fd])[1] - at([x[0], x[1] - fd])[1]) / (2.0 * fd);
            assert!((dx + dy - 2.0).abs() < 1e-6);
            let (v, div) = s.eval_vector(&c, t, barycentric(s.geometry(t), x));
            assert!((div - 2.0).abs() < 1e-12);
            assert!((v[0] - x[0]).abs() < 1e-13 && (v[1] - x[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn rt_basis_duality() {
        // Applying the DOF functionals to each basis function gives the identity.
        let m = mesh(2);
        for kind in [SpaceKind::Rt0, SpaceKind::Rt1] {
            let s = FeSpace::new(kind, m.clone());
            for t in [0, 3, 5] {
                for j in 0..kind.dofs_per_cell() {
                    let mut coeffs = alloc::vec![0.0; s.n_dofs()];
                    coeffs[s.cell_dofs(t)[j]] = 1.0;
                    let geo = *s.geometry(t);
                    let field = |x: [f64; 2]| s.eval_vector(&coeffs, t, barycentric(&geo, x)).0;
                    let restricted = s.interpolate_rt_cell(t, &field);
                    for (i, v) in restricted.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((v - want).abs() < 1e-12, "{kind:?} t={t} i={i} j={j}: {v}");
                    }
                }
            }
        }
    }

    impl FeSpace {
        fn interpolate_rt_cell(&self, t: usize, field: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
            let mut out = Vec::new();
            for e in self.mesh.triangle_edges()[t] {
                let m = self.edge_moments(e, field);
                out.push(m[0]);
                if self.kind == SpaceKind::Rt1 {
                    out.push(m[1]);
                }
            }
            if self.kind == SpaceKind::Rt1 {
                let rule = quadrature_rule(10).unwrap();
                let geo = &self.geometry[t];
                let mut acc = [0.0; 2];
                for (bary, w) in rule.iter() {
                    let u = field(geo.point(bary));
                    acc[0] += 2.0 * w * u[0];
                    acc[1] += 2.0 * w * u[1];
                }
                out.extend_from_slice(&acc);
            }
            out
        }
    }
}
