//! L2 projection of the velocity onto divergence-free Raviart–Thomas fields.
//!
//! The projection `w` of `u` solves the mixed problem
//!
//! ```text
//! (w, v) + (lambda, div v) = (u, v)    for all v in RT with zero trace
//! (div w, q)               = 0         for all q in DG
//! ```
//!
//! with the normal trace of `w` imposed strongly. The multiplier is only
//! determined up to a constant, which is fixed by a zero-mean side
//! condition. The matrix does not change between time steps, so it is
//! factored once.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::fem::{assemble_bilinear, assemble_linear, FeSpace, Form, LinearTerm, QuadPoint, QuadRule, SpaceKind, Term};
use crate::linalg::{apply_dirichlet, CsrMatrix, Factorization, LinearSystem, MeanConstraint, SolveError, Solver};
use crate::math;
use crate::mesh::Mesh;

/// Absolute tolerance on the net boundary flux of prescribed trace data.
pub const FLUX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Divergence-free with zero normal trace.
    #[default]
    ZeroNormalTrace,
    /// Divergence-free with the normal trace of given boundary data.
    PrescribedNormalTrace,
    /// No projection: the density is transported by the raw velocity.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RtOrder {
    /// Lowest order with a piecewise constant multiplier.
    Zero,
    /// Order one with a discontinuous linear multiplier.
    #[default]
    One,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("boundary data has net flux {net_flux:e}, a divergence-free field needs zero")]
    IncompatibleBoundaryData { net_flux: f64 },
    #[error("prescribed normal trace mode needs boundary data")]
    MissingBoundaryData,
    #[error("velocity lives on a different mesh than the projector")]
    MeshMismatch,
    #[error("mixed projection system: {0}")]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone)]
enum Field {
    Rt(Vec<f64>),
    Mini([Vec<f64>; 2]),
}

/// The transport field of the density step.
#[derive(Debug, Clone)]
pub struct ProjectedVelocity {
    pub mode: ProjectionMode,
    /// Time level of the velocity that was projected.
    pub source_time_index: usize,
    space: Arc<FeSpace>,
    field: Field,
}

impl ProjectedVelocity {
    /// Wraps a mini-element velocity without projecting it.
    pub fn identity(mini: Arc<FeSpace>, u: [Vec<f64>; 2], source_time_index: usize) -> Self {
        Self {
            mode: ProjectionMode::Identity,
            source_time_index,
            space: mini,
            field: Field::Mini(u),
        }
    }

    /// Raviart–Thomas coefficients, absent in identity mode.
    pub fn rt_coeffs(&self) -> Option<&[f64]> {
        match &self.field {
            Field::Rt(c) => Some(c),
            Field::Mini(_) => None,
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Value at a point of cell `t`.
    #[inline]
    pub fn eval(&self, t: usize, bary: [f64; 3]) -> [f64; 2] {
        self.eval_with_div(t, bary).0
    }

    #[inline]
    pub fn eval_with_div(&self, t: usize, bary: [f64; 3]) -> ([f64; 2], f64) {
        match &self.field {
            Field::Rt(c) => self.space.eval_vector(c, t, bary),
            Field::Mini([ux, uy]) => {
                let (a, ga) = self.space.eval_scalar(ux, t, bary);
                let (b, gb) = self.space.eval_scalar(uy, t, bary);
                ([a, b], ga[0] + gb[1])
            }
        }
    }
}

/// Factored mixed system of one mesh and projection mode.
#[derive(Debug)]
pub struct DivFreeProjector {
    mode: ProjectionMode,
    rt: Arc<FeSpace>,
    quad: QuadRule,
    /// Augmented matrix `[[M, B^T, 0], [B, 0, m], [0, m^T, 0]]`.
    matrix: CsrMatrix,
    trace_dofs: Vec<usize>,
    factor: Option<Factorization>,
}

impl DivFreeProjector {
    pub fn new(
        mesh: Arc<Mesh>,
        mode: ProjectionMode,
        order: RtOrder,
        quad: QuadRule,
    ) -> Result<Self, ProjectionError> {
        let (rk, dk) = match order {
            RtOrder::One => (SpaceKind::Rt1, SpaceKind::DgP1),
            RtOrder::Zero => (SpaceKind::Rt0, SpaceKind::DgP0),
        };
        let rt = Arc::new(FeSpace::new(rk, mesh.clone()));
        let dg = FeSpace::new(dk, mesh);
        let one = |_: &QuadPoint| 1.0;
        let mass = assemble_bilinear(&rt, &rt, &Form::new(&[Term::Mass]).mass(&one), &quad)
            .expect("RT mass form is well defined");
        let div = assemble_bilinear(&dg, &rt, &Form::new(&[Term::DivCoupling { component: 0 }]), &quad)
            .expect("divergence form is well defined");
        let nr = rt.n_dofs();
        let nd = dg.n_dofs();
        let block = CsrMatrix::from_blocks(nr + nd, nr + nd, &[(0, 0, &mass), (0, nr, &div.transpose()), (nr, 0, &div)]);
        let weights = assemble_linear(&dg, LinearTerm::Scalar(&one), &quad).expect("scalar load");
        let system = LinearSystem::new(block, alloc::vec![0.0; nr + nd]).with_mean_constraint(MeanConstraint {
            dofs: (nr..nr + nd).collect(),
            weights,
        });
        let matrix = system.augmented().matrix;
        let mut trace_dofs = rt.boundary_dofs();
        trace_dofs.sort_unstable();
        let mut this = Self {
            mode,
            rt,
            quad,
            matrix,
            trace_dofs,
            factor: None,
        };
        if mode != ProjectionMode::Identity {
            let reduced = apply_dirichlet(
                &LinearSystem::new(this.matrix.clone(), alloc::vec![0.0; this.matrix.nrows()])
                    .with_dirichlet(this.trace_dofs.iter().map(|&d| (d, 0.0)).collect()),
            );
            this.factor = Some(Solver::default().factorize(reduced.matrix)?);
        }
        Ok(this)
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn rt_space(&self) -> &Arc<FeSpace> {
        &self.rt
    }

    /// Trace DOF values for the current mode.
    fn trace_values(
        &self,
        boundary: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
    ) -> Result<Vec<f64>, ProjectionError> {
        let mesh = self.rt.mesh();
        let rt1 = self.rt.kind() == SpaceKind::Rt1;
        match self.mode {
            ProjectionMode::PrescribedNormalTrace => {
                let data = boundary.ok_or(ProjectionError::MissingBoundaryData)?;
                let mut values = Vec::with_capacity(self.trace_dofs.len());
                let mut net = 0.0;
                for &e in mesh.boundary_edges() {
                    let m = self.rt.edge_moments(e, data);
                    let len = mesh.edge_length(e);
                    let sign = mesh.boundary_outward_sign(e);
                    if rt1 {
                        net += sign * len * (m[0] + m[1]);
                    } else {
                        net += sign * len * m[0];
                    }
                    values.push((e, m));
                }
                if math::abs(net) > FLUX_TOL {
                    return Err(ProjectionError::IncompatibleBoundaryData { net_flux: net });
                }
                // trace_dofs is sorted by DOF, which follows the edge order.
                values.sort_unstable_by_key(|v| v.0);
                Ok(values
                    .into_iter()
                    .flat_map(|(_, m)| if rt1 { m.to_vec() } else { alloc::vec![m[0]] })
                    .collect())
            }
            _ => Ok(alloc::vec![0.0; self.trace_dofs.len()]),
        }
    }

    /// Projects a field given at quadrature points. In identity mode this is
    /// the plain L2 projection onto the Raviart–Thomas space.
    pub fn project_field(
        &self,
        field: &(dyn Fn(&QuadPoint) -> [f64; 2] + Sync),
        boundary: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
        source_time_index: usize,
    ) -> Result<ProjectedVelocity, ProjectionError> {
        let load = assemble_linear(&self.rt, LinearTerm::Vector(field), &self.quad).expect("vector load");
        let factor = match &self.factor {
            Some(f) => f,
            None => {
                // Identity mode on a generic field: plain L2 projection onto RT.
                let one = |_: &QuadPoint| 1.0;
                let mass = assemble_bilinear(&self.rt, &self.rt, &Form::new(&[Term::Mass]).mass(&one), &self.quad)
                    .expect("RT mass form is well defined");
                let c = crate::linalg::solve(&LinearSystem::new(mass, load))?;
                return Ok(ProjectedVelocity {
                    mode: self.mode,
                    source_time_index,
                    space: self.rt.clone(),
                    field: Field::Rt(c),
                });
            }
        };
        let trace = self.trace_values(boundary)?;
        let n = self.matrix.nrows();
        let mut lift = alloc::vec![0.0; n];
        for (&d, &g) in self.trace_dofs.iter().zip(&trace) {
            lift[d] = g;
        }
        let k_lift = self.matrix.mul_vec(&lift);
        let mut rhs = alloc::vec![0.0; n];
        rhs[..load.len()].copy_from_slice(&load);
        for i in 0..n {
            rhs[i] -= k_lift[i];
        }
        for (&d, &g) in self.trace_dofs.iter().zip(&trace) {
            rhs[d] = g;
        }
        let mut x = factor.solve(&rhs)?;
        x.truncate(self.rt.n_dofs());
        Ok(ProjectedVelocity {
            mode: self.mode,
            source_time_index,
            space: self.rt.clone(),
            field: Field::Rt(x),
        })
    }

    /// Projects a mini-element velocity `(ux, uy)` on `mini`.
    pub fn project_mini(
        &self,
        mini: &Arc<FeSpace>,
        u: [&[f64]; 2],
        boundary: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
        source_time_index: usize,
    ) -> Result<ProjectedVelocity, ProjectionError> {
        if !mini.same_mesh(&self.rt) {
            return Err(ProjectionError::MeshMismatch);
        }
        if self.mode == ProjectionMode::Identity {
            return Ok(ProjectedVelocity::identity(
                mini.clone(),
                [u[0].to_vec(), u[1].to_vec()],
                source_time_index,
            ));
        }
        let field = |p: &QuadPoint| {
            [
                mini.eval_scalar(u[0], p.cell, p.bary).0,
                mini.eval_scalar(u[1], p.cell, p.bary).0,
            ]
        };
        self.project_field(&field, boundary, source_time_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature_rule;
    use crate::linalg::dense;
    use crate::mesh::{build_unit_square_mesh, Diagonal};

    fn setup(n: usize, mode: ProjectionMode) -> DivFreeProjector {
        let mesh = Arc::new(build_unit_square_mesh(n, Diagonal::LowerLeftToUpperRight).unwrap());
        DivFreeProjector::new(mesh, mode, RtOrder::One, quadrature_rule(8).unwrap()).unwrap()
    }

    fn l2_diff(p: &ProjectedVelocity, f: &dyn Fn(&QuadPoint) -> [f64; 2]) -> f64 {
        let q = quadrature_rule(8).unwrap();
        let s = p.space();
        let mut acc = 0.0;
        for t in 0..s.n_cells() {
            let geo = s.geometry(t);
            for (k, (bary, w)) in q.iter().enumerate() {
                let v = p.eval(t, bary);
                let e = f(&QuadPoint { cell: t, q: k, bary, x: geo.point(bary) });
                acc += w * geo.det * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
            }
        }
        acc.sqrt()
    }

    #[test]
    fn zero_input_gives_zero() {
        let pr = setup(4, ProjectionMode::ZeroNormalTrace);
        let w = pr.project_field(&|_| [0.0, 0.0], None, 0).unwrap();
        assert!(w.rt_coeffs().unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn idempotent_and_divergence_free() {
        let pr = setup(4, ProjectionMode::ZeroNormalTrace);
        let u = |p: &QuadPoint| [math::sin(3.0 * p.x[1]) + p.x[0], p.x[0] * p.x[1]];
        let w = pr.project_field(&u, None, 0).unwrap();
        let again = pr.project_field(&|p: &QuadPoint| w.eval(p.cell, p.bary), None, 0).unwrap();
        for (a, b) in w.rt_coeffs().unwrap().iter().zip(again.rt_coeffs().unwrap()) {
            assert!((a - b).abs() < 1e-10);
        }
        let q = quadrature_rule(8).unwrap();
        for t in 0..w.space().n_cells() {
            for (bary, _) in q.iter() {
                assert!(w.eval_with_div(t, bary).1.abs() <= 1e-9);
            }
        }
        for &d in &pr.trace_dofs {
            assert_eq!(w.rt_coeffs().unwrap()[d], 0.0);
        }
    }

    #[test]
    fn constant_field_matches_dense_oracle() {
        let pr = setup(1, ProjectionMode::ZeroNormalTrace);
        let w = pr.project_field(&|_| [1.0, 0.0], None, 0).unwrap();
        // Dense oracle: same basis, independent assembly and elimination.
        let rt = pr.rt_space().clone();
        let dg = FeSpace::new(SpaceKind::DgP1, rt.mesh().clone());
        let q = quadrature_rule(8).unwrap();
        let (nr, nd) = (rt.n_dofs(), dg.n_dofs());
        let n = nr + nd + 1;
        let mut a = alloc::vec![0.0; n * n];
        let mut b = alloc::vec![0.0; n];
        let mut rb = crate::fem::LocalBasis::default();
        let mut db = crate::fem::LocalBasis::default();
        for t in 0..rt.n_cells() {
            let geo = rt.geometry(t);
            for (bary, wq) in q.iter() {
                rt.eval_local(t, bary, &mut rb);
                dg.eval_local(t, bary, &mut db);
                let jw = wq * geo.det;
                for (i, &di) in rt.cell_dofs(t).iter().enumerate() {
                    b[di] += jw * rb.vector_values[i][0];
                    for (j, &dj) in rt.cell_dofs(t).iter().enumerate() {
                        let v = rb.vector_values[i];
                        let u = rb.vector_values[j];
                        a[di * n + dj] += jw * (v[0] * u[0] + v[1] * u[1]);
                    }
                    for (k, &dk) in dg.cell_dofs(t).iter().enumerate() {
                        let c = jw * db.values[k] * rb.divergences[i];
                        a[di * n + nr + dk] += c;
                        a[(nr + dk) * n + di] += c;
                    }
                }
                for (k, &dk) in dg.cell_dofs(t).iter().enumerate() {
                    a[(nr + dk) * n + n - 1] += jw * db.values[k];
                    a[(n - 1) * n + nr + dk] += jw * db.values[k];
                }
            }
        }
        for &d in &rt.boundary_dofs() {
            for j in 0..n {
                a[d * n + j] = 0.0;
                a[j * n + d] = 0.0;
            }
            a[d * n + d] = 1.0;
            b[d] = 0.0;
        }
        dense::lu_solve(&a, n, &mut b).unwrap();
        let got = w.rt_coeffs().unwrap();
        for i in 0..nr {
            assert!((got[i] - b[i]).abs() < 1e-10, "dof {i}: {} vs {}", got[i], b[i]);
        }
        assert!(l2_diff(&w, &|_| [1.0, 0.0]) > 0.1);
    }

    #[test]
    fn skew_symmetry_and_contraction() {
        let pr = setup(6, ProjectionMode::ZeroNormalTrace);
        let u = |p: &QuadPoint| [math::cos(2.0 * p.x[0] + p.x[1]), 1.0 + p.x[0] * p.x[0]];
        let w = pr.project_field(&u, None, 0).unwrap();
        let mesh = pr.rt_space().mesh().clone();
        let p1 = FeSpace::new(SpaceKind::P1Scalar, mesh);
        let s: Vec<f64> = (0..p1.n_dofs()).map(|i| math::sin(1.7 * i as f64)).collect();
        let q = quadrature_rule(8).unwrap();
        let (mut skew, mut h1, mut nu, mut nw) = (0.0, 0.0, 0.0, 0.0);
        for t in 0..p1.n_cells() {
            let geo = p1.geometry(t);
            for (k, (bary, wq)) in q.iter().enumerate() {
                let jw = wq * geo.det;
                let (v, g) = p1.eval_scalar(&s, t, bary);
                let ww = w.eval(t, bary);
                skew += jw * (g[0] * ww[0] + g[1] * ww[1]) * v;
                h1 += jw * (v * v + g[0] * g[0] + g[1] * g[1]);
                let uu = u(&QuadPoint { cell: t, q: k, bary, x: geo.point(bary) });
                nu += jw * (uu[0] * uu[0] + uu[1] * uu[1]);
                nw += jw * (ww[0] * ww[0] + ww[1] * ww[1]);
            }
        }
        assert!(skew.abs() <= 1e-9 * h1, "skew {skew}");
        assert!(nw.sqrt() <= nu.sqrt() + 1e-9);
    }

    #[test]
    fn prescribed_trace_checks_compatibility() {
        let pr = setup(3, ProjectionMode::PrescribedNormalTrace);
        let bad = |x: [f64; 2]| [x[0], 0.0];
        assert!(matches!(
            pr.project_field(&|_| [0.0, 0.0], Some(&bad), 0),
            Err(ProjectionError::IncompatibleBoundaryData { .. })
        ));
        assert_eq!(
            pr.project_field(&|_| [0.0, 0.0], None, 0).unwrap_err(),
            ProjectionError::MissingBoundaryData
        );
        // A divergence-free field that is not tangential reproduces itself.
        let good = |x: [f64; 2]| [x[0] + 2.0 * x[1], 1.0 - x[1]];
        let w = pr.project_field(&|p| good(p.x), Some(&good), 0).unwrap();
        assert!(l2_diff(&w, &|p| good(p.x)) < 1e-10);
    }
}
