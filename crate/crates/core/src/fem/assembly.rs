use alloc::vec::Vec;

use super::space::{FeSpace, LocalBasis, SpaceKind};
use super::QuadRule;
use crate::linalg::CsrMatrix;

/// A physical quadrature point handed to coefficient evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub cell: usize,
    /// Index of the point within the quadrature rule.
    pub q: usize,
    pub bary: [f64; 3],
    pub x: [f64; 2],
}

pub type ScalarCoef<'a> = &'a (dyn Fn(&QuadPoint) -> f64 + Sync);
pub type VectorCoef<'a> = &'a (dyn Fn(&QuadPoint) -> [f64; 2] + Sync);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssemblyError {
    #[error("spaces are defined on different meshes")]
    MeshMismatch,
    #[error("form term {0} has no coefficient evaluator")]
    MissingCoefficient(&'static str),
    #[error("term {term} is not defined for {row:?} x {col:?}")]
    IncompatibleSpaces {
        term: &'static str,
        row: SpaceKind,
        col: SpaceKind,
    },
    #[error("nodal interpolation is not defined for {0:?}")]
    NoNodalInterpolation(SpaceKind),
}

/// Bilinear form terms; trial functions `phi_j` come from the column space,
/// test functions `psi_i` from the row space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// `int w phi_j psi_i` (dot product for vector spaces).
    Mass,
    /// `int c grad phi_j . grad psi_i`.
    Stiffness,
    /// `int (b . grad phi_j) psi_i`.
    Convection,
    /// `int d phi_j psi_i`, used for the skew-symmetrizing divergence term.
    WeightedDivReaction,
    /// `int psi_i div phi_j` for a vector trial space, or
    /// `int psi_i d(phi_j)/dx_component` for a scalar trial space.
    DivCoupling { component: usize },
}

impl Term {
    fn name(self) -> &'static str {
        match self {
            Term::Mass => "mass",
            Term::Stiffness => "stiffness",
            Term::Convection => "convection",
            Term::WeightedDivReaction => "weighted-div-reaction",
            Term::DivCoupling { .. } => "div-coupling",
        }
    }
}

/// A sum of terms together with their coefficient evaluators.
#[derive(Clone, Copy)]
pub struct Form<'a> {
    pub terms: &'a [Term],
    pub mass: Option<ScalarCoef<'a>>,
    pub stiffness: Option<ScalarCoef<'a>>,
    pub convection: Option<VectorCoef<'a>>,
    pub reaction: Option<ScalarCoef<'a>>,
}

impl<'a> Form<'a> {
    pub fn new(terms: &'a [Term]) -> Self {
        Self {
            terms,
            mass: None,
            stiffness: None,
            convection: None,
            reaction: None,
        }
    }

    pub fn mass(mut self, w: ScalarCoef<'a>) -> Self {
        self.mass = Some(w);
        self
    }

    pub fn stiffness(mut self, c: ScalarCoef<'a>) -> Self {
        self.stiffness = Some(c);
        self
    }

    pub fn convection(mut self, b: VectorCoef<'a>) -> Self {
        self.convection = Some(b);
        self
    }

    pub fn reaction(mut self, d: ScalarCoef<'a>) -> Self {
        self.reaction = Some(d);
        self
    }

    fn check(&self, row: SpaceKind, col: SpaceKind) -> Result<(), AssemblyError> {
        for &term in self.terms {
            let missing = match term {
                Term::Mass => self.mass.is_none(),
                Term::Stiffness => self.stiffness.is_none(),
                Term::Convection => self.convection.is_none(),
                Term::WeightedDivReaction => self.reaction.is_none(),
                Term::DivCoupling { .. } => false,
            };
            if missing {
                return Err(AssemblyError::MissingCoefficient(term.name()));
            }
            let ok = match term {
                Term::Mass => row.is_vector() == col.is_vector(),
                Term::Stiffness | Term::Convection | Term::WeightedDivReaction => {
                    !row.is_vector() && !col.is_vector()
                }
                Term::DivCoupling { component } => !row.is_vector() && (col.is_vector() || component < 2),
            };
            if !ok {
                return Err(AssemblyError::IncompatibleSpaces {
                    term: term.name(),
                    row,
                    col,
                });
            }
        }
        Ok(())
    }
}

/// Linear form integrands.
#[derive(Clone, Copy)]
pub enum LinearTerm<'a> {
    /// `int f psi_i` for scalar spaces.
    Scalar(ScalarCoef<'a>),
    /// `int f . psi_i` for vector spaces.
    Vector(VectorCoef<'a>),
}

#[cfg(feature = "parallel")]
pub(crate) fn map_cells<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_cells<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

fn local_matrix(row: &FeSpace, col: &FeSpace, form: &Form<'_>, quad: &QuadRule, t: usize) -> [f64; 64] {
    let mut local = [0.0; 64];
    let mut rb = LocalBasis::default();
    let mut cb = LocalBasis::default();
    let rvec = row.kind().is_vector();
    let cvec = col.kind().is_vector();
    let geo = row.geometry(t);
    let det = geo.det;
    for (q, (bary, w)) in quad.iter().enumerate() {
        row.eval_local(t, bary, &mut rb);
        col.eval_local(t, bary, &mut cb);
        let qp = QuadPoint {
            cell: t,
            q,
            bary,
            x: geo.point(bary),
        };
        let wq = w * det;
        for &term in form.terms {
            match term {
                Term::Mass => {
                    let m = wq * (form.mass.expect("checked"))(&qp);
                    for i in 0..rb.len {
                        for j in 0..cb.len {
                            let v = if rvec && cvec {
                                rb.vector_values[i][0] * cb.vector_values[j][0]
                                    + rb.vector_values[i][1] * cb.vector_values[j][1]
                            } else {
                                rb.values[i] * cb.values[j]
                            };
                            local[i * 8 + j] += m * v;
                        }
                    }
                }
                Term::WeightedDivReaction => {
                    let d = wq * (form.reaction.expect("checked"))(&qp);
                    for i in 0..rb.len {
                        for j in 0..cb.len {
                            local[i * 8 + j] += d * rb.values[i] * cb.values[j];
                        }
                    }
                }
                Term::Stiffness => {
                    let c = wq * (form.stiffness.expect("checked"))(&qp);
                    for i in 0..rb.len {
                        let gi = rb.gradients[i];
                        for j in 0..cb.len {
                            let gj = cb.gradients[j];
                            local[i * 8 + j] += c * (gi[0] * gj[0] + gi[1] * gj[1]);
                        }
                    }
                }
                Term::Convection => {
                    let b = (form.convection.expect("checked"))(&qp);
                    for j in 0..cb.len {
                        let gj = cb.gradients[j];
                        let bg = wq * (b[0] * gj[0] + b[1] * gj[1]);
                        for i in 0..rb.len {
                            local[i * 8 + j] += bg * rb.values[i];
                        }
                    }
                }
                Term::DivCoupling { component } => {
                    for j in 0..cb.len {
                        let d = if cvec {
                            cb.divergences[j]
                        } else {
                            cb.gradients[j][component]
                        };
                        for i in 0..rb.len {
                            local[i * 8 + j] += wq * d * rb.values[i];
                        }
                    }
                }
            }
        }
    }
    local
}

/// Assembles `sum_K int_K form(phi_j, psi_i)` with the given quadrature.
pub fn assemble_bilinear(
    row: &FeSpace,
    col: &FeSpace,
    form: &Form<'_>,
    quad: &QuadRule,
) -> Result<CsrMatrix, AssemblyError> {
    if !row.same_mesh(col) {
        return Err(AssemblyError::MeshMismatch);
    }
    form.check(row.kind(), col.kind())?;
    let nr = row.kind().dofs_per_cell();
    let nc = col.kind().dofs_per_cell();
    let locals = map_cells(row.n_cells(), |t| local_matrix(row, col, form, quad, t));
    let mut trip = Vec::with_capacity(locals.len() * nr * nc);
    for (t, local) in locals.iter().enumerate() {
        let rd = row.cell_dofs(t);
        let cd = col.cell_dofs(t);
        for i in 0..nr {
            for j in 0..nc {
                trip.push((rd[i], cd[j], local[i * 8 + j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(row.n_dofs(), col.n_dofs(), &trip))
}

/// Assembles the load vector `int f psi_i`.
pub fn assemble_linear(
    space: &FeSpace,
    term: LinearTerm<'_>,
    quad: &QuadRule,
) -> Result<Vec<f64>, AssemblyError> {
    let vector_term = matches!(term, LinearTerm::Vector(_));
    if vector_term != space.kind().is_vector() {
        return Err(AssemblyError::IncompatibleSpaces {
            term: "load",
            row: space.kind(),
            col: space.kind(),
        });
    }
    let n = space.kind().dofs_per_cell();
    let locals = map_cells(space.n_cells(), |t| {
        let mut local = [0.0; 8];
        let mut b = LocalBasis::default();
        let geo = space.geometry(t);
        for (q, (bary, w)) in quad.iter().enumerate() {
            space.eval_local(t, bary, &mut b);
            let qp = QuadPoint {
                cell: t,
                q,
                bary,
                x: geo.point(bary),
            };
            let wq = w * geo.det;
            match term {
                LinearTerm::Scalar(f) => {
                    let v = wq * f(&qp);
                    for i in 0..b.len {
                        local[i] += v * b.values[i];
                    }
                }
                LinearTerm::Vector(f) => {
                    let v = f(&qp);
                    for i in 0..b.len {
                        local[i] += wq * (v[0] * b.vector_values[i][0] + v[1] * b.vector_values[i][1]);
                    }
                }
            }
        }
        local
    });
    let mut out = alloc::vec![0.0; space.n_dofs()];
    for (t, local) in locals.iter().enumerate() {
        for (i, &d) in space.cell_dofs(t).iter().enumerate().take(n) {
            out[d] += local[i];
        }
    }
    Ok(out)
}

/// Nodal interpolant at time `t`: vertex values exact, bubbles zero.
pub fn interpolate_nodal(
    space: &FeSpace,
    field: &dyn Fn([f64; 2], f64) -> f64,
    t: f64,
) -> Result<Vec<f64>, AssemblyError> {
    match space.kind() {
        SpaceKind::P1Scalar | SpaceKind::MiniVelocityComponent => {
            let mut out = alloc::vec![0.0; space.n_dofs()];
            for (v, &x) in space.mesh().vertices().iter().enumerate() {
                out[v] = field(x, t);
            }
            Ok(out)
        }
        other => Err(AssemblyError::NoNodalInterpolation(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature_rule;
    use crate::mesh::{build_unit_square_mesh, Diagonal, Mesh};
    use alloc::sync::Arc;

    fn reference_mesh() -> Arc<Mesh> {
        Arc::new(
            Mesh::from_triangles(alloc::vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], alloc::vec![[0, 1, 2]])
                .unwrap(),
        )
    }

    fn unit(_: &QuadPoint) -> f64 {
        1.0
    }

    #[test]
    fn p1_stiffness_reference_triangle() {
        let s = FeSpace::new(SpaceKind::P1Scalar, reference_mesh());
        let q = quadrature_rule(8).unwrap();
        let a = assemble_bilinear(&s, &s, &Form::new(&[Term::Stiffness]).stiffness(&unit), &q).unwrap();
        let want = [1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5];
        for (g, w) in a.to_dense().iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn p1_mass_mapped_triangle() {
        let mesh = Arc::new(
            Mesh::from_triangles(alloc::vec![[0.2, 0.1], [1.3, 0.4], [0.5, 1.7]], alloc::vec![[0, 1, 2]])
                .unwrap(),
        );
        let area = mesh.geometry(0).area();
        let s = FeSpace::new(SpaceKind::P1Scalar, mesh);
        let q = quadrature_rule(8).unwrap();
        let m = assemble_bilinear(&s, &s, &Form::new(&[Term::Mass]).mass(&unit), &q).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m.get(i, j) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_convection_is_zero_matrix() {
        let mesh = Arc::new(build_unit_square_mesh(3, Diagonal::LowerLeftToUpperRight).unwrap());
        let s = FeSpace::new(SpaceKind::MiniVelocityComponent, mesh);
        let q = quadrature_rule(8).unwrap();
        let zero = |_: &QuadPoint| [0.0, 0.0];
        let c = assemble_bilinear(&s, &s, &Form::new(&[Term::Convection]).convection(&zero), &q).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let mesh = Arc::new(build_unit_square_mesh(6, Diagonal::LowerLeftToUpperRight).unwrap());
        let s = FeSpace::new(SpaceKind::P1Scalar, mesh);
        let q = quadrature_rule(8).unwrap();
        let a = assemble_bilinear(&s, &s, &Form::new(&[Term::Stiffness]).stiffness(&unit), &q).unwrap();
        for r in a.mul_vec(&alloc::vec![1.0; s.n_dofs()]) {
            assert!(r.abs() < 1e-12);
        }
        assert!(a.asymmetry() < 1e-13);
    }

    #[test]
    fn assembly_is_deterministic() {
        let mesh = Arc::new(build_unit_square_mesh(5, Diagonal::LowerLeftToUpperRight).unwrap());
        let s = FeSpace::new(SpaceKind::MiniVelocityComponent, mesh);
        let q = quadrature_rule(8).unwrap();
        let w = |p: &QuadPoint| 1.0 + p.x[0] * p.x[1];
        let b = |p: &QuadPoint| [p.x[1], -p.x[0]];
        let form = Form::new(&[Term::Mass, Term::Stiffness, Term::Convection])
            .mass(&w)
            .stiffness(&w)
            .convection(&b);
        let a1 = assemble_bilinear(&s, &s, &form, &q).unwrap();
        let a2 = assemble_bilinear(&s, &s, &form, &q).unwrap();
        assert_eq!(a1.row_ptr(), a2.row_ptr());
        assert_eq!(a1.col_idx(), a2.col_idx());
        assert!(a1.values().iter().zip(a2.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn errors() {
        let m1 = Arc::new(build_unit_square_mesh(2, Diagonal::LowerLeftToUpperRight).unwrap());
        let m2 = Arc::new(build_unit_square_mesh(2, Diagonal::LowerLeftToUpperRight).unwrap());
        let a = FeSpace::new(SpaceKind::P1Scalar, m1.clone());
        let b = FeSpace::new(SpaceKind::P1Scalar, m2);
        let q = quadrature_rule(2).unwrap();
        let f = Form::new(&[Term::Mass]).mass(&unit);
        assert_eq!(assemble_bilinear(&a, &b, &f, &q).unwrap_err(), AssemblyError::MeshMismatch);
        assert_eq!(
            assemble_bilinear(&a, &a, &Form::new(&[Term::Stiffness]), &q).unwrap_err(),
            AssemblyError::MissingCoefficient("stiffness")
        );
        let rt = FeSpace::new(SpaceKind::Rt1, m1);
        assert_eq!(
            interpolate_nodal(&rt, &|_, _| 1.0, 0.0).unwrap_err(),
            AssemblyError::NoNodalInterpolation(SpaceKind::Rt1)
        );
    }

    #[test]
    fn nodal_interpolation_examples() {
        let mesh = Arc::new(build_unit_square_mesh(2, Diagonal::LowerLeftToUpperRight).unwrap());
        let s = FeSpace::new(SpaceKind::P1Scalar, mesh.clone());
        assert_eq!(interpolate_nodal(&s, &|_, _| 1.0, 0.0).unwrap(), alloc::vec![1.0; 9]);
        let x = interpolate_nodal(&s, &|p, _| p[0], 0.0).unwrap();
        for (v, p) in x.iter().zip(mesh.vertices()) {
            assert_eq!(*v, p[0]);
        }
        let mini = FeSpace::new(SpaceKind::MiniVelocityComponent, mesh.clone());
        let c = interpolate_nodal(&mini, &|p, t| p[0] + t, 2.0).unwrap();
        assert!(c[9..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let q = quadrature_rule(8).unwrap();
        let err = |n: usize| {
            let mesh = Arc::new(build_unit_square_mesh(n, Diagonal::LowerLeftToUpperRight).unwrap());
            let s = FeSpace::new(SpaceKind::P1Scalar, mesh);
            let c = interpolate_nodal(&s, &|p, _| p[0] * p[1], 0.0).unwrap();
            let mut acc = 0.0;
            for t in 0..s.n_cells() {
                let geo = s.geometry(t);
                for (bary, w) in q.iter() {
                    let x = geo.point(bary);
                    let (v, _) = s.eval_scalar(&c, t, bary);
                    acc += w * geo.det * (v - x[0] * x[1]).powi(2);
                }
            }
            acc.sqrt()
        };
        let ratio = err(4) / err(8);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }
}
