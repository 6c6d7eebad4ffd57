//! Finite element spaces, reference bases, quadrature and assembly.

mod assembly;
mod basis;
mod quadrature;
mod space;

pub use assembly::{
    assemble_bilinear, assemble_linear, interpolate_nodal, AssemblyError, Form, LinearTerm,
    QuadPoint, ScalarCoef, Term, VectorCoef,
};
pub(crate) use assembly::map_cells;
pub use basis::{evaluate_basis, BasisValues, RtElementBasis};
pub use quadrature::{gauss_legendre, quadrature_rule, QuadRule, QuadratureError};
pub use space::{FeSpace, LocalBasis, SpaceKind};

/// Quadrature degree used for system assembly and error integration.
pub const DEFAULT_QUAD_DEGREE: usize = 8;
