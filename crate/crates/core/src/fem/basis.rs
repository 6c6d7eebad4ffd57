use alloc::vec::Vec;

use super::gauss_legendre;
use super::space::SpaceKind;
use crate::linalg::dense;
use crate::mesh::{dist, TriangleGeometry};

/// Basis values at one point of the reference triangle.
///
/// Lagrange kinds fill `values`/`gradients`; Raviart–Thomas kinds fill
/// `vector_values`/`divergences`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    pub vector_values: Vec<[f64; 2]>,
    pub divergences: Vec<f64>,
}

/// Evaluates the local basis of `kind` on the reference triangle at `bary`.
///
/// Raviart–Thomas edges are oriented from the lower to the higher local
/// vertex index.
pub fn evaluate_basis(kind: SpaceKind, bary: [f64; 3]) -> BasisValues {
    let geo = TriangleGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let mut out = BasisValues::default();
    match kind {
        SpaceKind::P1Scalar | SpaceKind::DgP1 => {
            out.values.extend_from_slice(&bary);
            out.gradients.extend_from_slice(&geo.grad_bary);
        }
        SpaceKind::MiniVelocityComponent => {
            out.values.extend_from_slice(&bary);
            out.gradients.extend_from_slice(&geo.grad_bary);
            let (b, gb) = bubble(bary, &geo.grad_bary);
            out.values.push(b);
            out.gradients.push(gb);
        }
        SpaceKind::DgP0 => {
            out.values.push(1.0);
            out.gradients.push([0.0, 0.0]);
        }
        SpaceKind::Rt0 | SpaceKind::Rt1 => {
            let order = if kind == SpaceKind::Rt1 { 1 } else { 0 };
            let rt = RtElementBasis::new(&geo, order, [false; 3]);
            let x = geo.point(bary);
            let mut vals = [[0.0; 2]; 8];
            let mut divs = [0.0; 8];
            rt.eval(x, &mut vals, &mut divs);
            out.vector_values.extend_from_slice(&vals[..rt.len()]);
            out.divergences.extend_from_slice(&divs[..rt.len()]);
        }
    }
    out
}

/// Cubic bubble `27 l0 l1 l2` and its gradient.
#[inline]
pub(crate) fn bubble(l: [f64; 3], gl: &[[f64; 2]; 3]) -> (f64, [f64; 2]) {
    let v = 27.0 * l[0] * l[1] * l[2];
    let c = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
    let g = [
        c[0] * gl[0][0] + c[1] * gl[1][0] + c[2] * gl[2][0],
        c[0] * gl[0][1] + c[1] * gl[1][1] + c[2] * gl[2][1],
    ];
    (v, g)
}

/// Nodal Raviart–Thomas basis of one physical triangle.
///
/// Built by inverting the matrix of degrees of freedom applied to a monomial
/// prebasis in scaled local coordinates, so no Piola map is involved and the
/// global edge orientation is folded into the functions directly.
///
/// Degrees of freedom, in local order:
/// * order 1: for each local edge `k` (opposite vertex `k`) the mean of
///   `w.n` against the edge hat of its lower and then its higher global
///   vertex, followed by the cell means of `w_x` and `w_y`;
/// * order 0: the mean of `w.n` on each local edge.
#[derive(Debug, Clone)]
pub struct RtElementBasis {
    order: u8,
    center: [f64; 2],
    scale: f64,
    /// `coeffs[k][j]`: weight of prebasis function `k` in basis function `j`.
    coeffs: [[f64; 8]; 8],
}

impl RtElementBasis {
    /// `flip[k]` is true when the global orientation of local edge `k` runs
    /// from local vertex `(k+2)%3` to `(k+1)%3`.
    pub fn new(geo: &TriangleGeometry, order: u8, flip: [bool; 3]) -> Self {
        let n = if order == 0 { 3 } else { 8 };
        let mut rt = Self {
            order,
            center: geo.centroid(),
            scale: geo.diameter(),
            coeffs: [[0.0; 8]; 8],
        };
        let mut dofs = alloc::vec![0.0; n * n];
        let mut vals = [[0.0; 2]; 8];
        let (gx, gw) = gauss_legendre(3);
        for k in 0..3 {
            let (a, b) = if flip[k] {
                ((k + 2) % 3, (k + 1) % 3)
            } else {
                ((k + 1) % 3, (k + 2) % 3)
            };
            let xa = geo.vertices[a];
            let xb = geo.vertices[b];
            let len = dist(xa, xb);
            let normal = [(xb[1] - xa[1]) / len, -(xb[0] - xa[0]) / len];
            for (&s, &w) in gx.iter().zip(&gw) {
                let x = [xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])];
                let np = rt.prebasis(x, &mut vals, None);
                for (p, v) in vals.iter().enumerate().take(np) {
                    let vn = v[0] * normal[0] + v[1] * normal[1];
                    if order == 0 {
                        dofs[k * n + p] += w * vn;
                    } else {
                        dofs[(2 * k) * n + p] += w * vn * (1.0 - s);
                        dofs[(2 * k + 1) * n + p] += w * vn * s;
                    }
                }
            }
        }
        if order == 1 {
            let rule = super::quadrature_rule(4).expect("degree 4 is supported");
            for (bary, w) in rule.iter() {
                let x = geo.point(bary);
                rt.prebasis(x, &mut vals, None);
                // Reference weights sum to 1/2, so 2*w averages over the cell.
                for (p, v) in vals.iter().enumerate() {
                    dofs[6 * n + p] += 2.0 * w * v[0];
                    dofs[7 * n + p] += 2.0 * w * v[1];
                }
            }
        }
        let inv = dense::invert(&dofs, n).expect("Raviart-Thomas degrees of freedom are unisolvent");
        for k in 0..n {
            for j in 0..n {
                rt.coeffs[k][j] = inv[k * n + j];
            }
        }
        rt
    }

    pub fn len(&self) -> usize {
        if self.order == 0 {
            3
        } else {
            8
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn prebasis(&self, x: [f64; 2], vals: &mut [[f64; 2]; 8], divs: Option<&mut [f64; 8]>) -> usize {
        let xi = (x[0] - self.center[0]) / self.scale;
        let eta = (x[1] - self.center[1]) / self.scale;
        let s = 1.0 / self.scale;
        if self.order == 0 {
            vals[0] = [1.0, 0.0];
            vals[1] = [0.0, 1.0];
            vals[2] = [xi, eta];
            if let Some(d) = divs {
                d[0] = 0.0;
                d[1] = 0.0;
                d[2] = 2.0 * s;
            }
            3
        } else {
            vals[0] = [1.0, 0.0];
            vals[1] = [xi, 0.0];
            vals[2] = [eta, 0.0];
            vals[3] = [0.0, 1.0];
            vals[4] = [0.0, xi];
            vals[5] = [0.0, eta];
            vals[6] = [xi * xi, xi * eta];
            vals[7] = [xi * eta, eta * eta];
            if let Some(d) = divs {
                *d = [0.0, s, 0.0, 0.0, 0.0, s, 3.0 * xi * s, 3.0 * eta * s];
            }
            8
        }
    }

    /// Values and divergences of all local basis functions at physical `x`.
    pub fn eval(&self, x: [f64; 2], vals: &mut [[f64; 2]; 8], divs: &mut [f64; 8]) {
        let mut pv = [[0.0; 2]; 8];
        let mut pd = [0.0; 8];
        let n = self.prebasis(x, &mut pv, Some(&mut pd));
        for j in 0..n {
            let mut v = [0.0; 2];
            let mut d = 0.0;
            for k in 0..n {
                let c = self.coeffs[k][j];
                v[0] += c * pv[k][0];
                v[1] += c * pv[k][1];
                d += c * pd[k];
            }
            vals[j] = v;
            divs[j] = d;
        }
    }
}
