//! Dense reference implementations shared by the integration tests.
//!
//! Everything here is written against the mesh tables only: barycentric
//! coordinates, the bubble, the Raviart–Thomas basis, quadrature on the
//! triangle and Gaussian elimination are all rebuilt from scratch.

#![allow(dead_code)]

pub mod step;

use ncvd_core::Mesh;

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, a: vec![0.0; n * m] }
    }

    pub fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.m + j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.m).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// Identity row `i` with value `g`.
    pub fn pin(&mut self, rhs: &mut [f64], i: usize, g: f64) {
        for j in 0..self.m {
            *self.at(i, j) = 0.0;
        }
        *self.at(i, i) = 1.0;
        rhs[i] = g;
    }
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Dense, mut b: Vec<f64>) -> Vec<f64> {
    let n = a.n;
    assert_eq!(n, a.m);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a.get(i, k).abs().total_cmp(&a.get(j, k).abs()))
            .unwrap();
        assert!(a.get(p, k).abs() > 1e-300, "singular at column {k}");
        if p != k {
            for j in 0..n {
                a.a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a.get(i, k) / a.get(k, k);
            if f != 0.0 {
                for j in k..n {
                    let v = a.get(k, j);
                    *a.at(i, j) -= f * v;
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a.get(i, j) * x[j]).sum();
        x[i] = (b[i] - s) / a.get(i, i);
    }
    x
}

pub fn invert(a: &Dense) -> Dense {
    let n = a.n;
    let mut inv = Dense::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = gauss_solve(a.clone(), e);
        for i in 0..n {
            *inv.at(i, j) = col[i];
        }
    }
    inv
}

/// Gauss–Legendre rule on `[0, 1]` by Newton iteration on `P_m`.
pub fn gauss_line(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 1..=m {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Collapsed-square rule on the triangle `vertices`: physical points with
/// weights summing to the area.
pub fn duffy(vertices: [[f64; 2]; 3], m: usize) -> Vec<([f64; 2], f64)> {
    let line = gauss_line(m);
    let [a, b, c] = vertices;
    let det = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let mut out = Vec::with_capacity(m * m);
    for &(s, ws) in &line {
        for &(r, wr) in &line {
            let (xi, eta) = (s, r * (1.0 - s));
            let x = [
                a[0] + xi * (b[0] - a[0]) + eta * (c[0] - a[0]),
                a[1] + xi * (b[1] - a[1]) + eta * (c[1] - a[1]),
            ];
            out.push((x, ws * wr * (1.0 - s) * det));
        }
    }
    out
}

/// Barycentric coordinates of `x` and their gradients.
pub fn barycentric(v: [[f64; 2]; 3], x: [f64; 2]) -> ([f64; 3], [[f64; 2]; 3]) {
    // Solve [x1-x0, x2-x0] (l1, l2) = x - x0.
    let (a, b) = ([v[1][0] - v[0][0], v[1][1] - v[0][1]], [v[2][0] - v[0][0], v[2][1] - v[0][1]]);
    let det = a[0] * b[1] - b[0] * a[1];
    let d = [x[0] - v[0][0], x[1] - v[0][1]];
    let l1 = (d[0] * b[1] - b[0] * d[1]) / det;
    let l2 = (a[0] * d[1] - d[0] * a[1]) / det;
    let g1 = [b[1] / det, -b[0] / det];
    let g2 = [-a[1] / det, a[0] / det];
    ([1.0 - l1 - l2, l1, l2], [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2])
}

/// P1 values and gradients, then the `27 l0 l1 l2` bubble as the fourth entry.
pub fn mini_basis(v: [[f64; 2]; 3], x: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let (l, g) = barycentric(v, x);
    let bubble = 27.0 * l[0] * l[1] * l[2];
    let mut gb = [0.0; 2];
    for c in 0..2 {
        gb[c] = 27.0 * (g[0][c] * l[1] * l[2] + l[0] * g[1][c] * l[2] + l[0] * l[1] * g[2][c]);
    }
    ([l[0], l[1], l[2], bubble], [g[0], g[1], g[2], gb])
}

fn rt_monomials(x: [f64; 2], c: [f64; 2]) -> ([[f64; 2]; 8], [f64; 8]) {
    let (p, q) = (x[0] - c[0], x[1] - c[1]);
    (
        [[1.0, 0.0], [p, 0.0], [q, 0.0], [0.0, 1.0], [0.0, p], [0.0, q], [p * p, p * q], [p * q, q * q]],
        [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 3.0 * p, 3.0 * q],
    )
}

/// Second-order Raviart–Thomas element of one triangle of `mesh`, with its
/// eight global DOF numbers: two per edge (moments of the normal component
/// against the hats of the lower and higher global vertex, normal rotated
/// clockwise from lower to higher), then the cell means of both components.
pub struct RtCell {
    pub dofs: [usize; 8],
    center: [f64; 2],
    coeffs: Dense,
}

impl RtCell {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let tri = mesh.triangles()[t];
        let verts = tri.map(|v| mesh.vertices()[v]);
        let center = [
            (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
            (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
        ];
        let ne = mesh.n_edges();
        let mut dofs = [0; 8];
        let mut functionals = Dense::zeros(8, 8);
        for k in 0..3 {
            let (a, b) = {
                let (p, q) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                (p.min(q), p.max(q))
            };
            let e = mesh
                .edges()
                .iter()
                .position(|ed| ed.vertices == [a, b])
                .expect("edge of triangle");
            dofs[2 * k] = 2 * e;
            dofs[2 * k + 1] = 2 * e + 1;
            let row = edge_functionals(mesh.vertices()[a], mesh.vertices()[b], &|x| rt_monomials(x, center).0);
            for (j, r) in row.iter().enumerate() {
                *functionals.at(2 * k, j) = r[0];
                *functionals.at(2 * k + 1, j) = r[1];
            }
        }
        dofs[6] = 2 * ne + 2 * t;
        dofs[7] = 2 * ne + 2 * t + 1;
        let rule = duffy(verts, 6);
        let area: f64 = rule.iter().map(|r| r.1).sum();
        for &(x, w) in &rule {
            let (vals, _) = rt_monomials(x, center);
            for j in 0..8 {
                *functionals.at(6, j) += w * vals[j][0] / area;
                *functionals.at(7, j) += w * vals[j][1] / area;
            }
        }
        Self { dofs, center, coeffs: invert(&functionals) }
    }

    /// Values and divergences of the eight local basis functions.
    pub fn eval(&self, x: [f64; 2]) -> ([[f64; 2]; 8], [f64; 8]) {
        let (pv, pd) = rt_monomials(x, self.center);
        let mut v = [[0.0; 2]; 8];
        let mut d = [0.0; 8];
        for j in 0..8 {
            for k in 0..8 {
                let c = self.coeffs.get(k, j);
                v[j][0] += c * pv[k][0];
                v[j][1] += c * pv[k][1];
                d[j] += c * pd[k];
            }
        }
        (v, d)
    }
}

/// Normal moments against the two edge hats of the segment from `a` to `b`,
/// for every entry of the vector list returned by `f`.
pub fn edge_functionals<const N: usize>(
    a: [f64; 2],
    b: [f64; 2],
    f: &dyn Fn([f64; 2]) -> [[f64; 2]; N],
) -> [[f64; 2]; N] {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
    let mut out = [[0.0; 2]; N];
    for (s, w) in gauss_line(6) {
        let vals = f([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        for (o, v) in out.iter_mut().zip(vals) {
            let vn = v[0] * n[0] + v[1] * n[1];
            o[0] += w * vn * (1.0 - s);
            o[1] += w * vn * s;
        }
    }
    out
}

/// Maximum absolute difference, scaled by `max(1, |expected|_inf)`.
pub fn scaled_diff(actual: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(actual.len(), expected.len());
    let scale = expected.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    actual
        .iter()
        .zip(expected)
        .fold(0.0f64, |m, (a, e)| m.max((a - e).abs()))
        / scale
}
