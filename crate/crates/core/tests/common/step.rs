//! One time step of the scheme assembled as dense matrices.
//!
//! The oracle shares only the mesh tables and the triangle quadrature rule
//! with the library; the rule is part of the discrete scheme since several
//! integrands are not polynomials of low degree.

use ncvd_core::manufactured::ExactSolution;
use ncvd_core::{Mesh, Problem, QuadRule};

use super::{barycentric, edge_functionals, gauss_solve, mini_basis, Dense, RtCell};

pub struct StepData<'a> {
    pub mesh: &'a Mesh,
    pub quad: &'a QuadRule,
    pub tau: f64,
    pub mu: f64,
    pub kappa: f64,
    pub problem: &'a dyn Problem,
    /// Dirichlet and normal-trace data; `None` means homogeneous.
    pub boundary: Option<&'a dyn ExactSolution<2>>,
    pub sources: Option<&'a dyn ExactSolution<2>>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub w0: Vec<f64>,
    pub sigma: Vec<f64>,
    pub u: [Vec<f64>; 2],
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub w1: Vec<f64>,
}

struct Point {
    cell: usize,
    x: [f64; 2],
    weight: f64,
}

impl StepData<'_> {
    fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let v = tri.map(|i| self.mesh.vertices()[i]);
            let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
            for (b, w) in self.quad.iter() {
                let x = [
                    b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                    b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
                ];
                out.push(Point { cell: t, x, weight: w * det });
            }
        }
        out
    }

    fn verts(&self, t: usize) -> [[f64; 2]; 3] {
        self.mesh.triangles()[t].map(|i| self.mesh.vertices()[i])
    }

    fn mini_dofs(&self, t: usize) -> [usize; 4] {
        let tri = self.mesh.triangles()[t];
        [tri[0], tri[1], tri[2], self.mesh.n_vertices() + t]
    }

    fn p1_eval(&self, c: &[f64], p: &Point) -> (f64, [f64; 2]) {
        let (l, g) = barycentric(self.verts(p.cell), p.x);
        let tri = self.mesh.triangles()[p.cell];
        let mut v = 0.0;
        let mut d = [0.0; 2];
        for k in 0..3 {
            v += c[tri[k]] * l[k];
            d[0] += c[tri[k]] * g[k][0];
            d[1] += c[tri[k]] * g[k][1];
        }
        (v, d)
    }

    fn mini_eval(&self, c: &[f64], p: &Point) -> (f64, [f64; 2]) {
        let (l, g) = mini_basis(self.verts(p.cell), p.x);
        let mut v = 0.0;
        let mut d = [0.0; 2];
        for (k, dof) in self.mini_dofs(p.cell).into_iter().enumerate() {
            v += c[dof] * l[k];
            d[0] += c[dof] * g[k][0];
            d[1] += c[dof] * g[k][1];
        }
        (v, d)
    }

    fn boundary_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .mesh
            .edges()
            .iter()
            .filter(|e| e.triangles[1].is_none())
            .flat_map(|e| e.vertices)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn dirichlet(&self, f: impl Fn(&dyn ExactSolution<2>, [f64; 2]) -> f64) -> Vec<(usize, f64)> {
        self.boundary_vertices()
            .into_iter()
            .map(|v| (v, self.boundary.map_or(0.0, |e| f(e, self.mesh.vertices()[v]))))
            .collect()
    }

    /// Mixed projection of the field `u` given at the quadrature points,
    /// normal trace from the boundary data at time `t`.
    fn project(&self, u: &[[f64; 2]], t: f64) -> Vec<f64> {
        let mesh = self.mesh;
        let (ne, nt) = (mesh.n_edges(), mesh.n_triangles());
        let nr = 2 * ne + 2 * nt;
        let nd = 3 * nt;
        let size = nr + nd + 1;
        let cells: Vec<RtCell> = (0..nt).map(|t| RtCell::new(mesh, t)).collect();
        let mut a = Dense::zeros(size, size);
        let mut rhs = vec![0.0; size];
        for (p, uq) in self.points().iter().zip(u) {
            let cell = &cells[p.cell];
            let (v, div) = cell.eval(p.x);
            let (l, _) = barycentric(self.verts(p.cell), p.x);
            for i in 0..8 {
                let di = cell.dofs[i];
                rhs[di] += p.weight * (uq[0] * v[i][0] + uq[1] * v[i][1]);
                for j in 0..8 {
                    *a.at(di, cell.dofs[j]) += p.weight * (v[i][0] * v[j][0] + v[i][1] * v[j][1]);
                }
                for (k, lk) in l.iter().enumerate() {
                    let q = nr + 3 * p.cell + k;
                    *a.at(q, di) += p.weight * lk * div[i];
                    *a.at(di, q) += p.weight * lk * div[i];
                }
            }
            for (k, lk) in l.iter().enumerate() {
                let q = nr + 3 * p.cell + k;
                *a.at(q, size - 1) += p.weight * lk;
                *a.at(size - 1, q) += p.weight * lk;
            }
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.triangles[1].is_some() {
                continue;
            }
            let [xa, xb] = edge.vertices.map(|v| mesh.vertices()[v]);
            let g = edge_functionals(xa, xb, &|x| [self.boundary.map_or([0.0, 0.0], |b| b.u(x, t))])[0];
            a.pin(&mut rhs, 2 * e, g[0]);
            a.pin(&mut rhs, 2 * e + 1, g[1]);
        }
        let mut x = gauss_solve(a, rhs);
        x.truncate(nr);
        x
    }

    fn rt_eval(&self, w: &[f64], cells: &[RtCell], p: &Point) -> [f64; 2] {
        let cell = &cells[p.cell];
        let (v, _) = cell.eval(p.x);
        let mut out = [0.0; 2];
        for i in 0..8 {
            out[0] += w[cell.dofs[i]] * v[i][0];
            out[1] += w[cell.dofs[i]] * v[i][1];
        }
        out
    }

    /// Transport matrix with density weight `rho`, velocity `b` and
    /// diffusion `nu` on P1 (`bubble = false`) or the mini space.
    fn transport(
        &self,
        bubble: bool,
        coef: &dyn Fn(&Point) -> (f64, f64, [f64; 2]),
        nu: f64,
        offset: usize,
        a: &mut Dense,
    ) {
        for p in self.points() {
            let (rho, div_rho_b, rho_b) = coef(&p);
            let (vals, grads, dofs, n) = self.local(bubble, &p);
            for i in 0..n {
                for j in 0..n {
                    let v = rho / self.tau * vals[i] * vals[j]
                        + 0.5 * div_rho_b * vals[i] * vals[j]
                        + (rho_b[0] * grads[j][0] + rho_b[1] * grads[j][1]) * vals[i]
                        + nu * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    *a.at(offset + dofs[i], offset + dofs[j]) += p.weight * v;
                }
            }
        }
    }

    fn local(&self, bubble: bool, p: &Point) -> ([f64; 4], [[f64; 2]; 4], [usize; 4], usize) {
        let (vals, grads) = mini_basis(self.verts(p.cell), p.x);
        (vals, grads, self.mini_dofs(p.cell), if bubble { 4 } else { 3 })
    }

    fn load(&self, bubble: bool, f: &dyn Fn(&Point) -> f64, rhs: &mut [f64], offset: usize) {
        for p in self.points() {
            let v = f(&p);
            let (vals, _, dofs, n) = self.local(bubble, &p);
            for i in 0..n {
                rhs[offset + dofs[i]] += p.weight * v * vals[i];
            }
        }
    }

    pub fn run(&self) -> StepResult {
        let mesh = self.mesh;
        let (nv, nt) = (mesh.n_vertices(), mesh.n_triangles());
        let nm = nv + nt;
        let t1 = self.tau;
        let pr = self.problem;

        let sigma0: Vec<f64> = mesh.vertices().iter().map(|&x| pr.initial_sigma(x)).collect();
        let theta0: Vec<f64> = mesh.vertices().iter().map(|&x| pr.initial_theta(x)).collect();
        let mut u0 = [vec![0.0; nm], vec![0.0; nm]];
        for (v, &x) in mesh.vertices().iter().enumerate() {
            let val = pr.initial_velocity(x);
            u0[0][v] = val[0];
            u0[1][v] = val[1];
        }
        let points = self.points();
        let mini_field = |u: &[Vec<f64>; 2]| -> Vec<[f64; 2]> {
            points
                .iter()
                .map(|p| [self.mini_eval(&u[0], p).0, self.mini_eval(&u[1], p).0])
                .collect()
        };
        let w0 = self.project(&mini_field(&u0), 0.0);
        let cells: Vec<RtCell> = (0..nt).map(|t| RtCell::new(mesh, t)).collect();

        // Density.
        let mut a = Dense::zeros(nv, nv);
        let mut rhs = vec![0.0; nv];
        for p in &points {
            let w = self.rt_eval(&w0, &cells, p);
            let (l, g) = barycentric(self.verts(p.cell), p.x);
            let tri = mesh.triangles()[p.cell];
            for i in 0..3 {
                for j in 0..3 {
                    let v = l[i] * l[j] / self.tau + (w[0] * g[j][0] + w[1] * g[j][1]) * l[i];
                    *a.at(tri[i], tri[j]) += p.weight * v;
                }
            }
        }
        self.load(
            false,
            &|p| self.p1_eval(&sigma0, p).0 / self.tau + self.sources.map_or(0.0, |s| s.g2(p.x, t1)),
            &mut rhs,
            0,
        );
        let sigma = gauss_solve(a, rhs);

        let coef = |p: &Point| {
            let (s, gs) = self.p1_eval(&sigma, p);
            let (bx, gx) = self.mini_eval(&u0[0], p);
            let (by, gy) = self.mini_eval(&u0[1], p);
            let rho = s * s;
            let div_rho_b = 2.0 * s * (gs[0] * bx + gs[1] * by) + rho * (gx[0] + gy[1]);
            (rho, div_rho_b, [rho * bx, rho * by])
        };
        let weight = |p: &Point| self.p1_eval(&sigma, p).0 * self.p1_eval(&sigma0, p).0 / self.tau;

        // Velocity and pressure, unknowns [u_x, u_y, p, multiplier].
        let size = 2 * nm + nv + 1;
        let mut a = Dense::zeros(size, size);
        let mut rhs = vec![0.0; size];
        for c in 0..2 {
            self.transport(true, &coef, self.mu, c * nm, &mut a);
            let f = |p: &Point| {
                self.sources.map_or(0.0, |s| s.f(p.x, t1)[c]) + weight(p) * self.mini_eval(&u0[c], p).0
            };
            self.load(true, &f, &mut rhs, c * nm);
        }
        for p in &points {
            let (l, _) = barycentric(self.verts(p.cell), p.x);
            let (_, grads) = mini_basis(self.verts(p.cell), p.x);
            let tri = mesh.triangles()[p.cell];
            let dofs = self.mini_dofs(p.cell);
            for k in 0..3 {
                let q = 2 * nm + tri[k];
                for c in 0..2 {
                    for j in 0..4 {
                        let b = -p.weight * l[k] * grads[j][c];
                        *a.at(q, c * nm + dofs[j]) += b;
                        *a.at(c * nm + dofs[j], q) += b;
                    }
                }
                *a.at(q, size - 1) += p.weight * l[k];
                *a.at(size - 1, q) += p.weight * l[k];
            }
        }
        for c in 0..2 {
            for (v, g) in self.dirichlet(|e, x| e.u(x, t1)[c]) {
                a.pin(&mut rhs, c * nm + v, g);
            }
        }
        let x = gauss_solve(a, rhs);
        let u = [x[..nm].to_vec(), x[nm..2 * nm].to_vec()];
        let p = x[2 * nm..2 * nm + nv].to_vec();

        // Temperature.
        let mut a = Dense::zeros(nv, nv);
        let mut rhs = vec![0.0; nv];
        self.transport(false, &coef, self.kappa, 0, &mut a);
        let g = |p: &Point| self.sources.map_or(0.0, |s| s.g(p.x, t1)) + weight(p) * self.p1_eval(&theta0, p).0;
        self.load(false, &g, &mut rhs, 0);
        for (v, g) in self.dirichlet(|e, x| e.theta(x, t1)) {
            a.pin(&mut rhs, v, g);
        }
        let theta = gauss_solve(a, rhs);

        let w1 = self.project(&mini_field(&u), t1);
        StepResult { w0, sigma, u, p, theta, w1 }
    }
}
