//! Closed-form manufactured solution on the unit square (and cube) together
//! with the forcings that make it an exact solution of the sigma-form system
//!
//! ```text
//! sigma_t + div(sigma u)                                        = g2
//! sigma (sigma u)_t - mu lap u + rho (u.grad) u + u div(rho u)/2 + grad p = f
//! div u                                                         = 0
//! sigma (sigma theta)_t - kappa lap theta + rho u.grad theta + theta div(rho u)/2 = g
//! ```
//!
//! with `rho = sigma^2`. A finite-difference residual oracle checks the
//! hand-derived forcings.

use crate::math;

/// Pointwise values and derivatives of the exact fields.
#[derive(Debug, Clone, Copy)]
struct Jet<const D: usize> {
    sigma: f64,
    sigma_t: f64,
    grad_sigma: [f64; D],
    u: [f64; D],
    u_t: [f64; D],
    /// `grad_u[i][j] = d u_i / d x_j`.
    grad_u: [[f64; D]; D],
    lap_u: [f64; D],
    grad_p: [f64; D],
    theta: f64,
    theta_t: f64,
    grad_theta: [f64; D],
    lap_theta: f64,
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(f, g, g2)` for the given jet.
fn forcings<const D: usize>(j: &Jet<D>, mu: f64, kappa: f64) -> ([f64; D], f64, f64) {
    let rho = j.sigma * j.sigma;
    let div_u: f64 = (0..D).map(|i| j.grad_u[i][i]).sum();
    let div_rho_u = 2.0 * j.sigma * dot(&j.grad_sigma, &j.u) + rho * div_u;
    let mut f = [0.0; D];
    for i in 0..D {
        let adv: f64 = (0..D).map(|k| j.u[k] * j.grad_u[i][k]).sum();
        f[i] = j.sigma * j.sigma_t * j.u[i] + rho * j.u_t[i] - mu * j.lap_u[i]
            + rho * adv
            + 0.5 * j.u[i] * div_rho_u
            + j.grad_p[i];
    }
    let g = j.sigma * (j.sigma_t * j.theta + j.sigma * j.theta_t) - kappa * j.lap_theta
        + rho * dot(&j.u, &j.grad_theta)
        + 0.5 * j.theta * div_rho_u;
    let g2 = j.sigma_t + dot(&j.grad_sigma, &j.u) + j.sigma * div_u;
    (f, g, g2)
}

// s(1 - s) and s^2 (1 - s) with derivatives.
fn q(s: f64) -> f64 {
    s * (1.0 - s)
}
fn dq(s: f64) -> f64 {
    1.0 - 2.0 * s
}
fn c(s: f64) -> f64 {
    s * s * (1.0 - s)
}
fn dc(s: f64) -> f64 {
    2.0 * s - 3.0 * s * s
}
fn ddc(s: f64) -> f64 {
    2.0 - 6.0 * s
}

/// `(cos(sin t), sin(sin t))` and their time derivatives.
fn time_factors(t: f64) -> (f64, f64, f64, f64) {
    let st = math::sin(t);
    let (cc, ss) = (math::cos(st), math::sin(st));
    let ct = math::cos(t);
    (cc, ss, -ss * ct, cc * ct)
}

/// Exact space-time fields and forcings used to evaluate a scheme.
pub trait ExactSolution<const D: usize>: Sync {
    fn mu(&self) -> f64;
    fn kappa(&self) -> f64;
    fn sigma(&self, x: [f64; D], t: f64) -> f64;
    fn u(&self, x: [f64; D], t: f64) -> [f64; D];
    fn p(&self, x: [f64; D], t: f64) -> f64;
    fn theta(&self, x: [f64; D], t: f64) -> f64;
    fn f(&self, x: [f64; D], t: f64) -> [f64; D];
    fn g(&self, x: [f64; D], t: f64) -> f64;
    fn g2(&self, x: [f64; D], t: f64) -> f64;

    fn rho(&self, x: [f64; D], t: f64) -> f64 {
        let s = self.sigma(x, t);
        s * s
    }
}

/// The two-dimensional manufactured case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub mu: f64,
    pub kappa: f64,
}

impl ManufacturedCase {
    pub fn new(mu: f64, kappa: f64) -> Self {
        Self { mu, kappa }
    }

    fn jet(&self, [x, y]: [f64; 2], t: f64) -> Jet<2> {
        let (cc, ss, cc_t, ss_t) = time_factors(t);
        let t3 = t * t * t;
        let t2 = 3.0 * t * t;
        Jet {
            sigma: 2.0 + q(x) * cc + q(y) * ss,
            sigma_t: q(x) * cc_t + q(y) * ss_t,
            grad_sigma: [dq(x) * cc, dq(y) * ss],
            u: [t3 * c(y), t3 * c(x)],
            u_t: [t2 * c(y), t2 * c(x)],
            grad_u: [[0.0, t3 * dc(y)], [t3 * dc(x), 0.0]],
            lap_u: [t3 * ddc(y), t3 * ddc(x)],
            grad_p: [t, 1.0],
            theta: t3 * (c(x) + c(y)),
            theta_t: t2 * (c(x) + c(y)),
            grad_theta: [t3 * dc(x), t3 * dc(y)],
            lap_theta: t3 * (ddc(x) + ddc(y)),
        }
    }

    /// Analytic velocity gradient, `[i][j] = d u_i / d x_j`.
    pub fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        self.jet(x, t).grad_u
    }

    pub fn grad_sigma(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.jet(x, t).grad_sigma
    }
}

impl ExactSolution<2> for ManufacturedCase {
    fn mu(&self) -> f64 {
        self.mu
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn sigma(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        let (cc, ss, _, _) = time_factors(t);
        2.0 + q(x) * cc + q(y) * ss
    }
    fn u(&self, [x, y]: [f64; 2], t: f64) -> [f64; 2] {
        let t3 = t * t * t;
        [t3 * c(y), t3 * c(x)]
    }
    fn p(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        t * x + y - 0.5 * (t + 1.0)
    }
    fn theta(&self, [x, y]: [f64; 2], t: f64) -> f64 {
        t * t * t * (c(x) + c(y))
    }
    fn f(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        forcings(&self.jet(x, t), self.mu, self.kappa).0
    }
    fn g(&self, x: [f64; 2], t: f64) -> f64 {
        forcings(&self.jet(x, t), self.mu, self.kappa).1
    }
    fn g2(&self, x: [f64; 2], t: f64) -> f64 {
        forcings(&self.jet(x, t), self.mu, self.kappa).2
    }
}

/// The three-dimensional manufactured case. Evaluators only: the solver is
/// two-dimensional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase3d {
    pub mu: f64,
    pub kappa: f64,
}

impl ManufacturedCase3d {
    pub fn new(mu: f64, kappa: f64) -> Self {
        Self { mu, kappa }
    }

    fn jet(&self, [x, y, z]: [f64; 3], t: f64) -> Jet<3> {
        let (cc, ss, cc_t, ss_t) = time_factors(t);
        let t3 = t * t * t;
        let t2 = 3.0 * t * t;
        let e = math::exp(-t);
        let (a, b, d) = (2.0 * x - 1.0, 2.0 * y - 1.0, 2.0 * z - 1.0);
        Jet {
            sigma: 2.0 + q(x) * cc + (q(y) + q(z)) * ss,
            sigma_t: q(x) * cc_t + (q(y) + q(z)) * ss_t,
            grad_sigma: [dq(x) * cc, dq(y) * ss, dq(z) * ss],
            u: [t3 * c(y), t3 * c(z), t3 * c(x)],
            u_t: [t2 * c(y), t2 * c(z), t2 * c(x)],
            grad_u: [
                [0.0, t3 * dc(y), 0.0],
                [0.0, 0.0, t3 * dc(z)],
                [t3 * dc(x), 0.0, 0.0],
            ],
            lap_u: [t3 * ddc(y), t3 * ddc(z), t3 * ddc(x)],
            grad_p: [2.0 * b * d * e, 2.0 * a * d * e, 2.0 * a * b * e],
            theta: t3 * (c(x) + c(y) + c(z)),
            theta_t: t2 * (c(x) + c(y) + c(z)),
            grad_theta: [t3 * dc(x), t3 * dc(y), t3 * dc(z)],
            lap_theta: t3 * (ddc(x) + ddc(y) + ddc(z)),
        }
    }

    pub fn velocity_gradient(&self, x: [f64; 3], t: f64) -> [[f64; 3]; 3] {
        self.jet(x, t).grad_u
    }
}

impl ExactSolution<3> for ManufacturedCase3d {
    fn mu(&self) -> f64 {
        self.mu
    }
    fn kappa(&self) -> f64 {
        self.kappa
    }
    fn sigma(&self, x: [f64; 3], t: f64) -> f64 {
        self.jet(x, t).sigma
    }
    fn u(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        self.jet(x, t).u
    }
    fn p(&self, [x, y, z]: [f64; 3], t: f64) -> f64 {
        (2.0 * x - 1.0) * (2.0 * y - 1.0) * (2.0 * z - 1.0) * math::exp(-t)
    }
    fn theta(&self, x: [f64; 3], t: f64) -> f64 {
        self.jet(x, t).theta
    }
    fn f(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        forcings(&self.jet(x, t), self.mu, self.kappa).0
    }
    fn g(&self, x: [f64; 3], t: f64) -> f64 {
        forcings(&self.jet(x, t), self.mu, self.kappa).1
    }
    fn g2(&self, x: [f64; 3], t: f64) -> f64 {
        forcings(&self.jet(x, t), self.mu, self.kappa).2
    }
}

/// Step of the central differences for first derivatives.
pub const FD_STEP: f64 = 1e-5;
/// Step for second derivatives. The exact fields are cubic in space, for
/// which the three-point second difference is exact, so a larger step only
/// reduces cancellation error.
pub const FD_STEP_SECOND: f64 = 1e-3;

fn shifted<const D: usize>(x: [f64; D], k: usize, h: f64) -> [f64; D] {
    let mut y = x;
    y[k] += h;
    y
}

fn fd_grad<const D: usize>(f: &dyn Fn([f64; D]) -> f64, x: [f64; D]) -> [f64; D] {
    let mut g = [0.0; D];
    for (k, gk) in g.iter_mut().enumerate() {
        *gk = (f(shifted(x, k, FD_STEP)) - f(shifted(x, k, -FD_STEP))) / (2.0 * FD_STEP);
    }
    g
}

fn fd_lap<const D: usize>(f: &dyn Fn([f64; D]) -> f64, x: [f64; D]) -> f64 {
    let h = FD_STEP_SECOND;
    let f0 = f(x);
    (0..D)
        .map(|k| (f(shifted(x, k, h)) - 2.0 * f0 + f(shifted(x, k, -h))) / (h * h))
        .sum()
}

fn fd_dt(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    (f(t + FD_STEP) - f(t - FD_STEP)) / (2.0 * FD_STEP)
}

/// Maximum absolute residual of the four equations at the sample points,
/// with every derivative of the exact fields replaced by a central
/// difference and the case's own forcings on the right-hand side.
pub fn residual_oracle<const D: usize, C: ExactSolution<D> + ?Sized>(
    case: &C,
    points: &[([f64; D], f64)],
) -> f64 {
    worst_residual(case, points).map_or(0.0, |w| w.0)
}

/// Largest residual together with the point where it occurs.
pub fn worst_residual<const D: usize, C: ExactSolution<D> + ?Sized>(
    case: &C,
    points: &[([f64; D], f64)],
) -> Option<(f64, [f64; D], f64)> {
    let mut worst: Option<(f64, [f64; D], f64)> = None;
    for &(x, t) in points {
        let r = point_residual(case, x, t);
        if worst.map_or(true, |w| r > w.0 || r.is_nan()) {
            worst = Some((r, x, t));
        }
    }
    worst
}

/// Maximum absolute residual of the four equations at one point.
pub fn point_residual<const D: usize, C: ExactSolution<D> + ?Sized>(case: &C, x: [f64; D], t: f64) -> f64 {
    let (mu, kappa) = (case.mu(), case.kappa());
    let mut worst = 0.0f64;
    {
        let sigma = case.sigma(x, t);
        let rho = sigma * sigma;
        let u = case.u(x, t);
        let theta = case.theta(x, t);
        // div(sigma u), div(rho u) and div u.
        let mut div_sigma_u = 0.0;
        let mut div_rho_u = 0.0;
        let mut div_u = 0.0;
        for k in 0..D {
            let comp = |y: [f64; D]| case.u(y, t)[k];
            let su = |y: [f64; D]| case.sigma(y, t) * case.u(y, t)[k];
            let ru = |y: [f64; D]| case.rho(y, t) * case.u(y, t)[k];
            div_u += fd_grad(&comp, x)[k];
            div_sigma_u += fd_grad(&su, x)[k];
            div_rho_u += fd_grad(&ru, x)[k];
        }
        let sigma_t = fd_dt(&|s| case.sigma(x, s), t);
        let r_mass = sigma_t + div_sigma_u - case.g2(x, t);
        worst = worst.max(math::abs(r_mass)).max(math::abs(div_u));

        let grad_p = fd_grad(&|y| case.p(y, t), x);
        let f = case.f(x, t);
        for i in 0..D {
            let comp = |y: [f64; D]| case.u(y, t)[i];
            let grad = fd_grad(&comp, x);
            let lap = fd_lap(&comp, x);
            let su_t = fd_dt(&|s| case.sigma(x, s) * case.u(x, s)[i], t);
            let r = sigma * su_t - mu * lap + rho * dot(&u, &grad) + 0.5 * u[i] * div_rho_u + grad_p[i]
                - f[i];
            worst = worst.max(math::abs(r));
        }

        let th = |y: [f64; D]| case.theta(y, t);
        let st_t = fd_dt(&|s| case.sigma(x, s) * case.theta(x, s), t);
        let r_heat = sigma * st_t - kappa * fd_lap(&th, x) + rho * dot(&u, &fd_grad(&th, x))
            + 0.5 * theta * div_rho_u
            - case.g(x, t);
        worst = worst.max(math::abs(r_heat));
    }
    worst
}
