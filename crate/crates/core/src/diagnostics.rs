//! L2 errors, observed convergence orders and per-step energy quantities.

use alloc::vec::Vec;

use crate::fem::{FeSpace, QuadPoint, QuadRule};
use crate::manufactured::ExactSolution;
use crate::math;
use crate::scheme::{FieldState, Simulation, SourceMode};

/// `int f` over the mesh of `space`, with `f` given at quadrature points.
pub fn integrate(space: &FeSpace, quad: &QuadRule, f: &dyn Fn(&QuadPoint) -> f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..space.n_cells() {
        let geo = space.geometry(t);
        let mut cell = 0.0;
        for (q, (bary, w)) in quad.iter().enumerate() {
            cell += w * f(&QuadPoint {
                cell: t,
                q,
                bary,
                x: geo.point(bary),
            });
        }
        acc += cell * geo.det;
    }
    acc
}

/// `||u_h - u||_{L2}` for a scalar field.
pub fn l2_error(space: &FeSpace, coeffs: &[f64], exact: &dyn Fn([f64; 2]) -> f64, quad: &QuadRule) -> f64 {
    let sq = integrate(space, quad, &|p| {
        let d = space.eval_scalar(coeffs, p.cell, p.bary).0 - exact(p.x);
        d * d
    });
    math::sqrt(sq)
}

/// L2 errors at the final time and observed orders against a coarser run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub h: f64,
    pub tau: f64,
    pub err_rho: f64,
    pub err_u: f64,
    pub err_theta: f64,
    pub err_p: f64,
    /// Orders for rho, u, theta and p; `None` for the coarsest record.
    pub rates: Option<[f64; 4]>,
}

impl ErrorRecord {
    pub fn errors(&self) -> [f64; 4] {
        [self.err_rho, self.err_u, self.err_theta, self.err_p]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EocError {
    #[error("need at least two records, got {0}")]
    TooFew(usize),
    #[error("record {index} does not halve h ({coarse} -> {fine})")]
    NotHalving { index: usize, coarse: f64, fine: f64 },
}

/// Fills `rates` with `log2(err_coarse / err_fine)` for a sequence of
/// records whose `h` halves from one to the next.
pub fn eoc(records: &[ErrorRecord]) -> Result<Vec<ErrorRecord>, EocError> {
    if records.len() < 2 {
        return Err(EocError::TooFew(records.len()));
    }
    let mut out = records.to_vec();
    out[0].rates = None;
    for i in 1..out.len() {
        let (coarse, fine) = (records[i - 1], records[i]);
        if math::abs(coarse.h / fine.h - 2.0) > 1e-9 {
            return Err(EocError::NotHalving {
                index: i,
                coarse: coarse.h,
                fine: fine.h,
            });
        }
        let c = coarse.errors();
        let f = fine.errors();
        out[i].rates = Some(core::array::from_fn(|k| math::log2(c[k] / f[k])));
    }
    Ok(out)
}

/// Energy quantities of one time level. The slacks compare level `step`
/// with the previous one and are zero for the initial level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEnergy {
    pub step: usize,
    pub time: f64,
    pub sigma_sq: f64,
    pub sigma_u_sq: f64,
    pub sigma_theta_sq: f64,
    pub grad_u_sq: f64,
    pub grad_theta_sq: f64,
    /// `||s1||^2 + ||s1 - s0||^2 - ||s0||^2`; zero without density source.
    pub density_slack: f64,
    /// `||s1 u1||^2 - ||s0 u0||^2 + 2 tau mu ||grad u1||^2 - tau ||f||^2`.
    pub momentum_slack: f64,
    /// `||s1 t1||^2 - ||s0 t0||^2 + kappa tau ||grad t1||^2 - tau ||g||^2`.
    pub temperature_slack: f64,
}

/// Energy history of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyReport {
    pub steps: Vec<StepEnergy>,
}

impl EnergyReport {
    pub fn new(initial: StepEnergy) -> Self {
        Self {
            steps: alloc::vec![initial],
        }
    }

    pub fn push(&mut self, e: StepEnergy) {
        self.steps.push(e);
    }

    pub fn initial_sigma_sq(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.sigma_sq)
    }

    /// Largest `|density_slack| / ||sigma^0||^2` over all steps.
    pub fn max_relative_density_slack(&self) -> f64 {
        let s0 = self.initial_sigma_sq();
        let worst = self.steps.iter().fold(0.0f64, |m, s| m.max(math::abs(s.density_slack)));
        if s0 > 0.0 {
            worst / s0
        } else {
            worst
        }
    }

    pub fn density_identity_holds(&self, tol: f64) -> bool {
        self.max_relative_density_slack() <= tol
    }

    /// `||sigma^n||` never grows by more than `tol * ||sigma^0||^2`.
    pub fn sigma_nonincreasing(&self, tol: f64) -> bool {
        let s0 = self.initial_sigma_sq();
        self.steps.windows(2).all(|w| w[1].sigma_sq <= w[0].sigma_sq + tol * s0)
    }
}

fn level_norms(sim: &Simulation<'_>, s: &FieldState) -> [f64; 5] {
    let p1 = sim.p1_space();
    let mini = sim.mini_space();
    let quad = sim.quad();
    let vals = |p: &QuadPoint| {
        let (sg, _) = p1.eval_scalar(&s.sigma, p.cell, p.bary);
        let (th, gth) = p1.eval_scalar(&s.theta, p.cell, p.bary);
        let (ux, gx) = mini.eval_scalar(&s.u[0], p.cell, p.bary);
        let (uy, gy) = mini.eval_scalar(&s.u[1], p.cell, p.bary);
        [
            sg * sg,
            sg * sg * (ux * ux + uy * uy),
            sg * sg * th * th,
            gx[0] * gx[0] + gx[1] * gx[1] + gy[0] * gy[0] + gy[1] * gy[1],
            gth[0] * gth[0] + gth[1] * gth[1],
        ]
    };
    core::array::from_fn(|k| integrate(p1, quad, &|p| vals(p)[k]))
}

/// Energy quantities of a single level, slacks zero.
pub fn state_energy(sim: &Simulation<'_>, s: &FieldState) -> StepEnergy {
    let n = level_norms(sim, s);
    StepEnergy {
        step: s.time_index,
        time: sim.time(s.time_index),
        sigma_sq: n[0],
        sigma_u_sq: n[1],
        sigma_theta_sq: n[2],
        grad_u_sq: n[3],
        grad_theta_sq: n[4],
        ..StepEnergy::default()
    }
}

/// Energy quantities of `next` with the slacks of the step from `prev`.
pub fn step_energy(sim: &Simulation<'_>, prev: &FieldState, next: &FieldState) -> StepEnergy {
    let p1 = sim.p1_space();
    let quad = sim.quad();
    let cfg = sim.config();
    let tau = sim.tau();
    let t1 = sim.time(next.time_index);
    let old = level_norms(sim, prev);
    let mut e = state_energy(sim, next);
    let jump = integrate(p1, quad, &|p| {
        let d = p1.eval_scalar(&next.sigma, p.cell, p.bary).0 - p1.eval_scalar(&prev.sigma, p.cell, p.bary).0;
        d * d
    });
    e.density_slack = e.sigma_sq + jump - old[0];
    let (f_sq, g_sq) = match (cfg.source_mode, sim.problem().exact()) {
        (SourceMode::Manufactured, Some(ex)) => (
            integrate(p1, quad, &|p| {
                let f = ex.f(p.x, t1);
                f[0] * f[0] + f[1] * f[1]
            }),
            integrate(p1, quad, &|p| {
                let g = ex.g(p.x, t1);
                g * g
            }),
        ),
        _ => (0.0, 0.0),
    };
    e.momentum_slack = e.sigma_u_sq - old[1] + 2.0 * tau * cfg.mu * e.grad_u_sq - tau * f_sq;
    e.temperature_slack = e.sigma_theta_sq - old[2] + cfg.kappa * tau * e.grad_theta_sq - tau * g_sq;
    e
}

/// Energy report of a stored history of consecutive levels.
pub fn energy_report(sim: &Simulation<'_>, history: &[FieldState]) -> EnergyReport {
    let Some(first) = history.first() else {
        return EnergyReport::default();
    };
    let mut report = EnergyReport::new(state_energy(sim, first));
    for w in history.windows(2) {
        report.push(step_energy(sim, &w[0], &w[1]));
    }
    report
}

/// Errors of `state` against `exact` at the state's time. The density error
/// uses `sigma_h^2` pointwise.
pub fn final_errors(sim: &Simulation<'_>, state: &FieldState, exact: &dyn ExactSolution<2>) -> ErrorRecord {
    let p1 = sim.p1_space();
    let mini = sim.mini_space();
    let quad = sim.quad();
    let t = sim.time(state.time_index);
    let err_rho = integrate(p1, quad, &|p| {
        let s = p1.eval_scalar(&state.sigma, p.cell, p.bary).0;
        let d = s * s - exact.rho(p.x, t);
        d * d
    });
    let err_u = integrate(p1, quad, &|p| {
        let e = exact.u(p.x, t);
        let dx = mini.eval_scalar(&state.u[0], p.cell, p.bary).0 - e[0];
        let dy = mini.eval_scalar(&state.u[1], p.cell, p.bary).0 - e[1];
        dx * dx + dy * dy
    });
    ErrorRecord {
        h: sim.config().h(),
        tau: sim.tau(),
        err_rho: math::sqrt(err_rho),
        err_u: math::sqrt(err_u),
        err_theta: l2_error(p1, &state.theta, &|x| exact.theta(x, t), quad),
        err_p: l2_error(p1, &state.p, &|x| exact.p(x, t), quad),
        rates: None,
    }
}
