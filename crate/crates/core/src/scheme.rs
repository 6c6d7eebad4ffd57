//! The linearized semi-implicit Euler time loop.
//!
//! One step from `t_n` to `t_{n+1}`:
//!
//! 1. density: `(M/tau + C(w)) sigma^{n+1} = M sigma^n / tau + G2`, with `w`
//!    the divergence-free projection of `u^n`;
//! 2. momentum: a mini-element saddle-point problem weighted by
//!    `rho^{n+1} = (sigma^{n+1})^2`, transported by the raw `u^n`;
//! 3. temperature: the scalar analogue of step 2.
//!
//! The time derivative `sigma^{n+1} D_tau(sigma^{n+1} u^{n+1})` is split into
//! the matrix weight `rho^{n+1}/tau` and the load `sigma^{n+1} sigma^n u^n / tau`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::diagnostics::{self, EnergyReport, ErrorRecord};
use crate::fem::{
    assemble_bilinear, assemble_linear, interpolate_nodal, map_cells, quadrature_rule, FeSpace, Form,
    LinearTerm, QuadPoint, QuadRule, SpaceKind, Term, DEFAULT_QUAD_DEGREE,
};
use crate::linalg::{CsrMatrix, LinearSystem, MeanConstraint, SolveError, Solver, SolverKind};
use crate::manufactured::{ExactSolution, ManufacturedCase};
use crate::math;
use crate::mesh::{build_unit_square_mesh, classify_boundary_vertices, Diagonal, Mesh};
use crate::projection::{DivFreeProjector, ProjectedVelocity, ProjectionError, ProjectionMode, RtOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BcMode {
    /// Zero velocity and temperature on the boundary.
    Homogeneous,
    /// Exact velocity and temperature at boundary vertices.
    #[default]
    ManufacturedDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceMode {
    None,
    #[default]
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("mesh needs at least one subdivision")]
    ZeroSubdivisions,
    #[error("final time {t_final} and step {tau} give no time steps")]
    NoSteps { t_final: f64, tau: f64 },
    #[error("manufactured boundary data needs manufactured sources")]
    BoundaryNeedsSources,
    #[error("quadrature degree {0} is not supported")]
    QuadDegree(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial density {value} is not positive at vertex {vertex}")]
    NonPositiveDensity { vertex: usize, value: f64 },
    #[error("{0} needs a case with a known exact solution")]
    MissingExactSolution(&'static str),
    #[error("step {step}: {stage} solve failed: {source}")]
    Solve {
        step: usize,
        stage: &'static str,
        source: SolveError,
    },
    #[error("step {step}: {source}")]
    Projection { step: usize, source: ProjectionError },
}

/// Physical and numerical parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub mu: f64,
    pub kappa: f64,
    pub t_final: f64,
    /// Requested step; the effective step is `t_final / n_steps`.
    pub tau: f64,
    /// Subdivisions per side of the unit square.
    pub n: usize,
    pub bc_mode: BcMode,
    pub projection_mode: ProjectionMode,
    pub rt_order: RtOrder,
    pub source_mode: SourceMode,
    pub quad_degree: usize,
    pub solver: SolverKind,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            kappa: 0.1,
            t_final: 1.0,
            tau: 0.25,
            n: 4,
            bc_mode: BcMode::ManufacturedDirichlet,
            projection_mode: ProjectionMode::PrescribedNormalTrace,
            rt_order: RtOrder::One,
            source_mode: SourceMode::Manufactured,
            quad_degree: DEFAULT_QUAD_DEGREE,
            solver: SolverKind::Direct,
        }
    }
}

impl SimulationConfig {
    /// Manufactured-solution run on an `n x n` mesh with step `tau`.
    pub fn manufactured(n: usize, tau: f64) -> Self {
        Self {
            n,
            tau,
            ..Self::default()
        }
    }

    /// Source-free run with homogeneous boundary data and zero-trace projection.
    pub fn homogeneous(n: usize, tau: f64) -> Self {
        Self {
            n,
            tau,
            bc_mode: BcMode::Homogeneous,
            projection_mode: ProjectionMode::ZeroNormalTrace,
            source_mode: SourceMode::None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        for (name, v) in [("mu", self.mu), ("kappa", self.kappa), ("tau", self.tau), ("t_final", self.t_final)] {
            if !positive(v) {
                return Err(ConfigError::NonPositive(name));
            }
        }
        if self.n == 0 {
            return Err(ConfigError::ZeroSubdivisions);
        }
        if self.n_steps() == 0 {
            return Err(ConfigError::NoSteps {
                t_final: self.t_final,
                tau: self.tau,
            });
        }
        if self.bc_mode == BcMode::ManufacturedDirichlet && self.source_mode != SourceMode::Manufactured {
            return Err(ConfigError::BoundaryNeedsSources);
        }
        if quadrature_rule(self.quad_degree).is_err() {
            return Err(ConfigError::QuadDegree(self.quad_degree));
        }
        Ok(())
    }

    /// `round(t_final / tau)`.
    pub fn n_steps(&self) -> usize {
        let r = math::round(self.t_final / self.tau);
        if r.is_finite() && r > 0.0 {
            r as usize
        } else {
            0
        }
    }

    /// The renormalized step `t_final / n_steps`.
    pub fn effective_tau(&self) -> f64 {
        self.t_final / self.n_steps() as f64
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }
}

/// Initial data and, when known, the exact solution with its forcings.
pub trait Problem: Sync {
    fn initial_sigma(&self, x: [f64; 2]) -> f64;
    fn initial_velocity(&self, x: [f64; 2]) -> [f64; 2];
    fn initial_theta(&self, x: [f64; 2]) -> f64;
    fn exact(&self) -> Option<&dyn ExactSolution<2>>;
}

impl Problem for ManufacturedCase {
    fn initial_sigma(&self, x: [f64; 2]) -> f64 {
        self.sigma(x, 0.0)
    }
    fn initial_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        self.u(x, 0.0)
    }
    fn initial_theta(&self, x: [f64; 2]) -> f64 {
        self.theta(x, 0.0)
    }
    fn exact(&self) -> Option<&dyn ExactSolution<2>> {
        Some(self)
    }
}

/// `sigma = 1`, everything else zero, no forcing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroCase;

impl ExactSolution<2> for ZeroCase {
    fn mu(&self) -> f64 {
        0.1
    }
    fn kappa(&self) -> f64 {
        0.1
    }
    fn sigma(&self, _: [f64; 2], _: f64) -> f64 {
        1.0
    }
    fn u(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn p(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn theta(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn f(&self, _: [f64; 2], _: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn g(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
    fn g2(&self, _: [f64; 2], _: f64) -> f64 {
        0.0
    }
}

impl Problem for ZeroCase {
    fn initial_sigma(&self, _: [f64; 2]) -> f64 {
        1.0
    }
    fn initial_velocity(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn initial_theta(&self, _: [f64; 2]) -> f64 {
        0.0
    }
    fn exact(&self) -> Option<&dyn ExactSolution<2>> {
        Some(self)
    }
}

/// Source-free data for energy checks: `sigma0 = 2 + x(1-x)`, a divergence-free
/// velocity vanishing on the boundary and `theta0 = sin(pi x) sin(pi y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StabilityCase;

impl Problem for StabilityCase {
    fn initial_sigma(&self, x: [f64; 2]) -> f64 {
        2.0 + x[0] * (1.0 - x[0])
    }
    fn initial_velocity(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        // Curl of psi = 64 (x(1-x) y(1-y))^2, scaled so that |u| reaches
        // about 0.3 and a missing projection shows up clearly.
        let (a, b) = (x * (1.0 - x), y * (1.0 - y));
        let (da, db) = (1.0 - 2.0 * x, 1.0 - 2.0 * y);
        [128.0 * a * a * b * db, -128.0 * a * da * b * b]
    }
    fn initial_theta(&self, x: [f64; 2]) -> f64 {
        let pi = core::f64::consts::PI;
        math::sin(pi * x[0]) * math::sin(pi * x[1])
    }
    fn exact(&self) -> Option<&dyn ExactSolution<2>> {
        None
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone)]
pub struct FieldState {
    /// P1 coefficients of `sqrt(rho)`.
    pub sigma: Vec<f64>,
    /// Mini-element coefficients of the two velocity components.
    pub u: [Vec<f64>; 2],
    /// P1 pressure with zero mean.
    pub p: Vec<f64>,
    /// P1 temperature.
    pub theta: Vec<f64>,
    pub time_index: usize,
    /// Transport field of the next density step.
    pub projected_u: ProjectedVelocity,
    pub sigma_min: f64,
    /// Set once the minimum vertex value of `sigma` drops to zero or below.
    pub positivity_lost: bool,
}

/// Final state with the per-step energy history and, if the case has an
/// exact solution, the errors at the final time.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: FieldState,
    pub energy: EnergyReport,
    pub errors: Option<ErrorRecord>,
}

/// Coefficients of the momentum and temperature steps at one quadrature point.
#[derive(Debug, Clone, Copy, Default)]
struct Transport {
    sigma_new: f64,
    grad_sigma_new: [f64; 2],
    sigma_old: f64,
    b: [f64; 2],
    div_b: f64,
}

impl Transport {
    fn rho(&self) -> f64 {
        self.sigma_new * self.sigma_new
    }

    /// `div(rho b) = grad(rho).b + rho div b` with `grad rho = 2 sigma grad sigma`.
    fn div_rho_b(&self) -> f64 {
        let g = self.grad_sigma_new;
        2.0 * self.sigma_new * (g[0] * self.b[0] + g[1] * self.b[1]) + self.rho() * self.div_b
    }
}

/// Spaces, constant operators and solvers of one run.
pub struct Simulation<'a> {
    config: SimulationConfig,
    problem: &'a dyn Problem,
    n_steps: usize,
    tau: f64,
    mesh: Arc<Mesh>,
    p1: Arc<FeSpace>,
    mini: Arc<FeSpace>,
    quad: QuadRule,
    projector: DivFreeProjector,
    /// `B_c = -int q d(phi)/dx_c`, pressure rows by velocity columns.
    div_blocks: [CsrMatrix; 2],
    div_blocks_t: [CsrMatrix; 2],
    pressure_weights: Vec<f64>,
    boundary_vertices: Vec<usize>,
    density_solver: Solver,
    momentum_solver: Solver,
    temperature_solver: Solver,
}

impl core::fmt::Debug for Simulation<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Simulation")
            .field("config", &self.config)
            .field("n_steps", &self.n_steps)
            .field("tau", &self.tau)
            .finish_non_exhaustive()
    }
}

impl<'a> Simulation<'a> {
    pub fn new(config: SimulationConfig, problem: &'a dyn Problem) -> Result<Self, SchemeError> {
        config.validate()?;
        let needs_exact = config.source_mode == SourceMode::Manufactured
            || config.bc_mode == BcMode::ManufacturedDirichlet;
        if needs_exact && problem.exact().is_none() {
            return Err(SchemeError::MissingExactSolution("manufactured sources or boundary data"));
        }
        let mesh = Arc::new(
            build_unit_square_mesh(config.n, Diagonal::LowerLeftToUpperRight)
                .map_err(|_| ConfigError::ZeroSubdivisions)?,
        );
        let quad = quadrature_rule(config.quad_degree).map_err(|_| ConfigError::QuadDegree(config.quad_degree))?;
        let p1 = Arc::new(FeSpace::new(SpaceKind::P1Scalar, mesh.clone()));
        let mini = Arc::new(FeSpace::new(SpaceKind::MiniVelocityComponent, mesh.clone()));
        let projector = DivFreeProjector::new(mesh.clone(), config.projection_mode, config.rt_order, quad.clone())
            .map_err(|source| SchemeError::Projection { step: 0, source })?;
        let div_block = |c: usize| {
            let mut b = assemble_bilinear(&p1, &mini, &Form::new(&[Term::DivCoupling { component: c }]), &quad)
                .expect("P1 x mini coupling is well defined");
            b.scale(-1.0);
            b
        };
        let div_blocks = [div_block(0), div_block(1)];
        let div_blocks_t = [div_blocks[0].transpose(), div_blocks[1].transpose()];
        let one = |_: &QuadPoint| 1.0;
        let pressure_weights = assemble_linear(&p1, LinearTerm::Scalar(&one), &quad).expect("scalar load");
        let boundary_vertices = classify_boundary_vertices(&mesh);
        Ok(Self {
            n_steps: config.n_steps(),
            tau: config.effective_tau(),
            config,
            problem,
            mesh,
            p1,
            mini,
            quad,
            projector,
            div_blocks,
            div_blocks_t,
            pressure_weights,
            boundary_vertices,
            density_solver: Solver::new(config.solver),
            momentum_solver: Solver::new(config.solver),
            temperature_solver: Solver::new(config.solver),
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn p1_space(&self) -> &Arc<FeSpace> {
        &self.p1
    }

    pub fn mini_space(&self) -> &Arc<FeSpace> {
        &self.mini
    }

    pub fn quad(&self) -> &QuadRule {
        &self.quad
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.tau
    }

    fn exact(&self) -> &dyn ExactSolution<2> {
        self.problem.exact().expect("checked in Simulation::new")
    }

    fn sources(&self) -> Option<&dyn ExactSolution<2>> {
        match self.config.source_mode {
            SourceMode::Manufactured => Some(self.exact()),
            SourceMode::None => None,
        }
    }

    /// Values at every quadrature point, indexed by `cell * len + q`.
    fn sample<T: Copy + Default + Send>(&self, f: impl Fn(&QuadPoint) -> T + Sync + Send) -> Vec<T> {
        let nq = self.quad.len();
        let per_cell = map_cells(self.mesh.n_triangles(), |t| {
            let geo = self.p1.geometry(t);
            let mut out = alloc::vec![T::default(); nq];
            for (q, (bary, _)) in self.quad.iter().enumerate() {
                out[q] = f(&QuadPoint {
                    cell: t,
                    q,
                    bary,
                    x: geo.point(bary),
                });
            }
            out
        });
        per_cell.into_iter().flatten().collect()
    }

    fn project(&self, u: &[Vec<f64>; 2], index: usize) -> Result<ProjectedVelocity, SchemeError> {
        let t = self.time(index);
        let manufactured = self.config.bc_mode == BcMode::ManufacturedDirichlet;
        let exact_trace = |x: [f64; 2]| self.exact().u(x, t);
        let zero_trace = |_: [f64; 2]| [0.0, 0.0];
        let boundary: &dyn Fn([f64; 2]) -> [f64; 2] = if manufactured { &exact_trace } else { &zero_trace };
        self.projector
            .project_mini(&self.mini, [&u[0], &u[1]], Some(boundary), index)
            .map_err(|source| SchemeError::Projection { step: index, source })
    }

    /// Nodal interpolation of the initial data, zero pressure.
    pub fn initialize_state(&self) -> Result<FieldState, SchemeError> {
        let pr = self.problem;
        let sigma = interpolate_nodal(&self.p1, &|x, _| pr.initial_sigma(x), 0.0).expect("P1 is nodal");
        if let Some((vertex, &value)) = sigma.iter().enumerate().find(|(_, &s)| !(s > 0.0)) {
            return Err(SchemeError::NonPositiveDensity { vertex, value });
        }
        let ux = interpolate_nodal(&self.mini, &|x, _| pr.initial_velocity(x)[0], 0.0).expect("mini is nodal");
        let uy = interpolate_nodal(&self.mini, &|x, _| pr.initial_velocity(x)[1], 0.0).expect("mini is nodal");
        let theta = interpolate_nodal(&self.p1, &|x, _| pr.initial_theta(x), 0.0).expect("P1 is nodal");
        let u = [ux, uy];
        let projected_u = self.project(&u, 0)?;
        let sigma_min = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(FieldState {
            sigma,
            u,
            p: alloc::vec![0.0; self.p1.n_dofs()],
            theta,
            time_index: 0,
            projected_u,
            sigma_min,
            positivity_lost: false,
        })
    }

    /// The density system of the step leaving `state`.
    pub fn density_system(&self, state: &FieldState) -> LinearSystem {
        let tau = self.tau;
        let w = &state.projected_u;
        let inv_tau = |_: &QuadPoint| 1.0 / tau;
        let conv = |p: &QuadPoint| w.eval(p.cell, p.bary);
        let form = Form::new(&[Term::Mass, Term::Convection]).mass(&inv_tau).convection(&conv);
        let matrix = assemble_bilinear(&self.p1, &self.p1, &form, &self.quad).expect("density form");
        let t1 = self.time(state.time_index + 1);
        let sigma_old = |p: &QuadPoint| self.p1.eval_scalar(&state.sigma, p.cell, p.bary).0 / tau;
        let mut rhs = assemble_linear(&self.p1, LinearTerm::Scalar(&sigma_old), &self.quad).expect("load");
        if let Some(src) = self.sources() {
            let g2 = |p: &QuadPoint| src.g2(p.x, t1);
            let load = assemble_linear(&self.p1, LinearTerm::Scalar(&g2), &self.quad).expect("load");
            rhs.iter_mut().zip(&load).for_each(|(r, l)| *r += l);
        }
        LinearSystem::new(matrix, rhs)
    }

    pub fn step_density(&mut self, state: &FieldState) -> Result<Vec<f64>, SchemeError> {
        let system = self.density_system(state);
        self.density_solver.solve(&system).map_err(|source| SchemeError::Solve {
            step: state.time_index + 1,
            stage: "density",
            source,
        })
    }

    fn transport_table(&self, state: &FieldState, sigma_new: &[f64]) -> Vec<Transport> {
        self.sample(|p| {
            let (s_new, g_new) = self.p1.eval_scalar(sigma_new, p.cell, p.bary);
            let (s_old, _) = self.p1.eval_scalar(&state.sigma, p.cell, p.bary);
            let (bx, gx) = self.mini.eval_scalar(&state.u[0], p.cell, p.bary);
            let (by, gy) = self.mini.eval_scalar(&state.u[1], p.cell, p.bary);
            Transport {
                sigma_new: s_new,
                grad_sigma_new: g_new,
                sigma_old: s_old,
                b: [bx, by],
                div_b: gx[0] + gy[1],
            }
        })
    }

    /// `rho/tau` mass, skew-symmetrizing reaction, `rho b` convection and
    /// diffusion with coefficient `nu` on `space`.
    fn transport_matrix(&self, space: &FeSpace, table: &[Transport], nu: f64) -> CsrMatrix {
        let nq = self.quad.len();
        let tau = self.tau;
        let at = |p: &QuadPoint| &table[p.cell * nq + p.q];
        let mass = |p: &QuadPoint| at(p).rho() / tau;
        let react = |p: &QuadPoint| 0.5 * at(p).div_rho_b();
        let conv = |p: &QuadPoint| {
            let c = at(p);
            [c.rho() * c.b[0], c.rho() * c.b[1]]
        };
        let diff = |_: &QuadPoint| nu;
        let form = Form::new(&[Term::Mass, Term::WeightedDivReaction, Term::Convection, Term::Stiffness])
            .mass(&mass)
            .reaction(&react)
            .convection(&conv)
            .stiffness(&diff);
        assemble_bilinear(space, space, &form, &self.quad).expect("transport form")
    }

    /// Dirichlet values at boundary vertices at time `t`.
    fn boundary_values(&self, t: f64, f: impl Fn(&dyn ExactSolution<2>, [f64; 2], f64) -> f64) -> Vec<(usize, f64)> {
        let verts = self.mesh.vertices();
        self.boundary_vertices
            .iter()
            .map(|&v| {
                let value = match self.config.bc_mode {
                    BcMode::Homogeneous => 0.0,
                    BcMode::ManufacturedDirichlet => f(self.exact(), verts[v], t),
                };
                (v, value)
            })
            .collect()
    }

    /// The velocity-pressure system of the step leaving `state`, unknowns
    /// ordered `[u_x, u_y, p]`.
    pub fn momentum_system(&self, state: &FieldState, sigma_new: &[f64]) -> LinearSystem {
        let table = self.transport_table(state, sigma_new);
        let a = self.transport_matrix(&self.mini, &table, self.config.mu);
        let nm = self.mini.n_dofs();
        let np = self.p1.n_dofs();
        let size = 2 * nm + np;
        let matrix = CsrMatrix::from_blocks(
            size,
            size,
            &[
                (0, 0, &a),
                (nm, nm, &a),
                (0, 2 * nm, &self.div_blocks_t[0]),
                (nm, 2 * nm, &self.div_blocks_t[1]),
                (2 * nm, 0, &self.div_blocks[0]),
                (2 * nm, nm, &self.div_blocks[1]),
            ],
        );
        let nq = self.quad.len();
        let tau = self.tau;
        let t1 = self.time(state.time_index + 1);
        let mut rhs = alloc::vec![0.0; size];
        for c in 0..2 {
            let src = self.sources();
            let load = |p: &QuadPoint| {
                let k = &table[p.cell * nq + p.q];
                let u_old = if c == 0 { k.b[0] } else { k.b[1] };
                let f = src.map_or(0.0, |s| s.f(p.x, t1)[c]);
                f + k.sigma_new * k.sigma_old * u_old / tau
            };
            let v = assemble_linear(&self.mini, LinearTerm::Scalar(&load), &self.quad).expect("load");
            rhs[c * nm..(c + 1) * nm].copy_from_slice(&v);
        }
        let mut constrained = self.boundary_values(t1, |e, x, t| e.u(x, t)[0]);
        constrained.extend(
            self.boundary_values(t1, |e, x, t| e.u(x, t)[1])
                .into_iter()
                .map(|(d, v)| (d + nm, v)),
        );
        LinearSystem::new(matrix, rhs)
            .with_dirichlet(constrained)
            .with_mean_constraint(MeanConstraint {
                dofs: (2 * nm..size).collect(),
                weights: self.pressure_weights.clone(),
            })
    }

    pub fn step_momentum(
        &mut self,
        state: &FieldState,
        sigma_new: &[f64],
    ) -> Result<([Vec<f64>; 2], Vec<f64>), SchemeError> {
        let system = self.momentum_system(state, sigma_new);
        let x = self.momentum_solver.solve(&system).map_err(|source| SchemeError::Solve {
            step: state.time_index + 1,
            stage: "momentum",
            source,
        })?;
        let nm = self.mini.n_dofs();
        Ok(([x[..nm].to_vec(), x[nm..2 * nm].to_vec()], x[2 * nm..].to_vec()))
    }

    pub fn temperature_system(&self, state: &FieldState, sigma_new: &[f64]) -> LinearSystem {
        let table = self.transport_table(state, sigma_new);
        let matrix = self.transport_matrix(&self.p1, &table, self.config.kappa);
        let nq = self.quad.len();
        let tau = self.tau;
        let t1 = self.time(state.time_index + 1);
        let src = self.sources();
        let load = |p: &QuadPoint| {
            let k = &table[p.cell * nq + p.q];
            let theta_old = self.p1.eval_scalar(&state.theta, p.cell, p.bary).0;
            src.map_or(0.0, |s| s.g(p.x, t1)) + k.sigma_new * k.sigma_old * theta_old / tau
        };
        let rhs = assemble_linear(&self.p1, LinearTerm::Scalar(&load), &self.quad).expect("load");
        LinearSystem::new(matrix, rhs).with_dirichlet(self.boundary_values(t1, |e, x, t| e.theta(x, t)))
    }

    pub fn step_temperature(&mut self, state: &FieldState, sigma_new: &[f64]) -> Result<Vec<f64>, SchemeError> {
        let system = self.temperature_system(state, sigma_new);
        self.temperature_solver.solve(&system).map_err(|source| SchemeError::Solve {
            step: state.time_index + 1,
            stage: "temperature",
            source,
        })
    }

    /// One full step: density, then velocity and pressure, then temperature,
    /// then the projection of the new velocity for the next step.
    pub fn advance(&mut self, state: &FieldState) -> Result<FieldState, SchemeError> {
        let sigma = self.step_density(state)?;
        let (u, p) = self.step_momentum(state, &sigma)?;
        let theta = self.step_temperature(state, &sigma)?;
        let index = state.time_index + 1;
        let projected_u = self.project(&u, index)?;
        let min_now = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(FieldState {
            positivity_lost: state.positivity_lost || !(min_now > 0.0),
            sigma_min: min_now.min(state.sigma_min),
            sigma,
            u,
            p,
            theta,
            time_index: index,
            projected_u,
        })
    }

    /// Runs all steps, calling `observe` on the initial and every new state.
    pub fn run_with(&mut self, mut observe: impl FnMut(&FieldState)) -> Result<RunOutput, SchemeError> {
        let mut state = self.initialize_state()?;
        observe(&state);
        let mut energy = EnergyReport::new(diagnostics::state_energy(self, &state));
        for _ in 0..self.n_steps {
            let next = self.advance(&state)?;
            energy.push(diagnostics::step_energy(self, &state, &next));
            observe(&next);
            state = next;
        }
        let errors = self
            .problem
            .exact()
            .map(|exact| diagnostics::final_errors(self, &state, exact));
        Ok(RunOutput { state, energy, errors })
    }

    pub fn run(&mut self) -> Result<RunOutput, SchemeError> {
        self.run_with(|_| {})
    }
}

/// Builds a simulation for `problem` and runs it to the final time.
pub fn run_simulation(config: SimulationConfig, problem: &dyn Problem) -> Result<RunOutput, SchemeError> {
    Simulation::new(config, problem)?.run()
}
