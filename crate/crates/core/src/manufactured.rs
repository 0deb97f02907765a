//! Polynomial manufactured solution on the unit square:
//! `u = t(φ, φ)`, `p = tφ` with `φ = x(1−x)y(1−y)`.
//!
//! Every field vanishes on the boundary, so all boundary conditions are
//! natural with zero data.

use crate::analysis::{error_norms, ErrorReport};
use crate::assembly::{assemble_system, EssentialSpec, FieldState, ProblemData};
use crate::error::Result;
use crate::mesh::{BoundaryTag, Mesh};
use crate::params::PhysicalParams;
use crate::solver::{time_march, IterationStats, Scheme, StepSolver};
use crate::spaces::{Discretization, SpaceLayout};

/// Closed-form fields used for error measurement.
pub trait ExactSolution {
    fn pressure(&self, x: [f64; 2], t: f64) -> f64;
    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// Rows of the total stress.
    fn stress(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
    /// Row-wise divergence of the stress.
    fn stress_div(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// Physical Darcy flux `ŵ`.
    fn flux(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn flux_div(&self, x: [f64; 2], t: f64) -> f64;
    fn rotation(&self, x: [f64; 2], t: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    pub params: PhysicalParams,
}

/// φ and its derivatives: `[φ, φx, φy, φxx, φyy, φxy]`.
fn phi(x: [f64; 2]) -> [f64; 6] {
    let (a, b) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
    let (da, db) = (1.0 - 2.0 * x[0], 1.0 - 2.0 * x[1]);
    [a * b, da * b, a * db, -2.0 * b, -2.0 * a, da * db]
}

impl ManufacturedProblem {
    pub fn new(params: PhysicalParams) -> ManufacturedProblem {
        ManufacturedProblem { params }
    }

    pub fn from_gammas(gamma1: f64, gamma2: f64) -> ManufacturedProblem {
        ManufacturedProblem::new(PhysicalParams::from_gammas(gamma1, gamma2))
    }

    pub fn essential(&self) -> EssentialSpec {
        EssentialSpec::default()
    }

    pub fn initial_state(&self, layout: &SpaceLayout) -> FieldState {
        FieldState::zeros(layout, 0.0)
    }
}

impl ExactSolution for ManufacturedProblem {
    fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        t * phi(x)[0]
    }

    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let p = t * phi(x)[0];
        [p, p]
    }

    fn stress(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let PhysicalParams { mu, lambda, alpha, .. } = self.params;
        let [f, fx, fy, ..] = phi(x);
        let div = fx + fy;
        let s12 = mu * t * div;
        [
            [t * (2.0 * mu * fx + lambda * div - alpha * f), s12],
            [s12, t * (2.0 * mu * fy + lambda * div - alpha * f)],
        ]
    }

    fn stress_div(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let PhysicalParams { mu, lambda, alpha, .. } = self.params;
        let [_, fx, fy, fxx, fyy, fxy] = phi(x);
        [
            t * (2.0 * mu * fxx + lambda * (fxx + fxy) - alpha * fx + mu * (fxy + fyy)),
            t * (mu * (fxx + fxy) + 2.0 * mu * fyy + lambda * (fxy + fyy) - alpha * fy),
        ]
    }

    fn flux(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let [_, fx, fy, ..] = phi(x);
        let k = self.params.kappa;
        [-k * t * fx, -k * t * fy]
    }

    fn flux_div(&self, x: [f64; 2], t: f64) -> f64 {
        let [_, _, _, fxx, fyy, _] = phi(x);
        -self.params.kappa * t * (fxx + fyy)
    }

    /// `½(∂x u₂ − ∂y u₁)`
    fn rotation(&self, x: [f64; 2], t: f64) -> f64 {
        let [_, fx, fy, ..] = phi(x);
        0.5 * t * (fx - fy)
    }
}

impl ProblemData for ManufacturedProblem {
    /// `∂t(c0 p + α div u) + div ŵ`
    fn source(&self, x: [f64; 2], t: f64) -> f64 {
        let PhysicalParams { alpha, c0, kappa, .. } = self.params;
        let [f, fx, fy, fxx, fyy, _] = phi(x);
        c0 * f + alpha * (fx + fy) - kappa * t * (fxx + fyy)
    }

    /// `−div σ`
    fn body_force(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let d = self.stress_div(x, t);
        [-d[0], -d[1]]
    }

    fn boundary_displacement(&self, _tag: BoundaryTag, _x: [f64; 2], _t: f64) -> Option<[f64; 2]> {
        None
    }

    fn boundary_pressure(&self, _tag: BoundaryTag, _x: [f64; 2], _t: f64) -> Option<f64> {
        None
    }
}

/// Result of a manufactured-solution run on the unit square.
#[derive(Debug)]
pub struct ManufacturedRun {
    pub disc: Discretization,
    pub state: FieldState,
    pub stats: IterationStats,
    pub report: ErrorReport,
}

/// Marches `n_steps` steps of size `dt` from zero on an `n × n` mesh and
/// measures the errors at the final time.
pub fn run_manufactured(
    problem: &ManufacturedProblem,
    n: usize,
    k: usize,
    dt: f64,
    n_steps: usize,
    scheme: Scheme,
) -> Result<ManufacturedRun> {
    let disc = Discretization::new(Mesh::build_structured(n, n, 1.0, 1.0)?, k)?;
    let system = assemble_system(&disc, &problem.params, dt, &problem.essential())?;
    let mut solver = StepSolver::new(system);
    let initial = problem.initial_state(&disc.layout());
    let (state, stats) = time_march(&mut solver, &disc, problem, initial, n_steps, scheme, |_| {})?;
    let report = error_norms(&disc, &state, problem, state.t, dt)?;
    Ok(ManufacturedRun { disc, state, stats, report })
}
