//! Monolithic solves, the two-step fixed-stress splitting, and implicit
//! Euler time marching.

use std::collections::HashMap;

use crate::assembly::{assemble_loads, FieldState, LoadVectors, ProblemData, SaddleSystem};
use crate::error::{Error, Result};
use crate::params::SplitConfig;
use crate::spaces::Discretization;
use crate::sparse::{norm2, LinearSolveHandle};

/// A one-step system together with lazily built factorizations of the
/// monolithic matrix, the mechanics block and one flow block per β.
#[derive(Debug)]
pub struct StepSolver {
    pub system: SaddleSystem,
    mono: Option<LinearSolveHandle>,
    mech: Option<LinearSolveHandle>,
    flow: HashMap<u64, LinearSolveHandle>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Monolithic,
    Split(SplitConfig),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationStats {
    pub counts: Vec<usize>,
    pub converged: Vec<bool>,
    pub beta: f64,
}

impl IterationStats {
    pub fn average(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.counts.iter().sum::<usize>() as f64 / self.counts.len() as f64
    }
}

/// Relative update `‖new − old‖ / (‖old‖ + ε₀)` of a group of fields.
fn relative_update(new: &[&[f64]], old: &[&[f64]], eps0: f64) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (n, o) in new.iter().zip(old) {
        for (a, b) in n.iter().zip(o.iter()) {
            diff += (a - b) * (a - b);
            base += b * b;
        }
    }
    diff.sqrt() / (base.sqrt() + eps0)
}

impl StepSolver {
    pub fn new(system: SaddleSystem) -> StepSolver {
        StepSolver {
            system,
            mono: None,
            mech: None,
            flow: HashMap::new(),
        }
    }

    fn mono_handle(&mut self) -> Result<&LinearSolveHandle> {
        if self.mono.is_none() {
            self.mono = Some(LinearSolveHandle::factorize(&self.system.monolithic_matrix(), "monolithic")?);
        }
        Ok(self.mono.as_ref().unwrap())
    }

    fn mech_handle(&mut self) -> Result<&LinearSolveHandle> {
        if self.mech.is_none() {
            self.mech = Some(LinearSolveHandle::factorize(&self.system.mech_matrix(), "mechanics")?);
        }
        Ok(self.mech.as_ref().unwrap())
    }

    fn flow_handle(&mut self, beta: f64) -> Result<&LinearSolveHandle> {
        let key = beta.to_bits();
        if !self.flow.contains_key(&key) {
            let h = LinearSolveHandle::factorize(&self.system.flow_matrix(beta), "flow")?;
            self.flow.insert(key, h);
        }
        Ok(&self.flow[&key])
    }

    /// Solves the full coupled system for one time step.
    pub fn solve_monolithic(&mut self, prev: &FieldState, loads: &LoadVectors, t: f64) -> Result<FieldState> {
        let rhs = self.system.assemble_rhs(prev, loads)?;
        let x = self.mono_handle()?.solve(&rhs)?;
        Ok(FieldState::from_vector(&self.system.layout, &x, t))
    }

    /// Step 1: flow solve with the stress lagged at `iterate`.
    pub fn split_flow_step(
        &mut self,
        prev: &FieldState,
        iterate: &FieldState,
        loads: &LoadVectors,
        beta: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let sys = &self.system;
        let np = sys.layout.sizes[2];
        let at = sys.alpha_tilde();
        let tr = sys.trace.matvec(&iterate.sigma);
        let mp = sys.mass_p.matvec(&iterate.p);
        let mut rhs: Vec<f64> = sys
            .pressure_rhs(prev, loads)
            .iter()
            .zip(tr.iter().zip(&mp))
            .map(|(r, (t, m))| r - at * t - beta * m)
            .collect();
        rhs.extend_from_slice(&loads.w_bc);
        for &d in &sys.essential_velocity {
            rhs[np + d] = 0.0;
        }
        let x = self.flow_handle(beta)?.solve(&rhs)?;
        Ok((x[..np].to_vec(), x[np..].to_vec()))
    }

    /// Step 2: mechanics solve driven by the new pressure.
    pub fn split_mech_step(&mut self, loads: &LoadVectors, p_new: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let sys = &self.system;
        let ns2 = sys.num_stress();
        let nu2 = sys.b_div.nrows;
        let at = sys.alpha_tilde();
        let tp = sys.trace.matvec_t(p_new);
        let mut rhs: Vec<f64> = loads.sigma_bc.iter().zip(&tp).map(|(b, t)| b - at * t).collect();
        for &d in &sys.essential_stress {
            rhs[d] = 0.0;
        }
        rhs.extend(loads.u_source.iter().map(|g| -g));
        rhs.extend(std::iter::repeat(0.0).take(sys.b_skw.nrows));
        let x = self.mech_handle()?.solve(&rhs)?;
        Ok((x[..ns2].to_vec(), x[ns2..ns2 + nu2].to_vec(), x[ns2 + nu2..].to_vec()))
    }

    /// Alternates Step 1 and Step 2 from `prev` until both the flow group
    /// `(w, p)` and the mechanics group `(σ, u, ξ)` change by at most `tol`
    /// relative. Returns the state and the number of iterations.
    pub fn run_split(
        &mut self,
        prev: &FieldState,
        loads: &LoadVectors,
        config: &SplitConfig,
        t: f64,
    ) -> Result<(FieldState, usize)> {
        self.run_split_observed(prev, loads, config, t, |_, _| {})
    }

    /// As [`run_split`](Self::run_split), calling `observe(i, iterate)`
    /// after every iteration.
    pub fn run_split_observed(
        &mut self,
        prev: &FieldState,
        loads: &LoadVectors,
        config: &SplitConfig,
        t: f64,
        mut observe: impl FnMut(usize, &FieldState),
    ) -> Result<(FieldState, usize)> {
        config.validate()?;
        let mut iterate = FieldState { t, ..prev.clone() };
        let (mut fu, mut mu) = (f64::INFINITY, f64::INFINITY);
        for i in 1..=config.max_iter {
            let (p, w) = self.split_flow_step(prev, &iterate, loads, config.beta)?;
            let (sigma, u, xi) = self.split_mech_step(loads, &p)?;
            let next = FieldState { t, sigma, p, w, u, xi };
            fu = relative_update(&[&next.w, &next.p], &[&iterate.w, &iterate.p], config.eps0);
            mu = relative_update(
                &[&next.sigma, &next.u, &next.xi],
                &[&iterate.sigma, &iterate.u, &iterate.xi],
                config.eps0,
            );
            if !(fu.is_finite() && mu.is_finite()) {
                return Err(Error::Numerical(format!("splitting diverged at iteration {i}")));
            }
            iterate = next;
            observe(i, &iterate);
            if fu <= config.tol && mu <= config.tol {
                return Ok((iterate, i));
            }
        }
        Err(Error::NonConvergence {
            iterations: config.max_iter,
            flow_update: fu,
            mech_update: mu,
        })
    }
}

/// Implicit Euler from `initial` over `n_steps` steps of the system's Δt.
/// `observe` sees every new state.
pub fn time_march(
    solver: &mut StepSolver,
    disc: &Discretization,
    data: &dyn ProblemData,
    initial: FieldState,
    n_steps: usize,
    scheme: Scheme,
    mut observe: impl FnMut(&FieldState),
) -> Result<(FieldState, IterationStats)> {
    let dt = solver.system.dt;
    let mut stats = IterationStats {
        beta: match scheme {
            Scheme::Split(c) => c.beta,
            Scheme::Monolithic => 0.0,
        },
        ..Default::default()
    };
    let mut state = initial;
    let t0 = state.t;
    for n in 1..=n_steps {
        let t = t0 + n as f64 * dt;
        let loads = assemble_loads(disc, data, t)?;
        state = match scheme {
            Scheme::Monolithic => solver.solve_monolithic(&state, &loads, t)?,
            Scheme::Split(cfg) => {
                let (s, it) = solver.run_split(&state, &loads, &cfg, t)?;
                stats.counts.push(it);
                stats.converged.push(true);
                s
            }
        };
        observe(&state);
    }
    Ok((state, stats))
}

/// Relative Euclidean distance `‖a − b‖ / ‖b‖` (absolute if `b = 0`).
pub fn relative_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&d)
    } else {
        norm2(&d) / nb
    }
}
