//! Mandel's problem on the quarter domain `[0, a] × [0, b]`: parameter
//! derivation, the analytical series solution, and the boundary setup for
//! the solver.

use std::io::{self, Write};

use crate::analysis::{sample_point, PointSample};
use crate::assembly::{assemble_system, EssentialSpec, FieldState, ProblemData};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::params::PhysicalParams;
use crate::solver::{time_march, IterationStats, Scheme, StepSolver};
use crate::spaces::Discretization;

pub const MILLIDARCY: f64 = 9.869233e-16;
pub const CENTIPOISE: f64 = 1e-3;
pub const MAX_TERMS: usize = 200;

/// Benchmark inputs in SI units (permeability in mD, viscosity in Pa·s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelInputs {
    pub a: f64,
    pub b: f64,
    pub young: f64,
    pub nu: f64,
    pub force: f64,
    pub alpha: f64,
    pub perm_md: f64,
    pub eta: f64,
    pub biot_modulus: f64,
}

impl Default for MandelInputs {
    fn default() -> MandelInputs {
        MandelInputs {
            a: 100.0,
            b: 10.0,
            young: 5.94e9,
            nu: 0.2,
            force: 6.0e8,
            alpha: 1.0,
            perm_md: 100.0,
            eta: 1.0 * CENTIPOISE,
            biot_modulus: 1.65e10,
        }
    }
}

impl MandelInputs {
    /// Scales Young's modulus and the applied force together.
    pub fn scaled(self, gamma3: f64) -> MandelInputs {
        MandelInputs {
            young: self.young * gamma3,
            force: self.force * gamma3,
            ..self
        }
    }
}

/// Stated derived values of the reference parameter set.
pub const TABLE_SKEMPTON: f64 = 0.83333;
pub const TABLE_NU_U: f64 = 0.44;
pub const TABLE_DIFFUSIVITY: f64 = 0.465;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelParams {
    pub inputs: MandelInputs,
    pub mu: f64,
    pub lambda: f64,
    /// Drained bulk modulus `E/(3(1−2ν))`.
    pub bulk: f64,
    /// Undrained bulk modulus `K + α²M`.
    pub bulk_undrained: f64,
    pub skempton: f64,
    pub nu_u: f64,
    pub diffusivity: f64,
    pub c0: f64,
    pub perm: f64,
    /// Mobility `k/η`.
    pub kappa: f64,
}

pub fn derive_mandel(inputs: MandelInputs) -> Result<MandelParams> {
    let MandelInputs { young: e, nu, alpha, biot_modulus: m, .. } = inputs;
    let positive = [inputs.a, inputs.b, e, inputs.force, alpha, inputs.perm_md, inputs.eta, m];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(0.0..0.5).contains(&nu) {
        return Err(Error::Config(format!("invalid Mandel inputs {inputs:?}")));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let bulk = e / (3.0 * (1.0 - 2.0 * nu));
    let bulk_undrained = bulk + alpha * alpha * m;
    let skempton = alpha * m / bulk_undrained;
    let nu_u = (3.0 * bulk_undrained - 2.0 * mu) / (2.0 * (3.0 * bulk_undrained + mu));
    let perm = inputs.perm_md * MILLIDARCY;
    let kappa = perm / inputs.eta;
    let diffusivity = kappa * m * (bulk + 4.0 * mu / 3.0) / (bulk_undrained + 4.0 * mu / 3.0);
    let p = MandelParams {
        inputs,
        mu,
        lambda,
        bulk,
        bulk_undrained,
        skempton,
        nu_u,
        diffusivity,
        c0: 1.0 / m,
        perm,
        kappa,
    };
    if !(nu < nu_u && nu_u < 0.5 && skempton > 0.0 && skempton <= 1.0 && diffusivity > 0.0) {
        return Err(Error::Config(format!(
            "inconsistent Mandel parameters: nu={nu}, nu_u={nu_u}, B={skempton}, c={diffusivity}"
        )));
    }
    Ok(p)
}

impl MandelParams {
    /// Checks the derived Skempton coefficient, undrained Poisson ratio and
    /// diffusivity against the stated reference values (1%).
    pub fn check_reference_values(&self) -> Result<()> {
        for (name, got, want) in [
            ("Skempton coefficient", self.skempton, TABLE_SKEMPTON),
            ("undrained Poisson ratio", self.nu_u, TABLE_NU_U),
            ("diffusivity", self.diffusivity, TABLE_DIFFUSIVITY),
        ] {
            if ((got - want) / want).abs() > 0.01 {
                return Err(Error::Config(format!("{name} {got} differs from {want} by more than 1%")));
            }
        }
        Ok(())
    }

    pub fn physical(&self) -> PhysicalParams {
        PhysicalParams {
            mu: self.mu,
            lambda: self.lambda,
            alpha: self.inputs.alpha,
            c0: self.c0,
            kappa: self.kappa,
        }
    }

    /// `F B (1+ν_u) / (3a)`
    pub fn initial_pressure(&self) -> f64 {
        let i = &self.inputs;
        i.force * self.skempton * (1.0 + self.nu_u) / (3.0 * i.a)
    }

    /// `(1−ν)/(ν_u−ν)`
    pub fn c_ratio(&self) -> f64 {
        (1.0 - self.inputs.nu) / (self.nu_u - self.inputs.nu)
    }

    /// Coupling strength `α²M/K`.
    pub fn coupling_strength(&self) -> f64 {
        self.inputs.alpha.powi(2) * self.inputs.biot_modulus / self.bulk
    }

    pub fn dimensionless_time(&self, t: f64) -> f64 {
        t * self.diffusivity / self.inputs.a.powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MandelRoots {
    pub c_ratio: f64,
    pub roots: Vec<f64>,
}

const ROOT_DELTA: f64 = 1e-9;

/// The first `n_terms` positive roots of `tan α = c α`, one in each
/// `(nπ, nπ + π/2)`, `n = 0, 1, …`, by bisection.
pub fn find_roots(c_ratio: f64, n_terms: usize) -> Result<MandelRoots> {
    if !(c_ratio > 1.0) || n_terms == 0 {
        return Err(Error::InvalidArgument(format!(
            "root finding needs c_ratio > 1 and n_terms ≥ 1, got {c_ratio}, {n_terms}"
        )));
    }
    // sin α − c α cos α has the same roots and is finite on the bracket
    let g = |x: f64| x.sin() - c_ratio * x * x.cos();
    let mut roots = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        let base = n as f64 * std::f64::consts::PI;
        let (mut lo, mut hi) = (base + ROOT_DELTA, base + std::f64::consts::FRAC_PI_2 - ROOT_DELTA);
        let (glo, ghi) = (g(lo), g(hi));
        if glo.signum() == ghi.signum() {
            return Err(Error::Numerical(format!("no sign change bracketing root {n}")));
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid).signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    Ok(MandelRoots { c_ratio, roots })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelFields {
    pub p: f64,
    pub u1: f64,
    pub u2: f64,
    pub sigma22: f64,
    /// Physical Darcy flux.
    pub w1: f64,
}

const SERIES_TOL: f64 = 1e-12;

/// Truncated sum: stops once the envelope of the remaining terms drops
/// below `SERIES_TOL (|sum| + 1)`. If all terms are used (only near
/// `t = 0`, where the series alternates with slowly decaying terms), the
/// last two partial sums are averaged.
fn series(roots: &[f64], mut term: impl FnMut(f64) -> (f64, f64)) -> f64 {
    let mut sum = 0.0;
    let mut last = 0.0;
    for &a in roots {
        let (value, envelope) = term(a);
        sum += value;
        last = value;
        if envelope < SERIES_TOL * (sum.abs() + 1.0) {
            return sum;
        }
    }
    sum - 0.5 * last
}

/// Closed-form Mandel solution at `(x, y, t)`; `σ₁₁ = σ₁₂ = 0`, `w₂ = 0`.
pub fn analytical_fields(params: &MandelParams, roots: &MandelRoots, x: f64, y: f64, t: f64) -> Result<MandelFields> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    let MandelInputs { a, force: f, nu, .. } = params.inputs;
    let (mu, nu_u, b, c) = (params.mu, params.nu_u, params.skempton, params.diffusivity);
    let r = &roots.roots;
    let decay = |an: f64| (-an * an * c * t / (a * a)).exp();
    let d = |an: f64| an - an.sin() * an.cos();

    let sp = series(r, |an| {
        let k = an.sin() / d(an) * decay(an);
        (k * ((an * x / a).cos() - an.cos()), 2.0 * k.abs())
    });
    let s_sc = series(r, |an| {
        let k = an.sin() * an.cos() / d(an) * decay(an);
        (k, k.abs())
    });
    let s_u1 = series(r, |an| {
        let k = an.cos() / d(an) * decay(an);
        (k * (an * x / a).sin(), k.abs())
    });
    let ratio = (nu_u - nu) / (1.0 - nu);
    let s_s22 = series(r, |an| {
        let k = an.sin() / d(an) * decay(an);
        (k * (ratio * (an * x / a).cos() - an.cos()), 2.0 * k.abs())
    });
    let s_w = series(r, |an| {
        let k = an * an.sin() / d(an) * decay(an);
        (k * (an * x / a).sin(), k.abs())
    });

    let p0 = f * b * (1.0 + nu_u) / (3.0 * a);
    Ok(MandelFields {
        p: 2.0 * p0 * sp,
        u1: (f * nu / (2.0 * mu * a) - f * nu_u / (mu * a) * s_sc) * x + f / mu * s_u1,
        u2: (-f * (1.0 - nu) / (2.0 * mu * a) + f * (1.0 - nu_u) / (mu * a) * s_sc) * y,
        sigma22: -f / a - 2.0 * f / a * s_s22,
        w1: 2.0 * p0 * params.kappa / a * s_w,
    })
}

/// Essential normal traces: flux on the impermeable sides, `σ₁₂ = 0` on
/// top and bottom, `σ₂₁ = 0` on the symmetry axis, traction-free right
/// side.
pub fn mandel_essential() -> EssentialSpec {
    EssentialSpec {
        stress_row1: vec![BoundaryTag::Top, BoundaryTag::Bottom, BoundaryTag::Right],
        stress_row2: vec![BoundaryTag::Left, BoundaryTag::Right],
        velocity: vec![BoundaryTag::Left, BoundaryTag::Bottom, BoundaryTag::Top],
    }
}

/// Natural data: the top plate moves with the analytical `u₂(b, t)`; all
/// other natural data (`u·n` on the symmetry axes, `p` on the drained side)
/// vanish.
#[derive(Debug, Clone)]
pub struct MandelProblem {
    pub params: MandelParams,
    pub roots: MandelRoots,
}

impl MandelProblem {
    pub fn new(params: MandelParams) -> Result<MandelProblem> {
        let roots = find_roots(params.c_ratio(), MAX_TERMS)?;
        Ok(MandelProblem { params, roots })
    }

    pub fn from_gamma3(gamma3: f64) -> Result<MandelProblem> {
        MandelProblem::new(derive_mandel(MandelInputs::default().scaled(gamma3))?)
    }

    pub fn exact(&self, x: f64, y: f64, t: f64) -> Result<MandelFields> {
        analytical_fields(&self.params, &self.roots, x, y, t)
    }

    /// Undrained state: uniform `p₀` and `σ = −(F/a) e₂⊗e₂`; other fields
    /// do not enter the first step.
    pub fn initial_state(&self, disc: &Discretization) -> FieldState {
        let mut s = FieldState::zeros(&disc.layout(), 0.0);
        let p0 = self.params.initial_pressure();
        s.p = disc.pressure.interpolate_scalar(&disc.mesh, |_| p0);
        let s22 = -self.params.inputs.force / self.params.inputs.a;
        let ns = disc.stress.num_dofs;
        let row2 = disc.stress.interpolate_vector(&disc.mesh, |_| [0.0, s22]);
        s.sigma[ns..].copy_from_slice(&row2);
        s
    }
}

impl ProblemData for MandelProblem {
    fn boundary_displacement(&self, tag: BoundaryTag, x: [f64; 2], t: f64) -> Option<[f64; 2]> {
        (tag == BoundaryTag::Top).then(|| {
            let b = self.params.inputs.b;
            // the series cannot fail for t ≥ 0
            let u2 = self.exact(x[0], b, t).map_or(f64::NAN, |f| f.u2);
            [0.0, u2]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MandelConfig {
    pub gamma3: f64,
    pub k: usize,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
    /// Times at which profiles are sampled (matched to the nearest step).
    pub sample_times: Vec<f64>,
    /// Sample abscissae as fractions of `a`, on the line `y = b/2`.
    pub sample_x: Vec<f64>,
}

impl Default for MandelConfig {
    fn default() -> MandelConfig {
        MandelConfig {
            gamma3: 1.0,
            k: 1,
            nx: 40,
            ny: 40,
            dt: 10.0,
            n_steps: 5000,
            scheme: Scheme::Monolithic,
            sample_times: vec![100.0, 1000.0, 10000.0],
            sample_x: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub numeric: PointSample,
    pub exact: MandelFields,
}

#[derive(Debug)]
pub struct MandelRun {
    pub problem: MandelProblem,
    pub stats: IterationStats,
    pub samples: Vec<MandelSample>,
}

pub fn run_mandel(config: &MandelConfig) -> Result<MandelRun> {
    if config.dt <= 0.0 || config.nx == 0 || config.ny == 0 {
        return Err(Error::InvalidArgument("Mandel run needs dt > 0 and a nonempty grid".into()));
    }
    let problem = MandelProblem::from_gamma3(config.gamma3)?;
    let MandelInputs { a, b, .. } = problem.params.inputs;
    let disc = Discretization::new(Mesh::build_structured(config.nx, config.ny, a, b)?, config.k)?;
    let system = assemble_system(&disc, &problem.params.physical(), config.dt, &mandel_essential())?;
    let mut solver = StepSolver::new(system);
    let sample_steps: Vec<usize> = config
        .sample_times
        .iter()
        .map(|t| (t / config.dt).round() as usize)
        .collect();
    let mut samples = Vec::new();
    let mut step = 0usize;
    let mut failure = None;
    let initial = problem.initial_state(&disc);
    let (_, stats) = time_march(&mut solver, &disc, &problem, initial, config.n_steps, config.scheme, |s| {
        step += 1;
        if !sample_steps.contains(&step) {
            return;
        }
        for &xa in &config.sample_x {
            let (x, y) = (xa * a, 0.5 * b);
            let numeric = sample_point(&disc, s, config.dt, [x, y]);
            match (numeric, problem.exact(x, y, s.t)) {
                (Some(numeric), Ok(exact)) => samples.push(MandelSample { t: s.t, x, y, numeric, exact }),
                (None, _) => failure = Some(Error::InvalidArgument(format!("sample point ({x}, {y}) outside the domain"))),
                (_, Err(e)) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MandelRun { problem, stats, samples })
}

/// Profile CSV: raw SI values, followed by `p/p₀`, `x/a` and `c t/a²`.
pub fn write_mandel_csv(w: &mut impl Write, params: &MandelParams, samples: &[MandelSample]) -> io::Result<()> {
    writeln!(
        w,
        "t,x,y,p,u1,u2,sigma22,w1,p_analytical,u1_analytical,u2_analytical,sigma22_analytical,w1_analytical,p_over_p0,x_over_a,t_dimensionless"
    )?;
    let p0 = params.initial_pressure();
    for s in samples {
        let (n, e) = (&s.numeric, &s.exact);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            s.x,
            s.y,
            n.p,
            n.u[0],
            n.u[1],
            n.sigma[1][1],
            n.flux[0],
            e.p,
            e.u1,
            e.u2,
            e.sigma22,
            e.w1,
            n.p / p0,
            s.x / params.inputs.a,
            params.dimensionless_time(s.t)
        )?;
    }
    Ok(())
}
