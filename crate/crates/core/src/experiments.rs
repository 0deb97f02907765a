//! Iteration-count sweeps over the parameter scalings.

use std::io::{self, Write};

use crate::error::Result;
use crate::mandel::{derive_mandel, run_mandel, MandelConfig, MandelInputs};
use crate::manufactured::{run_manufactured, ManufacturedProblem};
use crate::params::{beta_value, BetaStrategy, SplitConfig};
use crate::solver::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Gamma1,
    Gamma2,
    Gamma3,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Gamma1 => "gamma1",
            SweepKind::Gamma2 => "gamma2",
            SweepKind::Gamma3 => "gamma3",
        }
    }

    /// Scalings of the reference iteration tables.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepKind::Gamma1 => vec![10.0, 1.0, 0.1, 0.01, 0.001],
            SweepKind::Gamma2 => vec![1e4, 1e3, 100.0, 10.0, 1.0, 0.1, 0.01],
            SweepKind::Gamma3 => vec![100.0, 10.0, 1.0, 0.1, 0.01, 0.001],
        }
    }

    pub fn default_strategies(self) -> Vec<BetaStrategy> {
        match self {
            SweepKind::Gamma3 => vec![BetaStrategy::Off, BetaStrategy::Tuned, BetaStrategy::OneD],
            _ => vec![BetaStrategy::Off, BetaStrategy::Tuned],
        }
    }
}

/// One sweep job.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub kind: SweepKind,
    pub gamma: f64,
    pub k: usize,
    pub strategy: BetaStrategy,
    /// Mesh resolution of the manufactured runs (`n × n`).
    pub n: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl SweepPoint {
    /// Reference settings: `N = 16`, `Δt = 1/4`, four steps for the
    /// manufactured scalings; the Mandel grid with `Δt = 10` and ten steps
    /// for `γ₃`.
    pub fn new(kind: SweepKind, gamma: f64, k: usize, strategy: BetaStrategy) -> SweepPoint {
        let (n, dt, n_steps) = match kind {
            SweepKind::Gamma3 => (40, 10.0, 10),
            _ => (16, 0.25, 4),
        };
        SweepPoint {
            kind,
            gamma,
            k,
            strategy,
            n,
            dt,
            n_steps,
            tol: SplitConfig::default().tol,
            max_iter: SplitConfig::default().max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub beta: f64,
    pub coupling_strength: f64,
    pub poisson_ratio: f64,
    pub average: f64,
    pub counts: Vec<usize>,
}

pub fn run_sweep_point(point: &SweepPoint) -> Result<SweepRow> {
    let split = |beta: f64| SplitConfig {
        beta,
        tol: point.tol,
        max_iter: point.max_iter,
        ..SplitConfig::default()
    };
    match point.kind {
        SweepKind::Gamma1 | SweepKind::Gamma2 => {
            let (g1, g2) = match point.kind {
                SweepKind::Gamma1 => (point.gamma, 1.0),
                _ => (1.0, point.gamma),
            };
            let problem = ManufacturedProblem::from_gammas(g1, g2);
            let p = problem.params;
            let beta = beta_value(point.strategy, &p);
            let run = run_manufactured(&problem, point.n, point.k, point.dt, point.n_steps, Scheme::Split(split(beta)))?;
            Ok(SweepRow {
                point: point.clone(),
                beta,
                coupling_strength: p.coupling_strength()?,
                poisson_ratio: p.lambda / (2.0 * (p.lambda + p.mu)),
                average: run.stats.average(),
                counts: run.stats.counts,
            })
        }
        SweepKind::Gamma3 => {
            let mp = derive_mandel(MandelInputs::default().scaled(point.gamma))?;
            let beta = beta_value(point.strategy, &mp.physical());
            let config = MandelConfig {
                gamma3: point.gamma,
                k: point.k,
                nx: point.n,
                ny: point.n,
                dt: point.dt,
                n_steps: point.n_steps,
                scheme: Scheme::Split(split(beta)),
                sample_times: Vec::new(),
                ..MandelConfig::default()
            };
            let run = run_mandel(&config)?;
            Ok(SweepRow {
                point: point.clone(),
                beta,
                coupling_strength: mp.coupling_strength(),
                poisson_ratio: mp.inputs.nu,
                average: run.stats.average(),
                counts: run.stats.counts,
            })
        }
    }
}

pub fn write_iterations_csv(w: &mut impl Write, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "sweep,gamma,k,strategy,beta,coupling_strength,poisson_ratio,average_iterations,steps")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.point.kind.name(),
            r.point.gamma,
            r.point.k,
            r.point.strategy.name(),
            r.beta,
            r.coupling_strength,
            r.poisson_ratio,
            r.average,
            r.counts.len()
        )?;
    }
    Ok(())
}
